//! Block-DAG model that tracks every block since the last divergence.
//!
//! Selfish blocks form a chain `a`; each may also reference one honest block.
//! Honest blocks form the public chain `h`; each references the public
//! leaves, which may include the latest revealed selfish block. `Merge`
//! accepts the public DAG and settles rewards through the DAG rules.

use std::fmt;

use super::{
    explore, Action, ActionSpec, BuildLimits, BuiltModel, DifficultySource, Fork, KeyWriter,
    Ledger, ModelKind, ModelParams, Outcome, StateSpace, TieBreak,
};
use crate::dag::{
    acceptable_blocks, canonical_chain, destructed_blocks, uncontested_blocks, validate_references,
    BlockDag, BlockId, BlockSet, Creator,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Longest tracked chain the packed state supports.
pub const MAX_FULL_FORK: u32 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SelfishBlock {
    pub whale: bool,
    /// 1-based index of the referenced honest block, 0 for none.
    pub href: u8,
}

/// Which references an honest block carries, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HonestRefs {
    /// Previous honest block only.
    #[default]
    HonestOnly,
    /// Previous honest block, then a selfish block.
    HonestFirst,
    /// A selfish block, then the previous honest block.
    SelfishFirst,
    /// A selfish block only.
    SelfishOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct HonestBlock {
    pub whale: bool,
    /// 1-based index of the referenced selfish block, 0 for none.
    pub aref: u8,
    pub refs: HonestRefs,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FullState {
    pub a: Vec<SelfishBlock>,
    pub h: Vec<HonestBlock>,
    /// Number of published selfish blocks.
    pub revealed: u8,
    pub fork: Fork,
    pub pool: u32,
}

impl fmt::Display for FullState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a=[")?;
        for (i, b) in self.a.iter().enumerate() {
            let sep = if i == 0 { "" } else { "," };
            write!(f, "{sep}({},{})", u8::from(b.whale), b.href)?;
        }
        f.write_str("] h=[")?;
        for (i, b) in self.h.iter().enumerate() {
            let sep = if i == 0 { "" } else { "," };
            let mode = match b.refs {
                HonestRefs::HonestOnly => "",
                HonestRefs::HonestFirst => "+",
                HonestRefs::SelfishFirst => "^",
                HonestRefs::SelfishOnly => "!",
            };
            write!(f, "{sep}({},{}{mode})", u8::from(b.whale), b.aref)?;
        }
        write!(
            f,
            "] r={} fork={} pool={}",
            self.revealed, self.fork, self.pool
        )
    }
}

/// A state's blocks as an explicit DAG.
pub struct StateDag {
    pub dag: BlockDag,
    pub selfish: Vec<BlockId>,
    pub honest: Vec<BlockId>,
}

impl FullState {
    /// Builds the DAG of the public blocks, or of all blocks when
    /// `include_secret` is set.
    pub fn to_dag(&self, include_secret: bool) -> StateDag {
        let na = if include_secret {
            self.a.len()
        } else {
            usize::from(self.revealed)
        };
        let mut dag = BlockDag::new("G");
        let root = dag.root();
        let mut selfish: Vec<BlockId> = Vec::with_capacity(na);
        let mut honest: Vec<BlockId> = Vec::with_capacity(self.h.len());
        while selfish.len() < na || honest.len() < self.h.len() {
            let i = selfish.len();
            if i < na && usize::from(self.a[i].href) <= honest.len() {
                let b = self.a[i];
                let mut parents = vec![if i == 0 { root } else { selfish[i - 1] }];
                if b.href > 0 {
                    parents.push(honest[usize::from(b.href) - 1]);
                }
                let id = dag
                    .add_block(format!("A{}", i + 1), Creator::Selfish, b.whale, parents)
                    .expect("selfish references were validated when mined");
                selfish.push(id);
                continue;
            }
            let j = honest.len();
            assert!(
                j < self.h.len() && usize::from(self.h[j].aref) <= selfish.len(),
                "cyclic references in {self}"
            );
            let b = self.h[j];
            let prev = if j == 0 { root } else { honest[j - 1] };
            let sel = || selfish[usize::from(b.aref) - 1];
            let parents = match b.refs {
                HonestRefs::HonestOnly => vec![prev],
                HonestRefs::HonestFirst => vec![prev, sel()],
                HonestRefs::SelfishFirst => vec![sel(), prev],
                HonestRefs::SelfishOnly => vec![sel()],
            };
            let id = dag
                .add_block(format!("H{}", j + 1), Creator::Honest, b.whale, parents)
                .expect("honest blocks reference public leaves");
            honest.push(id);
        }
        StateDag {
            dag,
            selfish,
            honest,
        }
    }
}

fn ancestor_whales(dag: &BlockDag, refs: &[BlockId]) -> u32 {
    let mut seen = vec![false; dag.len()];
    let mut stack: Vec<BlockId> = refs.to_vec();
    let mut whales = 0;
    while let Some(b) = stack.pop() {
        if std::mem::replace(&mut seen[b], true) {
            continue;
        }
        whales += u32::from(dag.block(b).whale);
        stack.extend(dag.block(b).parents.iter().copied());
    }
    whales
}

pub(crate) struct FullSpace<T> {
    p: ModelParams<T>,
}

impl<T: Scalar> FullSpace<T> {
    pub(crate) fn new(p: ModelParams<T>) -> Self {
        Self { p }
    }

    /// Probability that honest miners side with the selfish block when a
    /// selfish and an honest block of equal height compete.
    fn selfish_tie_share(&self, fork: Fork) -> T {
        match self.p.tie_break {
            TieBreak::FirstHeard if fork == Fork::Relevant => self.p.gamma,
            TieBreak::FirstHeard => T::zero(),
            TieBreak::Random => T::lit(0.5),
            TieBreak::WorstCase => T::one(),
        }
    }

    fn selfish_block(&self, s: &FullState, l: u32) -> Option<FullState> {
        let full = s.to_dag(true);
        let tip = full.selfish.last().copied().unwrap_or(full.dag.root());
        let mut refs = vec![tip];
        if l > 0 {
            refs.push(full.honest[l as usize - 1]);
            if !validate_references(&full.dag, &refs).expect("known blocks") {
                return None;
            }
        }
        let whale = ancestor_whales(&full.dag, &refs) < s.pool;
        let mut next = s.clone();
        next.a.push(SelfishBlock {
            whale,
            href: l as u8,
        });
        next.fork = Fork::Irrelevant;
        Some(next)
    }

    /// Honest block on the public leaves; one or two outcomes with their weight.
    fn honest_blocks(&self, s: &FullState) -> Vec<(T, FullState)> {
        let r = s.revealed;
        let nh = s.h.len() as u8;
        let honest_leaf = if nh > 0 {
            !s.a[..usize::from(r)].iter().any(|b| b.href == nh)
        } else {
            r == 0
        };
        let selfish_leaf = r > 0 && !s.h.iter().any(|b| b.aref == r);
        let public_whales = s.h.iter().filter(|b| b.whale).count() as u32
            + s.a[..usize::from(r)].iter().filter(|b| b.whale).count() as u32;
        let whale = public_whales < s.pool;
        let push = |refs: HonestRefs| {
            let mut next = s.clone();
            let aref = if refs == HonestRefs::HonestOnly { 0 } else { r };
            next.h.push(HonestBlock { whale, aref, refs });
            next.fork = Fork::Relevant;
            next
        };
        match (honest_leaf, selfish_leaf) {
            (true, false) => vec![(T::one(), push(HonestRefs::HonestOnly))],
            (false, true) => vec![(T::one(), push(HonestRefs::SelfishOnly))],
            (true, true) => {
                let public = s.to_dag(false);
                let hh = public.honest.last().map_or(0, |&b| public.dag.height(b));
                let ha = public.dag.height(public.selfish[usize::from(r) - 1]);
                let share = if ha > hh {
                    T::one()
                } else if ha < hh {
                    T::zero()
                } else {
                    self.selfish_tie_share(s.fork)
                };
                vec![
                    (share, push(HonestRefs::SelfishFirst)),
                    (T::one() - share, push(HonestRefs::HonestFirst)),
                ]
            }
            (false, false) => unreachable!("a non-empty DAG has a leaf"),
        }
    }

    fn mine(&self, s: &FullState, l: u32) -> Option<Vec<Outcome<T, FullState>>> {
        let selfish = self.selfish_block(s, l)?;
        let (zero, alpha) = (T::zero(), self.p.alpha);
        let mut out = vec![Outcome::new(alpha, zero, zero, selfish)];
        for (w, next) in self.honest_blocks(s) {
            out.push(Outcome::new((T::one() - alpha) * w, zero, zero, next));
        }
        Some(out)
    }

    /// Settles the public DAG. Each outcome corresponds to one resolution of
    /// a tie between maximum-height tips.
    fn merge(&self, s: &FullState) -> Vec<Outcome<T, FullState>> {
        let public = s.to_dag(false);
        let dag = &public.dag;
        let top = dag.max_height();
        let tips: Vec<BlockId> = (0..dag.len()).filter(|&b| dag.height(b) == top).collect();
        let choices: Vec<(T, BlockId)> = match tips.as_slice() {
            [only] => vec![(T::one(), *only)],
            [x, y] => {
                let (sel, hon) = if dag.block(*x).creator == Creator::Selfish {
                    (*x, *y)
                } else {
                    (*y, *x)
                };
                let share = self.selfish_tie_share(s.fork);
                vec![(share, sel), (T::one() - share, hon)]
            }
            _ => unreachable!("public DAG has at most two leaves"),
        };
        choices
            .into_iter()
            .filter(|&(prob, _)| prob > T::zero())
            .map(|(prob, tip)| {
                let (reward, difficulty, confirmed_whales) = self.settle(dag, tip);
                let next = FullState {
                    pool: s.pool - confirmed_whales,
                    ..FullState::default()
                };
                Outcome::new(prob, reward, difficulty, next)
            })
            .collect()
    }

    fn settle(&self, dag: &BlockDag, tip: BlockId) -> (T, T, u32) {
        let chain = canonical_chain(dag, |_, c| if c.contains(&tip) { tip } else { c[0] });
        let acceptable = acceptable_blocks(dag, &chain, self.p.fork_sensitivity);
        let uncontested = uncontested_blocks(dag, &acceptable);
        let destructed = match self.p.ledger {
            Ledger::Mad => destructed_blocks(dag, &chain),
            Ledger::Canonical => BlockSet::new(),
        };
        let mut subsidy = 0u32;
        let mut fee_blocks = 0u32;
        let mut fee_whales = 0u32;
        let mut uncontested_count = 0u32;
        let mut confirmed_whales = 0u32;
        for &b in chain.blocks.iter().skip(1) {
            let block = dag.block(b);
            let in_ledger = !destructed.contains(&b);
            let free = uncontested.contains(&b);
            uncontested_count += u32::from(free);
            if in_ledger && block.whale {
                confirmed_whales += 1;
            }
            if block.creator == Creator::Selfish {
                subsidy += u32::from(free);
                if in_ledger {
                    fee_blocks += 1;
                    fee_whales += u32::from(block.whale);
                }
            }
        }
        let n = |x: u32| T::from_usize_lossy(x as usize);
        let reward =
            n(subsidy) + n(fee_blocks) * self.p.guaranteed_fee + n(fee_whales) * self.p.whale_fee;
        let difficulty = match self.p.difficulty_source {
            DifficultySource::Uncontested => n(uncontested_count),
            DifficultySource::Canonical => n(chain.len() as u32 - 1),
        };
        (reward, difficulty, confirmed_whales)
    }
}

impl<T: Scalar> StateSpace<T> for FullSpace<T> {
    type State = FullState;

    fn initial(&self) -> FullState {
        FullState::default()
    }

    fn pack(&self, s: &FullState) -> u128 {
        let mut w = KeyWriter::default();
        w.put(u64::from(s.pool), 8);
        w.put(s.a.len() as u64, 3);
        for b in &s.a {
            w.put(u64::from(b.whale), 1).put(u64::from(b.href), 3);
        }
        w.put(s.h.len() as u64, 3);
        for b in &s.h {
            let mode = b.refs as u64;
            w.put(u64::from(b.whale), 1)
                .put(u64::from(b.aref), 3)
                .put(mode, 2);
        }
        w.put(u64::from(s.revealed), 3).put(s.fork.code(), 2);
        // Left-align so keys of different lengths still sort lexicographically.
        let used = 8 + 3 + 4 * s.a.len() as u32 + 3 + 6 * s.h.len() as u32 + 5;
        w.finish() << (128 - used)
    }

    fn unpack(&self, key: u128) -> FullState {
        let mut bits = key;
        let mut take = |width: u32| {
            let v = (bits >> (128 - width)) as u64;
            bits <<= width;
            v
        };
        let pool = take(8) as u32;
        let na = take(3) as usize;
        let a = (0..na)
            .map(|_| SelfishBlock {
                whale: take(1) == 1,
                href: take(3) as u8,
            })
            .collect();
        let nh = take(3) as usize;
        let h = (0..nh)
            .map(|_| HonestBlock {
                whale: take(1) == 1,
                aref: take(3) as u8,
                refs: match take(2) {
                    0 => HonestRefs::HonestOnly,
                    1 => HonestRefs::HonestFirst,
                    2 => HonestRefs::SelfishFirst,
                    _ => HonestRefs::SelfishOnly,
                },
            })
            .collect();
        let revealed = take(3) as u8;
        let fork = Fork::from_code(take(2));
        FullState {
            a,
            h,
            revealed,
            fork,
            pool,
        }
    }

    fn canonicalize(&self, mut s: FullState) -> Option<FullState> {
        if s.pool > self.p.max_pool {
            return None;
        }
        if !self.p.tie_needs_rushing() {
            s.fork = Fork::Irrelevant;
        }
        Some(s)
    }

    fn with_arrival(&self, s: &FullState) -> Option<FullState> {
        (s.pool < self.p.max_pool).then(|| FullState {
            pool: s.pool + 1,
            ..s.clone()
        })
    }

    fn actions(&self, s: &FullState) -> Vec<ActionSpec<T, FullState>> {
        let mut out = Vec::new();
        let (na, nh) = (s.a.len() as u32, s.h.len() as u32);
        for l in u32::from(s.revealed) + 1..=na {
            let mut next = s.clone();
            next.revealed = l as u8;
            out.push(ActionSpec {
                action: Action::Reveal(l),
                creates_block: false,
                outcomes: vec![Outcome::new(T::one(), T::zero(), T::zero(), next)],
            });
        }
        if nh > 0 || s.revealed > 0 {
            out.push(ActionSpec {
                action: Action::Merge,
                creates_block: false,
                outcomes: self.merge(s),
            });
        }
        if na < self.p.max_fork && nh < self.p.max_fork {
            for l in 0..=nh {
                if let Some(outcomes) = self.mine(s, l) {
                    out.push(ActionSpec {
                        action: Action::Mine(l),
                        creates_block: true,
                        outcomes,
                    });
                }
            }
        }
        out
    }

    fn honest_action(&self, s: &FullState) -> Action {
        if usize::from(s.revealed) < s.a.len() {
            Action::Reveal(s.a.len() as u32)
        } else if !s.h.is_empty() || s.revealed > 0 {
            Action::Merge
        } else {
            Action::Mine(0)
        }
    }

    fn delta(&self) -> T {
        self.p.delta
    }
}

/// Builds the full DAG model. The fork bound is capped at [`MAX_FULL_FORK`].
pub fn build_full_model<T: Scalar>(
    params: &ModelParams<T>,
    limits: BuildLimits,
) -> Result<BuiltModel<T>> {
    params.validate()?;
    if params.max_fork > MAX_FULL_FORK {
        return Err(Error::InvalidParams(format!(
            "the full model supports max fork up to {MAX_FULL_FORK}, got {}",
            params.max_fork
        )));
    }
    explore(&FullSpace::new(*params), ModelKind::Full, *params, limits)
}

/// Reward and difficulty of merging the public part of `state`, one entry per
/// tie resolution, with the probability of each.
pub fn merge_outcomes<T: Scalar>(params: &ModelParams<T>, state: &FullState) -> Vec<(T, T, T)> {
    FullSpace::new(*params)
        .merge(state)
        .into_iter()
        .map(|o| (o.prob, o.reward, o.difficulty))
        .collect()
}

/// Packed key of a full-model state.
pub fn full_state_key<T: Scalar>(params: &ModelParams<T>, state: &FullState) -> Option<u128> {
    let space = FullSpace::new(*params);
    space.canonicalize(state.clone()).map(|s| space.pack(&s))
}
