//! MDP builders for the selfish-mining models.
//!
//! Three models share one state-space explorer:
//!
//! * [`nc`]: Nakamoto consensus with whale transactions.
//! * [`full`]: the block-DAG model that tracks every block and its references
//!   since the last divergence, and settles through the DAG rules.
//! * [`upper_bound`]: a compressed DAG model whose modifications only help
//!   the selfish miner, so its optimal revenue bounds the full model's.
//!
//! States are packed into `u128` keys; the final MDP lists states in key
//! order, so builds are reproducible.

pub mod full;
pub mod nc;
pub mod upper_bound;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mdp::{Mdp, MdpBuilder, StateId, Transition};
use crate::scalar::Scalar;

/// Environment variable capping the memory spent on a model, in MiB.
pub const MEMORY_BUDGET_ENV: &str = "DAGMINE_MEMORY_BUDGET_MB";

/// Rough peak bytes per explored state (key table, transition lists, CSR copy).
const BYTES_PER_STATE: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TieBreak {
    FirstHeard,
    Random,
    WorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DifficultySource {
    Uncontested,
    Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ledger {
    Canonical,
    Mad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Nc,
    Full,
    UpperBound,
}

macro_rules! vocabulary {
    ($ty:ident { $($variant:ident => $name:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl $ty {
            /// Name used in configs, CSV files and on the command line.
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name $(| $alias)* => Ok($ty::$variant),)+
                    other => Err(Error::Schema(format!(
                        "unknown {} {other:?}; expected one of: {}",
                        stringify!($ty),
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

vocabulary!(TieBreak {
    FirstHeard => "first_heard",
    Random => "random",
    WorstCase => "attacker" | "worst_case",
});
vocabulary!(DifficultySource {
    Uncontested => "uncontested",
    Canonical => "main" | "canonical",
});
vocabulary!(Ledger {
    Canonical => "longest" | "canonical",
    Mad => "mad",
});
vocabulary!(ModelKind {
    Nc => "bitcoin_fee" | "nc",
    Full => "chain_colordag" | "full",
    UpperBound => "simplified_colordag" | "upper_bound",
});

/// Protocol, adversary and mode parameters shared by all models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Mining power of the selfish miner.
    pub alpha: T,
    /// Rushing factor; only used with first-heard tie-breaking.
    pub gamma: T,
    /// Whale arrival intensity per block.
    pub delta: T,
    /// Fee of one whale transaction, in subsidy units.
    pub whale_fee: T,
    /// Fee every block earns regardless of whales.
    pub guaranteed_fee: T,
    pub fork_sensitivity: u32,
    /// Longest tracked chain (selfish or public) since the last fork.
    pub max_fork: u32,
    pub max_pool: u32,
    pub tie_break: TieBreak,
    pub difficulty_source: DifficultySource,
    pub ledger: Ledger,
}

impl<T: Scalar> Default for ModelParams<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(0.25),
            gamma: T::lit(0.5),
            delta: T::zero(),
            whale_fee: T::zero(),
            guaranteed_fee: T::zero(),
            fork_sensitivity: 5,
            max_fork: 5,
            max_pool: 2,
            tie_break: TieBreak::FirstHeard,
            difficulty_source: DifficultySource::Uncontested,
            ledger: Ledger::Canonical,
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.alpha > T::zero() && self.alpha <= T::lit(0.5)) {
            return bad(format!("alpha must be in (0, 0.5], got {}", self.alpha));
        }
        if !(self.gamma >= T::zero() && self.gamma <= T::one()) {
            return bad(format!("gamma must be in [0, 1], got {}", self.gamma));
        }
        for (name, v) in [
            ("delta", self.delta),
            ("whale fee", self.whale_fee),
            ("guaranteed fee", self.guaranteed_fee),
        ] {
            if !(v >= T::zero() && v.is_finite()) {
                return bad(format!(
                    "{name} must be a finite non-negative number, got {v}"
                ));
            }
        }
        if self.fork_sensitivity == 0 || self.fork_sensitivity > 60 {
            return bad(format!(
                "fork sensitivity must be in 1..=60, got {}",
                self.fork_sensitivity
            ));
        }
        if self.max_fork == 0 || self.max_fork > 30 {
            return bad(format!("max fork must be in 1..=30, got {}", self.max_fork));
        }
        if self.max_pool == 0 || self.max_pool > 30 {
            return bad(format!("max pool must be in 1..=30, got {}", self.max_pool));
        }
        Ok(())
    }

    /// Share of honest power that builds on the selfish block in a tie.
    pub fn effective_gamma(&self) -> T {
        match self.tie_break {
            TieBreak::FirstHeard => self.gamma,
            TieBreak::Random => T::lit(0.5),
            TieBreak::WorstCase => T::one(),
        }
    }

    /// Whether revealing a tie needs the rushing window (`fork = relevant`).
    pub(crate) fn tie_needs_rushing(&self) -> bool {
        self.tie_break == TieBreak::FirstHeard
    }

    /// Reward of `blocks` blocks carrying `whales` whale transactions.
    pub(crate) fn block_reward(&self, blocks: u32, whales: u32) -> T {
        T::from_usize_lossy(blocks as usize) * (T::one() + self.guaranteed_fee)
            + T::from_usize_lossy(whales as usize) * self.whale_fee
    }
}

/// Whale flags of a chain segment, oldest block first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct WhaleFlags {
    len: u8,
    bits: u32,
}

impl WhaleFlags {
    pub fn from_slice(flags: &[bool]) -> Self {
        let mut out = Self::default();
        for &f in flags {
            out.push(f);
        }
        out
    }

    pub fn len(self) -> u32 {
        u32::from(self.len)
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }

    pub fn get(self, i: u32) -> bool {
        self.bits >> i & 1 == 1
    }

    pub fn whales(self) -> u32 {
        self.bits.count_ones()
    }

    pub fn prefix_whales(self, k: u32) -> u32 {
        if k >= 32 {
            self.whales()
        } else {
            (self.bits & ((1u32 << k) - 1)).count_ones()
        }
    }

    pub fn push(&mut self, whale: bool) {
        debug_assert!(self.len < 32);
        self.bits |= u32::from(whale) << self.len;
        self.len += 1;
    }

    /// Appends a block that carries a whale iff the chain holds fewer whales
    /// than `pool`.
    pub fn push_from_pool(&mut self, pool: u32) {
        let whale = self.whales() < pool;
        self.push(whale);
    }

    /// Drops the oldest `k` blocks.
    pub fn shift(&mut self, k: u32) {
        debug_assert!(k <= self.len());
        self.bits = if k >= 32 { 0 } else { self.bits >> k };
        self.len -= k as u8;
    }
}

impl fmt::Display for WhaleFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "W" } else { "0" })?;
        }
        f.write_str("]")
    }
}

/// Fixed-width bit packing for state keys.
#[derive(Debug, Default)]
pub(crate) struct KeyWriter {
    key: u128,
    used: u32,
}

impl KeyWriter {
    pub fn put(&mut self, value: u64, width: u32) -> &mut Self {
        debug_assert!(
            width == 64 || value < 1 << width,
            "{value} overflows {width} bits"
        );
        self.used += width;
        assert!(self.used <= 128, "state key overflow");
        self.key = self.key << width | u128::from(value);
        self
    }

    pub fn flags(&mut self, flags: WhaleFlags) -> &mut Self {
        self.put(u64::from(flags.len), 5)
            .put(u64::from(flags.bits), 30)
    }

    pub fn finish(&self) -> u128 {
        self.key
    }
}

/// Reads fields back in the reverse order they were written.
#[derive(Debug)]
pub(crate) struct KeyReader {
    key: u128,
}

impl KeyReader {
    pub fn new(key: u128) -> Self {
        Self { key }
    }

    pub fn take(&mut self, width: u32) -> u64 {
        let v = (self.key & ((1u128 << width) - 1)) as u64;
        self.key >>= width;
        v
    }

    pub fn flags(&mut self) -> WhaleFlags {
        let bits = self.take(30) as u32;
        let len = self.take(5) as u8;
        WhaleFlags { len, bits }
    }
}

/// Fork status shared by the chain-style models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Fork {
    /// The last block was the selfish miner's: no rushing possible.
    #[default]
    Irrelevant,
    /// The last block was honest: a matching selfish block could rush.
    Relevant,
    /// A tie has been published and honest miners are split.
    Active,
}

impl Fork {
    pub(crate) fn code(self) -> u64 {
        self as u64
    }

    pub(crate) fn from_code(code: u64) -> Self {
        match code {
            0 => Fork::Irrelevant,
            1 => Fork::Relevant,
            _ => Fork::Active,
        }
    }
}

impl fmt::Display for Fork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fork::Irrelevant => "irrelevant",
            Fork::Relevant => "relevant",
            Fork::Active => "active",
        })
    }
}

/// Decoded action label. Stored in the MDP as a compact tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Adopt(u32),
    Reveal(u32),
    Wait,
    Mine(u32),
    Merge,
}

impl Action {
    pub fn tag(self) -> u32 {
        match self {
            Action::Adopt(l) => 1 << 16 | l,
            Action::Reveal(l) => 2 << 16 | l,
            Action::Wait => 3 << 16,
            Action::Mine(l) => 4 << 16 | l,
            Action::Merge => 5 << 16,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        let l = tag & 0xffff;
        match tag >> 16 {
            1 => Some(Action::Adopt(l)),
            2 => Some(Action::Reveal(l)),
            3 => Some(Action::Wait),
            4 => Some(Action::Mine(l)),
            5 => Some(Action::Merge),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Adopt(l) => write!(f, "adopt {l}"),
            Action::Reveal(l) => write!(f, "reveal {l}"),
            Action::Wait => f.write_str("wait"),
            Action::Mine(l) => write!(f, "mine {l}"),
            Action::Merge => f.write_str("merge"),
        }
    }
}

/// One stochastic outcome of an action, before whale expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome<T, S> {
    pub prob: T,
    pub reward: T,
    pub difficulty: T,
    pub next: S,
}

impl<T, S> Outcome<T, S> {
    pub fn new(prob: T, reward: T, difficulty: T, next: S) -> Self {
        Self {
            prob,
            reward,
            difficulty,
            next,
        }
    }
}

/// A legal action with its outcomes.
#[derive(Debug, Clone)]
pub struct ActionSpec<T, S> {
    pub action: Action,
    /// Whether the action waits for the next block, so a whale may arrive first.
    pub creates_block: bool,
    pub outcomes: Vec<Outcome<T, S>>,
}

/// Interleaves whale arrivals with block creation.
///
/// Every block-creating outcome gets a twin with `delta` times its
/// probability in which a whale joins the pool before any block appears:
/// the process stays in the source state with one more pending whale, so the
/// miner can react. The twins share one destination, `twin`, and the action is
/// renormalized. With `twin = None` (pool full) the arrival is discarded and
/// the outcomes are returned unchanged.
pub fn whale_arrival_expansion<T: Scalar, S>(
    outcomes: Vec<Outcome<T, S>>,
    creates_block: bool,
    delta: T,
    twin: Option<S>,
) -> Vec<Outcome<T, S>> {
    let twin = match twin {
        Some(t) if creates_block && delta > T::zero() => t,
        _ => return outcomes,
    };
    let w: T = outcomes.iter().map(|o| o.prob).sum();
    let norm = T::one() + delta * w;
    let mut out: Vec<Outcome<T, S>> = outcomes
        .into_iter()
        .map(|o| Outcome {
            prob: o.prob / norm,
            ..o
        })
        .collect();
    out.push(Outcome::new(delta * w / norm, T::zero(), T::zero(), twin));
    out
}

/// A model's state space, as seen by the explorer.
pub(crate) trait StateSpace<T: Scalar> {
    type State: Clone + fmt::Display;

    fn initial(&self) -> Self::State;
    fn pack(&self, state: &Self::State) -> u128;
    fn unpack(&self, key: u128) -> Self::State;
    /// Canonical representative, or `None` for an infeasible state.
    fn canonicalize(&self, state: Self::State) -> Option<Self::State>;
    /// The same state with one more pending whale, or `None` if the pool is full.
    fn with_arrival(&self, state: &Self::State) -> Option<Self::State>;
    fn actions(&self, state: &Self::State) -> Vec<ActionSpec<T, Self::State>>;
    fn honest_action(&self, state: &Self::State) -> Action;
    fn delta(&self) -> T;
}

/// Limits on model construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildLimits {
    pub max_states: usize,
}

impl BuildLimits {
    /// Limit derived from the memory-budget environment variable, if set.
    pub fn from_env() -> Self {
        let max_states = std::env::var(MEMORY_BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .map_or(usize::MAX, |mb| {
                mb.saturating_mul(1 << 20) / BYTES_PER_STATE
            });
        Self { max_states }
    }

    pub fn unlimited() -> Self {
        Self {
            max_states: usize::MAX,
        }
    }
}

impl Default for BuildLimits {
    fn default() -> Self {
        Self::from_env()
    }
}

/// A built model: the MDP plus the packed key of every state.
#[derive(Debug, Clone)]
pub struct BuiltModel<T> {
    pub kind: ModelKind,
    pub params: ModelParams<T>,
    pub mdp: Mdp<T>,
    /// State keys in MDP order (ascending).
    pub keys: Vec<u128>,
}

impl<T: Scalar> BuiltModel<T> {
    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn state_of_key(&self, key: u128) -> Option<StateId> {
        self.keys.binary_search(&key).ok().map(|i| i as StateId)
    }

    pub fn action(&self, state: StateId, action: u32) -> Action {
        Action::from_tag(self.mdp.action_tag(state, action)).expect("model tags decode")
    }

    /// Human-readable description of a state.
    pub fn describe(&self, state: StateId) -> String {
        let key = self.keys[state as usize];
        match self.kind {
            ModelKind::Nc => nc::NcSpace::new(self.params).unpack(key).to_string(),
            ModelKind::Full => full::FullSpace::new(self.params).unpack(key).to_string(),
            ModelKind::UpperBound => upper_bound::UbSpace::new(self.params)
                .unpack(key)
                .to_string(),
        }
    }
}

/// Builds the model selected by `kind`.
pub fn build_model<T: Scalar>(
    kind: ModelKind,
    params: &ModelParams<T>,
    limits: BuildLimits,
) -> Result<BuiltModel<T>> {
    match kind {
        ModelKind::Nc => nc::build_nc_model(params, limits),
        ModelKind::Full => full::build_full_model(params, limits),
        ModelKind::UpperBound => upper_bound::build_ub_model(params, limits),
    }
}

struct PendingAction<T> {
    tag: u32,
    transitions: Vec<(u32, T, T, T)>,
}

/// Breadth-first exploration of the reachable canonical states.
pub(crate) fn explore<T: Scalar, M: StateSpace<T>>(
    space: &M,
    kind: ModelKind,
    params: ModelParams<T>,
    limits: BuildLimits,
) -> Result<BuiltModel<T>> {
    let initial = space
        .canonicalize(space.initial())
        .ok_or_else(|| Error::InvalidParams("initial state is infeasible".into()))?;
    let mut index: HashMap<u128, u32> = HashMap::new();
    let mut keys: Vec<u128> = Vec::new();
    let mut pending: Vec<(Vec<PendingAction<T>>, Option<u32>)> = Vec::new();

    let mut intern = |key: u128, keys: &mut Vec<u128>| -> Result<u32> {
        if let Some(&i) = index.get(&key) {
            return Ok(i);
        }
        if keys.len() >= limits.max_states {
            return Err(Error::MemoryBudget {
                states: keys.len() + 1,
                limit: limits.max_states,
            });
        }
        let i = keys.len() as u32;
        index.insert(key, i);
        keys.push(key);
        Ok(i)
    };

    intern(space.pack(&initial), &mut keys)?;
    let mut head = 0;
    while head < keys.len() {
        let state = space.unpack(keys[head]);
        let source = head as u32;
        head += 1;
        let honest = space.honest_action(&state);
        let twin = space.with_arrival(&state);
        let mut actions = Vec::new();
        let mut honest_index = None;
        for spec in space.actions(&state) {
            let outcomes = whale_arrival_expansion(
                spec.outcomes,
                spec.creates_block,
                space.delta(),
                twin.clone(),
            );
            let mut transitions: Vec<(u32, T, T, T)> = Vec::with_capacity(outcomes.len());
            for o in outcomes {
                if o.prob <= T::zero() {
                    continue;
                }
                let next = space.canonicalize(o.next.clone()).ok_or_else(|| {
                    Error::InvalidMdp(format!(
                        "{} from {state} leads to infeasible state {}",
                        spec.action, o.next
                    ))
                })?;
                let next = intern(space.pack(&next), &mut keys)?;
                match transitions
                    .iter_mut()
                    .find(|t| t.0 == next && t.2 == o.reward && t.3 == o.difficulty)
                {
                    Some(t) => t.1 += o.prob,
                    None => transitions.push((next, o.prob, o.reward, o.difficulty)),
                }
            }
            let idle = transitions
                .iter()
                .all(|t| t.0 == source && t.3 == T::zero() && t.2 == T::zero());
            if idle && spec.action != honest {
                continue;
            }
            if spec.action == honest {
                honest_index = Some(actions.len() as u32);
            }
            actions.push(PendingAction {
                tag: spec.action.tag(),
                transitions,
            });
        }
        if actions.is_empty() {
            return Err(Error::InvalidMdp(format!(
                "state {state} has no legal action"
            )));
        }
        pending.push((actions, honest_index));
    }

    // Renumber in key order.
    let mut order: Vec<u32> = (0..keys.len() as u32).collect();
    order.sort_unstable_by_key(|&i| keys[i as usize]);
    let mut rank = vec![0u32; keys.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i as usize] = r as u32;
    }
    let mut builder = MdpBuilder::new();
    for &i in &order {
        builder.add_state();
        let (actions, honest) = &pending[i as usize];
        for a in actions {
            builder.add_action(
                a.tag,
                a.transitions
                    .iter()
                    .map(|&(n, p, r, d)| Transition::new(rank[n as usize], p, r, d)),
            );
        }
        if let Some(h) = honest {
            builder.mark_honest(*h);
        }
    }
    builder.set_initial(rank[0]);
    let mdp = builder.build()?;
    let sorted_keys = order.iter().map(|&i| keys[i as usize]).collect();
    Ok(BuiltModel {
        kind,
        params,
        mdp,
        keys: sorted_keys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_closed<M: StateSpace<f64>>(space: &M, model: &BuiltModel<f64>) {
        for &key in &model.keys {
            let state = space.unpack(key);
            let canon = space
                .canonicalize(state.clone())
                .expect("reachable state is feasible");
            assert_eq!(
                space.pack(&canon),
                key,
                "{state} is not its own representative"
            );
        }
    }

    #[test]
    fn reachable_states_are_canonical_representatives() {
        for tie_break in [TieBreak::FirstHeard, TieBreak::Random, TieBreak::WorstCase] {
            for ledger in [Ledger::Canonical, Ledger::Mad] {
                let p = ModelParams {
                    alpha: 0.3,
                    delta: 0.1,
                    whale_fee: 2.0,
                    fork_sensitivity: 3,
                    max_fork: 3,
                    tie_break,
                    ledger,
                    ..ModelParams::default()
                };
                let limits = BuildLimits::unlimited();
                assert_closed(
                    &nc::NcSpace::new(p),
                    &build_model(ModelKind::Nc, &p, limits).unwrap(),
                );
                assert_closed(
                    &upper_bound::UbSpace::new(p),
                    &build_model(ModelKind::UpperBound, &p, limits).unwrap(),
                );
                let p = ModelParams { max_fork: 2, ..p };
                assert_closed(
                    &full::FullSpace::new(p),
                    &build_model(ModelKind::Full, &p, limits).unwrap(),
                );
            }
        }
    }

    #[test]
    fn whale_flags_prefix_and_shift() {
        let mut w = WhaleFlags::from_slice(&[true, false, true]);
        assert_eq!(w.whales(), 2);
        assert_eq!(w.prefix_whales(2), 1);
        w.shift(1);
        assert_eq!(w, WhaleFlags::from_slice(&[false, true]));
        w.push_from_pool(1);
        assert!(!w.get(2));
        w.push_from_pool(2);
        assert!(w.get(3));
        assert_eq!(w.to_string(), "[0W0W]");
    }

    #[test]
    fn key_round_trip() {
        let flags = WhaleFlags::from_slice(&[true, true, false]);
        let key = KeyWriter::default()
            .put(5, 4)
            .flags(flags)
            .put(1, 1)
            .finish();
        let mut r = KeyReader::new(key);
        assert_eq!(r.take(1), 1);
        assert_eq!(r.flags(), flags);
        assert_eq!(r.take(4), 5);
    }

    #[test]
    fn action_tags_round_trip() {
        for a in [
            Action::Adopt(3),
            Action::Reveal(1),
            Action::Wait,
            Action::Mine(0),
            Action::Merge,
        ] {
            assert_eq!(Action::from_tag(a.tag()), Some(a));
        }
    }

    #[test]
    fn whale_expansion_twin_and_normalization() {
        let out = vec![Outcome::new(1.0f64, 0.0, 0.0, 'a')];
        assert_eq!(
            whale_arrival_expansion(out.clone(), true, 0.0, Some('b')),
            out
        );
        assert_eq!(whale_arrival_expansion(out.clone(), true, 0.01, None), out);
        assert_eq!(
            whale_arrival_expansion(out.clone(), false, 0.01, Some('b')),
            out
        );
        let x = whale_arrival_expansion(out, true, 0.01, Some('b'));
        assert_eq!(x.len(), 2);
        assert!((x[0].prob - 1.0 / 1.01).abs() < 1e-15);
        assert!((x[1].prob - 0.01 / 1.01).abs() < 1e-15);
        assert_eq!(x[1].next, 'b');
    }

    #[test]
    fn vocabulary_parses_csv_names_and_aliases() {
        assert_eq!("attacker".parse::<TieBreak>().unwrap(), TieBreak::WorstCase);
        assert_eq!(
            "main".parse::<DifficultySource>().unwrap(),
            DifficultySource::Canonical
        );
        assert_eq!("longest".parse::<Ledger>().unwrap(), Ledger::Canonical);
        assert_eq!(
            "simplified_colordag".parse::<ModelKind>().unwrap(),
            ModelKind::UpperBound
        );
        assert!("worst".parse::<TieBreak>().is_err());
        assert_eq!(TieBreak::WorstCase.to_string(), "attacker");
    }

    #[test]
    fn params_validation() {
        let p = ModelParams::<f64>::default();
        assert!(p.validate().is_ok());
        assert!(ModelParams { alpha: 0.6, ..p }.validate().is_err());
        assert!(ModelParams { alpha: 0.0, ..p }.validate().is_err());
        assert!(ModelParams { gamma: 1.5, ..p }.validate().is_err());
        assert!(ModelParams { max_fork: 0, ..p }.validate().is_err());
        assert!(ModelParams { delta: -1.0, ..p }.validate().is_err());
    }
}
