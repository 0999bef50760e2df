//! Compressed block-DAG model that only ever errs in the selfish miner's
//! favor: every selfish block is acceptable, fees of a revealed selfish
//! prefix are claimed at once, and blocks from before the current fork are
//! kept as two counters (`a_d` selfish, `h_d` honest).

use std::fmt;

use super::{
    explore, Action, ActionSpec, BuildLimits, BuiltModel, Fork, KeyReader, KeyWriter, Ledger,
    ModelKind, ModelParams, Outcome, StateSpace, TieBreak, WhaleFlags,
};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UbState {
    /// Revealed selfish blocks from before the current fork, not yet settled.
    pub a_d: u32,
    /// Honest blocks they displaced.
    pub h_d: u32,
    /// Selfish blocks since the fork.
    pub a_c: u32,
    /// Public blocks since the fork.
    pub h_c: WhaleFlags,
    pub fork: Fork,
    /// Selfish blocks honest miners already built on (MAD ledger only).
    pub c: u32,
    /// Leading whale-carrying public blocks whose content the MAD ledger
    /// destroyed. Honest miners still see these whales as taken, but they
    /// stay in the pool.
    pub burned: u32,
    pub pool: u32,
    /// Whether the pre-fork counters can still change hands.
    pub pending: bool,
}

impl Default for UbState {
    fn default() -> Self {
        Self {
            a_d: 0,
            h_d: 0,
            a_c: 0,
            h_c: WhaleFlags::default(),
            fork: Fork::Irrelevant,
            c: 0,
            burned: 0,
            pool: 0,
            pending: true,
        }
    }
}

impl fmt::Display for UbState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a_d={} h_d={} a_c={} h_c={} fork={} c={} burned={} pool={} pending={}",
            self.a_d,
            self.h_d,
            self.a_c,
            self.h_c,
            self.fork,
            self.c,
            self.burned,
            self.pool,
            self.pending
        )
    }
}

pub(crate) struct UbSpace<T> {
    p: ModelParams<T>,
}

impl<T: Scalar> UbSpace<T> {
    pub(crate) fn new(p: ModelParams<T>) -> Self {
        Self { p }
    }

    fn count(&self, n: u32) -> T {
        T::from_usize_lossy(n as usize)
    }

    /// Publishes `l` selfish blocks that win against the public fork.
    /// Returns the state with reward and difficulty earned.
    fn reveal_settle(&self, s: &UbState, l: u32) -> (UbState, T, T) {
        let mut next = *s;
        let claimed = l.min(s.pool);
        let mut reward =
            self.count(l) * self.p.guaranteed_fee + self.count(claimed) * self.p.whale_fee;
        let mut difficulty = T::zero();
        next.pool -= claimed;
        next.a_d += l;
        next.a_c -= l;
        next.h_d += s.h_c.len();
        next.h_c = WhaleFlags::default();
        next.burned = 0;
        if !s.pending || next.a_d + next.h_d > self.p.fork_sensitivity {
            reward += self.count(next.a_d);
            difficulty = self.count(next.a_d);
            next.a_d = 0;
            next.h_d = 0;
            next.pending = false;
        }
        next.c = 0;
        next.fork = Fork::Irrelevant;
        (next, reward, difficulty)
    }

    fn adopt(&self, s: &UbState, l: u32) -> Outcome<T, UbState> {
        let mad_win = self.p.ledger == Ledger::Mad
            && s.c > 0
            && s.a_d + 2 * s.c + s.h_d > self.p.fork_sensitivity;
        let subsidy = if mad_win { s.a_d + s.c } else { s.a_d - s.h_d };
        let difficulty = match self.p.difficulty_source {
            super::DifficultySource::Uncontested => subsidy + l - s.a_c.min(l),
            super::DifficultySource::Canonical => s.a_d + l,
        };
        let mut next = *s;
        let dropped = s.h_c.prefix_whales(l);
        let unburned = dropped.saturating_sub(s.burned);
        next.pool -= unburned;
        next.burned = s.burned - (dropped - unburned);
        next.h_c.shift(l);
        next.a_c = 0;
        next.a_d = 0;
        next.h_d = 0;
        next.c = 0;
        next.pending = true;
        next.fork = Fork::Irrelevant;
        Outcome::new(T::one(), self.count(subsidy), self.count(difficulty), next)
    }

    /// Outcome of publishing exactly as many blocks as the public fork holds.
    fn reveal_tie(&self, s: &UbState, l: u32) -> Option<Outcome<T, UbState>> {
        let worst = self.p.tie_break == TieBreak::WorstCase;
        let rush_ok = !self.p.tie_needs_rushing() || s.fork == Fork::Relevant;
        let mut next = *s;
        match self.p.ledger {
            Ledger::Canonical => {
                if worst {
                    let (n, r, d) = self.reveal_settle(s, l);
                    return Some(Outcome::new(T::one(), r, d, n));
                }
                if s.fork == Fork::Active || !rush_ok {
                    return None;
                }
                next.fork = Fork::Active;
            }
            Ledger::Mad => {
                if worst && s.c < l {
                    next.c = l;
                    next.burned = s.h_c.whales();
                } else if s.h_c.whales() > s.burned {
                    next.burned = s.h_c.whales();
                } else if !worst && s.c < l && rush_ok && s.fork != Fork::Active {
                    next.fork = Fork::Active;
                } else {
                    return None;
                }
            }
        }
        Some(Outcome::new(T::one(), T::zero(), T::zero(), next))
    }

    fn mine(&self, s: &UbState) -> Vec<Outcome<T, UbState>> {
        let alpha = self.p.alpha;
        let (zero, one) = (T::zero(), T::one());
        let mut selfish = *s;
        selfish.a_c += 1;
        selfish.fork = Fork::Irrelevant;
        let mut honest = *s;
        honest.h_c.push_from_pool(s.pool);
        honest.fork = Fork::Relevant;
        if s.fork != Fork::Active {
            return vec![
                Outcome::new(alpha, zero, zero, selfish),
                Outcome::new(one - alpha, zero, zero, honest),
            ];
        }
        let gamma = self.p.effective_gamma();
        let (onto, reward, difficulty) = match self.p.ledger {
            Ledger::Canonical => {
                let (mut n, r, d) = self.reveal_settle(s, s.h_c.len());
                n.h_c.push_from_pool(n.pool);
                (n, r, d)
            }
            Ledger::Mad => {
                let mut n = *s;
                n.c = s.h_c.len();
                n.h_c.push_from_pool(n.pool);
                (n, zero, zero)
            }
        };
        let mut onto = onto;
        onto.fork = Fork::Relevant;
        vec![
            Outcome::new(alpha, zero, zero, selfish),
            Outcome::new(gamma * (one - alpha), reward, difficulty, onto),
            Outcome::new((one - gamma) * (one - alpha), zero, zero, honest),
        ]
    }
}

impl<T: Scalar> StateSpace<T> for UbSpace<T> {
    type State = UbState;

    fn initial(&self) -> UbState {
        UbState::default()
    }

    fn pack(&self, s: &UbState) -> u128 {
        KeyWriter::default()
            .put(u64::from(s.pool), 8)
            .put(u64::from(s.a_d), 7)
            .put(u64::from(s.h_d), 7)
            .put(u64::from(s.a_c), 5)
            .flags(s.h_c)
            .put(u64::from(s.c), 5)
            .put(u64::from(s.burned), 5)
            .put(s.fork.code(), 2)
            .put(u64::from(s.pending), 1)
            .finish()
    }

    fn unpack(&self, key: u128) -> UbState {
        let mut r = KeyReader::new(key);
        let pending = r.take(1) == 1;
        let fork = Fork::from_code(r.take(2));
        let burned = r.take(5) as u32;
        let c = r.take(5) as u32;
        let h_c = r.flags();
        let a_c = r.take(5) as u32;
        let h_d = r.take(7) as u32;
        let a_d = r.take(7) as u32;
        let pool = r.take(8) as u32;
        UbState {
            a_d,
            h_d,
            a_c,
            h_c,
            fork,
            c,
            burned,
            pool,
            pending,
        }
    }

    fn canonicalize(&self, mut s: UbState) -> Option<UbState> {
        if s.h_c.whales() > s.pool || s.pool > self.p.max_pool || s.h_d > s.a_d {
            return None;
        }
        if !s.pending && (s.a_d > 0 || s.h_d > 0) {
            return None;
        }
        let tie_possible = s.h_c.len() > 0 && s.a_c >= s.h_c.len();
        if s.fork == Fork::Relevant && (!tie_possible || !self.p.tie_needs_rushing()) {
            s.fork = Fork::Irrelevant;
        }
        if s.fork == Fork::Active && !tie_possible {
            return None;
        }
        if s.burned > s.h_c.whales() {
            return None;
        }
        if self.p.ledger == Ledger::Canonical {
            s.c = 0;
            s.burned = 0;
        }
        Some(s)
    }

    fn with_arrival(&self, s: &UbState) -> Option<UbState> {
        (s.pool < self.p.max_pool).then(|| UbState {
            pool: s.pool + 1,
            ..*s
        })
    }

    fn actions(&self, s: &UbState) -> Vec<ActionSpec<T, UbState>> {
        let mut out = Vec::new();
        let lh = s.h_c.len();
        for l in s.a_c.max(1)..=lh {
            out.push(ActionSpec {
                action: Action::Adopt(l),
                creates_block: false,
                outcomes: vec![self.adopt(s, l)],
            });
        }
        for l in lh.max(1)..=s.a_c {
            let outcome = if l > lh {
                let (n, r, d) = self.reveal_settle(s, l);
                Some(Outcome::new(T::one(), r, d, n))
            } else {
                self.reveal_tie(s, l)
            };
            if let Some(o) = outcome {
                out.push(ActionSpec {
                    action: Action::Reveal(l),
                    creates_block: false,
                    outcomes: vec![o],
                });
            }
        }
        if s.a_c < self.p.max_fork && lh < self.p.max_fork {
            out.push(ActionSpec {
                action: Action::Mine(0),
                creates_block: true,
                outcomes: self.mine(s),
            });
        }
        out
    }

    fn honest_action(&self, s: &UbState) -> Action {
        let lh = s.h_c.len();
        if s.a_c > lh {
            Action::Reveal(s.a_c)
        } else if lh > 0 {
            Action::Adopt(lh)
        } else {
            Action::Mine(0)
        }
    }

    fn delta(&self) -> T {
        self.p.delta
    }
}

/// Builds the upper-bound DAG model.
pub fn build_ub_model<T: Scalar>(
    params: &ModelParams<T>,
    limits: BuildLimits,
) -> Result<BuiltModel<T>> {
    params.validate()?;
    explore(
        &UbSpace::new(*params),
        ModelKind::UpperBound,
        *params,
        limits,
    )
}

/// Packed key of an upper-bound state.
pub fn ub_state_key<T: Scalar>(params: &ModelParams<T>, state: &UbState) -> Option<u128> {
    let space = UbSpace::new(*params);
    space.canonicalize(*state).map(|s| space.pack(&s))
}
