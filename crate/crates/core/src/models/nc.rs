//! Nakamoto consensus with whale transactions.
//!
//! The state tracks the selfish chain `a` and the public chain `h` since
//! their last common block, the fork status and the number of whale
//! transactions seen since that block (`pool`).

use std::fmt;

use super::{
    explore, Action, ActionSpec, BuildLimits, BuiltModel, Fork, KeyReader, KeyWriter, ModelKind,
    ModelParams, Outcome, StateSpace, WhaleFlags,
};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct NcState {
    pub a: WhaleFlags,
    pub h: WhaleFlags,
    pub fork: Fork,
    pub pool: u32,
}

impl fmt::Display for NcState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a={} h={} fork={} pool={}",
            self.a, self.h, self.fork, self.pool
        )
    }
}

pub(crate) struct NcSpace<T> {
    p: ModelParams<T>,
}

impl<T: Scalar> NcSpace<T> {
    pub(crate) fn new(p: ModelParams<T>) -> Self {
        Self { p }
    }

    fn reveal(&self, s: &NcState, l: u32) -> Outcome<T, NcState> {
        let whales = s.a.prefix_whales(l);
        let mut next = *s;
        if l == s.h.len() {
            next.fork = Fork::Active;
            return Outcome::new(T::one(), T::zero(), T::zero(), next);
        }
        next.a.shift(l);
        next.h = WhaleFlags::default();
        next.fork = Fork::Irrelevant;
        next.pool -= whales;
        let reward = self.p.block_reward(l, whales);
        Outcome::new(T::one(), reward, T::from_usize_lossy(l as usize), next)
    }

    fn adopt(&self, s: &NcState, l: u32) -> Outcome<T, NcState> {
        let mut next = *s;
        next.pool -= s.h.prefix_whales(l);
        next.h.shift(l);
        next.a = WhaleFlags::default();
        next.fork = Fork::Irrelevant;
        Outcome::new(T::one(), T::zero(), T::from_usize_lossy(l as usize), next)
    }

    fn wait(&self, s: &NcState) -> Vec<Outcome<T, NcState>> {
        let alpha = self.p.alpha;
        let (zero, one) = (T::zero(), T::one());
        let mut selfish = *s;
        selfish.a.push_from_pool(s.pool);
        selfish.fork = Fork::Irrelevant;
        let mut honest = *s;
        honest.h.push_from_pool(s.pool);
        honest.fork = Fork::Relevant;
        if s.fork != Fork::Active {
            return vec![
                Outcome::new(alpha, zero, zero, selfish),
                Outcome::new(one - alpha, zero, zero, honest),
            ];
        }
        let gamma = self.p.effective_gamma();
        // Honest block on top of the published selfish prefix.
        let k = s.h.len();
        let whales = s.a.prefix_whales(k);
        let mut onto = *s;
        onto.a.shift(k);
        onto.pool -= whales;
        onto.h = WhaleFlags::default();
        onto.h.push_from_pool(onto.pool);
        onto.fork = Fork::Relevant;
        let mut selfish = selfish;
        selfish.fork = Fork::Irrelevant;
        vec![
            Outcome::new(alpha, zero, zero, selfish),
            Outcome::new(
                gamma * (one - alpha),
                self.p.block_reward(k, whales),
                T::from_usize_lossy(k as usize),
                onto,
            ),
            Outcome::new((one - gamma) * (one - alpha), zero, zero, honest),
        ]
    }
}

impl<T: Scalar> StateSpace<T> for NcSpace<T> {
    type State = NcState;

    fn initial(&self) -> NcState {
        NcState::default()
    }

    fn pack(&self, s: &NcState) -> u128 {
        KeyWriter::default()
            .put(u64::from(s.pool), 8)
            .flags(s.a)
            .flags(s.h)
            .put(s.fork.code(), 2)
            .finish()
    }

    fn unpack(&self, key: u128) -> NcState {
        let mut r = KeyReader::new(key);
        let fork = Fork::from_code(r.take(2));
        let h = r.flags();
        let a = r.flags();
        let pool = r.take(8) as u32;
        NcState { a, h, fork, pool }
    }

    fn canonicalize(&self, mut s: NcState) -> Option<NcState> {
        if s.a.whales() > s.pool || s.h.whales() > s.pool || s.pool > self.p.max_pool {
            return None;
        }
        let tie_possible = s.h.len() > 0 && s.a.len() >= s.h.len();
        if s.fork == Fork::Relevant && (!tie_possible || !self.p.tie_needs_rushing()) {
            s.fork = Fork::Irrelevant;
        }
        if s.fork == Fork::Active && !tie_possible {
            return None;
        }
        Some(s)
    }

    fn with_arrival(&self, s: &NcState) -> Option<NcState> {
        (s.pool < self.p.max_pool).then(|| NcState {
            pool: s.pool + 1,
            ..*s
        })
    }

    fn actions(&self, s: &NcState) -> Vec<ActionSpec<T, NcState>> {
        let mut out = Vec::new();
        let (la, lh) = (s.a.len(), s.h.len());
        for l in 1..=lh {
            out.push(ActionSpec {
                action: Action::Adopt(l),
                creates_block: false,
                outcomes: vec![self.adopt(s, l)],
            });
        }
        for l in lh.max(1)..=la {
            let legal = l > lh
                || (s.fork != Fork::Active
                    && (!self.p.tie_needs_rushing() || s.fork == Fork::Relevant));
            if legal {
                out.push(ActionSpec {
                    action: Action::Reveal(l),
                    creates_block: false,
                    outcomes: vec![self.reveal(s, l)],
                });
            }
        }
        if la < self.p.max_fork && lh < self.p.max_fork {
            out.push(ActionSpec {
                action: Action::Wait,
                creates_block: true,
                outcomes: self.wait(s),
            });
        }
        out
    }

    fn honest_action(&self, s: &NcState) -> Action {
        let (la, lh) = (s.a.len(), s.h.len());
        if la > lh {
            Action::Reveal(la)
        } else if lh > 0 {
            Action::Adopt(lh)
        } else {
            Action::Wait
        }
    }

    fn delta(&self) -> T {
        self.p.delta
    }
}

/// Builds the Nakamoto-consensus model.
pub fn build_nc_model<T: Scalar>(
    params: &ModelParams<T>,
    limits: BuildLimits,
) -> Result<BuiltModel<T>> {
    params.validate()?;
    explore(&NcSpace::new(*params), ModelKind::Nc, *params, limits)
}

/// Packed key of an NC state, for looking states up in a built model.
pub fn nc_state_key<T: Scalar>(params: &ModelParams<T>, state: &NcState) -> Option<u128> {
    let space = NcSpace::new(*params);
    space.canonicalize(*state).map(|s| space.pack(&s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams<f64> {
        ModelParams {
            alpha: 0.3,
            gamma: 0.5,
            delta: 0.0,
            whale_fee: 10.0,
            guaranteed_fee: 0.0,
            max_fork: 4,
            ..ModelParams::default()
        }
    }

    #[test]
    fn adopt_drops_prefix_and_its_whales() {
        let space = NcSpace::new(params());
        let s = NcState {
            a: WhaleFlags::from_slice(&[true]),
            h: WhaleFlags::from_slice(&[true, false]),
            fork: Fork::Relevant,
            pool: 1,
        };
        let o = space.adopt(&s, 1);
        assert_eq!(o.difficulty, 1.0);
        assert_eq!(o.reward, 0.0);
        assert_eq!(o.next.pool, 0);
        assert_eq!(o.next.h, WhaleFlags::from_slice(&[false]));
        assert!(o.next.a.is_empty());
    }

    #[test]
    fn reveal_longer_prefix_overrides() {
        let space = NcSpace::new(params());
        let s = NcState {
            a: WhaleFlags::from_slice(&[true, false, false]),
            h: WhaleFlags::from_slice(&[false]),
            fork: Fork::Irrelevant,
            pool: 1,
        };
        let o = space.reveal(&s, 2);
        assert_eq!(o.reward, 2.0 + 10.0);
        assert_eq!(o.difficulty, 2.0);
        assert_eq!(o.next.a, WhaleFlags::from_slice(&[false]));
        assert!(o.next.h.is_empty());
        assert_eq!(o.next.pool, 0);
    }

    #[test]
    fn tie_reveal_needs_rushing_window_under_first_heard() {
        let space = NcSpace::new(params());
        let mut s = NcState {
            a: WhaleFlags::from_slice(&[false]),
            h: WhaleFlags::from_slice(&[false]),
            fork: Fork::Irrelevant,
            pool: 0,
        };
        let has_tie = |s: &NcState| {
            space
                .actions(s)
                .iter()
                .any(|a| a.action == Action::Reveal(1))
        };
        assert!(!has_tie(&s));
        s.fork = Fork::Relevant;
        assert!(has_tie(&s));
        let random = NcSpace::new(ModelParams {
            tie_break: super::super::TieBreak::Random,
            ..params()
        });
        s.fork = Fork::Irrelevant;
        assert!(random
            .actions(&s)
            .iter()
            .any(|a| a.action == Action::Reveal(1)));
    }

    #[test]
    fn active_fork_wait_splits_three_ways() {
        let space = NcSpace::new(params());
        let s = NcState {
            a: WhaleFlags::from_slice(&[false, false]),
            h: WhaleFlags::from_slice(&[false]),
            fork: Fork::Active,
            pool: 0,
        };
        let out = space.wait(&s);
        let probs: Vec<f64> = out.iter().map(|o| o.prob).collect();
        assert_eq!(probs, vec![0.3, 0.35, 0.35]);
        assert_eq!(out[1].reward, 1.0);
        assert_eq!(out[1].difficulty, 1.0);
        assert_eq!(out[1].next.a.len(), 1);
        assert_eq!(out[1].next.h.len(), 1);
        assert_eq!(out[2].next.h.len(), 2);
    }

    #[test]
    fn canonical_form_forgets_unusable_relevance() {
        let space = NcSpace::new(params());
        let s = NcState {
            a: WhaleFlags::default(),
            h: WhaleFlags::from_slice(&[false]),
            fork: Fork::Relevant,
            pool: 0,
        };
        assert_eq!(space.canonicalize(s).unwrap().fork, Fork::Irrelevant);
        let bad = NcState {
            h: WhaleFlags::from_slice(&[true]),
            ..s
        };
        assert!(space.canonicalize(bad).is_none());
    }
}
