use super::policy_iteration::q_value;
use super::{ActionIndex, Mdp, SolveResult, SolverConfig, StateId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gauss-Seidel value iteration on a stochastic shortest path MDP. Stops once
/// a full sweep changes no value by more than the configured precision.
///
/// Convergence is slow when the horizon is large, since the contraction
/// factor per unit of difficulty is `1 - 1/H`.
pub fn value_iteration<T: Scalar>(ssp: &Mdp<T>, cfg: &SolverConfig<T>) -> Result<SolveResult<T>> {
    cfg.validate()?;
    if ssp.terminal().is_none() {
        return Err(Error::InvalidMdp(
            "value iteration needs a terminal state".into(),
        ));
    }
    let n = ssp.num_states();
    let mut values = vec![T::zero(); n];
    let mut last_change = T::infinity();
    for sweep in 1..=cfg.max_value_sweeps {
        let mut change = T::zero();
        for s in 0..n as StateId {
            if ssp.is_terminal(s) {
                continue;
            }
            let best = (0..ssp.num_actions_of(s) as ActionIndex)
                .map(|a| q_value(ssp, &values, s, a))
                .fold(T::neg_infinity(), T::max);
            change = change.max((best - values[s as usize]).abs());
            values[s as usize] = best;
        }
        last_change = change;
        if change < cfg.precision {
            let policy = greedy_policy(ssp, &values);
            let ratio = values[ssp.initial() as usize] / cfg.horizon;
            return Ok(SolveResult {
                policy,
                values,
                ratio,
                iterations: sweep,
            });
        }
    }
    Err(Error::ValueIterationCap {
        iterations: cfg.max_value_sweeps,
        last_change: last_change.to_f64_lossy(),
    })
}

/// Greedy policy for `values`, lowest action index on ties.
pub(crate) fn greedy_policy<T: Scalar>(ssp: &Mdp<T>, values: &[T]) -> Vec<ActionIndex> {
    (0..ssp.num_states() as StateId)
        .map(|s| {
            if ssp.is_terminal(s) {
                return 0;
            }
            let mut best = 0;
            let mut best_q = q_value(ssp, values, s, 0);
            for a in 1..ssp.num_actions_of(s) as ActionIndex {
                let q = q_value(ssp, values, s, a);
                if q > best_q {
                    best = a;
                    best_q = q;
                }
            }
            best
        })
        .collect()
}
