use super::linear::{bicg, bicgstab, dense_solve, SparseMatrix};
use super::{ActionIndex, Mdp, SolveResult, SolverConfig, StateId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Q-value of `(state, action)` against the value vector `v` (terminal value 0).
pub(crate) fn q_value<T: Scalar>(ssp: &Mdp<T>, v: &[T], state: StateId, action: ActionIndex) -> T {
    ssp.transitions(state, action)
        .iter()
        .fold(T::zero(), |acc, t| {
            let next = if ssp.is_terminal(t.next) {
                T::zero()
            } else {
                v[t.next as usize]
            };
            acc + t.prob * (t.reward + next)
        })
}

/// Solves `v = r_pi + P_pi v` for a fixed policy. The terminal state keeps
/// value zero. Biconjugate gradient is tried first, then BiCGSTAB, then a
/// dense solve if the system is small.
pub fn evaluate_policy<T: Scalar>(
    ssp: &Mdp<T>,
    policy: &[ActionIndex],
    cfg: &SolverConfig<T>,
    warm_start: Option<&[T]>,
) -> Result<Vec<T>> {
    ssp.check_policy(policy)?;
    let n = ssp.num_states();
    let mut rhs = vec![T::zero(); n];
    let rows = (0..n as StateId).map(|s| {
        let mut row = vec![(s, T::one())];
        if !ssp.is_terminal(s) {
            let a = policy[s as usize];
            let mut reward = T::zero();
            for t in ssp.transitions(s, a) {
                reward += t.prob * t.reward;
                if !ssp.is_terminal(t.next) {
                    row.push((t.next, -t.prob));
                }
            }
            rhs[s as usize] = reward;
        }
        row
    });
    let matrix = SparseMatrix::from_rows(n, rows.collect::<Vec<_>>());
    let cap = cfg.linear_iteration_cap(n);
    let warm = warm_start.filter(|w| w.len() == n && w.iter().all(|x| x.is_finite()));

    let first = bicg(&matrix, &rhs, warm, cfg.linear_tolerance, cap);
    if first.converged && first.x.iter().all(|x| x.is_finite()) {
        return Ok(first.x);
    }
    let second = bicgstab(&matrix, &rhs, warm, cfg.linear_tolerance, cap);
    if second.converged && second.x.iter().all(|x| x.is_finite()) {
        return Ok(second.x);
    }
    if let Some(x) = dense_solve(&matrix, &rhs) {
        let mut r = vec![T::zero(); n];
        matrix.mul_vec(&x, &mut r);
        let err = r
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<T>()
            .sqrt();
        let scale = rhs.iter().map(|b| *b * *b).sum::<T>().sqrt();
        if x.iter().all(|v| v.is_finite())
            && err <= cfg.linear_tolerance * scale.max(T::min_positive_value())
        {
            return Ok(x);
        }
    }
    Err(Error::LinearSolve {
        residual: second
            .residual
            .to_f64_lossy()
            .min(first.residual.to_f64_lossy()),
    })
}

/// Howard policy iteration on a stochastic shortest path MDP, starting from
/// the honest-mimicking policy.
///
/// A state switches action only when the best Q-value beats the current one
/// by more than the evaluation noise; among equal best actions the lowest
/// index wins.
pub fn policy_iteration<T: Scalar>(ssp: &Mdp<T>, cfg: &SolverConfig<T>) -> Result<SolveResult<T>> {
    cfg.validate()?;
    if ssp.terminal().is_none() {
        return Err(Error::InvalidMdp(
            "policy iteration needs a terminal state".into(),
        ));
    }
    let n = ssp.num_states();
    let mut policy = ssp.honest_policy();
    let mut values: Option<Vec<T>> = None;
    let ten = T::lit(10.0);

    for round in 1..=cfg.max_policy_rounds {
        let next = evaluate_policy(ssp, &policy, cfg, values.as_deref()).map_err(|e| {
            Error::PolicyIteration {
                round,
                source: Box::new(e),
            }
        })?;
        let value_change = values.as_ref().map(|old| {
            old.iter()
                .zip(&next)
                .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
        });
        let stalled = value_change.is_some_and(|c| c < cfg.precision);
        let mut improved = policy.clone();
        let mut changed = false;
        for s in 0..n as StateId {
            if ssp.is_terminal(s) {
                continue;
            }
            let current = policy[s as usize];
            let q_current = q_value(ssp, &next, s, current);
            let mut best = 0;
            let mut best_q = q_value(ssp, &next, s, 0);
            for a in 1..ssp.num_actions_of(s) as ActionIndex {
                let q = q_value(ssp, &next, s, a);
                if q > best_q {
                    best = a;
                    best_q = q;
                }
            }
            let margin = cfg.precision + ten * cfg.linear_tolerance * q_current.abs();
            if best != current && best_q > q_current + margin {
                improved[s as usize] = best;
                changed = true;
            }
        }
        if !changed || stalled {
            let ratio = next[ssp.initial() as usize] / cfg.horizon;
            return Ok(SolveResult {
                policy,
                values: next,
                ratio,
                iterations: round,
            });
        }
        policy = improved;
        values = Some(next);
    }
    Err(Error::PolicyIterationCap {
        rounds: cfg.max_policy_rounds,
    })
}
