//! Honest baseline, optimal revenue and security-threshold search.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::mdp::{policy_iteration, pto_transform, Policy, SolverConfig};
use crate::models::{build_model, BuildLimits, BuiltModel, ModelKind, ModelParams};
use crate::scalar::Scalar;

/// Average number of whale transactions per honest block when whales arrive
/// at intensity `delta` per block and at most `max_pool` wait at a time.
///
/// This is the stationary probability that the pool is non-empty in the
/// birth-death chain that moves up with `delta/(1+delta)` and down otherwise.
pub fn whale_inclusion_rate<T: Scalar>(delta: T, max_pool: u32) -> T {
    if delta == T::zero() {
        return T::zero();
    }
    // q = (d - d^(m+1)) / (1 - d^(m+1)), written as a ratio of geometric sums
    // so that d = 1 needs no special case.
    let mut term = T::one();
    let mut total = T::one();
    for _ in 0..max_pool {
        term *= delta;
        total += term;
    }
    (total - T::one()) / total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HonestBaseline<T> {
    /// Whale transactions per block.
    pub q: T,
    /// Stationary probability of an empty pool.
    pub p0: T,
    /// Revenue rate of honest mining.
    pub utility: T,
}

pub fn honest_baseline<T: Scalar>(params: &ModelParams<T>) -> HonestBaseline<T> {
    let q = whale_inclusion_rate(params.delta, params.max_pool);
    HonestBaseline {
        q,
        p0: T::one() - q,
        utility: params.alpha * (T::one() + params.guaranteed_fee + q * params.whale_fee),
    }
}

pub fn honest_utility<T: Scalar>(params: &ModelParams<T>) -> T {
    honest_baseline(params).utility
}

/// Result of solving one model instance.
#[derive(Debug, Clone)]
pub struct Revenue<T> {
    /// Optimal revenue rate.
    pub ratio: T,
    pub honest: T,
    /// Optimal action per model state.
    pub policy: Policy,
    pub states: usize,
    pub transitions: usize,
    pub rounds: usize,
}

impl<T: Scalar> Revenue<T> {
    /// Whether the optimum beats honest mining by more than `margin`.
    pub fn profitable(&self, margin: T) -> bool {
        self.ratio > self.honest + margin
    }
}

fn describe<T: Scalar>(kind: ModelKind, p: &ModelParams<T>) -> String {
    format!(
        "model={kind} alpha={} gamma={} delta={} F={} f={} N={} L={} max_pool={} tie={} difficulty={} ledger={}",
        p.alpha, p.gamma, p.delta, p.whale_fee, p.guaranteed_fee, p.fork_sensitivity,
        p.max_fork, p.max_pool, p.tie_break, p.difficulty_source, p.ledger
    )
}

/// Solves an already built model.
pub fn solve_model<T: Scalar>(model: &BuiltModel<T>, cfg: &SolverConfig<T>) -> Result<Revenue<T>> {
    let wrap = |e: Error| Error::Solve {
        params: describe(model.kind, &model.params),
        source: Box::new(e),
    };
    let ssp = pto_transform(&model.mdp, cfg).map_err(wrap)?;
    let solved = policy_iteration(&ssp, cfg).map_err(wrap)?;
    let n = model.mdp.num_states();
    Ok(Revenue {
        ratio: solved.ratio,
        honest: honest_utility(&model.params),
        policy: solved.policy[..n].to_vec(),
        states: n,
        transitions: model.mdp.num_transitions(),
        rounds: solved.iterations,
    })
}

/// Builds, transforms and solves one instance.
pub fn optimal_revenue<T: Scalar>(
    kind: ModelKind,
    params: &ModelParams<T>,
    cfg: &SolverConfig<T>,
    limits: BuildLimits,
) -> Result<Revenue<T>> {
    let model = build_model(kind, params, limits).map_err(|e| Error::Solve {
        params: describe(kind, params),
        source: Box::new(e),
    })?;
    solve_model(&model, cfg)
}

/// Memo of solved revenue rates keyed by the full parameter vector.
#[derive(Debug, Default)]
pub struct RevenueCache {
    entries: Mutex<HashMap<String, (f64, f64)>>,
}

impl RevenueCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Canonical text of everything that affects a solve.
    pub fn key<T: Scalar>(kind: ModelKind, p: &ModelParams<T>, cfg: &SolverConfig<T>) -> String {
        let bits = |x: T| format!("{:016x}", x.to_f64_lossy().to_bits());
        format!(
            "{kind}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
            bits(p.alpha),
            bits(p.gamma),
            bits(p.delta),
            bits(p.whale_fee),
            bits(p.guaranteed_fee),
            p.fork_sensitivity,
            p.max_fork,
            p.max_pool,
            p.tie_break,
            p.difficulty_source,
            p.ledger,
            bits(cfg.horizon),
            bits(cfg.precision),
            bits(cfg.linear_tolerance),
        )
    }

    fn get(&self, key: &str) -> Option<(f64, f64)> {
        self.entries.lock().expect("cache lock").get(key).copied()
    }

    fn insert(&self, key: String, value: (f64, f64)) {
        self.entries.lock().expect("cache lock").insert(key, value);
    }
}

/// One bisection probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe<T> {
    pub alpha: T,
    pub revenue: T,
    pub honest: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult<T> {
    /// Smallest probed power at which deviating pays, up to `bracket`.
    pub threshold: T,
    /// Width of the final bracket.
    pub bracket: T,
    /// False when no profitable deviation exists below 0.5; the threshold is
    /// then reported as 0.5.
    pub found: bool,
    pub probes: Vec<Probe<T>>,
}

impl<T: Scalar> fmt::Display for ThresholdResult<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.found {
            write!(f, "{} (bracket {})", self.threshold, self.bracket)
        } else {
            write!(
                f,
                "{} (no profitable deviation found below 0.5)",
                self.threshold
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOptions<T> {
    /// Bisection stops once the bracket is at most this wide.
    pub tolerance: T,
    /// Revenue must exceed honest utility by more than this to count.
    pub margin: T,
}

impl<T: Scalar> Default for ThresholdOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(1e-3),
            margin: T::lit(1e-6),
        }
    }
}

/// Bisects the mining power over [0, 0.5] for the smallest profitable `alpha`.
/// The `alpha` of `template` is ignored.
pub fn security_threshold<T: Scalar>(
    kind: ModelKind,
    template: &ModelParams<T>,
    cfg: &SolverConfig<T>,
    limits: BuildLimits,
    opts: &ThresholdOptions<T>,
    cache: Option<&RevenueCache>,
) -> Result<ThresholdResult<T>> {
    if !(opts.tolerance > T::zero()) {
        return Err(Error::InvalidParams(
            "threshold tolerance must be positive".into(),
        ));
    }
    let mut probes = Vec::new();
    let mut probe = |alpha: T| -> Result<bool> {
        let params = ModelParams { alpha, ..*template };
        let key = RevenueCache::key(kind, &params, cfg);
        let (revenue, honest) = match cache.and_then(|c| c.get(&key)) {
            Some((r, h)) => (T::lit(r), T::lit(h)),
            None => {
                let rev = optimal_revenue(kind, &params, cfg, limits)?;
                if let Some(c) = cache {
                    c.insert(key, (rev.ratio.to_f64_lossy(), rev.honest.to_f64_lossy()));
                }
                (rev.ratio, rev.honest)
            }
        };
        probes.push(Probe {
            alpha,
            revenue,
            honest,
        });
        Ok(revenue > honest + opts.margin)
    };

    let half = T::lit(0.5);
    let (mut lo, mut hi) = (T::zero(), half);
    if !probe(hi)? {
        return Ok(ThresholdResult {
            threshold: half,
            bracket: T::zero(),
            found: false,
            probes,
        });
    }
    while hi - lo > opts.tolerance {
        let mid = (lo + hi) / T::lit(2.0);
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdResult {
        threshold: hi,
        bracket: hi - lo,
        found: true,
        probes,
    })
}
