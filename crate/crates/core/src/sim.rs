//! Seeded Monte Carlo rollouts.
//!
//! Standard errors use batch means over [`BATCHES`] equal batches since
//! consecutive steps of a rollout are correlated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{ActionIndex, Mdp, StateId};
use crate::models::ModelParams;
use crate::scalar::Scalar;

pub const BATCHES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimReport {
    /// Blocks mined (honest rollouts) or MDP steps taken (policy rollouts).
    pub steps: u64,
    /// Whale transactions per block. Only known for honest rollouts.
    pub q_hat: Option<f64>,
    pub q_stderr: Option<f64>,
    /// Revenue per unit of difficulty.
    pub rho_hat: f64,
    pub rho_stderr: f64,
    pub total_reward: f64,
    pub total_difficulty: f64,
}

impl SimReport {
    /// Whether `value` lies within `k` standard errors of the estimated rate.
    pub fn rho_within(&self, value: f64, k: f64) -> bool {
        (self.rho_hat - value).abs() <= k * self.rho_stderr
    }
}

/// Per-batch sums of a ratio estimator.
#[derive(Debug, Default)]
struct Batches {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl Batches {
    fn with_capacity(n: usize) -> Self {
        Self {
            num: Vec::with_capacity(n),
            den: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, num: f64, den: f64) {
        self.num.push(num);
        self.den.push(den);
    }

    fn totals(&self) -> (f64, f64) {
        (self.num.iter().sum(), self.den.iter().sum())
    }

    /// Ratio of totals and its batch-means standard error (delta method).
    fn ratio(&self) -> (f64, f64) {
        let (num, den) = self.totals();
        let ratio = num / den;
        let b = self.num.len() as f64;
        if self.num.len() < 2 {
            return (ratio, 0.0);
        }
        let mean_den = den / b;
        let ss: f64 = self
            .num
            .iter()
            .zip(&self.den)
            .map(|(n, d)| (n - ratio * d).powi(2))
            .sum();
        (ratio, (ss / (b * (b - 1.0))).sqrt() / mean_den)
    }
}

/// Splits `n` steps into at most [`BATCHES`] batches of near-equal size.
fn batch_sizes(n: u64) -> impl Iterator<Item = u64> {
    let b = n.min(BATCHES);
    (0..b).map(move |i| n / b + u64::from(i < n % b))
}

/// Simulates mining where everyone follows the protocol and a miner with
/// share `alpha` collects its blocks' rewards.
///
/// Whales arrive between blocks: before each block, with probability
/// `delta / (1 + delta)` a whale joins the pool instead (unless the pool is
/// full). Every block takes one whale if the pool has any.
pub fn simulate_honest<T: Scalar>(
    params: &ModelParams<T>,
    n_blocks: u64,
    seed: u64,
) -> Result<SimReport> {
    params.validate()?;
    if n_blocks == 0 {
        return Err(Error::InvalidParams("need at least one block".into()));
    }
    let alpha = params.alpha.to_f64_lossy();
    let delta = params.delta.to_f64_lossy();
    let f = params.guaranteed_fee.to_f64_lossy();
    let whale_fee = params.whale_fee.to_f64_lossy();
    let arrival = delta / (1.0 + delta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = 0u32;
    let mut whales = Batches::with_capacity(BATCHES as usize);
    let mut revenue = Batches::with_capacity(BATCHES as usize);
    for size in batch_sizes(n_blocks) {
        let (mut w, mut r) = (0.0, 0.0);
        for _ in 0..size {
            while pool < params.max_pool && rng.gen::<f64>() < arrival {
                pool += 1;
            }
            let whale = pool > 0;
            if whale {
                pool -= 1;
                w += 1.0;
            }
            if rng.gen::<f64>() < alpha {
                r += 1.0 + f + if whale { whale_fee } else { 0.0 };
            }
        }
        whales.push(w, size as f64);
        revenue.push(r, size as f64);
    }
    let (q_hat, q_stderr) = whales.ratio();
    let (rho_hat, rho_stderr) = revenue.ratio();
    let (total_reward, total_difficulty) = revenue.totals();
    Ok(SimReport {
        steps: n_blocks,
        q_hat: Some(q_hat),
        q_stderr: Some(q_stderr),
        rho_hat,
        rho_stderr,
        total_reward,
        total_difficulty,
    })
}

/// Rolls `mdp` forward from its initial state under `policy`.
///
/// The MDP must be an untransformed model (no absorbing terminal state).
pub fn simulate_policy<T: Scalar>(
    mdp: &Mdp<T>,
    policy: &[ActionIndex],
    n_steps: u64,
    seed: u64,
) -> Result<SimReport> {
    mdp.check_policy(policy)?;
    if mdp.terminal().is_some() {
        return Err(Error::InvalidMdp(
            "simulation needs the untransformed model".into(),
        ));
    }
    if n_steps == 0 {
        return Err(Error::InvalidParams("need at least one step".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state: StateId = mdp.initial();
    let mut batches = Batches::with_capacity(BATCHES as usize);
    for size in batch_sizes(n_steps) {
        let (mut r, mut d) = (0.0, 0.0);
        for _ in 0..size {
            let outs = mdp.transitions(state, policy[state as usize]);
            let mut u = rng.gen::<f64>();
            let mut pick = &outs[outs.len() - 1];
            for t in outs {
                let p = t.prob.to_f64_lossy();
                if u < p {
                    pick = t;
                    break;
                }
                u -= p;
            }
            r += pick.reward.to_f64_lossy();
            d += pick.difficulty.to_f64_lossy();
            state = pick.next;
        }
        batches.push(r, d);
    }
    let (total_reward, total_difficulty) = batches.totals();
    if total_difficulty <= 0.0 {
        return Err(Error::NoDifficulty { steps: n_steps });
    }
    let (rho_hat, rho_stderr) = batches.ratio();
    Ok(SimReport {
        steps: n_steps,
        q_hat: None,
        q_stderr: None,
        rho_hat,
        rho_stderr,
        total_reward,
        total_difficulty,
    })
}
