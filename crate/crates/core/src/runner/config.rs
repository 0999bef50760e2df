//! Sweep configuration files.
//!
//! The format is flat `key = value` text, one key per line. Any sweep axis
//! may hold a list written `key = [v1, v2, ...]`. `#` starts a comment.
//!
//! | key | kind | default |
//! |-----|------|---------|
//! | `model` | axis of `bitcoin_fee`, `chain_colordag`, `simplified_colordag` | required |
//! | `tie_break` | axis of `first_heard`, `random`, `attacker` | `first_heard` |
//! | `difficulty_source` | axis of `uncontested`, `main` | `uncontested` |
//! | `ledger` | axis of `longest`, `mad` | `longest` |
//! | `fork_sensitivity` | integer axis | 5 |
//! | `max_fork` | integer axis | 5 |
//! | `max_pool` | integer axis | 2 |
//! | `whale_fee` | number axis | 0 |
//! | `guaranteed_fee` | number axis | 0 |
//! | `gamma` | number axis | 0.5 |
//! | `delta` | number axis | 0 |
//! | `alpha` | number axis (ignored in threshold sweeps) | 0.25 |
//! | `measure` | `revenue` or `threshold` | `revenue` |
//! | `horizon`, `precision` | solver numbers | 100000, 0.00001 |
//! | `tolerance` | threshold bracket width | 0.001 |
//! | `seed` | integer | 0 |
//! | `jobs` | worker threads | 1 |
//! | `out` | CSV path | `sweep.csv` |
//! | `cache_dir` | directory of cached solves | `.dagmine-cache` |

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mdp::SolverConfig;
use crate::models::{DifficultySource, Ledger, ModelKind, ModelParams, TieBreak};

/// What each sweep point computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Honest utility and optimal revenue at every `alpha`.
    Revenue,
    /// Security threshold; the `alpha` axis is not swept.
    Threshold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub models: Vec<ModelKind>,
    pub tie_breaks: Vec<TieBreak>,
    pub difficulty_sources: Vec<DifficultySource>,
    pub ledgers: Vec<Ledger>,
    pub fork_sensitivities: Vec<u32>,
    pub max_forks: Vec<u32>,
    pub max_pools: Vec<u32>,
    pub whale_fees: Vec<f64>,
    pub guaranteed_fees: Vec<f64>,
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub measure: Measure,
    pub solver: SolverConfig<f64>,
    pub tolerance: f64,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    pub cache_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::<f64>::default();
        Self {
            models: Vec::new(),
            tie_breaks: vec![p.tie_break],
            difficulty_sources: vec![p.difficulty_source],
            ledgers: vec![p.ledger],
            fork_sensitivities: vec![p.fork_sensitivity],
            max_forks: vec![p.max_fork],
            max_pools: vec![p.max_pool],
            whale_fees: vec![p.whale_fee],
            guaranteed_fees: vec![p.guaranteed_fee],
            gammas: vec![p.gamma],
            deltas: vec![p.delta],
            alphas: vec![p.alpha],
            measure: Measure::Revenue,
            solver: SolverConfig::default(),
            tolerance: 1e-3,
            seed: 0,
            jobs: 1,
            out: PathBuf::from("sweep.csv"),
            cache_dir: PathBuf::from(".dagmine-cache"),
        }
    }
}

/// One point of the sweep cross-product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub model: ModelKind,
    pub params: ModelParams<f64>,
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    let raw = raw.trim();
    let body = match raw.strip_prefix('[') {
        Some(rest) => rest
            .strip_suffix(']')
            .ok_or_else(|| Error::Config(format!("{key}: unterminated list")))?,
        None => raw,
    };
    let items: Vec<&str> = body
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::Config(format!("{key}: axis is empty")));
    }
    items
        .into_iter()
        .map(|s| {
            s.parse()
                .map_err(|e| Error::Config(format!("{key}: bad value {s:?}: {e}")))
        })
        .collect()
}

fn parse_one<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: Display,
{
    let mut v = parse_list(key, raw)?;
    if v.len() != 1 {
        return Err(Error::Config(format!("{key}: expected a single value")));
    }
    Ok(v.remove(0))
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "revenue" => Ok(Measure::Revenue),
            "threshold" => Ok(Measure::Threshold),
            other => Err(Error::Config(format!(
                "unknown measure {other:?}; expected revenue or threshold"
            ))),
        }
    }
}

impl RunConfig {
    /// Parses config text. Later keys override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut cfg = RunConfig::default();
        for (key, value) in &entries {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "model" => self.models = parse_list(key, v)?,
            "tie_break" => self.tie_breaks = parse_list(key, v)?,
            "difficulty_source" => self.difficulty_sources = parse_list(key, v)?,
            "ledger" => self.ledgers = parse_list(key, v)?,
            "fork_sensitivity" => self.fork_sensitivities = parse_list(key, v)?,
            "max_fork" => self.max_forks = parse_list(key, v)?,
            "max_pool" => self.max_pools = parse_list(key, v)?,
            "whale_fee" => self.whale_fees = parse_list(key, v)?,
            "guaranteed_fee" => self.guaranteed_fees = parse_list(key, v)?,
            "gamma" => self.gammas = parse_list(key, v)?,
            "delta" => self.deltas = parse_list(key, v)?,
            "alpha" => self.alphas = parse_list(key, v)?,
            "measure" => self.measure = parse_one(key, v)?,
            "horizon" => self.solver.horizon = parse_one(key, v)?,
            "precision" => self.solver.precision = parse_one(key, v)?,
            "tolerance" => self.tolerance = parse_one(key, v)?,
            "seed" => self.seed = parse_one(key, v)?,
            "jobs" => self.jobs = parse_one(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "cache_dir" => self.cache_dir = PathBuf::from(v),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("model", self.models.len()),
            ("tie_break", self.tie_breaks.len()),
            ("difficulty_source", self.difficulty_sources.len()),
            ("ledger", self.ledgers.len()),
            ("fork_sensitivity", self.fork_sensitivities.len()),
            ("max_fork", self.max_forks.len()),
            ("max_pool", self.max_pools.len()),
            ("whale_fee", self.whale_fees.len()),
            ("guaranteed_fee", self.guaranteed_fees.len()),
            ("gamma", self.gammas.len()),
            ("delta", self.deltas.len()),
            ("alpha", self.alphas.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|(_, n)| *n == 0) {
            return Err(Error::Config(format!("{name}: axis is empty")));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        self.solver.validate()?;
        for point in self.points() {
            point.params.validate()?;
        }
        Ok(())
    }

    /// The cross-product in output order; `alpha` varies fastest.
    pub fn points(&self) -> Vec<SweepPoint> {
        let alphas = match self.measure {
            Measure::Revenue => self.alphas.clone(),
            Measure::Threshold => vec![ModelParams::<f64>::default().alpha],
        };
        let mut out = Vec::new();
        for &model in &self.models {
            for &tie_break in &self.tie_breaks {
                for &difficulty_source in &self.difficulty_sources {
                    for &ledger in &self.ledgers {
                        for &fork_sensitivity in &self.fork_sensitivities {
                            for &max_fork in &self.max_forks {
                                for &max_pool in &self.max_pools {
                                    for &whale_fee in &self.whale_fees {
                                        for &guaranteed_fee in &self.guaranteed_fees {
                                            for &gamma in &self.gammas {
                                                for &delta in &self.deltas {
                                                    for &alpha in &alphas {
                                                        out.push(SweepPoint {
                                                            model,
                                                            params: ModelParams {
                                                                alpha,
                                                                gamma,
                                                                delta,
                                                                whale_fee,
                                                                guaranteed_fee,
                                                                fork_sensitivity,
                                                                max_fork,
                                                                max_pool,
                                                                tie_break,
                                                                difficulty_source,
                                                                ledger,
                                                            },
                                                        });
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn num_points(&self) -> usize {
        self.points().len()
    }

    /// Canonical text of everything that affects the results.
    pub fn canonical(&self) -> String {
        fn list<T: Display>(v: &[T]) -> String {
            let items: Vec<String> = v.iter().map(ToString::to_string).collect();
            format!("[{}]", items.join(", "))
        }
        let measure = match self.measure {
            Measure::Revenue => "revenue",
            Measure::Threshold => "threshold",
        };
        [
            format!("model = {}", list(&self.models)),
            format!("tie_break = {}", list(&self.tie_breaks)),
            format!("difficulty_source = {}", list(&self.difficulty_sources)),
            format!("ledger = {}", list(&self.ledgers)),
            format!("fork_sensitivity = {}", list(&self.fork_sensitivities)),
            format!("max_fork = {}", list(&self.max_forks)),
            format!("max_pool = {}", list(&self.max_pools)),
            format!("whale_fee = {}", list(&self.whale_fees)),
            format!("guaranteed_fee = {}", list(&self.guaranteed_fees)),
            format!("gamma = {}", list(&self.gammas)),
            format!("delta = {}", list(&self.deltas)),
            format!("alpha = {}", list(&self.alphas)),
            format!("measure = {measure}"),
            format!("horizon = {}", self.solver.horizon),
            format!("precision = {}", self.solver.precision),
            format!("tolerance = {}", self.tolerance),
            format!("seed = {}", self.seed),
        ]
        .join("\n")
    }
}
