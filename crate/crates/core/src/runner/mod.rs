//! Batch experiments: parameter sweeps with an on-disk solve cache.
//!
//! A sweep writes one CSV row per point of the configured cross-product, in
//! cross-product order, plus a JSON manifest next to the CSV
//! (`<out>.manifest.json`) carrying solver metadata and per-point errors.
//! Solved points are cached under `cache_dir`, one file per point named by
//! the SHA-256 of the point's canonical parameters and [`CACHE_VERSION`], so
//! an interrupted sweep resumes where it stopped.

pub mod config;
pub mod record;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{optimal_revenue, security_threshold, RevenueCache, ThresholdOptions};
use crate::error::{Error, Result};
use crate::models::BuildLimits;

pub use config::{Measure, RunConfig, SweepPoint};
pub use record::{
    read_sweep_csv, verify_csv, Cell, Mismatch, SweepRecord, Tolerances, VerifyReport, COLUMNS,
    ERROR_MARKER,
};

/// Part of every cache key; bump when model semantics change.
pub const CACHE_VERSION: &str = concat!("dagmine-", env!("CARGO_PKG_VERSION"), "-cache-2");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Solved {
    Revenue {
        /// `f64::to_bits` so the cache round-trips exactly.
        ratio_bits: u64,
        honest_bits: u64,
        states: usize,
        transitions: usize,
        rounds: usize,
    },
    Threshold {
        threshold_bits: u64,
        bracket_bits: u64,
        found: bool,
        probes: usize,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    solved: Solved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub index: usize,
    pub params: String,
    pub cache_key: String,
    /// `solved`, `cached` or `error`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transitions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_found: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: String,
    pub points: usize,
    pub failed: usize,
    pub horizon: f64,
    pub precision: f64,
    pub linear_tolerance: f64,
    pub threshold_tolerance: f64,
    pub entries: Vec<ManifestPoint>,
}

impl Manifest {
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    }
}

/// Textual parameter vector of one point, also the cache-key preimage.
fn point_text(point: &SweepPoint, cfg: &RunConfig) -> String {
    let p = &point.params;
    let measure = match cfg.measure {
        Measure::Revenue => format!("revenue alpha={}", p.alpha),
        Measure::Threshold => format!("threshold tolerance={}", cfg.tolerance),
    };
    format!(
        "{} model={} tie_break={} difficulty_source={} ledger={} fork_sensitivity={} \
         max_fork={} max_pool={} whale_fee={} guaranteed_fee={} gamma={} delta={} \
         horizon={} precision={} linear_tolerance={} {measure}",
        CACHE_VERSION,
        point.model,
        p.tie_break,
        p.difficulty_source,
        p.ledger,
        p.fork_sensitivity,
        p.max_fork,
        p.max_pool,
        p.whale_fee,
        p.guaranteed_fee,
        p.gamma,
        p.delta,
        cfg.solver.horizon,
        cfg.solver.precision,
        cfg.solver.linear_tolerance,
    )
}

fn cache_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn load_cached(dir: &Path, key: &str) -> Option<Solved> {
    let raw = fs::read_to_string(dir.join(format!("{key}.json"))).ok()?;
    let entry: CacheEntry = serde_json::from_str(&raw).ok()?;
    (entry.key == key).then_some(entry.solved)
}

fn store_cached(dir: &Path, key: &str, solved: Solved) -> Result<()> {
    let entry = CacheEntry {
        key: key.to_string(),
        solved,
    };
    let tmp = dir.join(format!("{key}.json.tmp"));
    fs::write(&tmp, serde_json::to_vec_pretty(&entry)?)?;
    fs::rename(tmp, dir.join(format!("{key}.json")))?;
    Ok(())
}

fn solve_point(point: &SweepPoint, cfg: &RunConfig, memo: &RevenueCache) -> Result<Solved> {
    let limits = BuildLimits::from_env();
    match cfg.measure {
        Measure::Revenue => {
            let rev = optimal_revenue(point.model, &point.params, &cfg.solver, limits)?;
            Ok(Solved::Revenue {
                ratio_bits: rev.ratio.to_bits(),
                honest_bits: rev.honest.to_bits(),
                states: rev.states,
                transitions: rev.transitions,
                rounds: rev.rounds,
            })
        }
        Measure::Threshold => {
            let opts = ThresholdOptions {
                tolerance: cfg.tolerance,
                ..ThresholdOptions::default()
            };
            let t = security_threshold(
                point.model,
                &point.params,
                &cfg.solver,
                limits,
                &opts,
                Some(memo),
            )?;
            Ok(Solved::Threshold {
                threshold_bits: t.threshold.to_bits(),
                bracket_bits: t.bracket.to_bits(),
                found: t.found,
                probes: t.probes.len(),
            })
        }
    }
}

fn record_for(point: &SweepPoint, measure: Measure, solved: Option<&Solved>) -> SweepRecord {
    let mut rec = SweepRecord {
        model: point.model,
        params: point.params,
        has_alpha: measure == Measure::Revenue,
        honest: Cell::Empty,
        revenue: Cell::Empty,
        threshold: Cell::Empty,
    };
    match (measure, solved) {
        (
            _,
            Some(Solved::Revenue {
                ratio_bits,
                honest_bits,
                ..
            }),
        ) => {
            rec.honest = Cell::Value(f64::from_bits(*honest_bits));
            rec.revenue = Cell::Value(f64::from_bits(*ratio_bits));
        }
        (_, Some(Solved::Threshold { threshold_bits, .. })) => {
            rec.threshold = Cell::Value(f64::from_bits(*threshold_bits));
        }
        (Measure::Revenue, None) => {
            rec.honest = Cell::Failed;
            rec.revenue = Cell::Failed;
        }
        (Measure::Threshold, None) => rec.threshold = Cell::Failed,
    }
    rec
}

/// Summary of a finished sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub out: PathBuf,
    pub manifest: PathBuf,
    pub points: usize,
    pub solved: usize,
    pub cached: usize,
    pub failed: usize,
}

/// Runs every point of `cfg`, writing the CSV as rows complete.
///
/// Up to `cfg.jobs` points are solved at once; rows are still written in
/// cross-product order. A failing point gets [`ERROR_MARKER`] cells and an
/// entry in the manifest, and the sweep goes on.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    let points = cfg.points();
    fs::create_dir_all(&cfg.cache_dir)?;
    if let Some(parent) = cfg.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let memo = RevenueCache::new();

    let mut writer = csv::Writer::from_path(&cfg.out)?;
    writer.write_record(COLUMNS)?;
    writer.flush()?;
    let mut entries = Vec::with_capacity(points.len());
    let (mut solved_n, mut cached_n, mut failed_n) = (0, 0, 0);

    for (chunk_no, chunk) in points.chunks(cfg.jobs).enumerate() {
        let results: Vec<(String, String, Result<(Solved, bool)>)> = pool.install(|| {
            chunk
                .par_iter()
                .map(|point| {
                    let text = point_text(point, cfg);
                    let key = cache_key(&text);
                    let result = match load_cached(&cfg.cache_dir, &key) {
                        Some(s) => Ok((s, true)),
                        None => solve_point(point, cfg, &memo).and_then(|s| {
                            store_cached(&cfg.cache_dir, &key, s)?;
                            Ok((s, false))
                        }),
                    };
                    (text, key, result)
                })
                .collect()
        });
        for (i, (point, (text, key, result))) in chunk.iter().zip(results).enumerate() {
            let index = chunk_no * cfg.jobs + i;
            let mut entry = ManifestPoint {
                index,
                params: text,
                cache_key: key,
                status: String::new(),
                error: None,
                states: None,
                transitions: None,
                rounds: None,
                threshold_found: None,
            };
            let solved = match result {
                Ok((s, cached)) => {
                    if cached {
                        cached_n += 1;
                        entry.status = "cached".into();
                    } else {
                        solved_n += 1;
                        entry.status = "solved".into();
                    }
                    match s {
                        Solved::Revenue {
                            states,
                            transitions,
                            rounds,
                            ..
                        } => {
                            entry.states = Some(states);
                            entry.transitions = Some(transitions);
                            entry.rounds = Some(rounds);
                        }
                        Solved::Threshold { found, .. } => entry.threshold_found = Some(found),
                    }
                    Some(s)
                }
                Err(e) => {
                    failed_n += 1;
                    entry.status = "error".into();
                    entry.error = Some(e.to_string());
                    None
                }
            };
            writer.write_record(record_for(point, cfg.measure, solved.as_ref()).row())?;
            entries.push(entry);
        }
        writer.flush()?;
    }
    drop(writer);

    let manifest = Manifest {
        version: CACHE_VERSION.to_string(),
        config: cfg.canonical(),
        points: points.len(),
        failed: failed_n,
        horizon: cfg.solver.horizon,
        precision: cfg.solver.precision,
        linear_tolerance: cfg.solver.linear_tolerance,
        threshold_tolerance: cfg.tolerance,
        entries,
    };
    let manifest_path = Manifest::path_for(&cfg.out);
    let mut f = fs::File::create(&manifest_path)?;
    f.write_all(&serde_json::to_vec_pretty(&manifest)?)?;
    f.write_all(b"\n")?;
    Ok(SweepSummary {
        out: cfg.out.clone(),
        manifest: manifest_path,
        points: points.len(),
        solved: solved_n,
        cached: cached_n,
        failed: failed_n,
    })
}
