//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The ordering check between protocols solves models with several hundred
//! thousand states. It only runs when `DAGMINE_SLOW=1` is set.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use dagmine::analysis::{
    honest_utility, optimal_revenue, security_threshold, solve_model, whale_inclusion_rate,
    RevenueCache, ThresholdOptions, ThresholdResult,
};
use dagmine::dag::{
    acceptable_blocks, canonical_chain_first, destructed_blocks, uncontested_blocks, BlockDag,
    BlockSet,
};
use dagmine::mdp::{ratio_value_oracle, SolverConfig};
use dagmine::models::{
    build_model, BuildLimits, DifficultySource, Ledger, ModelKind, ModelParams, TieBreak,
};
use dagmine::runner::{run_sweep, RunConfig};
use dagmine::sim::{simulate_honest, simulate_policy};
use rayon::prelude::*;

// Pinned tolerances.
const WORST_CASE_NC_MAX: f64 = 0.01;
const FIRST_HEARD_NC: (f64, f64) = (0.25, 0.02);
const Q_PUBLISHED: f64 = 0.009_999_01;
const Q_TOL: f64 = 1e-8;
const SIM_SIGMAS: f64 = 3.0;
const ORACLE_TOL: f64 = 1e-3;
const ORACLE_MAX_STATES: usize = 10_000;
const DOMINANCE_REVENUE_TOL: f64 = 1e-4;
const DOMINANCE_THRESHOLD_TOL: f64 = 1e-3;
const DOMINANCE_ALPHA: f64 = 0.3;
const DOMINANCE_WHALE_FEE: f64 = 2.0;
const FAIRNESS_TOL: f64 = 1e-3;
const MAD_GAP: f64 = 0.05;
const THRESHOLD_TOL: f64 = 1e-3;

struct Suite {
    failed: usize,
}

impl Suite {
    fn check(&mut self, name: &str, run: impl FnOnce() -> Result<String, String>) {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    }
}

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cfg() -> SolverConfig<f64> {
    SolverConfig::default()
}

fn threshold(kind: ModelKind, p: &ModelParams<f64>, cache: &RevenueCache) -> ThresholdResult<f64> {
    let opts = ThresholdOptions {
        tolerance: THRESHOLD_TOL,
        ..ThresholdOptions::default()
    };
    security_threshold(
        kind,
        p,
        &cfg(),
        BuildLimits::unlimited(),
        &opts,
        Some(cache),
    )
    .unwrap_or_else(|e| panic!("{e}"))
}

fn fixture(name: &str) -> BlockDag {
    let path = format!("{}/fixtures/{name}.dag", env!("CARGO_MANIFEST_DIR"));
    BlockDag::parse(&fs::read_to_string(path).unwrap()).unwrap()
}

fn names(dag: &BlockDag, set: &BlockSet) -> Vec<String> {
    dag.names(set).into_iter().collect()
}

fn worked_examples() -> Result<String, String> {
    let mut bad = Vec::new();

    let a = fixture("fig1a");
    let chain = canonical_chain_first(&a);
    if names(&a, &destructed_blocks(&a, &chain)) != ["B2", "B3", "B4"] {
        bad.push("equal branches: destructed set");
    }

    let b = fixture("fig1b");
    if !destructed_blocks(&b, &canonical_chain_first(&b)).is_empty() {
        bad.push("shorter branch: destructed set");
    }

    let c = fixture("fig1c");
    let chain = canonical_chain_first(&c);
    let acc = acceptable_blocks(&c, &chain, 5);
    let unc = uncontested_blocks(&c, &acc);
    let contested: BlockSet = acc.difference(&unc).copied().collect();
    if acc.len() != c.len() || names(&c, &contested) != ["B2", "B2'", "B3", "B3'"] {
        bad.push("side branch within N: contested set");
    }

    let d = fixture("fig1d");
    let chain = canonical_chain_first(&d);
    let acc = acceptable_blocks(&d, &chain, 4);
    let all: BlockSet = (0..d.len()).collect();
    let out: BlockSet = all.difference(&acc).copied().collect();
    let unc = uncontested_blocks(&d, &acc);
    if names(&d, &out) != ["B2'", "B3'"] || unc.len() != 6 {
        bad.push("side branch beyond N: acceptable set");
    }

    ensure(
        bad.is_empty(),
        if bad.is_empty() {
            "4 fixtures".into()
        } else {
            bad.join("; ")
        },
    )
}

fn nc(tie_break: TieBreak) -> ModelParams<f64> {
    ModelParams {
        gamma: 0.5,
        max_fork: 10,
        tie_break,
        ..ModelParams::default()
    }
}

fn honest_baseline_check() -> Result<String, String> {
    let q = whale_inclusion_rate(0.01f64, 2);
    let p = ModelParams {
        alpha: 0.25,
        delta: 0.01,
        whale_fee: 2.0,
        max_pool: 2,
        ..ModelParams::default()
    };
    let r = simulate_honest(&p, 1_000_000, 2024).map_err(|e| e.to_string())?;
    let (q_hat, q_se) = (r.q_hat.unwrap(), r.q_stderr.unwrap());
    let u = honest_utility(&p);
    let detail = format!(
        "q={q:.11} q_hat={q_hat:.6}±{q_se:.6} rho={u:.6} rho_hat={:.6}±{:.6}",
        r.rho_hat, r.rho_stderr
    );
    ensure(
        (q - Q_PUBLISHED).abs() <= Q_TOL
            && (q_hat - q).abs() <= SIM_SIGMAS * q_se
            && r.rho_within(u, SIM_SIGMAS),
        detail,
    )
}

fn oracle_grid() -> Vec<(ModelKind, ModelParams<f64>)> {
    let mut grid = Vec::new();
    for tie_break in [TieBreak::FirstHeard, TieBreak::Random, TieBreak::WorstCase] {
        for alpha in [0.1, 0.3, 0.45] {
            for (delta, whale_fee) in [(0.0, 0.0), (0.05, 3.0)] {
                let base = ModelParams {
                    alpha,
                    tie_break,
                    delta,
                    whale_fee,
                    guaranteed_fee: 0.1,
                    ..ModelParams::default()
                };
                for l in [2, 4, 6] {
                    grid.push((
                        ModelKind::Nc,
                        ModelParams {
                            max_fork: l,
                            ..base
                        },
                    ));
                }
                for difficulty_source in
                    [DifficultySource::Uncontested, DifficultySource::Canonical]
                {
                    for ledger in [Ledger::Canonical, Ledger::Mad] {
                        let p = ModelParams {
                            max_fork: 2,
                            fork_sensitivity: 3,
                            difficulty_source,
                            ledger,
                            ..base
                        };
                        grid.push((ModelKind::UpperBound, p));
                        grid.push((ModelKind::Full, p));
                    }
                }
            }
        }
    }
    grid
}

fn oracle_agreement() -> Result<String, String> {
    let grid = oracle_grid();
    let results: Vec<Result<Option<f64>, String>> = grid
        .par_iter()
        .map(|(kind, p)| {
            let m = build_model(*kind, p, BuildLimits::unlimited()).map_err(|e| e.to_string())?;
            if m.mdp.num_states() > ORACLE_MAX_STATES {
                return Ok(None);
            }
            let rev = solve_model(&m, &cfg()).map_err(|e| e.to_string())?;
            let exact = ratio_value_oracle(&m.mdp, &rev.policy).map_err(|e| e.to_string())?;
            Ok(Some((rev.ratio - exact).abs()))
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for ((kind, p), r) in grid.iter().zip(&results) {
        match r {
            Ok(Some(gap)) => {
                checked += 1;
                if *gap > ORACLE_TOL {
                    return Err(format!("{kind} {p:?}: gap {gap:.2e}"));
                }
                worst = worst.max(*gap);
            }
            Ok(None) => {}
            Err(e) => return Err(format!("{kind}: {e}")),
        }
    }
    Ok(format!("{checked} instances, max gap {worst:.2e}"))
}

fn dominance() -> Result<String, String> {
    let mut grid = Vec::new();
    for l in 1..=3 {
        for tie_break in [TieBreak::FirstHeard, TieBreak::Random, TieBreak::WorstCase] {
            for difficulty_source in [DifficultySource::Uncontested, DifficultySource::Canonical] {
                for ledger in [Ledger::Canonical, Ledger::Mad] {
                    for delta in [0.0, 0.01] {
                        grid.push(ModelParams {
                            alpha: DOMINANCE_ALPHA,
                            gamma: 0.5,
                            delta,
                            whale_fee: DOMINANCE_WHALE_FEE,
                            fork_sensitivity: 5,
                            max_fork: l,
                            max_pool: 2,
                            tie_break,
                            difficulty_source,
                            ledger,
                            ..ModelParams::default()
                        });
                    }
                }
            }
        }
    }
    let cache = RevenueCache::new();
    let results: Vec<Result<(), String>> = grid
        .par_iter()
        .map(|p| {
            let rev = |kind| {
                optimal_revenue(kind, p, &cfg(), BuildLimits::unlimited())
                    .map(|r| r.ratio)
                    .map_err(|e| e.to_string())
            };
            let (ub, full) = (rev(ModelKind::UpperBound)?, rev(ModelKind::Full)?);
            if ub < full - DOMINANCE_REVENUE_TOL {
                return Err(format!("revenue {ub:.6} < {full:.6} at {p:?}"));
            }
            let tu = threshold(ModelKind::UpperBound, p, &cache).threshold;
            let tf = threshold(ModelKind::Full, p, &cache).threshold;
            if tu > tf + DOMINANCE_THRESHOLD_TOL {
                return Err(format!("threshold {tu:.4} > {tf:.4} at {p:?}"));
            }
            Ok(())
        })
        .collect();
    let errors: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    ensure(
        errors.is_empty(),
        if errors.is_empty() {
            format!("{} configurations at alpha={DOMINANCE_ALPHA}", grid.len())
        } else {
            format!("{} violations, first: {}", errors.len(), errors[0])
        },
    )
}

#[derive(Clone, Copy)]
struct Protocol {
    name: &'static str,
    kind: ModelKind,
    difficulty_source: DifficultySource,
    ledger: Ledger,
}

const NC_PROTOCOL: Protocol = Protocol {
    name: "NC",
    kind: ModelKind::Nc,
    difficulty_source: DifficultySource::Uncontested,
    ledger: Ledger::Canonical,
};
const COLORDAG: Protocol = Protocol {
    name: "Colordag",
    kind: ModelKind::UpperBound,
    difficulty_source: DifficultySource::Uncontested,
    ledger: Ledger::Canonical,
};
const CANONICAL_DAG: Protocol = Protocol {
    name: "Canonical-DAG",
    kind: ModelKind::UpperBound,
    difficulty_source: DifficultySource::Canonical,
    ledger: Ledger::Canonical,
};
const MAD_DAG: Protocol = Protocol {
    name: "MAD-DAG",
    kind: ModelKind::UpperBound,
    difficulty_source: DifficultySource::Canonical,
    ledger: Ledger::Mad,
};

impl Protocol {
    fn params(self, tie_break: TieBreak, fork_sensitivity: u32, delta: f64) -> ModelParams<f64> {
        ModelParams {
            gamma: 0.5,
            delta,
            whale_fee: if delta > 0.0 { 2.0 } else { 0.0 },
            fork_sensitivity,
            max_fork: 10,
            max_pool: 2,
            tie_break,
            difficulty_source: self.difficulty_source,
            ledger: self.ledger,
            ..ModelParams::default()
        }
    }
}

fn fairness(cache: &RevenueCache) -> Result<String, String> {
    let mut cases = Vec::new();
    for proto in [NC_PROTOCOL, COLORDAG, CANONICAL_DAG, MAD_DAG] {
        for tie_break in [TieBreak::FirstHeard, TieBreak::Random, TieBreak::WorstCase] {
            cases.push((proto, tie_break));
        }
    }
    let results: Vec<Result<(usize, usize), String>> = cases
        .par_iter()
        .map(|&(proto, tie_break)| {
            let p = proto.params(tie_break, 15, 0.0);
            let t = threshold(proto.kind, &p, cache).threshold;
            let (mut checked, mut skipped) = (0, 0);
            for alpha in [0.05, 0.15] {
                if alpha >= t {
                    skipped += 1;
                    continue;
                }
                let q = ModelParams { alpha, ..p };
                let r = optimal_revenue(proto.kind, &q, &cfg(), BuildLimits::unlimited())
                    .map_err(|e| e.to_string())?;
                if (r.ratio - r.honest).abs() > FAIRNESS_TOL {
                    return Err(format!(
                        "{} {tie_break} alpha={alpha}: {:.6} vs honest {:.6} (threshold {t:.4})",
                        proto.name, r.ratio, r.honest
                    ));
                }
                checked += 1;
            }
            Ok((checked, skipped))
        })
        .collect();
    let (mut checked, mut skipped) = (0, 0);
    for r in results {
        let (c, s) = r?;
        checked += c;
        skipped += s;
    }
    ensure(
        checked > 0,
        format!("{checked} points at honest rate, {skipped} at or above threshold"),
    )
}

fn ordering(cache: &RevenueCache) -> Result<String, String> {
    let fh = TieBreak::FirstHeard;
    let runs = [
        (NC_PROTOCOL, fh, 15, 0.0),
        (COLORDAG, fh, 15, 0.0),
        (CANONICAL_DAG, fh, 15, 0.0),
        (COLORDAG, fh, 25, 0.0),
        (CANONICAL_DAG, TieBreak::Random, 15, 0.01),
        (MAD_DAG, TieBreak::Random, 15, 0.01),
    ];
    let t: Vec<f64> = runs
        .par_iter()
        .map(|&(proto, tie, n, delta)| {
            threshold(proto.kind, &proto.params(tie, n, delta), cache).threshold
        })
        .collect();
    let detail = format!(
        "NC {:.4}, Colordag {:.4} (N=25: {:.4}), Canonical-DAG {:.4}; delta=0.01 random: Canonical-DAG {:.4}, MAD-DAG {:.4}",
        t[0], t[1], t[3], t[2], t[4], t[5]
    );
    let slack = THRESHOLD_TOL;
    ensure(
        t[2] >= t[1] - slack && t[3] >= t[0] - slack && t[5] >= t[4] + MAD_GAP,
        detail,
    )
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |tag: &str| -> Result<Vec<u8>, String> {
        let text = format!(
            "model = [bitcoin_fee, simplified_colordag, chain_colordag]\n\
             tie_break = [first_heard, attacker]\nalpha = [0.1, 0.35]\ndelta = [0, 0.02]\n\
             whale_fee = 3\nmax_fork = 3\nfork_sensitivity = 3\njobs = 4\n\
             out = {0}/{tag}.csv\ncache_dir = {0}/cache-{tag}\n",
            dir.path().display()
        );
        let cfg = RunConfig::parse(&text).map_err(|e| e.to_string())?;
        let s = run_sweep(&cfg).map_err(|e| e.to_string())?;
        if s.failed > 0 {
            return Err(format!("{} failed points", s.failed));
        }
        fs::read(&cfg.out).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a")?, run("b")?);
    if a != b {
        return Err("sweep reruns differ".into());
    }

    let p = ModelParams {
        alpha: 0.3,
        delta: 0.05,
        whale_fee: 3.0,
        max_fork: 3,
        fork_sensitivity: 3,
        ..ModelParams::default()
    };
    let h = |seed| simulate_honest(&p, 100_000, seed).unwrap();
    let m = build_model(ModelKind::UpperBound, &p, BuildLimits::unlimited()).unwrap();
    let pol = solve_model(&m, &cfg()).unwrap().policy;
    let r = |seed| simulate_policy(&m.mdp, &pol, 100_000, seed).unwrap();
    let bits = |x: f64| x.to_bits();
    let same = bits(h(5).rho_hat) == bits(h(5).rho_hat)
        && h(5) == h(5)
        && bits(r(8).rho_hat) == bits(r(8).rho_hat)
        && r(8) == r(8);
    ensure(
        same,
        format!("{} CSV bytes identical, seeded rollouts identical", a.len()),
    )
}

fn main() -> ExitCode {
    let mut suite = Suite { failed: 0 };
    let cache = RevenueCache::new();

    suite.check("dag rules reproduce the worked examples", worked_examples);
    suite.check("NC worst-case threshold at L=10", || {
        let t = threshold(ModelKind::Nc, &nc(TieBreak::WorstCase), &cache);
        ensure(
            t.threshold <= WORST_CASE_NC_MAX,
            format!("{:.4}", t.threshold),
        )
    });
    suite.check("NC first-heard threshold at L=10, gamma=0.5", || {
        let t = threshold(ModelKind::Nc, &nc(TieBreak::FirstHeard), &cache);
        let (want, tol) = FIRST_HEARD_NC;
        ensure(
            (t.threshold - want).abs() <= tol,
            format!("{:.4}", t.threshold),
        )
    });
    suite.check(
        "honest baseline closed form and simulation",
        honest_baseline_check,
    );
    suite.check("solver agrees with the stationary oracle", oracle_agreement);
    suite.check("upper bound dominates the full model", dominance);
    suite.check("below threshold the optimum is honest", || fairness(&cache));
    suite.check("sweeps and seeded rollouts are deterministic", determinism);
    if std::env::var("DAGMINE_SLOW").as_deref() == Ok("1") {
        suite.check("protocol ordering of thresholds", || ordering(&cache));
    } else {
        println!("SKIP protocol ordering of thresholds: set DAGMINE_SLOW=1");
    }

    if suite.failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", suite.failed);
        ExitCode::FAILURE
    }
}
