use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dagmine::analysis::{
    honest_baseline, optimal_revenue, security_threshold, RevenueCache, ThresholdOptions,
};
use dagmine::mdp::SolverConfig;
use dagmine::models::{
    build_model, BuildLimits, DifficultySource, Ledger, ModelKind, ModelParams, TieBreak,
    MEMORY_BUDGET_ENV,
};
use dagmine::runner::{run_sweep, verify_csv, Cell, RunConfig, SweepRecord, Tolerances, COLUMNS};
use dagmine::sim::{simulate_honest, simulate_policy, SimReport};

#[derive(Parser)]
#[command(
    name = "dagmine",
    version,
    about = "Selfish-mining revenue and security thresholds for chains and block DAGs",
    after_help = format!(
        "Set {MEMORY_BUDGET_ENV} to cap the memory a single model may use (MiB)."
    )
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal revenue of one instance.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Also write the result as a one-row sweep CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest mining power at which deviating pays.
    Threshold {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Width of the final bisection bracket.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep from a config file.
    Sweep {
        config: PathBuf,
        /// Overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `cache_dir` in the config.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Overrides `jobs` in the config.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Monte Carlo rollout.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_enum, default_value_t = Rollout::Chain)]
        rollout: Rollout,
        /// Blocks (chain rollout) or MDP steps.
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare a sweep CSV with a golden file.
    Verify {
        file: PathBuf,
        golden: PathBuf,
        /// Absolute tolerance for numeric columns.
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
        /// Per-column overrides, e.g. `Threshold=1e-3,ARR Revenue=1e-6`.
        #[arg(long, default_value = "")]
        column_tolerance: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rollout {
    /// Honest mining with whale arrivals, no MDP.
    Chain,
    /// The model's honest-mimicking policy.
    Honest,
    /// The solved optimal policy.
    Optimal,
}

#[derive(Args)]
struct ModelArgs {
    /// bitcoin_fee, chain_colordag or simplified_colordag.
    #[arg(long, default_value = "bitcoin_fee")]
    model: ModelKind,
    /// first_heard, random or attacker.
    #[arg(long, default_value = "first_heard")]
    tie_break: TieBreak,
    /// uncontested or main.
    #[arg(long, default_value = "uncontested")]
    difficulty_source: DifficultySource,
    /// longest or mad.
    #[arg(long, default_value = "longest")]
    ledger: Ledger,
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    whale_fee: f64,
    #[arg(long, default_value_t = 0.0)]
    guaranteed_fee: f64,
    #[arg(long, default_value_t = 5)]
    fork_sensitivity: u32,
    #[arg(long, default_value_t = 5)]
    max_fork: u32,
    #[arg(long, default_value_t = 2)]
    max_pool: u32,
}

impl ModelArgs {
    fn params(&self) -> ModelParams<f64> {
        ModelParams {
            alpha: self.alpha,
            gamma: self.gamma,
            delta: self.delta,
            whale_fee: self.whale_fee,
            guaranteed_fee: self.guaranteed_fee,
            fork_sensitivity: self.fork_sensitivity,
            max_fork: self.max_fork,
            max_pool: self.max_pool,
            tie_break: self.tie_break,
            difficulty_source: self.difficulty_source,
            ledger: self.ledger,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Expected difficulty before termination in the transformed model.
    #[arg(long, default_value_t = 100_000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.00001)]
    precision: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig<f64> {
        SolverConfig {
            horizon: self.horizon,
            precision: self.precision,
            ..SolverConfig::default()
        }
    }
}

fn write_single(out: &PathBuf, rec: &SweepRecord) -> Result<()> {
    let mut w =
        csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(COLUMNS)?;
    w.write_record(rec.row())?;
    w.flush()?;
    Ok(())
}

fn print_sim(r: &SimReport) {
    println!("steps        {}", r.steps);
    if let (Some(q), Some(se)) = (r.q_hat, r.q_stderr) {
        println!("q_hat        {q} (se {se})");
    }
    println!("rho_hat      {} (se {})", r.rho_hat, r.rho_stderr);
    println!("reward       {}", r.total_reward);
    println!("difficulty   {}", r.total_difficulty);
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { model, solver, out } => {
            let params = model.params();
            let rev = optimal_revenue(
                model.model,
                &params,
                &solver.config(),
                BuildLimits::from_env(),
            )?;
            println!("revenue      {}", rev.ratio);
            println!("honest       {}", rev.honest);
            println!("states       {}", rev.states);
            println!("transitions  {}", rev.transitions);
            println!("rounds       {}", rev.rounds);
            if let Some(out) = out {
                write_single(
                    &out,
                    &SweepRecord {
                        model: model.model,
                        params,
                        has_alpha: true,
                        honest: Cell::Value(rev.honest),
                        revenue: Cell::Value(rev.ratio),
                        threshold: Cell::Empty,
                    },
                )?;
            }
        }
        Command::Threshold {
            model,
            solver,
            tolerance,
            out,
        } => {
            let params = model.params();
            let opts = ThresholdOptions {
                tolerance,
                ..ThresholdOptions::default()
            };
            let cache = RevenueCache::new();
            let t = security_threshold(
                model.model,
                &params,
                &solver.config(),
                BuildLimits::from_env(),
                &opts,
                Some(&cache),
            )?;
            for p in &t.probes {
                println!(
                    "probe alpha={} revenue={} honest={}",
                    p.alpha, p.revenue, p.honest
                );
            }
            println!("threshold    {t}");
            if let Some(out) = out {
                write_single(
                    &out,
                    &SweepRecord {
                        model: model.model,
                        params,
                        has_alpha: false,
                        honest: Cell::Empty,
                        revenue: Cell::Empty,
                        threshold: Cell::Value(t.threshold),
                    },
                )?;
            }
        }
        Command::Sweep {
            config,
            out,
            cache_dir,
            jobs,
        } => {
            let mut cfg = RunConfig::load(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            if let Some(out) = out {
                cfg.out = out;
            }
            if let Some(dir) = cache_dir {
                cfg.cache_dir = dir;
            }
            if let Some(jobs) = jobs {
                cfg.jobs = jobs;
            }
            eprintln!("sweep: {} points", cfg.num_points());
            let s = run_sweep(&cfg)?;
            eprintln!(
                "sweep: {} solved, {} cached, {} failed; wrote {} and {}",
                s.solved,
                s.cached,
                s.failed,
                s.out.display(),
                s.manifest.display()
            );
            if s.failed > 0 {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Simulate {
            model,
            solver,
            rollout,
            steps,
            seed,
        } => {
            let params = model.params();
            let report = match rollout {
                Rollout::Chain => {
                    let base = honest_baseline(&params);
                    println!("q            {}", base.q);
                    println!("honest       {}", base.utility);
                    simulate_honest(&params, steps, seed)?
                }
                Rollout::Honest => {
                    let m = build_model(model.model, &params, BuildLimits::from_env())?;
                    println!("honest       {}", honest_baseline(&params).utility);
                    simulate_policy(&m.mdp, &m.mdp.honest_policy(), steps, seed)?
                }
                Rollout::Optimal => {
                    let m = build_model(model.model, &params, BuildLimits::from_env())?;
                    let rev = dagmine::analysis::solve_model(&m, &solver.config())?;
                    println!("revenue      {}", rev.ratio);
                    simulate_policy(&m.mdp, &rev.policy, steps, seed)?
                }
            };
            print_sim(&report);
        }
        Command::Verify {
            file,
            golden,
            tolerance,
            column_tolerance,
        } => {
            if !(tolerance >= 0.0) {
                bail!("tolerance must be non-negative");
            }
            let tol = Tolerances::uniform(tolerance).with(&column_tolerance)?;
            let report = verify_csv(&file, &golden, &tol)?;
            if report.rows != report.golden_rows {
                println!(
                    "row count differs: {} vs {} golden",
                    report.rows, report.golden_rows
                );
            }
            for m in &report.mismatches {
                println!(
                    "row {} {}: got {:?}, expected {:?}",
                    m.row, m.column, m.got, m.expected
                );
            }
            if report.passed() {
                println!("ok: {} rows match", report.rows);
            } else {
                println!("FAILED");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
