use std::fs;
use std::process::{Command, Output};

fn dagmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dagmine"))
        .args(args)
        .output()
        .expect("run dagmine")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(out: &str, name: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(name))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no {name} in {out}"))
}

#[test]
fn solve_prints_revenue_and_writes_a_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.csv");
    let o = dagmine(&[
        "solve",
        "--model",
        "bitcoin_fee",
        "--tie-break",
        "attacker",
        "--alpha",
        "0.3",
        "--max-fork",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(field(&text, "revenue") > 0.3);
    assert_eq!(field(&text, "honest"), 0.3);
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("model,tie_break_mode,"));
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("bitcoin_fee,attacker,"));
}

#[test]
fn threshold_subcommand() {
    let o = dagmine(&[
        "threshold",
        "--tie-break",
        "random",
        "--max-fork",
        "3",
        "--tolerance",
        "0.01",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("threshold"));
}

#[test]
fn simulate_chain_rollout() {
    let o = dagmine(&[
        "simulate", "--delta", "0.01", "--steps", "20000", "--seed", "3",
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("q_hat"));
    assert_eq!(
        text,
        stdout(&dagmine(&[
            "simulate", "--delta", "0.01", "--steps", "20000", "--seed", "3"
        ]))
    );
}

#[test]
fn simulate_optimal_rollout() {
    let o = dagmine(&[
        "simulate",
        "--rollout",
        "optimal",
        "--model",
        "simplified_colordag",
        "--max-fork",
        "3",
        "--fork-sensitivity",
        "3",
        "--steps",
        "10000",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("rho_hat"));
}

#[test]
fn sweep_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "model = [bitcoin_fee, simplified_colordag]\nalpha = [0.1, 0.3]\nmax_fork = 3\nfork_sensitivity = 3\n",
    )
    .unwrap();
    let out = dir.path().join("a.csv");
    let cache = dir.path().join("cache");
    let run = |out: &std::path::Path| {
        dagmine(&[
            "sweep",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--cache-dir",
            cache.to_str().unwrap(),
        ])
    };
    let o = run(&out);
    assert!(o.status.success(), "{o:?}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep: 4 points"));
    let copy = dir.path().join("b.csv");
    assert!(run(&copy).status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&copy).unwrap());

    let v = dagmine(&["verify", out.to_str().unwrap(), copy.to_str().unwrap()]);
    assert!(v.status.success(), "{v:?}");

    let edited = fs::read_to_string(&copy)
        .unwrap()
        .replacen("first_heard", "worst", 1);
    fs::write(&copy, edited).unwrap();
    let v = dagmine(&["verify", out.to_str().unwrap(), copy.to_str().unwrap()]);
    assert!(!v.status.success());
    assert!(String::from_utf8_lossy(&v.stderr).contains("schema"));
}

#[test]
fn verify_reports_numeric_differences() {
    let dir = tempfile::tempdir().unwrap();
    let header = "model,tie_break_mode,difficulty_source,ledger_function,acceptable_path_param,max_fork,max_pool,fee,guaranteed_fee,alpha,Honest,ARR Revenue,Threshold\n";
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(
        &a,
        format!("{header}bitcoin_fee,random,main,mad,5,5,2,0,0,0.3,0.3,0.31,\n"),
    )
    .unwrap();
    fs::write(
        &b,
        format!("{header}bitcoin_fee,random,main,mad,5,5,2,0,0,0.3,0.3,0.32,\n"),
    )
    .unwrap();
    let strict = dagmine(&["verify", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(stdout(&strict).contains("ARR Revenue"));
    let loose = dagmine(&[
        "verify",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--column-tolerance",
        "ARR Revenue=0.02",
    ]);
    assert!(loose.status.success());
}

#[test]
fn bad_arguments_fail() {
    assert!(!dagmine(&["solve", "--tie-break", "worst"]).status.success());
    assert!(!dagmine(&["solve", "--alpha", "0.7"]).status.success());
    assert!(!dagmine(&["bogus"]).status.success());
}
