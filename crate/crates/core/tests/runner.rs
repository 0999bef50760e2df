use std::fs;
use std::path::Path;

use dagmine::runner::{
    read_sweep_csv, run_sweep, verify_csv, Manifest, RunConfig, Tolerances, COLUMNS, ERROR_MARKER,
};
use dagmine::Error;

fn config(dir: &Path, body: &str) -> RunConfig {
    let text = format!(
        "{body}\nout = {}\ncache_dir = {}\n",
        dir.join("out/sweep.csv").display(),
        dir.join("cache").display()
    );
    RunConfig::parse(&text).unwrap()
}

const SMALL: &str = "model = [bitcoin_fee, simplified_colordag]
tie_break = [first_heard, random, attacker]
alpha = [0.05, 0.3]
fork_sensitivity = 3
max_fork = 3
jobs = 4";

#[test]
fn sweep_rows_follow_the_cross_product() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    assert_eq!(cfg.num_points(), 12);
    let s = run_sweep(&cfg).unwrap();
    assert_eq!((s.points, s.solved, s.failed), (12, 12, 0));
    let rows = read_sweep_csv(&cfg.out).unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0][0], "bitcoin_fee");
    assert_eq!(rows[1][9], "0.3");
    assert_eq!(rows[2][1], "random");
    assert_eq!(rows[11][0], "simplified_colordag");
    for row in &rows {
        assert_eq!(row[12], "");
        let honest: f64 = row[10].parse().unwrap();
        let revenue: f64 = row[11].parse().unwrap();
        assert!(revenue >= honest - 1e-3);
        // Below every threshold here the miner earns its share.
        if row[9] == "0.05" && row[1] != "attacker" {
            assert!((revenue - honest).abs() < 1e-3, "{row:?}");
        }
    }
}

#[test]
fn rerun_is_byte_identical_and_resumes_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let partial = config(
        dir.path(),
        &SMALL.replace("alpha = [0.05, 0.3]", "alpha = 0.3"),
    );
    run_sweep(&partial).unwrap();
    let cfg = config(dir.path(), SMALL);
    let first = run_sweep(&cfg).unwrap();
    assert_eq!((first.solved, first.cached), (6, 6));
    let bytes = fs::read(&cfg.out).unwrap();
    let again = run_sweep(&cfg).unwrap();
    assert_eq!((again.solved, again.cached), (0, 12));
    assert_eq!(fs::read(&cfg.out).unwrap(), bytes);

    let manifest: Manifest =
        serde_json::from_slice(&fs::read(Manifest::path_for(&cfg.out)).unwrap()).unwrap();
    assert_eq!(manifest.points, 12);
    assert!(manifest.entries.iter().all(|e| e.status == "cached"));
    assert!(manifest.entries.iter().all(|e| e.states.unwrap() > 0));
}

#[test]
fn failing_points_are_marked_and_the_sweep_continues() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "model = [bitcoin_fee, chain_colordag]\nmax_fork = 8\nalpha = 0.2",
    );
    let s = run_sweep(&cfg).unwrap();
    assert_eq!((s.solved, s.failed), (1, 1));
    let rows = read_sweep_csv(&cfg.out).unwrap();
    assert_eq!(rows[1][10], ERROR_MARKER);
    assert_eq!(rows[1][11], ERROR_MARKER);
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(Manifest::path_for(&cfg.out)).unwrap()).unwrap();
    assert_eq!(manifest.failed, 1);
    assert!(manifest.entries[1]
        .error
        .as_ref()
        .unwrap()
        .contains("max fork"));
}

#[test]
fn threshold_sweep_fills_only_the_threshold_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "model = bitcoin_fee\nmeasure = threshold\nmax_fork = [2, 4]\ntolerance = 0.01",
    );
    run_sweep(&cfg).unwrap();
    let rows = read_sweep_csv(&cfg.out).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert_eq!(
            (row[9].as_str(), row[10].as_str(), row[11].as_str()),
            ("", "", "")
        );
        let t: f64 = row[12].parse().unwrap();
        assert!((0.0..=0.5).contains(&t));
    }
}

#[test]
fn empty_axis_is_rejected_before_running() {
    let err = RunConfig::parse("model = bitcoin_fee\nledger = []\n").unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

fn write_csv(path: &Path, rows: &[&str]) {
    let mut text = COLUMNS.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn verify_identical_and_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let row = "simplified_colordag,first_heard,main,longest,15,10,2,0,0,,,,0.2340";
    write_csv(&a, &[row]);
    write_csv(&b, &[row]);
    assert!(verify_csv(&a, &b, &Tolerances::default()).unwrap().passed());

    write_csv(
        &b,
        &["simplified_colordag,first_heard,main,longest,15,10,2,0,0,,,,0.2345"],
    );
    let strict = verify_csv(&a, &b, &Tolerances::default()).unwrap();
    assert!(!strict.passed());
    assert_eq!(strict.mismatches[0].column, "Threshold");
    let loose = Tolerances::default().with("Threshold=1e-3").unwrap();
    assert!(verify_csv(&a, &b, &loose).unwrap().passed());

    write_csv(&b, &[row, row]);
    assert!(!verify_csv(&a, &b, &loose).unwrap().passed());
}

#[test]
fn verify_rejects_unknown_enum_values_and_headers() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    write_csv(
        &a,
        &["bitcoin_fee,first_heard,uncontested,longest,5,5,2,0,0,0.1,0.1,0.1,"],
    );
    write_csv(
        &b,
        &["bitcoin_fee,worst,uncontested,longest,5,5,2,0,0,0.1,0.1,0.1,"],
    );
    assert!(matches!(
        verify_csv(&a, &b, &Tolerances::default()),
        Err(Error::Schema(_))
    ));
    fs::write(&b, "model,alpha\nbitcoin_fee,0.1\n").unwrap();
    assert!(matches!(
        verify_csv(&a, &b, &Tolerances::default()),
        Err(Error::Schema(_))
    ));
}
