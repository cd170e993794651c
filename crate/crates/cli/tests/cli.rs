use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn icmen() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_icmen"));
    cmd.env_remove("ICMEN_WORKERS").env("RUST_LOG", "error");
    cmd
}

fn check(out: Output) -> Output {
    assert!(
        out.status.success(),
        "icmen failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Generates a small SBM edge list in `dir`.
fn fixture(dir: &Path) -> PathBuf {
    let path = dir.join("sbm.txt");
    check(
        icmen()
            .args(["generate", "sbm", "--nodes", "40", "--events", "2000", "--seed", "3", "-o"])
            .arg(&path)
            .output()
            .unwrap(),
    );
    path
}

const SMALL: &[&str] = &[
    "--dims", "8", "--walk-length", "20", "--min-walk-length", "3", "--walks-per-node", "4", "--window", "4",
    "--reps", "1", "--seed", "5", "--deterministic",
];

fn run(input: &Path, out: &Path, extra: &[&str]) -> Output {
    icmen()
        .arg("run")
        .arg("--input")
        .arg(input)
        .args(["--dataset", "sbm"])
        .arg("--out")
        .arg(out)
        .args(SMALL)
        .args(extra)
        .output()
        .unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fixed_alpha_run_writes_every_artifact() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path());
    let out = tmp.path().join("out");
    check(run(&input, &out, &["--splits", "2", "--strategy", "fixed", "--alpha", "0.5,0.5", "--compare-baseline"]));
    let cell = out.join("sbm/static-walk/n=2");
    assert!(cell.join("config.toml").is_file());
    assert!(cell.join("metrics.json").is_file());
    let rep = cell.join("rep=0");
    for name in [
        "snapshot_1.emb",
        "snapshot_1.bin",
        "snapshot_2.emb",
        "calibration_1.map",
        "calibration_2.bin",
        "alpha.json",
        "combined.emb",
        "combined.bin",
        "availability.csv",
        "baseline.emb",
        "metrics.json",
        "timings.json",
    ] {
        assert!(rep.join(name).is_file(), "missing {name}");
    }
    let alpha = json(&rep.join("alpha.json"));
    assert_eq!(alpha["alpha"], serde_json::json!([0.5, 0.5]));
    let metrics = json(&cell.join("metrics.json"));
    for key in ["auc_mean", "baseline_auc_mean"] {
        let auc = metrics[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc), "{key} = {auc}");
    }
    let header = fs::read_to_string(rep.join("availability.csv")).unwrap();
    assert!(header.starts_with("node,availability\n"));
}

#[test]
fn dirichlet_increasing_reports_beta_and_simplex_alpha() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path());
    let out = tmp.path().join("out");
    check(run(&input, &out, &["--splits", "3", "--k", "3", "--strategy", "dirichlet-increasing"]));
    let alpha = json(&out.join("sbm/static-walk/n=3/rep=0/alpha.json"));
    assert_eq!(alpha["beta"], serde_json::json!([1.0, 2.0, 3.0]));
    let weights: Vec<f64> = alpha["alpha"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(weights.len(), 3);
    assert!(weights.iter().all(|&w| w >= 0.0));
    assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(alpha["D"].as_array().unwrap().len(), 3);
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    check(run(&input, &a, &["--splits", "2", "--method", "temporal-walk"]));
    check(run(&input, &b, &["--splits", "2", "--method", "temporal-walk"]));
    for rel in ["metrics.json", "rep=0/metrics.json", "rep=0/combined.emb", "rep=0/alpha.json"] {
        let x = fs::read(a.join("sbm/temporal-walk/n=2").join(rel)).unwrap();
        let y = fs::read(b.join("sbm/temporal-walk/n=2").join(rel)).unwrap();
        assert!(x == y, "{rel} differs between runs");
    }
}

#[test]
fn baseline_only_skips_incremental_artifacts() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path());
    let out = tmp.path().join("out");
    check(run(&input, &out, &["--splits", "2", "--baseline-only"]));
    let rep = out.join("sbm/static-walk/n=2/rep=0");
    assert!(rep.join("baseline.emb").is_file());
    assert!(!rep.join("combined.emb").exists());
    assert!(!rep.join("snapshot_1.emb").exists());
}

#[test]
fn failed_run_exits_nonzero_and_leaves_marker() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("tiny.txt");
    // every event shares one timestamp, so the history cannot be cut into snapshots
    fs::write(&input, "1 2 5\n2 3 5\n3 4 5\n4 1 5\n1 3 5\n2 4 5\n").unwrap();
    let out = tmp.path().join("out");
    let res = run(&input, &out, &["--splits", "3"]);
    assert!(!res.status.success());
    let marker = out.join("sbm/static-walk/n=3/FAILED");
    assert!(marker.is_file(), "no FAILED marker");
    assert!(!fs::read_to_string(marker).unwrap().trim().is_empty());
}

#[test]
fn invalid_flags_are_rejected_before_running() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path());
    let out = tmp.path().join("out");
    let res = run(&input, &out, &["--splits", "2", "--strategy", "fixed", "--alpha", "0.7,0.7"]);
    assert!(!res.status.success());
    assert!(!out.exists());
    let res = icmen().args(["run", "--strategy", "sometimes"]).output().unwrap();
    assert!(!res.status.success());
}

#[test]
fn effective_config_round_trips() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path());
    let out = tmp.path().join("out");
    check(run(&input, &out, &["--splits", "2", "--ref-count", "6", "--ridge-lambda", "0.01"]));
    let written = out.join("sbm/static-walk/n=2/config.toml");
    let text = fs::read_to_string(&written).unwrap();
    assert!(text.contains("lambda = 0.01"));
    // rerunning from the written config reproduces the metrics exactly
    let again = tmp.path().join("again");
    check(
        icmen()
            .arg("run")
            .arg("--config")
            .arg(&written)
            .arg("--out")
            .arg(&again)
            .output()
            .unwrap(),
    );
    let x = fs::read(out.join("sbm/static-walk/n=2/metrics.json")).unwrap();
    let y = fs::read(again.join("sbm/static-walk/n=2/metrics.json")).unwrap();
    assert!(x == y);
}

#[test]
fn aggregate_flattens_cells_to_csv() {
    let tmp = TempDir::new().unwrap();
    let input = fixture(tmp.path());
    let out = tmp.path().join("out");
    check(run(&input, &out, &["--splits", "2"]));
    check(run(&input, &out, &["--splits", "3"]));
    let csv = tmp.path().join("all.csv");
    check(icmen().arg("aggregate").arg(&out).arg("-o").arg(&csv).output().unwrap());
    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("dataset,"));
}
