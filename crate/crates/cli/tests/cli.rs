use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mxlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mxlearn")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.cfg");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "users = 2\nrx_antennas = 3\ntx_antennas = 2\nalgorithm = mxl0_plus, iwf\niterations = 200\nseeds = 1, 2\n";

#[test]
fn run_writes_one_csv_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = mxlearn(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["mxl0_plus_seed1.csv", "mxl0_plus_seed2.csv", "iwf_seed1.csv", "summary.txt"] {
        assert!(out.join(name).is_file(), "missing {name}");
    }

    let o = mxlearn(&["slope", "--csv", out.join("mxl0_plus_seed1.csv").to_str().unwrap(), "--window", "10,200"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.trim().parse::<f64>().unwrap().is_finite(), "{text}");
}

#[test]
fn seed_override_replaces_seed_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = mxlearn(&["run", "--config", &cfg, "--seed-override", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("mxl0_plus_seed9.csv").is_file());
    assert!(!out.join("mxl0_plus_seed1.csv").exists());
}

#[test]
fn reference_prints_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = mxlearn(&["reference", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().contains("r_star"));
}

#[test]
fn validate_policy_reports_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = mxlearn(&["validate-policy", "--config", &cfg, "--samples", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8(o.stdout).unwrap().contains("H0"));

    let bad = write_config(dir.path(), &format!("{SMALL}policy.family = power_law\npolicy.delta0 = 0.8\n"));
    let o = mxlearn(&["validate-policy", "--config", &bad, "--samples", "200"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn timing_prints_a_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = mxlearn(&["timing", "--config", &cfg, "--antennas", "2,4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("mxl0_plus") || l.starts_with("iwf")).count(), 4, "{text}");
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "users = 2\nusers = 2\n");
    assert_eq!(mxlearn(&["run", "--config", &cfg]).status.code(), Some(1));
    let m1 = write_config(dir.path(), &SMALL.replace("tx_antennas = 2", "tx_antennas = 1"));
    assert_eq!(mxlearn(&["reference", "--config", &m1]).status.code(), Some(1));
    assert_eq!(mxlearn(&["run", "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(mxlearn(&["run"]).status.code(), Some(1));
    assert_eq!(mxlearn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mxlearn(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(mxlearn(&["slope", "--csv", missing.to_str().unwrap(), "--window", "1,10"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = mxlearn(&["run", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
