use std::fs;
use std::process::Command;

use sbh_sim::output::{read_results_file, RESULTS_HEADER};

fn sbh() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sbh"));
    c.env_remove("SBH_OUTPUT_DIR");
    c
}

const SMALL: &[&str] = &["--num-antennas", "8", "--num-mus", "2", "--num-sbs", "1", "--droppings", "3"];

#[test]
fn sweep_writes_every_artifact_and_is_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, workers: &str| {
        let out = dir.path().join(sub);
        let status = sbh()
            .arg("sweep")
            .args(SMALL)
            .args(["--sweep", "gamma_si", "--sweep-values", "1e-9,1e-3", "--workers", workers])
            .arg("--output-dir")
            .arg(&out)
            .output()
            .unwrap();
        assert!(matches!(status.status.code(), Some(0) | Some(2)), "{status:?}");
        out
    };
    let a = run("a", "1");
    let b = run("b", "4");
    for f in ["results.csv", "summary.csv", "total_se.gp", "su_se.gp", "backhaul_power.gp", "run_manifest.txt"] {
        assert!(a.join(f).exists(), "{f} missing");
    }
    assert_eq!(fs::read(a.join("results.csv")).unwrap(), fs::read(b.join("results.csv")).unwrap());
    let rows = read_results_file(&a.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 4 * 2 * 3);
    let text = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER.join(","));
    let manifest = fs::read_to_string(a.join("run_manifest.txt")).unwrap();
    assert!(manifest.lines().any(|l| l == "seed = 1"));
}

#[test]
fn file_env_and_flags_are_layered() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("scenario.conf");
    let from_file = dir.path().join("from_file");
    let from_env = dir.path().join("from_env");
    fs::write(&file, format!("droppings = 1\nschemes = wired_no_mmimo\nseed = 5\noutput-dir = {}\n", from_file.display())).unwrap();
    let status = sbh()
        .args(["sweep", "--num-antennas", "8", "--num-mus", "2", "--num-sbs", "1", "--config"])
        .arg(&file)
        .args(["--droppings", "2"])
        .env("SBH_OUTPUT_DIR", &from_env)
        .status()
        .unwrap();
    assert!(matches!(status.code(), Some(0) | Some(2)));
    assert!(!from_file.exists());
    let rows = read_results_file(&from_env.join("results.csv")).unwrap();
    // the flag beats the file, the file beats the defaults
    assert_eq!(rows.len(), 2);
    assert!(fs::read_to_string(from_env.join("run_manifest.txt")).unwrap().contains("seed = 5"));
}

#[test]
fn config_errors_exit_with_one() {
    let out = sbh().args(["sweep", "--droppings", "zero"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = sbh().args(["sweep", "--num-mus", "200"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = sbh().args(["sweep", "--no-such-flag", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_rows_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = sbh()
        .arg("sweep")
        .args(SMALL)
        .args(["--schemes", "proposed_fd_mmimo", "--r-min-mu", "1000"])
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let rows = read_results_file(&dir.path().join("results.csv")).unwrap();
    assert!(rows.iter().all(|r| r.termination == "infeasible"));
}

#[test]
fn single_and_oracle_run() {
    let out = sbh().args(["single", "--num-antennas", "8", "--num-mus", "1", "--num-sbs", "1"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("true objective per outer step"), "{text}");
    assert!(text.contains("fd_no_mmimo"));
    let out = sbh().args(["oracle", "--num-antennas", "8", "--num-mus", "1", "--num-sbs", "1", "--grid-points", "20"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("grid objective"), "{text}");
}
