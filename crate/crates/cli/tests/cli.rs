//! End-to-end runs of the `subspace` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 12] = [
    "-s", "model=iid-uniform", "-s", "s=800", "-s", "n=16", "-s", "schedule=16,4,2", "-s", "queries=20", "-s",
    "calibration_sample=60",
];

fn subspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subspace")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn with_small<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(SMALL.iter()).chain(tail).copied().collect()
}

#[test]
fn build_reports_diversion_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = subspace(&with_small(&["build"], &["-s", "norms=2", "--out", out]));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let orth: Vec<&str> = lines[1].split('\t').collect();
    let adapt: Vec<&str> = lines[2].split('\t').collect();
    assert_eq!((orth[0], orth[2]), ("orthogonal", "0e0"));
    assert_eq!(adapt[0], "adaptive");
    assert!(adapt[2].parse::<f64>().unwrap() < 0.05);
    assert!(dir.path().join("adaptive-l2.idx").exists());
}

#[test]
fn build_rejects_indivisible_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let o = subspace(&["build", "-s", "schedule=64,15", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not divisible"));
}

fn build_and_generate(dir: &Path) {
    let o = subspace(&with_small(&["build"], &["-s", "norms=1", "-s", "modes=orthogonal", "--out", dir.to_str().unwrap()]));
    assert!(o.status.success(), "{}", stderr(&o));
    let q = dir.join("q.csv");
    let o = subspace(&["generate", "-s", "model=iid-uniform", "-s", "s=3", "-s", "n=16", "-s", "data_seed=5", "--out", q.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn query_prints_matches_and_counters() {
    let dir = tempfile::tempdir().unwrap();
    build_and_generate(dir.path());
    let index = dir.path().join("orthogonal-l1.idx");
    let q = dir.path().join("q.csv");
    let o = subspace(&["query", "-i", index.to_str().unwrap(), "-q", q.to_str().unwrap(), "-e", "3.0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("\"query\"").count(), 3);
    for key in ["matches", "survivors", "cost_s", "operations", "cost_l", "ratio"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn query_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    build_and_generate(dir.path());
    let index = dir.path().join("orthogonal-l1.idx");
    let wrong = dir.path().join("wrong.csv");
    fs::write(&wrong, "1,2,3\n").unwrap();
    let o = subspace(&["query", "-i", index.to_str().unwrap(), "-q", wrong.to_str().unwrap(), "-e", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension mismatch"));
    let o = subspace(&["query", "-i", "/nonexistent.idx", "-q", wrong.to_str().unwrap(), "-e", "1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_writes_sorted_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.conf");
    fs::write(&config, "# small run\nnorms = inf, 1\ntarget_nn = 8\n").unwrap();
    let report = dir.path().join("r.csv");
    let args = with_small(
        &["bench", "--config", config.to_str().unwrap()],
        &["--output", report.to_str().unwrap()],
    );
    let o = subspace(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("mode,p,epsilon,queries,mean_cost_s"));
    let cells: Vec<String> = lines[1..].iter().map(|l| l.split(',').take(2).collect::<Vec<_>>().join(" ")).collect();
    assert_eq!(cells, ["orthogonal 1", "orthogonal inf", "adaptive 1", "adaptive inf"]);
    // Same config, same bytes.
    let again = dir.path().join("again.csv");
    let args = with_small(&["bench", "--config", config.to_str().unwrap()], &["--output", again.to_str().unwrap()]);
    assert!(subspace(&args).status.success());
    assert_eq!(fs::read(&report).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn config_shows_every_seed() {
    let o = subspace(&["config", "-s", "query_seed=42"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["data_seed", "calibration_seed", "query_seed = 42"] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn bad_input_exits_with_one() {
    assert_eq!(subspace(&["config", "-s", "bogus=1"]).status.code(), Some(1));
    assert_eq!(subspace(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(subspace(&["--help"]).status.code(), Some(0));
}

#[test]
fn reference_rows_are_printed() {
    let o = subspace(&["reference"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("4584277") && text.contains("42.47") && text.contains("inf"));
}
