use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mixident"))
        .args(args)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(out.stdout).unwrap();
    let report = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (
        out.status.code().unwrap(),
        report,
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes the m = 2 pair into `dir` and returns the two paths.
fn m2_pair(dir: &TempDir) -> (PathBuf, PathBuf) {
    let left = dir.path().join("pair_P.json");
    let right = dir.path().join("pair_Q.json");
    let (code, _, _) = run(&[
        "construct",
        "--m",
        "2",
        "--out-left",
        p(&left),
        "--out-right",
        p(&right),
    ]);
    assert_eq!(code, 0);
    (left, right)
}

#[test]
fn construct_reports_witness() {
    let (code, report, _) = run(&["construct", "--m", "2"]);
    assert_eq!(code, 0);
    assert_eq!(report["command"], "construct");
    assert_eq!(report["outputs"]["alpha"], json!(["-1", "3", "-3", "1"]));
    assert_eq!(report["outputs"]["residual_equal"], "0");
    assert_eq!(report["outputs"]["gap"], "1/18");
    for key in ["inputs", "outputs", "timings", "seed"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn report_round_trips() {
    let (_, report, _) = run(&["construct", "--m", "3"]);
    let text = serde_json::to_string(&report).unwrap();
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap(), report);
}

#[test]
fn check_and_certify_pair() {
    let dir = TempDir::new().unwrap();
    let (left, right) = m2_pair(&dir);

    let (code, report, _) = run(&["check", "--left", p(&left), "--right", p(&right), "--n", "2"]);
    assert_eq!(code, 0);
    assert_eq!(report["outputs"]["verdict"], "equal");
    assert_eq!(report["outputs"]["backend"], "rational");

    let (code, report, _) = run(&["check", "--left", p(&left), "--right", p(&right), "--n", "3"]);
    assert_eq!(code, 1);
    assert_eq!(report["outputs"]["verdict"], "different");
    assert_eq!(report["outputs"]["max_abs"], "1/18");

    let (code, report, _) = run(&["certify", "--left", p(&left), "--right", p(&right), "--n", "3"]);
    assert_eq!(code, 0);
    assert_eq!(report["outputs"]["certificate"]["rank"], 4);

    let (code, report, _) = run(&["certify", "--left", p(&left), "--right", p(&right), "--n", "2"]);
    assert_eq!(code, 2);
    assert_eq!(report["outputs"]["verdict"], "inconclusive");

    let (code, report, _) = run(&["certify", "--left", p(&left), "--right", p(&left), "--n", "3"]);
    assert_eq!(code, 1);
    assert_eq!(report["outputs"]["verdict"], "identical");
}

#[test]
fn float_files_fall_back_to_f64() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("float.json");
    let text = json!({"d": 2, "weights": [0.1, 0.2, 0.7000000000000001], "components": [[0.5, 0.5], [1.0, 0.0], [0.25, 0.75]]});
    std::fs::write(&path, text.to_string()).unwrap();
    let (code, report, _) = run(&["check", "--left", p(&path), "--right", p(&path), "--n", "3"]);
    assert_eq!(code, 0);
    assert_eq!(report["outputs"]["backend"], "f64");
}

#[test]
fn search_exit_codes() {
    let dir = TempDir::new().unwrap();
    let (left, _) = m2_pair(&dir);
    let (code, report, _) = run(&["search", "--target", p(&left), "--n", "2", "--restarts", "16"]);
    assert_eq!(code, 1);
    assert_eq!(report["outputs"]["verdict"], "confusable_alternative_found");
    assert!(report["outputs"]["separation"].as_f64().unwrap() >= 0.05);

    let (code, report, _) = run(&["search", "--target", p(&left), "--n", "3", "--restarts", "16"]);
    assert_eq!(code, 0);
    assert_eq!(report["outputs"]["verdict"], "no_alternative_found");

    // Below the identifying order a search that misses the threshold proves nothing.
    let (code, _, _) = run(&[
        "search",
        "--target",
        p(&left),
        "--n",
        "2",
        "--restarts",
        "4",
        "--threshold=-1",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn search_is_reproducible_and_mode_independent() {
    let dir = TempDir::new().unwrap();
    let (left, _) = m2_pair(&dir);
    let args = [
        "search",
        "--target",
        p(&left),
        "--n",
        "3",
        "--restarts",
        "8",
        "--seed",
        "5",
    ];
    let (_, a, _) = run(&args);
    let (_, b, _) = run(&[&args[..], &["--sequential"]].concat());
    assert_eq!(a["outputs"], b["outputs"]);
}

#[test]
fn reduce_binomial_pmfs() {
    let dir = TempDir::new().unwrap();
    let (left, right) = m2_pair(&dir);
    for path in [&left, &right] {
        let (code, report, _) = run(&["reduce-binomial", "--mixture", p(path), "--n", "2"]);
        assert_eq!(code, 0);
        assert_eq!(report["outputs"]["pmf"], json!(["1/3", "1/3", "1/3"]));
    }
    let (_, a, _) = run(&["reduce-binomial", "--mixture", p(&left), "--n", "3"]);
    let (_, b, _) = run(&["reduce-binomial", "--mixture", p(&right), "--n", "3"]);
    assert_eq!(a["outputs"]["pmf"][3], "2/9");
    assert_eq!(b["outputs"]["pmf"][3], "5/18");
}

#[test]
fn simulate_writes_datasets() {
    let dir = TempDir::new().unwrap();
    let (left, _) = m2_pair(&dir);
    let csv = dir.path().join("groups.csv");
    let (code, report, _) = run(&[
        "simulate",
        "--mixture",
        p(&left),
        "--n",
        "3",
        "--groups",
        "500",
        "--seed",
        "4",
        "--out",
        p(&csv),
    ]);
    assert_eq!(code, 0);
    assert_eq!(report["outputs"]["groups"], 500);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("x1,x2,x3"));
    assert_eq!(text.lines().count(), 501);

    let jsonl = dir.path().join("groups.jsonl");
    run(&[
        "simulate",
        "--mixture",
        p(&left),
        "--n",
        "3",
        "--groups",
        "500",
        "--seed",
        "4",
        "--out",
        p(&jsonl),
    ]);
    let rows: Vec<Value> = std::fs::read_to_string(&jsonl)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let csv_rows: Vec<Vec<u64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 500);
    for (row, expected) in rows.iter().zip(&csv_rows) {
        assert_eq!(row["group"], json!(expected));
    }
}

#[test]
fn lemma_tests_pass() {
    let (code, report, _) = run(&["lemma-tests", "--trials", "200", "--seed", "1"]);
    assert_eq!(code, 0);
    assert_eq!(report["outputs"]["passed"], true);
}

#[test]
fn malformed_input_exits_64() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"d\": 2,").unwrap();
    let (code, report, stderr) = run(&["check", "--left", p(&bad), "--right", p(&bad), "--n", "2"]);
    assert_eq!(code, 64);
    assert!(report["outputs"]["error"].is_string());
    assert!(!stderr.is_empty());

    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["reduce-binomial", "--mixture", p(&missing), "--n", "2"]).0, 64);
    assert_eq!(run(&["construct", "--m", "0"]).0, 64);
    assert_eq!(run(&["no-such-command"]).0, 64);
}

#[test]
fn invariant_violation_exits_65() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("mass.json");
    std::fs::write(
        &path,
        json!({"d": 2, "weights": [0.5, 0.4], "components": [[1, 0], [0, 1]]}).to_string(),
    )
    .unwrap();
    let (code, _, _) = run(&["check", "--left", p(&path), "--right", p(&path), "--n", "2"]);
    assert_eq!(code, 65);
}
