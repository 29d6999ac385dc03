use std::path::Path;
use std::process::Command;

fn run(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_binilasso"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn simulate(dir: &Path, n: &str) {
    let (code, _, err) = run(dir, &["simulate", "--scenario", "1", "--n", n, "--seed", "3", "--out", "data.csv"]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn simulate_writes_data_truth_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "200");
    for f in ["data.csv", "data.csv.truth.json", "data.csv.manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("data.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn fit_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "300");
    let (code, _, err) = run(d, &["fit", "--input", "data.csv", "--bins", "10", "--folds", "5", "--evaluate", "--out", "report.json"]);
    assert_eq!(code, 0, "{err}");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "bini");
    assert!(d.join("report.json.evaluation.json").exists());

    let (code, stdout, err) = run(d, &["evaluate", "--input", "data.csv", "--report", "report.json"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("ibs"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "100");
    assert_eq!(run(d, &["screen", "--input", "data.csv", "--top", "0"]).0, 1);
    assert_eq!(run(d, &["fit", "--input", "data.csv", "--time", "survival"]).0, 1);
    assert_eq!(run(d, &["fit", "--input", "missing.csv"]).0, 1);
    assert_eq!(run(d, &["fit", "--input", "data.csv", "--method", "mini", "--max-cuts", "2", "--mode", "one-step"]).0, 1);
    assert_eq!(run(d, &["fit", "--input", "data.csv", "--threads", "0"]).0, 1);
    assert_eq!(run(d, &["frobnicate"]).0, 1);
    assert_eq!(run(d, &["--help"]).0, 0);
}

#[test]
fn logs_stay_off_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "200");
    let (code, stdout, _) = run(d, &["screen", "--input", "data.csv", "--top", "1"]);
    assert_eq!(code, 0);
    assert!(stdout.lines().next().unwrap().starts_with("feature,"));
}

#[test]
fn benchmark_writes_one_csv_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (code, _, err) = run(
        d,
        &["benchmark", "--scenario", "1,3", "--n", "200", "--replicates", "2", "--bins", "10", "--folds", "3", "--out", "bench"],
    );
    assert_eq!(code, 0, "{err}");
    for f in ["scenario_1.csv", "scenario_3.csv", "summary.csv", "failures.csv", "manifest.json"] {
        assert!(d.join("bench").join(f).exists(), "{f} missing");
    }
    assert!(!d.join("bench/timing.csv").exists());
}
