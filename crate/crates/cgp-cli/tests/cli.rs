//! End-to-end tests of the `cgp` binary and its file formats.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cgp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = cgp(dir, args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn simulate_small(dir: &Path) {
    run_ok(
        dir,
        &[
            "simulate",
            "--n",
            "30",
            "--n-pred",
            "12",
            "--p",
            "50",
            "--tau",
            "0.02",
            "--seed",
            "1",
            "--out",
            "train.csv",
            "--test-out",
            "test.csv",
        ],
    );
}

#[test]
fn simulate_writes_expected_shape_and_is_byte_deterministic() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    run_ok(
        dir,
        &[
            "simulate", "--n", "20", "--p", "10", "--tau", "0", "--seed", "5", "--out", "a.csv",
        ],
    );
    let a = fs::read_to_string(dir.join("a.csv")).unwrap();
    let mut lines = a.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 11);
    assert!(header.starts_with("y,x1,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 20);
    // tau = 0 zeroes every coordinate beyond the manifold embedding.
    for row in &rows {
        for field in row.split(',').skip(4) {
            assert_eq!(field.parse::<f64>().unwrap(), 0.0);
        }
    }

    run_ok(
        dir,
        &[
            "simulate", "--n", "20", "--p", "10", "--tau", "0", "--seed", "5", "--out", "b.csv",
        ],
    );
    let b = fs::read_to_string(dir.join("b.csv")).unwrap();
    assert_eq!(a, b);

    // Manifest sidecar exists and carries the seed.
    let manifest = fs::read_to_string(dir.join("a.csv.manifest.json")).unwrap();
    assert!(manifest.contains("\"master_seed\": 5"));
}

#[test]
fn fit_predict_roundtrip_and_interval_nesting() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    simulate_small(dir);

    let out = run_ok(
        dir,
        &[
            "fit", "--train", "train.csv", "--stride", "5", "--seed", "7", "--out", "model.json",
        ],
    );
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("lambda"), "member table missing:\n{table}");

    // Refit with the same seed: identical bytes.
    run_ok(
        dir,
        &[
            "fit", "--train", "train.csv", "--stride", "5", "--seed", "7", "--out", "model2.json",
        ],
    );
    assert_eq!(
        fs::read(dir.join("model.json")).unwrap(),
        fs::read(dir.join("model2.json")).unwrap()
    );

    run_ok(
        dir,
        &[
            "predict", "--model", "model.json", "--test", "test.csv", "--out", "pred.csv",
        ],
    );
    let pred = fs::read_to_string(dir.join("pred.csv")).unwrap();
    let mut lines = pred.lines();
    assert_eq!(lines.next().unwrap(), "mean,lower,upper");
    let mut n = 0;
    let mut widths95 = Vec::new();
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert!(v[1] <= v[0] && v[0] <= v[2], "ordering violated: {line}");
        widths95.push((v[1], v[2]));
        n += 1;
    }
    assert_eq!(n, 12);

    // Wider level nests the narrower one.
    run_ok(
        dir,
        &[
            "predict", "--model", "model.json", "--test", "test.csv", "--level", "0.99", "--out",
            "pred99.csv",
        ],
    );
    let pred99 = fs::read_to_string(dir.join("pred99.csv")).unwrap();
    for (line, (lo95, hi95)) in pred99.lines().skip(1).zip(widths95) {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert!(v[1] <= lo95 + 1e-9 && v[2] >= hi95 - 1e-9);
    }

    // Saved model predicts identically on a second invocation.
    run_ok(
        dir,
        &[
            "predict", "--model", "model.json", "--test", "test.csv", "--out", "pred_again.csv",
        ],
    );
    assert_eq!(
        fs::read(dir.join("pred.csv")).unwrap(),
        fs::read(dir.join("pred_again.csv")).unwrap()
    );
}

#[test]
fn lowrank_fit_clamps_oversized_rank() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    simulate_small(dir);
    let out = run_ok(
        dir,
        &[
            "fit",
            "--train",
            "train.csv",
            "--mode",
            "lowrank",
            "--m-phi",
            "150",
            "--stride",
            "6",
            "--seed",
            "3",
            "--out",
            "model.json",
        ],
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("clamping to the identity map"), "{stderr}");
    run_ok(
        dir,
        &[
            "predict", "--model", "model.json", "--test", "test.csv", "--out", "pred.csv",
        ],
    );
}

#[test]
fn predict_rejects_feature_mismatch_with_data_exit_code() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    simulate_small(dir);
    run_ok(
        dir,
        &[
            "fit", "--train", "train.csv", "--stride", "8", "--seed", "2", "--out", "model.json",
        ],
    );
    run_ok(
        dir,
        &[
            "simulate", "--n", "5", "--p", "49", "--tau", "0.02", "--seed", "9", "--out",
            "narrow.csv",
        ],
    );
    let out = cgp(
        dir,
        &[
            "predict", "--model", "model.json", "--test", "narrow.csv", "--out", "bad.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{out:?}");
}

#[test]
fn malformed_csv_reports_location() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.csv"), "y,x1,x2\n1.0,2.0,oops\n").unwrap();
    let out = cgp(
        dir,
        &[
            "fit", "--train", "bad.csv", "--seed", "1", "--out", "model.json",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 2"), "{stderr}");
}

#[test]
fn empty_window_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    // p = 200 gives m_lo = 11 > n = 5.
    run_ok(
        dir,
        &[
            "simulate", "--n", "5", "--p", "200", "--tau", "0.01", "--seed", "3", "--out",
            "tiny.csv",
        ],
    );
    let out = cgp(
        dir,
        &[
            "fit", "--train", "tiny.csv", "--seed", "1", "--out", "model.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn benchmark_custom_runs_both_methods_deterministically() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let args = [
        "benchmark", "--scenario", "custom", "--n", "40", "--p", "60", "--tau", "0.05", "--reps",
        "2", "--n-pred", "15", "--stride", "8", "--n-clust", "3", "--seed", "11", "--out-dir",
        "bench",
    ];
    run_ok(dir, &args);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("bench/results.json")).unwrap()).unwrap();
    let scenarios = json["scenarios"].as_array().unwrap();
    assert_eq!(scenarios.len(), 2); // cgp and dsl
    for sc in scenarios {
        assert_eq!(sc["replicates"].as_array().unwrap().len(), 2);
        assert!(sc["summary"]["bootstrap_se"].is_number());
        assert!(sc["summary"]["mean_mspe"].as_f64().unwrap().is_finite());
    }
    let csv = fs::read_to_string(dir.join("bench/replicates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4); // header + 2 methods x 2 reps

    // Metrics are reproducible under the same master seed.
    let mut args2: Vec<&str> = args.to_vec();
    args2[args.len() - 1] = "bench2";
    run_ok(dir, &args2);
    let json2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("bench2/results.json")).unwrap())
            .unwrap();
    for (a, b) in json["scenarios"]
        .as_array()
        .unwrap()
        .iter()
        .zip(json2["scenarios"].as_array().unwrap())
    {
        assert_eq!(a["summary"]["mean_mspe"], b["summary"]["mean_mspe"]);
        assert_eq!(a["replicates"][0]["mspe"], b["replicates"][0]["mspe"]);
    }
}

#[test]
fn benchmark_single_replicate_flags_missing_bootstrap() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let out = run_ok(
        dir,
        &[
            "benchmark", "--scenario", "custom", "--n", "30", "--p", "40", "--tau", "0.02",
            "--reps", "1", "--methods", "cgp", "--n-pred", "10", "--stride", "10", "--seed", "4",
            "--out-dir", "bench",
        ],
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bootstrap SE not reported"), "{stderr}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("bench/results.json")).unwrap()).unwrap();
    assert!(json["scenarios"][0]["summary"]["bootstrap_se"].is_null());
}
