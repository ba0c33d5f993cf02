//! End-to-end tests of the `lip` binary: every subcommand, the documented
//! exit codes, and the JSON summaries, run through real processes on real
//! files.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lip() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lip"))
}

fn run_ok(cmd: &mut Command) -> Value {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON summary")
}

fn run_err(cmd: &mut Command) -> (i32, Value) {
    let out: Output = cmd.output().expect("binary runs");
    assert!(!out.status.success(), "expected failure");
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is a JSON error");
    (out.status.code().expect("exit code"), err)
}

fn gen_data(dir: &Path, n: usize, q: usize, l: usize, seed: u64) {
    run_ok(lip()
        .arg("gen-data")
        .args(["--n", &n.to_string()])
        .args(["--q", &q.to_string()])
        .args(["--l", &l.to_string()])
        .args(["--seed", &seed.to_string()])
        .arg("--out")
        .arg(dir));
}

#[test]
fn pipeline_gen_corrupt_fit_apply() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_data(&dir.join("data"), 400, 16, 10, 7);

    let features = dir.join("data/train_features.csv");
    let labels = dir.join("data/train_labels.csv");
    let noisy = dir.join("noisy.csv");
    let corrupt_summary = run_ok(lip()
        .arg("corrupt")
        .arg("--labels")
        .arg(&labels)
        .args(["--noise-kind", "symmetric", "--p", "0.2", "--seed", "11"])
        .arg("--out")
        .arg(&noisy)
        .arg("--mask")
        .arg(dir.join("mask.csv")));
    let rate = corrupt_summary["realized_flip_rate"].as_f64().unwrap();
    assert!(rate > 0.0 && rate < 1.0, "flip rate {rate}");
    assert!(dir.join("mask.csv").is_file());

    let wprime = dir.join("wprime.csv");
    let fit_summary = run_ok(lip()
        .arg("fit")
        .arg("--features")
        .arg(&features)
        .arg("--labels")
        .arg(&noisy)
        .args(["--lambda", "1.0"])
        .arg("--out")
        .arg(&wprime));
    assert_eq!(fit_summary["q"], 16);
    assert_eq!(fit_summary["l"], 10);

    // Default k for l = 10 is ceil(0.8 * 10) = 8, leaving a 2-component tail.
    let wstar = dir.join("wstar.csv");
    let apply_summary = run_ok(lip()
        .arg("apply")
        .arg("--weights")
        .arg(&wprime)
        .arg("--features")
        .arg(&features)
        .arg("--labels")
        .arg(&noisy)
        .arg("--out")
        .arg(&wstar));
    assert_eq!(apply_summary["k"], 8);
    assert_eq!(apply_summary["tail_size"], 2);
    assert!(wstar.is_file());
    let before = apply_summary["fit_objective_before"].as_f64().unwrap();
    let after = apply_summary["fit_objective_after"].as_f64().unwrap();
    assert!(
        after <= before + 1e-9,
        "repair must not worsen the fit: {after} > {before}"
    );
}

#[test]
fn apply_at_full_rank_reproduces_input() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_data(&dir.join("data"), 200, 12, 5, 3);

    let features = dir.join("data/train_features.csv");
    let labels = dir.join("data/train_labels.csv");
    let w = dir.join("w.csv");
    run_ok(lip()
        .arg("fit")
        .arg("--features")
        .arg(&features)
        .arg("--labels")
        .arg(&labels)
        .arg("--out")
        .arg(&w));

    let wstar = dir.join("wstar.csv");
    let summary = run_ok(lip()
        .arg("apply")
        .arg("--weights")
        .arg(&w)
        .arg("--features")
        .arg(&features)
        .arg("--labels")
        .arg(&labels)
        .args(["--k", "5"])
        .arg("--out")
        .arg(&wstar));
    assert_eq!(summary["tail_size"], 0);

    let a = std::fs::read_to_string(&w).unwrap();
    let b = std::fs::read_to_string(&wstar).unwrap();
    let parse = |s: &str| -> Vec<f64> {
        s.split([',', '\n'])
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().unwrap())
            .collect()
    };
    let (va, vb) = (parse(&a), parse(&b));
    assert_eq!(va.len(), vb.len());
    for (x, y) in va.iter().zip(&vb) {
        assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn apply_reports_zero_tail_when_labels_match_truncated_weights() {
    // W has rank 2, so truncating at k = 2 changes nothing; with Y = X W the
    // residual after truncation is exactly zero and every refit value is 0.
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    let x = vec![
        vec![1.0, 0.5, -0.3, 2.0],
        vec![0.2, -1.0, 0.8, 0.1],
        vec![-0.7, 0.3, 1.5, -0.4],
        vec![0.9, 1.2, -0.6, 0.5],
        vec![-1.1, 0.4, 0.2, 1.3],
        vec![0.3, -0.8, -1.2, 0.6],
    ];
    let w = vec![
        vec![1.0, 0.0, 0.5],
        vec![0.0, 2.0, 1.0],
        vec![0.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0],
    ];
    let csv = |rows: &[Vec<f64>]| -> String {
        rows.iter()
            .map(|r| {
                r.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    };
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|row| {
            (0..3)
                .map(|j| (0..4).map(|i| row[i] * w[i][j]).sum())
                .collect()
        })
        .collect();
    let (x_path, w_path, y_path) = (
        dir.join("x.csv"),
        dir.join("w.csv"),
        dir.join("y.csv"),
    );
    std::fs::write(&x_path, csv(&x)).unwrap();
    std::fs::write(&w_path, csv(&w)).unwrap();
    std::fs::write(&y_path, csv(&y)).unwrap();

    let summary = run_ok(lip()
        .arg("apply")
        .arg("--weights")
        .arg(&w_path)
        .arg("--features")
        .arg(&x_path)
        .arg("--labels")
        .arg(&y_path)
        .args(["--k", "2"])
        .arg("--out")
        .arg(dir.join("wstar.csv")));
    assert_eq!(summary["k"], 2);
    assert_eq!(summary["tail_size"], 1);
    let tail = summary["refit_tail"].as_array().unwrap();
    for v in tail {
        assert!(v.as_f64().unwrap().abs() <= 1e-9, "nonzero refit {v}");
    }
}

#[test]
fn spectrum_and_subspace_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_data(&dir.join("data"), 300, 12, 6, 21);

    let features = dir.join("data/train_features.csv");
    let labels = dir.join("data/train_labels.csv");
    let noisy = dir.join("noisy.csv");
    run_ok(lip()
        .arg("corrupt")
        .arg("--labels")
        .arg(&labels)
        .args(["--noise-kind", "candidate-flip", "--p", "0.1", "--seed", "5"])
        .arg("--out")
        .arg(&noisy));
    let w = dir.join("w.csv");
    let wprime = dir.join("wprime.csv");
    for (y, out) in [(&labels, &w), (&noisy, &wprime)] {
        run_ok(lip()
            .arg("fit")
            .arg("--features")
            .arg(&features)
            .arg("--labels")
            .arg(y)
            .arg("--out")
            .arg(out));
    }

    // Spectrum as JSON to stdout: 6 singular values per run, sorted.
    let out = lip()
        .arg("spectrum")
        .arg(&w)
        .arg(&wprime)
        .args(["--format", "json"])
        .output()
        .unwrap();
    assert!(out.status.success());
    // Stdout carries the payload document (followed by the run summary when
    // no --out is given), so take the first JSON document.
    let text = String::from_utf8_lossy(&out.stdout);
    let payload: Value = serde_json::Deserializer::from_str(&text)
        .into_iter::<Value>()
        .next()
        .expect("stdout holds a JSON payload")
        .expect("payload parses");
    let spectra = payload["spectra"].as_array().unwrap();
    assert_eq!(spectra.len(), 2);
    for run in spectra {
        let vals: Vec<f64> = run
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        assert_eq!(vals.len(), 6);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]), "sorted spectrum");
    }

    // Subspace grid as CSV written to a file: values in [0, 1].
    let grid_path = dir.join("grid.csv");
    let summary = run_ok(lip()
        .arg("subspace")
        .arg("--weights")
        .arg(&w)
        .arg("--weights-prime")
        .arg(&wprime)
        .arg("--out")
        .arg(&grid_path));
    assert_eq!(summary["i_max"], 6);
    assert_eq!(summary["j_max"], 6);
    let grid = std::fs::read_to_string(&grid_path).unwrap();
    for value in grid.split([',', '\n']).filter(|t| !t.is_empty()) {
        let v: f64 = value.parse().unwrap();
        assert!((-1e-12..=1.0 + 1e-12).contains(&v), "phi {v} out of range");
    }
}

#[test]
fn bounds_reports_measured_and_predicted() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_data(&dir.join("data"), 300, 12, 6, 33);

    let labels = dir.join("data/train_labels.csv");
    let noisy = dir.join("noisy.csv");
    run_ok(lip()
        .arg("corrupt")
        .arg("--labels")
        .arg(&labels)
        .args(["--noise-kind", "symmetric", "--p", "0.1", "--seed", "2"])
        .arg("--out")
        .arg(&noisy));

    let summary = run_ok(lip()
        .arg("bounds")
        .arg("--features")
        .arg(dir.join("data/train_features.csv"))
        .arg("--labels")
        .arg(&labels)
        .arg("--noisy-labels")
        .arg(&noisy)
        .args(["--lambda", "1.0"]));
    let report = &summary["report"];
    let measured = report["delta_w_frob"].as_f64().unwrap();
    let bound = report["frob_bound"].as_f64().unwrap();
    assert!(measured > 0.0);
    assert!(bound >= measured, "bound {bound} below measured {measured}");
}

#[test]
fn experiment_runs_plan_and_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let plan = serde_json::json!({
        "dataset": {
            "n": 300, "q": 12, "l": 6,
            "cluster_separation": 10.0,
            "within_class_sigma": 1.0,
            "seed": 5,
            "train_fraction": 0.5
        },
        "noise_levels": [
            { "kind": "symmetric", "p": 0.1, "seed": 100 }
        ],
        "ridge": { "lambda": 1.0 },
        "lip": "default",
        "trials": 2,
        "output_dir": "out"
    });
    let plan_path = dir.join("plan.json");
    std::fs::write(&plan_path, serde_json::to_string_pretty(&plan).unwrap()).unwrap();

    let summary = run_ok(lip().arg("experiment").arg("--plan").arg(&plan_path));
    assert_eq!(summary["trials_total"], 2);
    assert_eq!(summary["trials_failed"], 0);
    let report_path = summary["report"].as_str().unwrap();
    assert!(Path::new(report_path).is_file(), "missing {report_path}");
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(report["aggregates"][0]["trials_ok"], 2);
    assert!(dir.join("out/timings.json").is_file());
}

#[test]
fn validation_errors_exit_2_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_data(&dir.join("data"), 120, 8, 4, 1);

    // p outside [0, 1] is a validation error.
    let (code, err) = run_err(lip()
        .arg("corrupt")
        .arg("--labels")
        .arg(dir.join("data/train_labels.csv"))
        .args(["--noise-kind", "symmetric", "--p", "1.5", "--seed", "1"])
        .arg("--out")
        .arg(dir.join("noisy.csv")));
    assert_eq!(code, 2);
    assert_eq!(err["error"]["class"], "validation");
    assert!(err["error"]["message"].as_str().unwrap().contains("[0, 1]"));
}

#[test]
fn io_errors_exit_4_with_json() {
    let (code, err) = run_err(lip()
        .arg("spectrum")
        .arg("/nonexistent/weights.csv"));
    assert_eq!(code, 4);
    assert_eq!(err["error"]["class"], "io");
}

#[test]
fn malformed_csv_exits_2_and_names_the_row() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "1.0,2.0\n3.0\n").unwrap();
    let (code, err) = run_err(lip().arg("spectrum").arg(&bad));
    assert_eq!(code, 2);
    assert_eq!(err["error"]["class"], "validation");
    let message = err["error"]["message"].as_str().unwrap();
    assert!(message.contains("row"), "unhelpful message: {message}");
}

#[test]
fn gen_data_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen_data(&a, 200, 8, 4, 42);
    gen_data(&b, 200, 8, 4, 42);
    for name in [
        "train_features.csv",
        "train_labels.csv",
        "test_features.csv",
        "test_labels.csv",
    ] {
        let x = std::fs::read(a.join(name)).unwrap();
        let y = std::fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical seeds");
    }
}
