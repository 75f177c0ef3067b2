use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repsel"))
        .args(args)
        .output()
        .expect("spawn repsel")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn identity_csv(n: usize) -> String {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { "1" } else { "0" }).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gram_linear_on_unit_vectors_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    // three samples e_0, e_1, e_2 (one per row)
    let input = write(dir.path(), "x.csv", &identity_csv(3));
    let out = dir.path().join("k.csv");
    let report = json(&repsel(&["gram", "-i", s(&input), "--kernel", "linear", "-o", s(&out)]));
    assert_eq!(report["kernel"]["kind"], "linear");
    let k = repsel::io::read_square_file(&out).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(k[(i, j)], if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn asymmetric_precomputed_kernel_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "k.csv", "1,0.5\n0.2,1\n");
    let out = repsel(&["select", "--gram", s(&input), "--kernel", "precomputed"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("max |k_ij - k_ji| = 3e-1"), "{err}");
}

#[test]
fn identity_kernel_selects_every_sample_above_critical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "k.csv", &identity_csv(4));
    let base = ["select", "--gram", s(&input), "--kernel", "precomputed"];
    let mut args = base.to_vec();
    args.extend(["--lambda-alpha", "2", "--theta", "1.01"]);
    let report = json(&repsel(&args));
    let reps: Vec<u64> = report["selection"]["representatives"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert_eq!(reps, [0, 1, 2, 3]);

    let mut args = base.to_vec();
    args.extend(["--lambda-alpha", "0.5"]);
    let out = repsel(&args);
    let report = json(&out);
    assert!(report["selection"]["representatives"].as_array().unwrap().is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn topk_zero_flags_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "k.csv", &identity_csv(4));
    let report = json(&repsel(&[
        "outliers",
        "--gram",
        s(&input),
        "--kernel",
        "precomputed",
        "--mode",
        "topk:0",
    ]));
    assert!(report["flagged"].as_array().unwrap().is_empty());
    assert!(report.get("f1").is_none());
}

#[test]
fn synth_then_outliers_reports_f1() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let synth = json(&repsel(&[
        "synth", "--n1", "150", "--n2", "50", "--seed", "4", "-o", s(&data),
    ]));
    assert_eq!(synth["n_samples"], 200);
    assert_eq!(synth["n_outliers"], 50);
    let parsed = repsel::io::read_data_file(&data, true).unwrap();
    assert_eq!(parsed.labels.as_ref().unwrap().iter().filter(|&&l| l < 0).count(), 50);

    let report = json(&repsel(&["outliers", "-i", s(&data), "--labeled"]));
    assert_eq!(report["evaluated"], 200);
    assert!(report["f1"]["f1"].as_f64().unwrap() > 0.8, "{}", report["f1"]);

    let unlabeled = json(&repsel(&["outliers", "-i", s(&data)]));
    assert!(unlabeled.get("f1").is_none());
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "k.csv", &identity_csv(3));
    let conf = write(dir.path(), "run.conf", "kernel = precomputed\nlambda-alpha = 0.5\ntheta = 1.01\n");
    let report = json(&repsel(&["--config", s(&conf), "select", "--gram", s(&input)]));
    assert_eq!(report["config"]["lambda_alpha"], 0.5);
    assert!(report["selection"]["representatives"].as_array().unwrap().is_empty());

    let report = json(&repsel(&[
        "--config",
        s(&conf),
        "select",
        "--gram",
        s(&input),
        "--lambda-alpha",
        "3",
    ]));
    assert_eq!(report["config"]["lambda_alpha"], 3.0);
    assert_eq!(report["selection"]["representatives"].as_array().unwrap().len(), 3);

    let bad = write(dir.path(), "bad.conf", "no-such-key = 1\n");
    assert_eq!(repsel(&["--config", s(&bad), "select", "--gram", s(&input)]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(repsel(&["--help"]).status.code(), Some(0));
    assert_eq!(repsel(&["select", "--bogus"]).status.code(), Some(1));
    assert_eq!(repsel(&["select", "-i", "/nonexistent/x.csv"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "k.csv", &identity_csv(3));
    let out = repsel(&["select", "--gram", s(&input), "--kernel", "precomputed", "--tau", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = repsel(&[
        "select", "--gram", s(&input), "--kernel", "precomputed", "--max-iter", "1", "--strict",
        "--lambda-alpha", "3",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sketched_outliers_evaluate_the_sketch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    json(&repsel(&["synth", "--n1", "120", "--n2", "60", "--seed", "9", "-o", s(&data)]));
    let report = json(&repsel(&[
        "outliers", "-i", s(&data), "--labeled", "--sketch", "60,10,3", "--seed", "2",
    ]));
    let sketch = &report["sketch"];
    assert_eq!(sketch["algorithm"], "chacha8-shuffle-prefix-v1");
    let size = sketch["sampled_indices"].as_array().unwrap().len();
    assert_eq!(report["evaluated"].as_u64().unwrap() as usize, size);
    assert!(size <= 80);
}
