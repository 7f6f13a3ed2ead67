use std::path::Path;
use std::process::Command;

fn freqlab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_freqlab")).args(args).env("FREQLAB_THREADS", "1").output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p.display().to_string()
}

#[test]
fn identities_pass_and_write_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"schema": 1, "geometry": "heisenberg:1", "entries": ["heisenberg1/t"]}"#);
    let out = dir.path().join("out");
    let (code, stdout, _) = freqlab(&["identities", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS gauge_harmonicity"));
    for f in ["identities.csv", "catalog.csv", "identities_report.json", "identities_timings.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn corrupted_algebra_fails_with_check_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "algebra": {"step": 2, "strata": [2, 1], "brackets": [{"i": 0, "j": 1, "k": 2, "c": 4.0}]}}"#,
    );
    let out = dir.path().join("out");
    let (code, stdout, stderr) = freqlab(&["identities", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{stdout}{stderr}");
}

#[test]
fn zero_solution_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "entries": ["heisenberg1/zero"], "alpha": {"explicit": 1.0}, "quadrature": {"resolution": [8]}, "r_grid": [0.3, 0.5]}"#,
    );
    let out = dir.path().join("out");
    let (code, _, stderr) = freqlab(&["frequency", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 4, "{stderr}");
}

#[test]
fn alpha_mismatch_is_rejected_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"schema": 1, "k_list": [16], "alpha": {"explicit": 1.0}}"#);
    let out = dir.path().join("out");
    let (code, _, stderr) = freqlab(&["monotonicity", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3, "{stderr}");
    assert!(!out.join("monotonicity_report.json").exists());
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(freqlab(&["report", "--out", out.to_str().unwrap()]).0, 1);
    assert_eq!(freqlab(&["bogus"]).0, 1);
    let cfg = write_config(dir.path(), "c.json", r#"{"schema": 2}"#);
    assert_eq!(freqlab(&["identities", "--config", &cfg, "--out", out.to_str().unwrap()]).0, 1);
}

#[test]
fn report_merges_and_deduplicates() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for k in [1, 4] {
        let cfg = write_config(dir.path(), &format!("k{k}.json"), &format!(r#"{{"schema": 1, "k_list": [{k}]}}"#));
        let out = dir.path().join(format!("k{k}"));
        assert_eq!(freqlab(&["order", "--config", &cfg, "--out", out.to_str().unwrap()]).0, 0);
        paths.push(out.join("order_report.json").display().to_string());
    }
    paths.push(paths[0].clone());
    let sum = dir.path().join("sum");
    let mut args = vec!["report"];
    args.extend(paths.iter().map(String::as_str));
    args.extend(["--out", sum.to_str().unwrap()]);
    let (code, stdout, _) = freqlab(&args);
    assert_eq!(code, 0, "{stdout}");
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sum.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(s["duplicates_skipped"], 1);
    let csv = std::fs::read_to_string(sum.join("cross_k.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(sum.join("cross_k.svg").exists());
}
