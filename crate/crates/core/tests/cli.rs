use std::fs;
use std::process::{Command, Output};

fn pamlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pamlab")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn densities_eval_prints_a_number() {
    let o = pamlab(&["densities", "eval", "--law", "x1", "--d", "1", "--alpha", "2", "--x", "0"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.5).abs() < 1e-8);
    let o = pamlab(&["densities", "eval", "--law", "joint", "--d", "1", "--alpha", "2", "--x", "-1", "--x2", "2"]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 0.0046178134484970189).abs() < 1e-10);
}

#[test]
fn usage_and_runtime_errors_have_distinct_exit_codes() {
    let usage = pamlab(&["phi", "scan", "--d", "1", "--t", "10"]);
    assert_eq!(usage.status.code(), Some(2));
    let runtime = pamlab(&["densities", "eval", "--law", "y", "--d", "1", "--alpha", "2", "--x", "-1"]);
    assert_eq!(runtime.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&runtime.stderr).contains("error"));
}

#[test]
fn phi_scan_json() {
    let o = pamlab(&["phi", "scan", "--d", "1", "--alpha", "4", "--seed", "42", "--t", "1000"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let top: Vec<i64> = v["top"].as_array().unwrap().iter().map(|e| e["z"][0].as_i64().unwrap()).collect();
    assert_eq!(top, vec![373, -995, -2463]);
    assert!(v["miss_bound"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn solve_writes_report_snapshot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let o = pamlab(&[
        "solve", "--d", "1", "--alpha", "2", "--seed", "3", "--t", "4", "--snapshot", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["report.json", "snapshot.csv", "manifest.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert!(report["r1"].as_f64().unwrap() <= report["r2"].as_f64().unwrap());
}

#[test]
fn spectral_and_fk_and_potential() {
    let o = pamlab(&["spectral", "check", "--d", "2", "--alpha", "3", "--seed", "1", "--radius", "2"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["gamma"].is_number() && (v["certificate"].is_object() || v["certificate"].is_string()));

    let o = pamlab(&["fk", "--d", "1", "--alpha", "2", "--seed", "7", "--t", "1", "--samples", "2000"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["mean"].as_f64().unwrap() > 0.0);

    let o = pamlab(&["potential", "dump", "--d", "2", "--alpha", "3", "--radius", "1"]);
    let text = stdout(&o);
    assert!(text.starts_with("z_1,z_2,xi\n"));
    assert_eq!(text.lines().count(), 10);
}

#[test]
fn experiment_rerun_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = dir.path().join("ll.toml");
    fs::write(&cfg, "d = 1\nalpha = 4.0\nseed_count = 10\nt_grid = [100.0, 300.0]\n").unwrap();
    let o = pamlab(&[
        "experiment", "limit-law", "--config", cfg.to_str().unwrap(), "--set", "k=2", "--out", a.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = a.join("manifest.json");
    let o = pamlab(&["experiment", "limit-law", "--manifest", m.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["records.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let bad = pamlab(&["experiment", "limit-law", "--config", cfg.to_str().unwrap(), "--set", "alpha=0.5"]);
    assert_eq!(bad.status.code(), Some(1));
}
