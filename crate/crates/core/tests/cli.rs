use std::fs;
use std::process::Command;

use curvlab::verify::{read_report, Verdict};

fn curvlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_curvlab"))
}

#[test]
fn list_prints_every_suite() {
    let out = curvlab().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["riemann-symmetries", "cdr", "holonomy-bounded", "regularization-decay"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn passing_run_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fat.json");
    let status = curvlab()
        .args(["run", "fatness", "--bundle", "hopf", "--samples", "3", "--seed", "7", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = read_report(&path).unwrap();
    assert_eq!(report.verdict, Verdict::Pass);
    assert_eq!(report.config.samples, 3);
}

#[test]
fn failing_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cdr.csv");
    let status = curvlab()
        .args(["run", "cdr", "--bundle", "trivial3x2", "--samples", "2", "--format", "csv", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("suite,sample_id,residual,tolerance,verdict\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn configuration_errors_exit_two() {
    for args in [
        vec!["run", "no-such-suite"],
        vec!["run", "wnn", "--bundle", "klein"],
        vec!["run", "wnn", "--metric", "cheeger(-1)"],
        vec!["run", "wnn", "--tol", "identity"],
        vec!["run", "wnn", "--samples", "0"],
        vec!["run", "wnn", "--format", "xml"],
        vec!["frobnicate"],
    ] {
        let out = curvlab().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "bundle = \"trivial3x4\"\nsamples = 5\nseed = 3\n[tolerances]\nidentity = 0.005\n").unwrap();
    let path = dir.path().join("out.json");
    let status = curvlab()
        .args(["run", "riemann-symmetries", "--samples", "2", "--tol", "ode=0.01", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let report = read_report(&path).unwrap();
    assert_eq!(report.config.bundle, "trivial3x4");
    assert_eq!(report.config.samples, 2);
    assert_eq!(report.config.seed, 3);
    assert_eq!(report.config.tolerance("identity"), 0.005);
    assert_eq!(report.config.tolerance("ode"), 0.01);
}

#[test]
fn reruns_reproduce_report_bytes_apart_from_timing() {
    let run = || {
        let out = curvlab().args(["run", "warping", "--samples", "3", "--seed", "9"]).output().unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v["wall_time_s"] = serde_json::Value::Null;
        v.to_string()
    };
    assert_eq!(run(), run());
}
