use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slowfast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowfast")).args(args).output().expect("spawn slowfast")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn rates_strong_writes_table_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "d1.json",
        r#"{"schema_version": 1, "system": {"kind": "builtin", "name": "D1", "alpha": 1.5},
            "rates_strong": {"sweep": {"replicas": 300}}}"#,
    );
    let out = tmp.path().join("run");
    let o = slowfast(&["rates-strong", "--config", &cfg, "--seed", "42", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("fitted slope"));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[..4].iter().all(|l| l.starts_with('#')));
    assert!(lines.contains(&"# seed=42"));
    assert!(lines.iter().any(|l| l.starts_with("# config_digest=")));
    assert_eq!(lines[4], "epsilon,error,stderr,n_replicas");
    assert_eq!(lines.len(), 5 + 6);
    let s = summary(&out);
    assert!(s["fitted_slope"].as_f64().is_some());
    assert!(s["slope_stderr"].as_f64().is_some());
    assert!((s["theoretical_slope"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(s["seed"], 42);
    assert_eq!(s["system_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn geometry_check_reports_success() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("geo");
    let o = slowfast(&["geometry-check", "--dim", "3", "--trials", "200", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("all 200 Jacobian checks pass"));
    assert_eq!(summary(&out)["failures"], 0);
}

#[test]
fn quiet_suppresses_summary_line() {
    let tmp = tempfile::tempdir().unwrap();
    let o = slowfast(&["coupling-check", "--quiet", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn validation_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = slowfast(&["rates-strong", "--config", "/definitely/missing.json", "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read config"));

    assert_eq!(slowfast(&["simulate", "--bogus-flag"]).status.code(), Some(1));
    assert_eq!(slowfast(&["no-such-command"]).status.code(), Some(1));

    let bad = write_config(tmp.path(), "bad.json", r#"{"schema_version": 1, "unknown_section": {}}"#);
    assert_eq!(slowfast(&["simulate", "--config", &bad, "--out", out]).status.code(), Some(1));

    let v2 = write_config(tmp.path(), "v2.json", r#"{"schema_version": 2}"#);
    assert_eq!(slowfast(&["simulate", "--config", &v2, "--out", out]).status.code(), Some(1));

    // D2 has state-dependent slow noise, which the strong sweep rejects.
    let d2 = write_config(tmp.path(), "d2.json", r#"{"system": {"kind": "builtin", "name": "D2"}}"#);
    let o = slowfast(&["rates-strong", "--config", &d2, "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Lipschitz"));

    assert_eq!(slowfast(&["simulate", "--workers", "0", "--out", out]).status.code(), Some(1));
    assert_eq!(slowfast(&["--help"]).status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("occupied");
    fs::write(&file, "x").unwrap();
    let o = slowfast(&["frozen", "--out", file.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn divergence_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    // δ₁ = exp(exp(10 y)) overflows as soon as the fast state is positive.
    let cfg = write_config(
        tmp.path(),
        "blowup.json",
        r#"{"system": {"kind": "custom", "name": "blowup", "alpha1": 1.5, "alpha2": 1.5,
            "b": {"op": "const", "value": 0},
            "delta1": {"op": "exp", "arg": {"op": "exp", "arg": {"op": "poly", "var": "y", "coeffs": [0, 10]}}},
            "f": {"op": "poly", "var": "y", "coeffs": [0, -1]},
            "delta2": {"op": "const", "value": 1},
            "regularity": {"v": 1.5, "l0": 1.0, "c_loc": 0.0, "c_dissip": 1.0, "lip_f": 1.0, "c_l": 1.0, "c_u": 1.0}},
            "simulate": {"y0": [1.0]}}"#,
    );
    let o = slowfast(&["simulate", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn outputs_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |workers: &str, cmd: &str| {
        let out = tmp.path().join(format!("{cmd}-{workers}"));
        let o = slowfast(&[cmd, "--seed", "7", "--replicas", "300", "--workers", workers, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out.join("results.csv")).unwrap(), fs::read(out.join("summary.json")).unwrap())
    };
    for cmd in ["simulate", "rates-weak", "corrector"] {
        assert_eq!(run("1", cmd), run("3", cmd), "{cmd}");
    }
}

#[test]
fn seed_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = tmp.path().join(seed);
        assert!(slowfast(&["frozen", "--seed", seed, "--replicas", "5", "--out", out.to_str().unwrap()]).status.success());
        let csv = fs::read_to_string(out.join("results.csv")).unwrap();
        csv.lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect::<Vec<_>>()
    };
    assert_ne!(run("1"), run("2"));
}
