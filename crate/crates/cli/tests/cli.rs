use std::path::Path;
use std::process::{Command, Output};

use supersde::sde::read_paths;
use supersde::spectral::read_field;

fn supersde(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supersde"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const DRIFT: &str = r#"{"kind": "modes", "modes": [{"k": [1, 1], "amplitude": 0.05}], "gamma": 0.0, "p": 8,
    "grid": {"d": 2, "N": 32, "L": 1}}"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("drift.json"), DRIFT).unwrap();
    dir
}

#[test]
fn drift_report_is_json() {
    let dir = setup();
    let text = ok(&supersde(dir.path(), &["drift-report", "--drift", "drift.json"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["d"], 2);
    assert!(v["beta_max"].as_f64().unwrap() > 0.0);
}

#[test]
fn kbe_writes_readable_slices_and_budget() {
    let dir = setup();
    let v0 = r#"{"modes": [{"k": [1, 0], "amplitude": 1}]}"#;
    ok(&supersde(
        dir.path(),
        &["--out", "k", "kbe", "--drift", "drift.json", "--v0", v0, "--T", "0.02", "--slices", "0.01"],
    ));
    let first = read_field(dir.path().join("k/slice_000.ssl")).unwrap();
    let last = read_field(dir.path().join("k/slice_002.ssl")).unwrap();
    assert_eq!(first.grid().n(), 32);
    // heat-dominated decay of a unit mode
    assert!(last.l2_norm() < first.l2_norm());
    let budget = std::fs::read_to_string(dir.path().join("k/budget.csv")).unwrap();
    assert!(budget.starts_with("t,l2_sq,grad_sq,sup,dissipation,mass"));
}

#[test]
fn simulate_paths_round_trip_and_seed_controls_output() {
    let dir = setup();
    let args = |out: &'static str, seed: &'static str| {
        vec![
            "--seed", seed, "--out", out, "simulate", "--drift", "drift.json", "--paths", "40", "--dt", "0.001", "--T",
            "0.01", "--stride", "5", "--checkpoints", "2",
        ]
    };
    ok(&supersde(dir.path(), &args("a", "1")));
    ok(&supersde(dir.path(), &args("b", "1")));
    ok(&supersde(dir.path(), &args("c", "2")));
    let a = read_paths(dir.path().join("a/paths.ssp")).unwrap();
    let b = read_paths(dir.path().join("b/paths.ssp")).unwrap();
    let c = read_paths(dir.path().join("c/paths.ssp")).unwrap();
    assert_eq!(a.paths(), 40);
    assert_eq!(a.times.len(), 3);
    assert_eq!(a.raw(), b.raw());
    assert_ne!(a.raw(), c.raw());
    let csv = std::fs::read_to_string(dir.path().join("a/diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn run_refuses_existing_output_without_force() {
    let dir = setup();
    std::fs::write(dir.path().join("empty.json"), r#"{"experiments": []}"#).unwrap();
    ok(&supersde(dir.path(), &["--out", "r", "run", "--config", "empty.json"]));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["entries"].as_array().unwrap().len(), 0);
    let again = supersde(dir.path(), &["--out", "r", "run", "--config", "empty.json"]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(&supersde(dir.path(), &["--out", "r", "run", "--config", "empty.json", "--force"]));
}

#[test]
fn schema_errors_reach_the_user() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.json"), r#"{"experiments": [{"kind": "suite", "levle": 3}]}"#).unwrap();
    let out = supersde(dir.path(), &["--out", "r", "run", "--config", "bad.json"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("experiments[0]"), "{err}");
}

#[test]
fn besov_and_scan_summaries_carry_slopes() {
    let dir = setup();
    let text = ok(&supersde(dir.path(), &["--out", "b", "besov-norm", "--drift", "drift.json", "--s", "-0.2", "--p", "8"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);
    let text = ok(&supersde(dir.path(), &["--out", "m", "mollify-scan", "--prep-identity", "--grid-n", "128"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in ["slope", "ci_low", "ci_high"] {
        assert!(v[key].is_number(), "{key}");
    }
    let rows = std::fs::read_to_string(dir.path().join("m/mollify_scan.csv")).unwrap();
    assert!(rows.starts_with("level,norm,slope"));
}
