use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stablewalk"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report on stdout")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn check_c_on_permutations_reports_failure_with_exit_zero() {
    let out = run(&["check-c", "--config", config("permutation.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_stdout(&out);
    assert_eq!(r["result"]["decision"], "fails");
    assert!(r["result"]["condition_c"]["witness"].is_null());
    assert_eq!(r["seed"], 1);
    assert!(r["config"]["sampler"].is_object());
}

#[test]
fn check_c_on_triangular_gives_a_witness() {
    let out = run(&["check-c", "--config", config("triangular.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = json_stdout(&out);
    assert_eq!(r["result"]["condition_c"]["witness_length"], 2);
}

#[test]
fn convergence_on_scalar_walk_passes() {
    let out = run(&["convergence", "--config", config("scalar_q1.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json_stdout(&out);
    assert!(r["result"]["ks"]["p_value"].is_number());
    assert_eq!(r["passed"], true);
}

#[test]
fn seed_flag_overrides_config() {
    let out = run(&["check-c", "--config", config("permutation.json").to_str().unwrap(), "--seed", "99"]);
    assert_eq!(json_stdout(&out)["seed"], 99);
    assert_eq!(json_stdout(&out)["config"]["seed"], 99);
}

#[test]
fn schema_violations_exit_two_with_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        r#"{"sampler": {"kind": "finite_mixture", "atoms": [{"weight": 1.0, "matrix": [[1.0, 0.0], [0.0, 0.0]]}]}}"#,
        r#"{"sampler": {"kind": "finite_mixture", "atoms": [{"weight": 1.0, "matrix": [[1.0]]}]}, "sede": 3}"#,
        r#"{"seed": 1}"#,
        "not json",
    ] {
        let path = write_config(dir.path(), text);
        let out = run(&["simulate", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{text}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["error"]["kind"], "config");
        assert_eq!(err["exit_code"], 2);
    }
    let out = run(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_one() {
    let out = run(&["stationary", "--config", config("permutation.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "runtime");
}

#[test]
fn simulate_writes_documented_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--config",
        config("reference_alpha_1_5.json").to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("path,n,log_norm,t_hit"));
    assert_eq!(lines.count(), 1000);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("simulate.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["paths"].as_array().unwrap().len(), 1000);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"{
            "sampler": {"kind": "log_scaled",
                "base": {"kind": "finite_mixture", "atoms": [
                    {"weight": 0.5, "matrix": [[0.5, 0.3], [0.4, 0.9]]},
                    {"weight": 0.5, "matrix": [[1.0, 0.3], [0.2, 0.6]]}]},
                "scalar": {"alpha": 1.5, "c_plus": 0.5, "c_minus": 0.5}},
            "observables": {"n_max": 40, "n_paths": 30},
            "stationary": {"n_samples": 1500, "kappa_paths": 50},
            "acceptance": {"scale": "quick", "only": [1, 2, 4, 12]}
        }"#,
    );
    let cfg = path.to_str().unwrap();
    for cmd in ["observables", "stationary", "verify-all"] {
        let one = run(&[cmd, "--config", cfg, "--threads", "1"]);
        let four = run(&[cmd, "--config", cfg, "--threads", "4"]);
        assert_eq!(one.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&one.stderr));
        assert_eq!(one.stdout, four.stdout, "{cmd}");
    }
}
