//! Black-box tests of the `osgood` binary: exit codes, report files, and
//! the certificate round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_osgood"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn certify_scalar() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["certify", "--config"])
        .arg(config("scalar.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report = read_json(&dir.path().join("certificate.json"));
    let t = report["certificate"]["T"].as_f64().unwrap();
    assert!((t - 0.5).abs() < 0.02, "T = {t}");
    assert_eq!(report["seed"], 0);
}

#[test]
fn certify_zero_initial_finds_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.json");
    std::fs::write(
        &cfg,
        r#"{
            "problem": {"graph": {"generator": {"kind": "path", "n": 4}}},
            "source": {"kind": "power", "alpha": 1.0},
            "initial": {"kind": "constant", "value": 0.0}
        }"#,
    )
    .unwrap();
    let out = bin()
        .args(["certify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    assert!(read_json(&dir.path().join("certificate.json"))["certificate"].is_null());
}

#[test]
fn certify_two_vertex_and_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["certify", "--config"])
        .arg(config("two_vertex.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report = read_json(&dir.path().join("certificate.json"));
    let margin = report["certificate"]["margin"].as_f64().unwrap();
    assert!(margin > 1.0, "margin = {margin}");

    let out = bin()
        .args(["certify", "--config"])
        .arg(config("two_vertex.json"))
        .arg("--out")
        .arg(dir.path())
        .arg("--verify-only")
        .arg(dir.path().join("certificate.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let verified = read_json(&dir.path().join("verify.json"));
    let margin2 = verified["certificate"]["margin"].as_f64().unwrap();
    assert!(
        (margin - margin2).abs() <= 1e-9,
        "round trip margin {margin} vs {margin2}"
    );
}

#[test]
fn simulate_scalar_blowup() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(config("scalar.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", stdout(&out));
    let status = read_json(&dir.path().join("status.json"));
    let t_emp = status["status"]["t_emp"].as_f64().unwrap();
    assert!((t_emp - 0.5).abs() <= 0.005, "T_emp = {t_emp}");
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,sup_norm,p_norm\n"));
    assert!(trace.lines().count() > 10);
}

#[test]
fn simulate_zero_initial_reaches_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.json");
    std::fs::write(
        &cfg,
        r#"{
            "problem": {"graph": {"generator": {"kind": "cycle", "n": 5}}},
            "source": {"kind": "exp-minus-one"},
            "initial": {"kind": "constant", "value": 0.0},
            "analysis": {"horizon": 2.0}
        }"#,
    )
    .unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn simulate_respects_certified_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["certify", "--config"])
        .arg(config("two_vertex.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let t_cert = read_json(&dir.path().join("certificate.json"))["certificate"]["T"]
        .as_f64()
        .unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(config("two_vertex.json"))
        .arg("--out")
        .arg(dir.path())
        .args(["--horizon", &t_cert.to_string()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", stdout(&out));
    let t_emp = read_json(&dir.path().join("status.json"))["status"]["t_emp"]
        .as_f64()
        .unwrap();
    assert!(t_emp <= t_cert, "T_emp = {t_emp} > certified {t_cert}");
}

#[test]
fn criteria_path_predicts_blowup() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["criteria", "--config"])
        .arg(config("path_criteria.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report = read_json(&dir.path().join("criteria.json"));
    let theta = report["theta_or_alpha"].as_f64().unwrap();
    assert!((theta - 1.0).abs() < 0.15, "θ = {theta}");
    assert_eq!(report["criterion"]["verdict"], "blowup-predicted");
}

#[test]
fn criteria_torus_3d_is_silent() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["criteria", "--config"])
        .arg(config("torus3d_criteria.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report = read_json(&dir.path().join("criteria.json"));
    assert_eq!(report["criterion"]["verdict"], "theorem-silent");
}

#[test]
fn criteria_gaussian_kernel_fujita_regime() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["criteria", "--config"])
        .arg(config("gaussian.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let report = read_json(&dir.path().join("criteria.json"));
    assert_eq!(report["theta_or_alpha"], 1.0);
    assert_eq!(report["beta"], 2.0);
    assert_eq!(report["criterion"]["verdict"], "blowup-predicted");
}

#[test]
fn validate_gaussian_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["validate", "--config"])
        .arg(config("gaussian.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(read_json(&dir.path().join("validation.json"))["pass"], true);
}

#[test]
fn validate_broken_kernel_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    // inflating the normalization constant breaks the mass axiom
    std::fs::write(
        &cfg,
        r#"{
            "problem": {"kernel": {"family": "fractional-stable", "dim": 1, "mesh": 128, "period": 40.0, "beta": 1.0, "c": 2.0}},
            "source": {"kind": "power", "alpha": 1.0}
        }"#,
    )
    .unwrap();
    let out = bin()
        .args(["validate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(6), "{}", stdout(&out));
}

#[test]
fn validate_random_graph_properties() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("random.json");
    std::fs::write(
        &cfg,
        r#"{
            "problem": {"graph": {"generator": {"kind": "random-connected", "n": 18}}},
            "source": {"kind": "power", "alpha": 1.0}
        }"#,
    )
    .unwrap();
    let out = bin()
        .args(["validate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .args(["--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(read_json(&dir.path().join("validation.json"))["seed"], 7);
}

#[test]
fn sweep_runs_to_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["certify", "--config"])
        .arg(config("scalar.json"))
        .arg("--out")
        .arg(dir.path())
        .args(["--sweep", "alpha=0.5,1,2"])
        .env("OSGOOD_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    for sub in ["alpha-0.5", "alpha-1", "alpha-2"] {
        let report = read_json(&dir.path().join(sub).join("certificate.json"));
        assert!(report["certificate"].is_object(), "{sub}");
    }
}

#[test]
fn malformed_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();

    let unknown_key = dir.path().join("bad1.json");
    std::fs::write(
        &unknown_key,
        r#"{
            "problem": {"graph": {"generator": {"kind": "path", "n": 3}}},
            "source": {"kind": "power", "alpha": 1.0},
            "surprise": true
        }"#,
    )
    .unwrap();
    let out = bin().args(["certify", "--config"]).arg(&unknown_key).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let missing = dir.path().join("does_not_exist.json");
    let out = bin().args(["simulate", "--config"]).arg(&missing).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // graph CSV with a bad weight: parse error names the line
    let edges = dir.path().join("edges.csv");
    std::fs::write(&edges, "src,dst,weight\na,b,1.0\nb,c,oops\n").unwrap();
    let cfg = dir.path().join("bad2.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{
                "problem": {{"graph": {{"edges": {edges:?}}}}},
                "source": {{"kind": "power", "alpha": 1.0}},
                "initial": {{"kind": "constant", "value": 1.0}}
            }}"#
        ),
    )
    .unwrap();
    let out = bin().args(["certify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains(":3"), "stderr: {err}");
}
