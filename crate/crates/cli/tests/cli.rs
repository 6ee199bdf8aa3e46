use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn hkq(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hkq"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn poincare_of_the_circle_on_c2_is_one_plus_t_squared() {
    let dir = tempfile::tempdir().unwrap();
    let o = hkq(&["poincare"], &config("poincare-circle-2.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["result"]["series"]["even_coefficients"], serde_json::json!([1, 1]));
    assert_eq!(r["result"]["series"]["coefficients"], serde_json::json!([1, 0, 1]));
}

#[test]
fn frame_check_without_constants_is_general_with_no_constraints() {
    let dir = tempfile::tempdir().unwrap();
    let o = hkq(&["frame-check"], &config("frame-check-end-2.json"), dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["result"]["verdict"]["verdict"], "general");
    assert_eq!(r["result"]["constraints"], 0);
}

#[test]
fn lyapunov_certifies_every_circle_descent() {
    let dir = tempfile::tempdir().unwrap();
    let o = hkq(&["lyapunov"], &config("lyapunov-circle-1.json"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["result"]["starts"], 100);
    assert_eq!(r["result"]["certified"], 100);
    let csv = std::fs::read_to_string(dir.path().join("trace_0.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,f,grad_norm,rho,lyap"));
    assert!(dir.path().join("trace_1.csv").exists());
    assert!(!dir.path().join("trace_2.csv").exists());
}

#[test]
fn reports_are_byte_identical_across_reruns_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("flow-adhm-1-1.json");
    assert_eq!(hkq(&["flow", "--jobs", "1"], &cfg, a.path()).status.code(), Some(0));
    assert_eq!(hkq(&["flow", "--jobs", "4"], &cfg, b.path()).status.code(), Some(0));
    for file in ["report.json", "trace_0.csv"] {
        assert_eq!(std::fs::read(a.path().join(file)).unwrap(), std::fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn reports_carry_hash_sign_and_version() {
    let dir = tempfile::tempdir().unwrap();
    hkq(&["poincare"], &config("poincare-assembly.json"), dir.path());
    let r = report(dir.path());
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(r["epsilon"], 1.0);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn seed_override_changes_the_hash_and_is_recorded() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("semistable-circle-2.json");
    hkq(&["semistable"], &cfg, a.path());
    hkq(&["semistable", "--seed", "12"], &cfg, b.path());
    let (ra, rb) = (report(a.path()), report(b.path()));
    assert_eq!(rb["seed"], 12);
    assert_ne!(ra["config_hash"], rb["config_hash"]);
}

#[test]
fn cap_override_replaces_the_config_cap() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hkq(&["poincare", "--cap", "12"], &config("poincare-assembly.json"), dir.path()).status.code(), Some(0));
    let series = &report(dir.path())["result"]["series"];
    assert_eq!(series["cap"], 12);
    assert_eq!(series["coefficients"], serde_json::json!([1, 0, 1, 0, 1]));
    // a stratum above the cap cannot be placed
    let low = tempfile::tempdir().unwrap();
    assert_eq!(hkq(&["poincare", "--cap", "4"], &config("poincare-assembly.json"), low.path()).status.code(), Some(2));
}

#[test]
fn failed_assertions_exit_with_one_and_a_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("imperfect.json");
    std::fs::write(
        &cfg,
        r#"{"cap": 6, "assembly": {"base": {"group": "circle"},
            "strata": [{"index": 2, "stabilizer": {"group": "circle"}, "component": [2], "label": "too big"}]}}"#,
    )
    .unwrap();
    let o = hkq(&["poincare"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "fail");
    assert_eq!(r["failures"][0]["check"], "perfection");
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    assert_eq!(hkq(&["flow"], &broken, dir.path()).status.code(), Some(2));
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"model": {"kind": "sphere", "n": 1}}"#).unwrap();
    assert_eq!(hkq(&["flow"], &unknown, dir.path()).status.code(), Some(2));
    assert_eq!(hkq(&["flow"], &dir.path().join("missing.json"), dir.path()).status.code(), Some(2));
    assert!(!dir.path().join("report.json").exists());
}
