use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cdn-flyprov"));
    c.env_remove("CDN_FLYPROV_BASE_PORT");
    c
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in ["quebec-flash-crowd", "zero-rate", "pod-fault", "orchestration-fault", "controller-down"] {
        let out = bin().args(["validate", "--scenario"]).arg(scenario(name)).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn validate_rejects_bad_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"name":"x"}"#).unwrap();
    let out = bin().args(["validate", "--scenario"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_outputs_and_trace_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--runs", "1", "--seed", "5", "--scenario"])
        .arg(scenario("quebec-flash-crowd"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("conformant: 1/1"));
    for f in ["runs.csv", "summary.txt", "report.json", "trace-run-1.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let chk = bin()
        .args(["trace-check", "--trace"])
        .arg(dir.path().join("trace-run-1.json"))
        .output()
        .unwrap();
    assert!(chk.status.success());
    assert_eq!(String::from_utf8_lossy(&chk.stdout).trim(), "CONFORMANT");

    let one = bin()
        .args(["trace-check", "--microservices", "1", "--trace"])
        .arg(dir.path().join("trace-run-1.json"))
        .output()
        .unwrap();
    assert_eq!(one.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&one.stdout).starts_with("DIVERGENT"));
}

#[test]
fn zero_rate_run_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--scenario"])
        .arg(scenario("zero-rate"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("NO_PROVISIONING"));
}

#[test]
fn base_port_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("CDN_FLYPROV_BASE_PORT", "47310")
        .args(["run", "--runs", "2", "--scenario"])
        .arg(scenario("quebec-flash-crowd"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let order = &report["runs"][0]["order"];
    assert_eq!(order["status"], "registered");
}
