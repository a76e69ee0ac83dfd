use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dlca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlca"))
        .args(args)
        .env_remove("DLCA_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const TINY: &str = r#"{"protocols": ["rts_cts", "sh_txop"], "N": 4, "F": 2, "trials": 2, "run": {"slots": 500}}"#;

#[test]
fn presets_list_names_every_preset() {
    let o = dlca(&["presets", "list"]);
    assert!(o.status.success());
    for name in ["throughput", "collisions", "idle", "convergence", "utility", "pf_recovery", "smoke", "default"] {
        assert!(stdout(&o).contains(name), "missing {name}");
    }
}

#[test]
fn validate_accepts_good_and_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), TINY);
    let o = dlca(&["validate", &good]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 point(s)"));

    let bad = write_config(dir.path(), r#"{"N": 0}"#);
    let o = dlca(&["validate", &bad]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));

    let o = dlca(&["validate", "/nonexistent/exp.json"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn run_writes_identical_tables_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = dlca(&["run", &cfg, "--out", a.to_str().unwrap(), "--workers", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("rts_cts"));
    let o = Command::new(env!("CARGO_BIN_EXE_dlca"))
        .args(["run", &cfg, "--out", b.to_str().unwrap()])
        .env("DLCA_WORKERS", "3")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for file in ["summary.csv", "trace.csv"] {
        let x = fs::read(a.join(file)).unwrap();
        assert_eq!(x, fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn sweep_expands_the_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"protocol": "rts_cts", "trials": 1, "run": {"slots": 300}}"#);
    let out = dir.path().join("sweep");
    let o = dlca(&["sweep", &cfg, "--param", "N=8..24:8", "--param", "F=2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().filter(|l| l.starts_with("rts_cts,")).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("rts_cts,8,2,"));
    assert!(rows[2].starts_with("rts_cts,24,2,"));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    assert!(!dlca(&["sweep", &cfg, "--param", "N=8..56:0"]).status.success());
    assert!(!dlca(&["sweep", &cfg, "--param", "W=1..2"]).status.success());
    assert!(!dlca(&["run", &cfg, "--workers", "0"]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_dlca"))
        .args(["presets", "list"])
        .env("DLCA_WORKERS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
}
