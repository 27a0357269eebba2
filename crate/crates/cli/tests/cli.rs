use std::fs;
use std::process::{Command, Output};

fn tfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn temp(name: &str, contents: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("tfg-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    fs::write(&p, contents).unwrap();
    p
}

#[test]
fn entropy_row_has_bound() {
    let o = tfg(&["entropy", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("n,count,bound"));
    assert!(out.contains(",25165824,"), "{out}");
}

#[test]
fn decimal_epsilon_is_a_parse_error() {
    let o = tfg(&["folner-bound", "--eps", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lef_reports_minimal_level() {
    let o = tfg(&["lef", "--ball", "1", "--max-n", "8", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["minimal_n"].as_u64().is_some());
    assert_eq!(v["pass"], true);
}

#[test]
fn phi_table_csv() {
    let o = tfg(&["phi-table", "--steps", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "i,Phi,phi,verified\n1,3,3,true\n2,6912,6913,true\n");
}

#[test]
fn folner_bound_constants() {
    let o = tfg(&["folner-bound", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["c"], "240");
    assert_eq!(v["k_proof"], "960");
}

#[test]
fn sofic_check_passes_by_default() {
    let o = tfg(&["sofic-check", "--n", "8", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn quasitile_grid() {
    let o = tfg(&["quasitile", "--side", "64", "--tile", "8"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("placements=64 coverage=1"));
}

#[test]
fn config_runs_and_is_deterministic() {
    let cfg = temp(
        "psi.json",
        r#"{"command": "psi-table", "seed": 3, "json": true, "params": {"eps": "1/2", "steps": 3}}"#,
    );
    let a = tfg(&["run", cfg.to_str().unwrap()]);
    let b = tfg(&["run", cfg.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let direct = tfg(&["psi-table", "--json", "--steps", "3"]);
    assert_eq!(a.stdout, direct.stdout);
}

#[test]
fn config_rejects_unknown_fields() {
    let cfg = temp("bad.json", r#"{"command": "entropy", "params": {"n": 2, "colour": 1}}"#);
    assert_eq!(tfg(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
    let cfg = temp("bad2.json", r#"{"command": "entropy", "extra": true}"#);
    assert_eq!(tfg(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
    let cfg = temp("bad3.json", r#"{"command": "phi-table", "params": {"eps": "0.5"}}"#);
    assert_eq!(tfg(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_artifact() {
    let dir = std::env::temp_dir().join(format!("tfg-cli-out-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let p = dir.join("psi.csv");
    let o = tfg(&["psi-table", "--steps", "2", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(&p).unwrap().starts_with("i,Psi,radius,verified\n1,3,1,true\n"));
}
