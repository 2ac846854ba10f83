use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn wptsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wptsim"))
        .args(args)
        .env_remove("WPTSIM_SEED")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const SMALL: &str = r#"{"n": 30, "horizon": 40, "repetitions": 3}"#;

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL);
    let out = dir.path().join("trace.csv");
    let r = wptsim(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "policy,rep,round,range,charger_energy,charges_round,charges_cum,working,adequate,alive"
    );
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 40);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], "fixed(5)");
        assert_eq!(row[1], "mean");
        assert_eq!(row[2], (i + 1).to_string());
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["policies"][0]["repetitions"], 3);
    assert!(summary["policies"][0]["charge_histogram"].is_array());
}

#[test]
fn reference_config_gives_500_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"n": 100}"#);
    let out = dir.path().join("t.csv");
    let r = wptsim(&["simulate", "--config", s(&cfg), "--out", s(&out), "--reps", "2"]);
    assert!(r.status.success());
    assert_eq!(csv_rows(&out).len(), 500);
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"n": 30, "horizon": 60, "repetitions": 1, "policy": {"kind": "mcer"}}"#);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert!(wptsim(&["simulate", "--config", s(&cfg), "--out", s(out), "--seed", "9"]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a.summary.json")).unwrap(),
        std::fs::read(dir.path().join("b.summary.json")).unwrap()
    );
}

#[test]
fn seed_env_var_and_flag() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL);
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_wptsim"));
        cmd.args(["simulate", "--config", s(&cfg), "--out", s(&out)]);
        cmd.env_remove("WPTSIM_SEED");
        if let Some(e) = env {
            cmd.env("WPTSIM_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(out).unwrap()
    };
    let env7 = run("e.csv", Some("7"), None);
    let flag7 = run("f.csv", None, Some("7"));
    let both = run("b.csv", Some("8"), Some("7"));
    let default = run("d.csv", None, None);
    assert_eq!(env7, flag7);
    assert_eq!(both, flag7);
    assert_ne!(default, flag7);
}

#[test]
fn missing_n_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"horizon": 10}"#);
    let r = wptsim(&["simulate", "--config", s(&cfg), "--out", s(&dir.path().join("x.csv"))]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("`n`"));
}

#[test]
fn unwritable_output_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL);
    let r = wptsim(&["simulate", "--config", s(&cfg), "--out", "/nonexistent/dir/x.csv"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("cannot write"));
}

#[test]
fn compare_shares_the_world() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{"n": 100, "horizon": 120, "repetitions": 4,
            "scenario": {"kind": "forbidden_circle", "radius": 3},
            "policies": [{"kind": "fixed", "range": 3}, {"kind": "fixed", "range": 5},
                         {"kind": "rand_min_max", "p": 0.5}]}"#,
    );
    let out = dir.path().join("cmp.csv");
    assert!(wptsim(&["compare", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 3 * 120);
    assert!(rows.iter().filter(|r| r[0] == "fixed(3)").all(|r| r[6] == "0"));
    assert!(rows.iter().any(|r| r[0] == "fixed(5)" && r[6] != "0"));
}

#[test]
fn compare_needs_policies() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", SMALL);
    let r = wptsim(&["compare", "--config", s(&cfg), "--out", s(&dir.path().join("x.csv"))]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("policies"));
}

#[test]
fn compare_with_one_policy_matches_simulate() {
    let dir = TempDir::new().unwrap();
    let sim_cfg = write(&dir, "a.json", r#"{"n": 30, "horizon": 40, "repetitions": 3, "policy": {"kind": "ldmax"}}"#);
    let cmp_cfg = write(&dir, "b.json", r#"{"n": 30, "horizon": 40, "repetitions": 3, "policies": [{"kind": "ldmax"}]}"#);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(wptsim(&["simulate", "--config", s(&sim_cfg), "--out", s(&a)]).status.success());
    assert!(wptsim(&["compare", "--config", s(&cmp_cfg), "--out", s(&b)]).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn reduce_then_solve() {
    let dir = TempDir::new().unwrap();
    let kp = write(&dir, "kp.json", r#"{"items": [{"value": 1, "weight": 1}, {"value": 2, "weight": 3}], "capacity": 3}"#);
    let inst = dir.path().join("mnc.json");
    assert!(wptsim(&["reduce", "--kp", s(&kp), "--target", "mnc", "--out", s(&inst)]).status.success());
    for method in ["brute", "dp"] {
        let r = wptsim(&["offline", "--instance", s(&inst), "--problem", "mnc", "--method", method]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let sol: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
        assert_eq!(sol["objective"], 2, "{method}");
    }
}

#[test]
fn reduce_single_item_layouts() {
    let dir = TempDir::new().unwrap();
    let kp = write(&dir, "kp.json", r#"{"items": [{"value": 2, "weight": 8}], "capacity": 8}"#);
    let out = dir.path().join("mnc.json");
    assert!(wptsim(&["reduce", "--kp", s(&kp), "--target", "mnc", "--range", "2", "--out", s(&out)]).status.success());
    let inst: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let agents = inst["rounds"][0]["agents"].as_array().unwrap();
    assert_eq!(agents.len(), 2);
    assert_eq!(agents[0]["contacts"][1]["entry_distance"], 1.0);

    let kp = write(&dir, "kp2.json", r#"{"items": [{"value": 2, "weight": 1}], "capacity": 1}"#);
    let out = dir.path().join("mnl.json");
    assert!(wptsim(&["reduce", "--kp", s(&kp), "--target", "mnl", "--range", "1", "--out", s(&out)]).status.success());
    let inst: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(inst["rounds"].as_array().unwrap().len(), 3);
    let r = wptsim(&["offline", "--instance", s(&out), "--problem", "mnl"]);
    let sol: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(sol["objective"], 2);
}

#[test]
fn reduce_rejects_zero_value() {
    let dir = TempDir::new().unwrap();
    let kp = write(&dir, "kp.json", r#"{"items": [{"value": 0, "weight": 5}], "capacity": 3}"#);
    let r = wptsim(&["reduce", "--kp", s(&kp), "--target", "mnc", "--range", "1", "--out", s(&dir.path().join("x.json"))]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("zero value"));
}

#[test]
fn offline_empty_budget() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "i.json",
        r#"{"ranges": [1.0, 2.0], "charger_energy": 0, "battery_capacity": 10, "initial_levels": [5],
            "rounds": [{"agents": [{"agent": 0, "consumption": [3], "contacts": [{"entry_distance": 0.5, "in_range_time": 1}, null]}]}]}"#,
    );
    let r = wptsim(&["offline", "--instance", s(&inst), "--problem", "mnc", "--method", "brute"]);
    let sol: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(sol["objective"], 0);
}

#[test]
fn offline_dp_explains_non_integer_costs() {
    let dir = TempDir::new().unwrap();
    let inst = write(
        &dir,
        "i.json",
        r#"{"ranges": [1.0], "charger_energy": 5, "battery_capacity": 10, "initial_levels": [5],
            "battery_mode": "reset_each_round",
            "rounds": [{"agents": [{"agent": 0, "consumption": [3], "contacts": [{"entry_distance": 0.9, "in_range_time": 1}]}]}]}"#,
    );
    let r = wptsim(&["offline", "--instance", s(&inst), "--problem", "mnc", "--method", "dp"]);
    assert!(!r.status.success());
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("energy_denominator") && err.contains("brute-force"), "{err}");
}
