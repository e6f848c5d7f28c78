use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn qot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qot"))
        .args(args)
        .env_remove("QOT_LOG")
        .output()
        .expect("spawn qot")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn record(rows: &[[(f64, f64); 2]]) -> Value {
    let entries: Vec<Value> = rows.iter().flatten().map(|(re, im)| json!([re, im])).collect();
    json!({"dim": rows.len(), "entries": entries})
}

fn diag(p: f64) -> Value {
    record(&[[(p, 0.0), (0.0, 0.0)], [(0.0, 0.0), (1.0 - p, 0.0)]])
}

fn write(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(text: &[u8]) -> Vec<Vec<f64>> {
    let text = String::from_utf8_lossy(text);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,entropy,trace_drift,min_eig,dist_to_uniform"));
    lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

/// Drops wall-clock fields so runs can be compared exactly.
fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_time_s");
            m.remove("seconds");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn identical_marginals_give_zero_distance() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &diag(0.3));
    for backend in ["conic", "direct"] {
        let r = stdout_json(&qot(&["distance", "--marginal0", s(&a), "--marginal1", s(&a), "--backend", backend]));
        assert_eq!(r["distance"].as_f64().unwrap(), 0.0, "{backend}");
    }
}

#[test]
fn log_direct_report_has_action_and_energies() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &diag(0.3));
    let b = write(&dir, "b.json", &diag(0.8));
    let r = stdout_json(&qot(&["distance", "--marginal0", s(&a), "--marginal1", s(&b), "--kind", "log", "--backend", "direct", "--steps", "8"]));
    assert_eq!(r["kind"], "log");
    assert_eq!(r["step_energies"].as_array().unwrap().len(), 8);
    let (d, action) = (r["distance"].as_f64().unwrap(), r["action"].as_f64().unwrap());
    assert!(d > 0.0 && (d * d - action).abs() < 1e-12 * action.max(1.0));
}

#[test]
fn conic_rejects_log_geometry() {
    let out = qot(&["distance", "--kind", "log", "--backend", "conic"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_json_reports_position() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, "{\"dim\": 2,\n \"entries\": [[1, 0], oops]}").unwrap();
    let out = qot(&["distance", "--marginal0", s(&p)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:2:"), "{err}");
}

#[test]
fn wrong_entry_count_and_bad_density_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let short = write(&dir, "s.json", &json!({"dim": 2, "entries": [[1, 0]]}));
    assert_eq!(qot(&["distance", "--marginal0", s(&short)]).status.code(), Some(2));
    let neg = write(&dir, "n.json", &diag(1.3));
    assert_eq!(qot(&["distance", "--marginal0", s(&neg)]).status.code(), Some(2));
}

#[test]
fn geodesic_writes_path_to_file() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &diag(0.2));
    let b = write(&dir, "b.json", &diag(0.7));
    let out = dir.path().join("geo.json");
    let r = qot(&["geodesic", "--marginal0", s(&a), "--marginal1", s(&b), "--steps", "4", "--out", s(&out)]);
    assert!(r.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let path = v["path"].as_array().unwrap();
    assert_eq!(path.len(), 5);
    assert_eq!(path[0], diag(0.2));
    assert_eq!(v["times"][4].as_f64(), Some(1.0));
}

#[test]
fn uniform_state_gives_constant_trace() {
    let dir = TempDir::new().unwrap();
    let u = write(&dir, "u.json", &diag(0.5));
    for kind in ["anticomm", "log"] {
        let out = qot(&["flow", "--marginal0", s(&u), "--kind", kind, "--tfinal", "0.5", "--dt", "0.01"]);
        assert!(out.status.success());
        let rows = csv_rows(&out.stdout);
        assert!(rows.len() > 2);
        for r in &rows {
            assert!((r[1] - 2f64.ln()).abs() < 1e-14);
            assert!(r[2].abs() < 1e-14 && (r[3] - 0.5).abs() < 1e-14 && r[4] < 1e-14);
        }
    }
}

#[test]
fn log_flow_reaches_uniform() {
    let out = qot(&["flow", "--seed", "4", "--kind", "log", "--tfinal", "10", "--dt", "1e-3"]);
    assert!(out.status.success());
    let rows = csv_rows(&out.stdout);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 10.0);
    assert!(last[4] < 1e-6, "{last:?}");
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1] - 1e-12));
}

#[test]
fn oversized_step_fails_with_step_index() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.json", &diag(0.1));
    let out = qot(&["flow", "--marginal0", s(&a), "--dt", "1e7", "--tfinal", "1e7"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 1"));
}

#[test]
fn innerprod_hand_value() {
    let dir = TempDir::new().unwrap();
    let basis = json!([
        record(&[[(0.0, 0.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 0.0)]]),
        record(&[[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (-1.0, 0.0)]]),
    ]);
    let bp = write(&dir, "basis.json", &basis);
    let rho = write(&dir, "rho.json", &diag(0.5));
    let sy = write(&dir, "sy.json", &record(&[[(0.0, 0.0), (0.0, -1.0)], [(0.0, 1.0), (0.0, 0.0)]]));
    let r = stdout_json(&qot(&["innerprod", "--marginal0", s(&rho), "--basis", s(&bp), "--tangent", s(&sy)]));
    assert!((r["inner"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn qutrit_preset() {
    let r = stdout_json(&qot(&["distance", "--basis", "gellmann:3", "--seed", "2", "--steps", "4"]));
    assert!(r["distance"].as_f64().unwrap() > 0.0);
    assert_eq!(qot(&["distance", "--basis", "gellmann:x"]).status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &json!({"command": "distance", "steps": 6, "seed": 9}));
    let r = stdout_json(&qot(&["distance", "--config", s(&cfg)]));
    assert_eq!(r["steps"], 6);
    let r = stdout_json(&qot(&["distance", "--config", s(&cfg), "--steps", "3"]));
    assert_eq!(r["steps"], 3);

    let unknown = write(&dir, "u.json", &json!({"steps": 6, "stpes": 3}));
    let out = qot(&["distance", "--config", s(&unknown)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stpes"));

    let other = write(&dir, "o.json", &json!({"command": "flow"}));
    assert_eq!(qot(&["distance", "--config", s(&other)]).status.code(), Some(2));
    let negative = write(&dir, "g.json", &json!({"gamma": -1.0}));
    assert_eq!(qot(&["spatial-distance", "--config", s(&negative)]).status.code(), Some(2));
}

#[test]
fn seeds_are_reproducible() {
    let run = |seed: &str| {
        let mut v = stdout_json(&qot(&["distance", "--seed", seed, "--steps", "8"]));
        strip_timing(&mut v);
        v
    };
    assert_eq!(run("5"), run("5"));
    assert_ne!(run("5")["distance"], run("6")["distance"]);
}

#[test]
fn spatial_constant_fields_match_matrix_distance() {
    let dir = TempDir::new().unwrap();
    let f0 = write(&dir, "f0.json", &json!(vec![diag(0.2); 4]));
    let f1 = write(&dir, "f1.json", &json!(vec![diag(0.7); 4]));
    let m0 = write(&dir, "m0.json", &diag(0.2));
    let m1 = write(&dir, "m1.json", &diag(0.7));
    let field = stdout_json(&qot(&["spatial-distance", "--marginal0", s(&f0), "--marginal1", s(&f1), "--steps", "8"]));
    let matrix = stdout_json(&qot(&["distance", "--marginal0", s(&m0), "--marginal1", s(&m1), "--steps", "8"]));
    let (a, b) = (field["distance"].as_f64().unwrap(), matrix["distance"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-4 * b, "{a} vs {b}");
    assert_eq!(field["grid_points"], 4);
}

#[test]
fn spatial_flow_trace() {
    let out = qot(&["spatial-flow", "--seed", "3", "--grid", "6", "--tfinal", "0.05", "--dt", "1e-4", "--record-every", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&out.stdout);
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1] - 1e-12));
    assert!(rows.iter().all(|r| r[2] < 1e-10));
}

#[test]
fn check_filter_and_reproducibility() {
    let run = || {
        let out = qot(&["check", "--only", "identity28", "--quick", "--seed", "11"]);
        let mut v = stdout_json(&out);
        strip_timing(&mut v);
        v
    };
    let a = run();
    assert_eq!(a["passed"], true);
    let outcomes = a["outcomes"].as_array().unwrap();
    assert!(!outcomes.is_empty());
    assert!(outcomes.iter().all(|o| o["suite"] == "kubo_mori_identity"));
    assert_eq!(a, run());
    assert_eq!(qot(&["check", "--only", "nope"]).status.code(), Some(2));
}

#[test]
fn check_list_names_suites() {
    let out = qot(&["check", "--list"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("kubo_mori_identity")));
}
