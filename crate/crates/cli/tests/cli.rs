use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn quartz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quartz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn assert_schema(name: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| v.to_string().parse().unwrap())
}

/// Data rows of a CSV document, skipping the config line and header.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn roots_reports_two_equilibria() {
    let out = quartz(&["roots", "--family", "piecewise", "--k", "1", "--N", "1", "--alpha", "0.2", "--r", "1"]);
    assert!(out.status.success());
    let doc = json_stdout(&out);
    assert_schema("roots", &doc);
    assert_eq!(doc["result"]["count"], 2);
    let lower = f(&doc["result"]["roots"][0]["refined"]);
    assert!((lower - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-10);
    assert_eq!(doc["config"]["alpha"].to_string(), "2.0000000000000001e-1");
}

#[test]
fn asym_residuals_decrease() {
    let out = quartz(&["asym", "--a", "1", "--b", "-1", "--compare-grid", "1000,10000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["x", "direct", "expansion", "residual"]);
    assert_eq!(rows.len(), 2);
    assert!(rows[1][3].abs() < rows[0][3].abs());
}

#[test]
fn asym_json_record() {
    let out = quartz(&["asym", "--series", "r", "--a", "1", "--A", "-3", "--depth", "1", "--compare-grid", "0.01", "--format", "json"]);
    assert!(out.status.success());
    let doc = json_stdout(&out);
    assert_schema("asym", &doc);
    assert_eq!(doc["result"]["variable"], "v_to_zero");
    assert!(doc["result"]["terms"].as_array().unwrap().iter().any(|t| t["log_power"] == 1));
}

#[test]
fn identity_audit_passes() {
    let out = quartz(&["identity-audit", "--family", "power_law", "--a", "2", "--b", "0", "--x", "3"]);
    assert!(out.status.success());
    let doc = json_stdout(&out);
    assert_schema("identity-audit", &doc);
    assert!(f(&doc["result"]["g_identity"]["closed_form_residual"]) <= 1e-10);
    assert!(f(&doc["result"]["d_identity"]["residual"]) <= 1e-10);
}

#[test]
fn classify_and_threshold_documents() {
    let out = quartz(&["classify", "--a", "2", "--b", "0", "--alpha", "0.1"]);
    assert!(out.status.success());
    let doc = json_stdout(&out);
    assert_schema("classify", &doc);
    assert_eq!(doc["result"]["verdict"]["regime"], "threshold_weak");
    assert_eq!(doc["result"]["existence"], "exists");

    let out = quartz(&["threshold", "--a", "2", "--b", "1"]);
    let doc = json_stdout(&out);
    assert_schema("threshold", &doc);
    assert_eq!(doc["result"]["m_estimate"]["attained_at"]["kind"], "supremum_at_infinity");
}

#[test]
fn equilibrium_point_and_grid() {
    let out = quartz(&["equilibrium", "--family", "piecewise", "--k", "1", "--N", "1", "--x", "1", "--profile", "5"]);
    let doc = json_stdout(&out);
    assert_schema("equilibrium", &doc);
    assert!((f(&doc["result"]["F"]["value"]) - 0.25).abs() < 1e-12);

    let out = quartz(&["equilibrium", "--family", "piecewise", "--k", "1", "--N", "1", "--x-min", "0.1", "--x-max", "10", "--count", "5"]);
    let (header, rows) = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header, ["x", "value", "tail_bound", "terms_used"]);
    assert_eq!(rows.len(), 5);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "alpha = 0.3\nr = 1.0\n\n[family]\nkind = \"tabulated\"\nk = [1.0, 1.0]\np = [1.0, 0.5]\nq = [0.0, 0.5]\n",
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let out = quartz(&["--config", cfg, "equilibrium", "--x", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json_stdout(&out);
    assert_eq!(doc["config"]["family"]["kind"], "tabulated");

    // flags win over the file
    let out = quartz(&["--config", cfg, "roots", "--family", "piecewise", "--k", "1", "--N", "1", "--alpha", "0.2"]);
    let doc = json_stdout(&out);
    assert_eq!(doc["result"]["count"], 2);
    let out = quartz(&["--config", cfg, "roots", "--family", "piecewise", "--k", "1", "--N", "1"]);
    assert_eq!(json_stdout(&out)["result"]["count"], 0);
}

#[test]
fn usage_and_numeric_failures_have_distinct_codes() {
    let out = quartz(&["roots", "--family", "piecewise", "--k", "1", "--N", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_schema("error", &diag);

    let out = quartz(&["roots", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    let out = quartz(&["equilibrium", "--family", "piecewise", "--k", "1", "--N", "2", "--x", "1000", "--term-cap", "10"]);
    assert_eq!(out.status.code(), Some(3));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_schema("error", &diag);
    assert_eq!(diag["error"]["kind"], "term_cap");
}

#[test]
fn simulate_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let summary = dir.path().join("summary.json");
    let out = quartz(&[
        "-o", csv.to_str().unwrap(), "simulate", "--family", "piecewise", "--k", "1", "--N", "1", "--alpha", "0.2",
        "--imax", "60", "--t-end", "500", "--sample-every", "10", "--summary", summary.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(header, ["t", "x", "total_cells", "total_load", "rhs_norm"]);
    assert!(!rows.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_schema("simulate", &doc);
    assert_eq!(doc["result"]["converged"], true);
    assert!((f(&doc["result"]["final_state"]["x"]) - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-4);
}

#[test]
fn reproduce_reports_and_sets_exit_status() {
    let out = quartz(&["reproduce", "--criteria", "1,3"]);
    assert!(out.status.success());
    let doc = json_stdout(&out);
    assert_schema("reproduce", &doc);
    assert_eq!(doc["result"]["passed"], 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS criterion  3"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["equilibrium", "--family", "power_law", "--a", "1", "--b", "0.5", "--x", "7"];
    assert_eq!(quartz(&args).stdout, quartz(&args).stdout);
}
