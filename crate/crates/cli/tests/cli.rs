//! End-to-end tests of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_copulamix"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Minimal JSON-schema check: type, required, properties, items, enum.
/// Covers the subset used by the shipped schemas.
mod schema {
    use serde_json::Value;

    pub fn validate(value: &Value, schema: &Value, path: &str) -> Result<(), String> {
        if let Some(types) = schema.get("type") {
            let ok = match types {
                Value::String(t) => type_matches(value, t),
                Value::Array(ts) => ts
                    .iter()
                    .any(|t| t.as_str().map(|t| type_matches(value, t)).unwrap_or(false)),
                _ => false,
            };
            if !ok {
                return Err(format!("{path}: type mismatch, got {value}"));
            }
        }
        if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
            if !allowed.contains(value) {
                return Err(format!("{path}: {value} not in enum"));
            }
        }
        if let Some(required) = schema.get("required").and_then(Value::as_array) {
            for r in required {
                let key = r.as_str().unwrap();
                if value.get(key).is_none() {
                    return Err(format!("{path}: missing required field '{key}'"));
                }
            }
        }
        if let Some(props) = schema.get("properties").and_then(Value::as_object) {
            if let Some(obj) = value.as_object() {
                for (key, sub) in props {
                    if let Some(v) = obj.get(key) {
                        validate(v, sub, &format!("{path}.{key}"))?;
                    }
                }
            }
        }
        if let Some(items) = schema.get("items") {
            if let Some(arr) = value.as_array() {
                for (i, v) in arr.iter().enumerate() {
                    validate(v, items, &format!("{path}[{i}]"))?;
                }
            }
        }
        Ok(())
    }

    fn type_matches(value: &Value, t: &str) -> bool {
        match t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        }
    }
}

fn check_schema(report_path: &Path, schema_name: &str) {
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_path).unwrap()).unwrap();
    let schema_path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(schema_name);
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    schema::validate(&report, &schema, "$").unwrap();
}

#[test]
fn simulate_is_deterministic_and_fit_consumes_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out1 = run(d, &["simulate", "--dgp", "exp1", "--K", "25", "--seed", "7", "--out", "a.csv"]);
    assert_code(&out1, 0);
    let out2 = run(d, &["simulate", "--dgp", "exp1", "--K", "25", "--seed", "7", "--out", "b.csv"]);
    assert_code(&out2, 0);
    let a = std::fs::read(d.join("a.csv")).unwrap();
    let b = std::fs::read(d.join("b.csv")).unwrap();
    assert_eq!(a, b, "same seed must give identical files");

    let fit = run(
        d,
        &["fit", "a.csv", "--copula", "clayton", "--margin", "gaussian", "--out", "fit.json"],
    );
    assert_code(&fit, 0);
    check_schema(&d.join("fit.json"), "fit_report.schema.json");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    // three named parameters for the intercept-only Gaussian margin + copula
    let names: Vec<&str> = report["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, vec!["margin.intercept", "margin.log_sd", "copula.intercept"]);
    assert_eq!(report["clusters"].as_array().unwrap().len(), 25);
}

#[test]
fn fit_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // empty file: header only
    std::fs::write(d.join("empty.csv"), "cluster,y\n").unwrap();
    let out = run(d, &["fit", "empty.csv", "--out", "r.json"]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no data rows"));
    // missing column named in the message
    std::fs::write(d.join("cols.csv"), "cluster,y\n1,2.0\n").unwrap();
    let out = run(
        d,
        &["fit", "cols.csv", "--margin-covariates", "xmiss", "--out", "r.json"],
    );
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("xmiss"));
    // non-numeric cell reported with its row number
    std::fs::write(d.join("bad.csv"), "cluster,y\n1,2.0\n1,abc\n").unwrap();
    let out = run(d, &["fit", "bad.csv", "--out", "r.json"]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 3"));
}

#[test]
fn missing_rows_are_rejected_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("cluster,y\n");
    for k in 0..8 {
        for i in 0..3 {
            csv.push_str(&format!("{k},{}.{i}\n", 9 + (k + i) % 3));
        }
    }
    csv.push_str("9,\n"); // missing response
    std::fs::write(d.join("m.csv"), csv).unwrap();
    let out = run(
        d,
        &["fit", "m.csv", "--copula", "independence", "--margin", "gaussian", "--out", "r.json"],
    );
    assert_code(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(report["data"]["rows_rejected"], 1);
    assert_eq!(report["data"]["n_obs"], 24);
}

#[test]
fn gaussian_fit_on_dgp1_recovers_variance_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = run(d, &["simulate", "--dgp", "dgp1", "--K", "60", "--n", "10", "--seed", "3", "--out", "d1.csv"]);
    assert_code(&sim, 0);
    let fit = run(
        d,
        &[
            "fit", "d1.csv", "--copula", "gaussian", "--margin", "gaussian",
            "--margin-covariates", "x", "--out", "fit.json",
        ],
    );
    assert_code(&fit, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    let rho_pred = report["estimates"][3]["value"].as_f64().unwrap();
    let rho = rho_pred.tanh();
    // eta ~ N(0,1), eps ~ N(0, 1.5^2): rho = 1/sqrt(3.25) = 0.5547
    assert!((rho - 0.5547).abs() < 0.15, "rho-hat = {rho}");
}

#[test]
fn select_golden_run_on_dgp5_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = run(d, &["simulate", "--dgp", "dgp5", "--K", "25", "--n", "15", "--seed", "11", "--out", "d5.csv"]);
    assert_code(&sim, 0);
    let sel = run(
        d,
        &[
            "select", "d5.csv", "--margin", "poisson", "--margin-covariates", "x",
            "--copulas", "clayton,frank,gaussian,gumbel,student",
            "--criterion", "bic", "--out", "sel.json",
        ],
    );
    assert_code(&sel, 0);
    check_schema(&d.join("sel.json"), "select_report.schema.json");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("sel.json")).unwrap()).unwrap();
    let cs = report["candidates"].as_array().unwrap();
    assert_eq!(cs[0]["label"], "clayton");
    assert_eq!(cs[0]["chosen"], true);
    assert_eq!(cs[0]["rank"], 1);
    // ranking by the criterion is monotone
    let vals: Vec<f64> = cs.iter().map(|c| c["criterion_value"].as_f64().unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn curves_independence_collapse_to_one_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(
        d,
        &[
            "curves", "--theta=-1,0.5", "--copula", "independence", "--margin", "bernoulli",
            "--margin-covariates", "x", "--v", "0.1,0.5,0.9",
            "--x-min", "0", "--x-max", "2", "--x-steps", "5", "--out", "c.csv",
        ],
    );
    assert_code(&out, 0);
    let text = std::fs::read_to_string(d.join("c.csv")).unwrap();
    let mut by_x: std::collections::HashMap<String, Vec<f64>> = Default::default();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        by_x.entry(cells[0].to_string()).or_default().push(cells[2].parse().unwrap());
    }
    for (x, curves) in by_x {
        assert_eq!(curves.len(), 3);
        for c in &curves {
            assert!((c - curves[0]).abs() < 1e-12, "curves differ at x={x}");
        }
    }
}

#[test]
fn predict_reports_stable_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["simulate", "--dgp", "exp1", "--K", "10", "--seed", "5", "--out", "e.csv"]);
    let fit = run(d, &["fit", "e.csv", "--copula", "clayton", "--out", "f.json"]);
    assert_code(&fit, 0);
    let pred = run(
        d,
        &["predict", "e.csv", "--params", "f.json", "--quantiles", "0.1,0.9", "--out", "p.csv"],
    );
    assert_code(&pred, 0);
    let text = std::fs::read_to_string(d.join("p.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "cluster,row,v_median,v_mean,predicted_mean,q0.1,q0.9");
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn harness_campaign_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("campaign.toml"),
        r#"
dgp = "exp1"
clusters = 10
cluster_size = 5
replications = 2
seed = 42
quad_nodes = 15
candidates = ["clayton", "independence"]
criterion = "bic"
"#,
    )
    .unwrap();
    let out = run(d, &["simulate", "--harness", "campaign.toml", "--out", "report"]);
    assert_code(&out, 0);
    check_schema(&d.join("report.json"), "harness_report.schema.json");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["replications"], 2);
    assert_eq!(json["failures"], 0);
    let csv = std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert!(csv.lines().next().unwrap() == "section,name,value,extra");
    assert!(csv.contains("param_rmse"));
    assert!(csv.contains("selection_pct"));
}

#[test]
fn unknown_family_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("t.csv"), "cluster,y\n1,1.0\n1,2.0\n2,1.5\n2,2.5\n").unwrap();
    let out = run(d, &["fit", "t.csv", "--copula", "galambos", "--out", "r.json"]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("galambos"));
}

#[test]
fn fit_restarts_from_a_previous_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run(d, &["simulate", "--dgp", "exp1", "--K", "30", "--seed", "13", "--out", "e.csv"]);
    let first = run(d, &["fit", "e.csv", "--copula", "clayton", "--out", "f1.json"]);
    assert_code(&first, 0);
    let second = run(
        d,
        &["fit", "e.csv", "--copula", "clayton", "--start", "f1.json", "--out", "f2.json"],
    );
    assert_code(&second, 0);
    let r1: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("f1.json")).unwrap()).unwrap();
    let r2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("f2.json")).unwrap()).unwrap();
    // restarting at the optimum stays at the optimum
    for (a, b) in r1["estimates"].as_array().unwrap().iter().zip(r2["estimates"].as_array().unwrap())
    {
        let (x, y) = (a["value"].as_f64().unwrap(), b["value"].as_f64().unwrap());
        assert!((x - y).abs() < 1e-4, "{x} vs {y}");
    }
    assert!(r2["iterations"].as_u64().unwrap() <= r1["iterations"].as_u64().unwrap());
}
