use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn run(args: &[&str]) -> Output {
    run_with_env(args, &[])
}

fn run_with_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radialcap"));
    cmd.current_dir(data_dir()).args(args).env_remove("RADIALCAP_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).expect("utf-8 stderr")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json_doc(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("not JSON ({e}): {}", stdout(o)))
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

/// Compares a JSON document, timings removed, with a stored golden file;
/// `UPDATE_GOLDEN=1` rewrites the file instead.
fn check_golden(name: &str, mut doc: Value) {
    doc.as_object_mut().unwrap().remove("timings");
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    let rendered = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &rendered).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let expected: Value = serde_json::from_str(&expected).unwrap();
    assert!(close(&doc, &expected), "golden mismatch for {name}:\n{rendered}");
}

/// Structural equality with numbers compared to a relative 1e-9, so the
/// golden files survive differences in the last bits of libm.
fn close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            (x - y).abs() <= 1e-9 * x.abs().max(y.abs()) + 1e-300
        }
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(u, v)| close(u, v)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, u)| y.get(k).is_some_and(|v| close(u, v)))
        }
        _ => a == b,
    }
}

#[test]
fn classify_euclidean_p_at_least_m_is_parabolic() {
    let o = run(&["classify", "euclid3.json", "--p", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("PParabolic (lower-tangency criterion)"));
}

#[test]
fn classify_euclidean_p_below_m_is_inconclusive() {
    let o = run(&["classify", "euclid3.json", "--p", "2"]);
    assert_eq!(code(&o), 10);
    assert_eq!(stdout(&o).lines().next(), Some("Inconclusive (tail convergent)"));
}

#[test]
fn malformed_expression_is_an_input_error() {
    let o = run(&["classify", "malformed.json", "--p", "2"]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("field `w`") && err.contains("syntax error at offset 3"), "{err}");
}

#[test]
fn unknown_fields_and_missing_files_are_input_errors() {
    let o = run(&["classify", "unknown_field.json", "--p", "3"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown field `extra`"));
    assert_eq!(code(&run(&["classify", "no_such_file.json", "--p", "3"])), 2);
    assert_eq!(code(&run(&["classify", "euclid3.json"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn evaluation_failures_are_numeric_errors() {
    let o = run(&["capacity", "pole.json", "--p", "2", "--R", "2"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("domain error"));
}

#[test]
fn bounded_w_and_monotone_criteria() {
    let o = run(&["classify", "upper_sinh.json", "--p", "2", "--criterion", "bounded-w", "--r0", "1", "--w-lower", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PParabolic (bounded-warping criterion)"));
    let o = run(&["classify", "upper_sinh.json", "--p", "2", "--criterion", "bounded-w"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--w-lower"));
    let o = run(&["classify", "upper_sinh.json", "--p", "3", "--criterion", "monotone", "--q", "2"]);
    assert_eq!(code(&o), 10);
    assert!(stdout(&o).starts_with("Inconclusive (h <= eta <= lambda fails)"));
}

#[test]
fn sweep_finds_the_transition_at_p_equals_m() {
    let o = run(&["sweep", "euclid3.json", "--p-from", "2", "--p-to", "5", "--p-step", "0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["p", "outcome", "alpha_hat", "cap_at_horizon"]);
    assert_eq!(rows.len(), 7);
    for row in &rows {
        let p: f64 = row[0].parse().unwrap();
        let parabolic = row[1].starts_with("PParabolic");
        assert_eq!(parabolic, p >= 3.0, "{row:?}");
        let alpha: f64 = row[2].parse().unwrap();
        assert!((alpha - (-2.0 / (p - 1.0))).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn hyperbolic_sweep_is_all_inconclusive() {
    let o = run(&["sweep", "hyperbolic3.json", "--p-from", "2", "--p-to", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r[1].starts_with("Inconclusive")), "{rows:?}");
}

#[test]
fn sweep_writes_csv_file_and_rejects_empty_range() {
    let dir = std::env::temp_dir().join(format!("radialcap-sweep-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("rows.csv");
    let o = run(&["sweep", "euclid2.json", "--p-from", "2", "--p-to", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("p-parabolic from p = 2"));
    let (_, rows) = csv_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 3);
    std::fs::remove_dir_all(&dir).unwrap();

    let o = run(&["sweep", "euclid3.json", "--p-from", "5", "--p-to", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("empty p range"));
}

fn capacity_value(args: &[&str]) -> Value {
    let o = run(args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    json_doc(&o)
}

#[test]
fn newtonian_capacity() {
    let doc = capacity_value(&["capacity", "euclid3.json", "--p", "2", "--rho", "1", "--R", "2", "--json"]);
    let eight_pi = 8.0 * std::f64::consts::PI;
    for key in ["drifted_capacity", "exact_model_capacity"] {
        let v = doc["outcome"][key].as_f64().unwrap();
        assert!((v - eight_pi).abs() < 1e-9 * eight_pi, "{key} = {v}");
    }
    let doc = capacity_value(&["capacity", "euclid3.json", "--p", "2", "--R", "1e4", "--json"]);
    let expected = 4.0 * std::f64::consts::PI / (1.0 - 1e-4);
    let v = doc["outcome"]["drifted_capacity"].as_f64().unwrap();
    assert!((v - expected).abs() < 1e-9 * expected);
}

#[test]
fn capacity_bound_needs_positive_flux() {
    let four_pi = (4.0 * std::f64::consts::PI).to_string();
    let doc = capacity_value(&["capacity", "euclid3.json", "--p", "2", "--R", "2", "--flux", &four_pi, "--json"]);
    let bound = doc["outcome"]["upper_bound"].as_f64().unwrap();
    assert!((bound - 8.0 * std::f64::consts::PI).abs() < 1e-9 * bound);
    let o = run(&["capacity", "euclid3.json", "--p", "2", "--R", "2", "--flux", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn exact_capacity_only_for_self_constellations() {
    let doc = capacity_value(&["capacity", "upper_sinh.json", "--p", "2", "--R", "2", "--json"]);
    assert!(doc["outcome"]["exact_model_capacity"].is_null());
    assert!(doc["outcome"]["drifted_capacity"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_reproduces_the_euclidean_profile() {
    let o = run(&["solve", "euclid3.json", "--p", "2", "--rho", "1", "--R", "2", "--samples", "11"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["r", "psi_closed", "psi_ode", "residual"]);
    assert_eq!(rows.len(), 11);
    for (i, row) in rows.iter().enumerate() {
        let r: f64 = row[0].parse().unwrap();
        let exact = 2.0 * (1.0 - 1.0 / r);
        let closed: f64 = row[1].parse().unwrap();
        let ode: f64 = row[2].parse().unwrap();
        assert!((closed - exact).abs() < 1e-10, "{row:?}");
        assert!((ode - exact).abs() < 1e-6, "{row:?}");
        if i == 0 || i == rows.len() - 1 {
            assert!(row[3].is_empty());
        } else {
            assert!(row[3].parse::<f64>().unwrap() <= 1e-6, "{row:?}");
        }
    }
}

#[test]
fn solve_with_constant_weight_is_linear() {
    // m = 2 and h = 1/(2r) give a constant weight at p = 2
    let o = run(&["solve", "linear.json", "--p", "2", "--rho", "1", "--R", "3", "--samples", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = csv_rows(&stdout(&o));
    for row in rows {
        let r: f64 = row[0].parse().unwrap();
        let closed: f64 = row[1].parse().unwrap();
        assert!((closed - (r - 1.0) / 2.0).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn simulate_reports_exact_comparison() {
    let o = run(&["simulate", "euclid3.json", "--paths", "400", "--dt", "1e-3", "--seed", "3", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc = json_doc(&o);
    assert_eq!(doc["outcome"]["paths"], 400);
    let exact = doc["evidence"]["exact_p_inner"].as_f64().unwrap();
    assert!((exact - 7.0 / 15.0).abs() < 1e-12);
    assert!(doc["evidence"]["deviation_in_stderr"].as_f64().unwrap().abs() < 4.0);
    let o = run(&["simulate", "euclid3.json", "--r0", "9"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn simulation_does_not_depend_on_thread_count() {
    let args = ["simulate", "euclid2.json", "--paths", "300", "--dt", "1e-3", "--json"];
    let mut one = json_doc(&run_with_env(&args, &[("RADIALCAP_THREADS", "1")]));
    let mut three = json_doc(&run_with_env(&args, &[("RADIALCAP_THREADS", "3")]));
    one.as_object_mut().unwrap().remove("timings");
    three.as_object_mut().unwrap().remove("timings");
    assert_eq!(one, three);
    let o = run_with_env(&args, &[("RADIALCAP_THREADS", "zero")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn json_documents_have_a_stable_shape() {
    let cases: [&[&str]; 5] = [
        &["classify", "euclid3.json", "--p", "3", "--json"],
        &["sweep", "euclid3.json", "--p-from", "2", "--p-to", "3", "--json"],
        &["capacity", "euclid3.json", "--p", "2", "--R", "2", "--json"],
        &["solve", "euclid3.json", "--p", "2", "--R", "2", "--samples", "3", "--json"],
        &["classify", "malformed.json", "--p", "3", "--json"],
    ];
    for args in cases {
        let doc = json_doc(&run(args));
        let keys: Vec<&str> = doc.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 5, "{args:?}");
        for k in ["command", "inputs", "outcome", "evidence", "timings"] {
            assert!(doc.get(k).is_some(), "{args:?} lacks {k}");
        }
        assert_eq!(doc["command"], args[0]);
    }
}

#[test]
fn golden_classify() {
    let o = run(&["classify", "euclid3.json", "--p", "3", "--json"]);
    assert_eq!(code(&o), 0);
    check_golden("classify_euclid3_p3.json", json_doc(&o));
}

#[test]
fn golden_capacity() {
    let o = run(&["capacity", "euclid3.json", "--p", "2", "--R", "2", "--flux", "1", "--json"]);
    assert_eq!(code(&o), 0);
    check_golden("capacity_euclid3.json", json_doc(&o));
}

#[test]
fn golden_error() {
    let o = run(&["classify", "malformed.json", "--p", "3", "--json"]);
    assert_eq!(code(&o), 2);
    check_golden("classify_malformed.json", json_doc(&o));
}
