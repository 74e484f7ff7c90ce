use std::process::{Command, Output};

use serde_json::Value;

const SCALAR: &str =
    r#"{"dim":1,"H":{"re":[[0.0]]},"V":{"re":[[1.0]]},"n":2,"functions":[{"family":"polynomial","coeffs":[0,0,1]}]}"#;

fn ssf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssf")).args(args).output().expect("ssf runs")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().find(|l| l.starts_with('{')).expect("json line on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn scalar_instance_computes() {
    let out = ssf(&["compute", "--input", SCALAR]);
    assert_eq!(out.status.code(), Some(0));
    let rec: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["n"], 2);
    assert!((rec["integral"]["value"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(rec["traceFormula"].as_array().unwrap().len(), 1);
    assert_eq!(rec["allPass"], true);
}

#[test]
fn samples_go_to_stdout_without_out() {
    let out = ssf(&["compute", "--input", SCALAR, "--samples", "-1:2:4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,eta,cumulative"));
    // eta_2 = (1 - t) on [0, 1]: value at the first breakpoint is 1
    assert!(text.lines().any(|l| l.starts_with("0,1,")));
}

#[test]
fn zero_tolerance_is_a_breach() {
    let dir = tempfile::tempdir().unwrap();
    let tol = dir.path().join("tol.json");
    std::fs::write(&tol, r#"{"traceFormula": 0.0}"#).unwrap();
    let out = ssf(&["compute", "--input", SCALAR, "--tol-file", tol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_json(&out)["breach"]["traceFormula"].is_array());
}

#[test]
fn non_hermitian_input_names_the_entry() {
    let bad = r#"{"dim":2,"H":{"re":[[0,0],[0,1]]},"V":{"re":[[0,1],[2,0]]},"n":1}"#;
    let out = ssf(&["compute", "--input", bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = &stderr_json(&out)["error"];
    assert_eq!(err["kind"], "not_hermitian");
    assert_eq!(err["matrix"], "V");
    assert_eq!(err["row"], 0);
    assert_eq!(err["col"], 1);
}

#[test]
fn malformed_json_reports_position() {
    let out = ssf(&["compute", "--input", "{\n  \"dim\": ,\n}"]);
    assert_eq!(out.status.code(), Some(2));
    let err = &stderr_json(&out)["error"];
    assert_eq!(err["kind"], "parse");
    assert_eq!(err["line"], 2);
}

#[test]
fn unknown_tolerance_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let tol = dir.path().join("tol.json");
    std::fs::write(&tol, r#"{"nonsense": 1.0}"#).unwrap();
    let out = ssf(&["compute", "--input", SCALAR, "--tol-file", tol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_is_deterministic_and_loadable() {
    let a = ssf(&["gen", "--dim", "4", "--n", "3", "--seed", "9"]);
    let b = ssf(&["gen", "--dim", "4", "--n", "3", "--seed", "9"]);
    assert_eq!(a.stdout, b.stdout);
    let c = ssf(&["gen", "--dim", "4", "--n", "3", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let out = ssf(&["compute", "--input", &text]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn out_writes_record_and_curves_sibling() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rec.json");
    let res = ssf(&["compute", "--input", SCALAR, "--samples", "0:1:3", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    assert!(res.stdout.is_empty());
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(rec["dim"], 1);
    assert!(dir.path().join("rec.curves.csv").exists());
}
