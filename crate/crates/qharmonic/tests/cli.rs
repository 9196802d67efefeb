use std::io::Write;
use std::process::{Command, Output, Stdio};

use qharmonic::fischer::FischerElement;
use serde_json::Value;

fn qh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qh")).args(args).output().expect("qh runs")
}

fn qh_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qh"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("qh runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn eval_rows_in_both_formats() {
    let out = qh(&["eval", "e_q", "--at", "0", "--format", "csv"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "t,value\n0,1\n");

    let out = qh(&["eval", "funk_hecke_alpha", "k=2", "l=1"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["rows"][0]["value"], 0.0);

    let out = qh(&["eval", "q_gamma2", "t=3", "--q", "0.5"]);
    let v = json(&out)["rows"][0]["value"].as_f64().unwrap();
    assert!((v - 1.25).abs() < 1e-14);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["--q", "1.0", "verify"][..],
        &["eval", "nope", "--at", "1"],
        &["eval", "laguerre_q2", "j=1", "--at", "1"],
        &["transform", "hankel2", "--known", "laguerre_block:j=1"],
        &["verify", "--suite", "galaxy"],
        &["--format", "xml", "eval", "e_q", "--at", "0"],
    ] {
        let out = qh(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn verify_report_schema() {
    let out = qh(&["verify", "--suite", "qcore", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    assert_eq!(doc["config"]["seed"], 7);
    assert_eq!(doc["config"]["suite"], "qcore");
    let checks = doc["checks"].as_array().unwrap();
    let names: Vec<&str> = checks.iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    for c in checks {
        for key in ["name", "residual", "tol", "status"] {
            assert!(c.get(key).is_some(), "{key} missing in {c}");
        }
    }
    assert_eq!(doc["summary"]["passed"].as_u64().unwrap() as usize, checks.len());
    assert_eq!(doc["summary"]["failed"], 0);
}

#[test]
fn verify_failure_exits_one_with_report() {
    // with a tiny term budget the Jackson sums cannot converge
    let out = qh(&["verify", "--suite", "qcore", "--max-terms", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["summary"]["failed"].as_u64().unwrap() > 0);
}

#[test]
fn same_seed_same_bytes() {
    let a = qh(&["verify", "--suite", "fischer", "--seed", "3", "--format", "csv"]);
    let b = qh(&["verify", "--suite", "fischer", "--seed", "3", "--format", "csv"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8(a.stdout).unwrap().starts_with("name,residual,tol,status,reason\n"));
}

#[test]
fn transformed_element_reparses() {
    let input = r#"{"m":3,"q":0.5,"blocks":[{"k":0,"gauss":{"type":"e_big","scale":1.0},"coeffs":[1,-0.4]},{"k":3,"gauss":{"type":"e_big","scale":2.0},"coeffs":[0.25]}]}"#;
    let out = qh_stdin(&["transform", "fourier_fwd", "--element", "-", "--sign", "minus", "--at", "0.5,1.5"], input);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&out);
    assert!(doc["max_residual"].as_f64().unwrap() < 1e-9);
    let text = doc["element"].to_string();
    let element = FischerElement::from_json(&text).unwrap();
    assert_eq!(element.block(3).unwrap().phase.turns(), 1);
    assert_eq!(FischerElement::from_json(&element.to_json()).unwrap(), element);

    let back = qh_stdin(&["transform", "fourier_inv", "--element", "-", "--sign", "plus", "--at", "0.5"], &text);
    assert!(back.status.success(), "{}", String::from_utf8_lossy(&back.stderr));
    let original = FischerElement::from_json(input).unwrap();
    let restored = FischerElement::from_json(&json(&back)["element"].to_string()).unwrap();
    assert!(restored.max_difference(&original).unwrap() < 1e-14 * original.max_coeff());
}
