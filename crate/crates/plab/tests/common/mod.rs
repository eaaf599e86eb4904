#![allow(dead_code)]

use std::fs;
use std::path::Path;

use serde_json::Value;

/// Runs the CLI in-process; returns (exit code, stdout, stderr).
pub fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("plab").chain(args.iter().copied());
    let code = plab::cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub fn validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(plab::report::REPORT_JSON_SCHEMA).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

pub fn assert_valid(report: &str) -> Value {
    let v: Value = serde_json::from_str(report).unwrap_or_else(|e| panic!("not JSON ({e}): {report}"));
    let errors: Vec<String> = validator().iter_errors(&v).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "schema errors: {errors:?}");
    v
}

/// Direction file on a uniform grid with `h = 0` and interval values `u`.
pub fn write_direction(path: &Path, n_states: usize, u: &[f64], beta: f64, w: Option<&str>) {
    let nn = u.len();
    let mut s = format!("# beta={beta}\n");
    if let Some(w) = w {
        s.push_str(&format!("# w={w}\n"));
    }
    let hs: Vec<String> = (1..=n_states).map(|i| format!("h{i}")).collect();
    s.push_str(&format!("t,{},u1,v1\n", hs.join(",")));
    for k in 0..=nn {
        let zeros = vec!["0"; n_states].join(",");
        s.push_str(&format!("{:?},{zeros},{:?},0\n", k as f64 / nn as f64, u[k.min(nn - 1)]));
    }
    fs::write(path, s).unwrap();
}

/// Control file for a two-state problem with zero state columns.
pub fn write_control(path: &Path, u: &[f64]) {
    let nn = u.len();
    let mut s = String::from("t,x1,x2,u1\n");
    for k in 0..=nn {
        s.push_str(&format!("{:?},0,0,{:?}\n", k as f64 / nn as f64, u[k.min(nn - 1)]));
    }
    fs::write(path, s).unwrap();
}
