use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;

use funcdet::cli::{run, Output};
use serde_json::Value;

fn data(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/data");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn funcdet(args: &[&str]) -> Output {
    let argv = std::iter::once("funcdet".to_string()).chain(args.iter().map(|a| {
        if a.ends_with(".cfg") {
            data(a)
        } else {
            a.to_string()
        }
    }));
    run(argv)
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut v = args.to_vec();
    v.push("--json");
    let out = funcdet(&v);
    assert!(out.stderr.is_empty(), "{}", out.stderr);
    (out.code, serde_json::from_str(&out.stdout).unwrap())
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_funcdet"))
        .args(args.iter().map(|a| if a.ends_with(".cfg") { data(a) } else { a.to_string() }))
        .output()
        .unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

#[test]
fn dirichlet_ratio_is_sinh() {
    let (code, v) = json(&["ratio", "dirichlet_m1.cfg"]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "ok");
    assert!(close(f(&v["result"]["ratio"]["re"]), 1f64.sinh(), 1e-8));
    assert_eq!(f(&v["result"]["ratio"]["im"]), 0.0);
    assert_eq!(v["result"]["method"], "secular_determinant");
    assert!(f(&v["result"]["cross_check"]["rel_diff"]) <= 1e-10);
    assert!(v["result"]["zero_mode"].is_null());
}

#[test]
fn negative_eigenvalue_ratio() {
    let (code, v) = json(&["ratio", "dirichlet_negative.cfg"]);
    assert_eq!(code, 0);
    assert!(close(f(&v["result"]["ratio"]["re"]), 4f64.sin() / 4.0, 1e-8));
}

#[test]
fn periodic_zero_mode_text() {
    let out = binary(&["ratio", "periodic_pair.cfg"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.starts_with("zero mode detected (multiplicity 1); det' L1/det L2 = 0.920673594"),
        "{text}"
    );
    let (_, v) = json(&["ratio", "periodic_pair.cfg"]);
    let want = 1.0 / (4.0 * 0.5f64.sinh().powi(2));
    assert!(close(f(&v["result"]["ratio"]["re"]), want, 1e-8));
    assert_eq!(v["result"]["zero_mode"]["multiplicity"], 1);
}

#[test]
fn system_zero_mode_ratio() {
    let (code, v) = json(&["ratio", "start2.cfg"]);
    assert_eq!(code, 0);
    assert!(close(f(&v["result"]["ratio"]["re"]), 0.052_732_126_711_132_33, 1e-8));
    assert!(f(&v["result"]["ratio"]["im"]).abs() <= 1e-10);
}

#[test]
fn unsupported_boundary_class() {
    let out = binary(&["check", "bad_bc.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("Unsupported boundary class"), "{err}");
    let (code, v) = json(&["check", "bad_bc.cfg"]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "unsupported_boundary");
}

#[test]
fn check_reports_classification() {
    let (code, v) = json(&["check", "periodic_pair.cfg"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["kind"], "non_separated");
    assert_eq!(v["result"]["self_adjoint"], true);
    assert_eq!(f(&v["result"]["phase_alpha"]), 0.0);
    let (_, v) = json(&["check", "dirichlet_m1.cfg"]);
    assert_eq!(v["result"]["kind"], "separated");
    let robin: Vec<f64> = v["result"]["robin"].as_array().unwrap().iter().map(|z| f(&z["re"])).collect();
    assert_eq!(robin, vec![1.0, 0.0, 1.0, 0.0]);
    let (code, v) = json(&["check", "not_self_adjoint.cfg"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["self_adjoint"], false);
    let (_, v) = json(&["check", "start2.cfg"]);
    assert_eq!(v["result"]["self_adjoint"], true);
    assert_eq!(v["result"]["diagnostics"]["heuristic_extension"], true);
}

#[test]
fn validation_failures_exit_with_one() {
    for (cfg, cmd, kind) in [
        ("dimension_error.cfg", "ratio", "dimension"),
        ("unknown_key.cfg", "ratio", "unknown_key"),
        ("not_positive.cfg", "ratio", "invalid_problem"),
        ("not_positive.cfg", "check", "invalid_problem"),
        ("not_self_adjoint.cfg", "eigenvalues", "not_self_adjoint"),
        ("missing.cfg", "ratio", "io"),
    ] {
        let mut args = vec![cmd, cfg];
        if cmd == "eigenvalues" {
            args.extend(["--count", "3"]);
        }
        let (code, v) = json(&args);
        assert_eq!(code, 1, "{cfg}");
        assert_eq!(v["status"], "error", "{cfg}");
        assert_eq!(v["error"]["kind"], kind, "{cfg}");
        assert!(!v["error"]["message"].as_str().unwrap().is_empty());
    }
}

#[test]
fn check_lists_every_violation_in_json() {
    let (_, v) = json(&["check", "not_positive.cfg"]);
    let val = &v["result"]["validation"];
    assert_eq!(val[0]["valid"], false);
    assert!(val[0]["violations"].as_array().unwrap().len() > 100);
    assert_eq!(val[1]["valid"], true);
}

#[test]
fn degenerate_zero_mode_is_a_computation_error() {
    let (code, v) = json(&["ratio", "antiperiodic_double.cfg"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "degenerate_zero_mode");
    let (code, v) = json(&["zero-mode", "antiperiodic_double.cfg"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["multiplicity"], 2);
    assert!(v["result"]["b"].is_null());
}

#[test]
fn mismatched_metric_warns() {
    let (code, v) = json(&["ratio", "mismatched_metric.cfg"]);
    assert_eq!(code, 0);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
    let (code, v) = json(&["verify", "mismatched_metric.cfg", "--terms", "100"]);
    assert_eq!(code, 3);
    assert_eq!(v["status"], "fail");
    assert_eq!(v["result"]["verdict"], "FAIL");
}

#[test]
fn eigenvalues_of_either_problem() {
    let (code, v) = json(&["eigenvalues", "dirichlet_m1.cfg", "--count", "10", "--problem", "2"]);
    assert_eq!(code, 0);
    let ev = v["result"]["eigenvalues"].as_array().unwrap();
    assert_eq!(ev.len(), 10);
    for (n, e) in ev.iter().enumerate() {
        let want = ((n + 1) as f64 * PI).powi(2);
        assert!(close(f(&e["value"]), want, 1e-8), "{n}: {e}");
    }
    let (_, v) = json(&["eigenvalues", "dirichlet_m1.cfg", "--count", "3"]);
    assert!(close(f(&v["result"]["eigenvalues"][0]["value"]), PI * PI + 1.0, 1e-8));
}

#[test]
fn periodic_degeneracy() {
    let (_, v) = json(&["eigenvalues", "periodic_pair.cfg", "--count", "5"]);
    let ev = &v["result"]["eigenvalues"];
    assert!(f(&ev[0]["value"]).abs() < 1e-8);
    assert!(close(f(&ev[1]["value"]), 4.0 * PI * PI, 1e-8));
    assert_eq!(ev[1]["multiplicity"], 2);
    assert_eq!(ev[1]["nullity"], 2);
}

#[test]
fn lambda_min_accepts_negative_values() {
    let (code, v) = json(&["eigenvalues", "dirichlet_negative.cfg", "--count", "2", "--lambda-min", "-50"]);
    assert_eq!(code, 0);
    assert!(close(f(&v["result"]["eigenvalues"][0]["value"]), PI * PI - 16.0, 1e-8));
    assert_eq!(f(&v["result"]["lambda_min"]), -50.0);
}

#[test]
fn zero_mode_boundary_data() {
    let (code, v) = json(&["zero-mode", "dirichlet_zero_mode.cfg"]);
    assert_eq!(code, 0);
    let r = &v["result"];
    assert_eq!(r["multiplicity"], 1);
    assert!((f(&r["b"]["re"]) + 1.0).abs() <= 1e-10);
    assert!(f(&r["b_separated"]["re"]) < 0.0);
    let y = &r["y1"];
    assert!(f(&y["u_a"][0]["re"]).abs() < 1e-12 && f(&y["u_b"][0]["re"]).abs() < 1e-8);
    let norm = f(&r["norm_sq"]);
    let va = f(&y["v_a"][0]["re"]);
    // y1 = v(a) sin(πx)/π
    assert!(close(norm, va * va / (2.0 * PI * PI), 1e-8));
    let (_, v) = json(&["zero-mode", "dirichlet_m1.cfg"]);
    assert_eq!(v["result"]["multiplicity"], 0);
    assert!(v["result"]["y1"].is_null());
}

#[test]
fn verify_passes_within_tail_bound() {
    let (code, v) = json(&["verify", "dirichlet_fast.cfg"]);
    assert_eq!(code, 0);
    let r = &v["result"];
    assert_eq!(r["verdict"], "PASS");
    assert_eq!(r["terms"], 400);
    assert!(f(&r["difference"]) <= f(&r["tail_bound"]));
    let (code, v) = json(&["verify", "periodic_pair.cfg", "--terms", "500"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["zero_mode_skipped"], true);
}

#[test]
fn json_is_byte_identical_across_runs() {
    for args in [
        vec!["ratio", "start2.cfg", "--json"],
        vec!["check", "not_positive.cfg", "--json"],
        vec!["zero-mode", "periodic_pair.cfg", "--json"],
    ] {
        let a = binary(&args);
        let b = binary(&args);
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status.code(), b.status.code());
    }
}

#[test]
fn config_hash_and_timing() {
    let (_, v) = json(&["ratio", "dirichlet_m1.cfg"]);
    let sha = v["config_sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
    assert!(v.get("timing_ms").is_none());
    let (_, other) = json(&["ratio", "dirichlet_negative.cfg"]);
    assert_ne!(other["config_sha256"].as_str().unwrap(), sha);
    let (_, v) = json(&["ratio", "dirichlet_m1.cfg", "--timing"]);
    assert!(f(&v["timing_ms"]) >= 0.0);
}

#[test]
fn numbers_carry_seventeen_digits() {
    let out = funcdet(&["ratio", "dirichlet_m1.cfg", "--json"]);
    let line = out.stdout.lines().find(|l| l.contains("\"re\"")).unwrap();
    let number = line.split(':').nth(1).unwrap().trim().trim_end_matches(',');
    let mantissa = number.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{line}");
}

#[test]
fn quiet_prints_only_the_headline() {
    let out = funcdet(&["ratio", "mismatched_metric.cfg", "--quiet"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout, "det L1/det L2 = 4\n");
    assert!(out.stderr.is_empty());
}

#[test]
fn usage_errors() {
    let out = funcdet(&["ratio"]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.is_empty() && !out.stderr.is_empty());
    let (code, v) = json(&["eigenvalues", "dirichlet_m1.cfg"]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "usage");
    assert!(v["command"].is_null());
    let out = funcdet(&["--help"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("zero-mode"));
}

#[test]
fn binary_exit_codes_match() {
    assert_eq!(binary(&["ratio", "dimension_error.cfg"]).status.code(), Some(1));
    assert_eq!(binary(&["ratio", "antiperiodic_double.cfg"]).status.code(), Some(2));
    assert_eq!(binary(&["verify", "mismatched_metric.cfg", "--terms", "50"]).status.code(), Some(3));
}
