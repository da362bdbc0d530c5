use std::path::{Path, PathBuf};
use std::process::Command;

use forex_lite::{run_cli_with, EXIT_ERROR, EXIT_INCONCLUSIVE, EXIT_VERIFIED};
use serde_json::Value;

fn corpus(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(rel)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("forex-lite").chain(args.iter().copied());
    let code = run_cli_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn verified_spec_exits_zero() {
    let spec = corpus("ex2.feht");
    let (code, out, _) = run(&[path_str(&spec)]);
    assert_eq!(code, EXIT_VERIFIED, "{out}");
    assert!(out.contains("verdict: verified"));
    assert!(out.contains("xi: "));
}

#[test]
fn inconclusive_spec_exits_one() {
    let spec = corpus("neg_control.feht");
    let (code, out, _) = run(&[path_str(&spec)]);
    assert_eq!(code, EXIT_INCONCLUSIVE);
    assert!(out.contains("verdict: inconclusive: final query unsat"));
}

#[test]
fn syntax_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.feht");
    std::fs::write(&spec, "[forall]\nx = ;\n[pre] true\n[post] true\n").unwrap();
    let (code, _, err) = run(&[path_str(&spec)]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("bad.feht:2:5"), "{err}");
}

#[test]
fn missing_file_is_an_error() {
    let (code, _, err) = run(&["/nonexistent/spec.feht"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("cannot read"));
}

#[test]
fn missing_solver_is_an_error_not_a_verdict() {
    let spec = corpus("ex2.feht");
    let (code, _, err) = run(&[path_str(&spec), "--solver-path", "/nonexistent/z3"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("solver"), "{err}");
}

#[test]
fn unroll_bound_is_validated() {
    let spec = corpus("ex2.feht");
    let (code, _, _) = run(&[path_str(&spec), "--max-unroll", "4"]);
    assert_eq!(code, EXIT_ERROR);
}

#[test]
fn json_report_has_schema_and_both_renderings() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let spec = corpus("ex1_hinted.feht");
    let (code, _, _) = run(&[path_str(&spec), "--json", path_str(&json), "--trace"]);
    assert_eq!(code, EXIT_VERIFIED);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["verdict"], "verified");
    assert_eq!(doc["final_outcome"], "sat");
    for key in ["xi", "c"] {
        assert!(doc[key]["pretty"].is_string(), "{key}");
        assert!(doc[key]["smt"].as_str().unwrap().starts_with('('), "{key}");
    }
    let loops = doc["loops"].as_array().unwrap();
    assert_eq!(loops.len(), 1);
    assert_eq!(loops[0]["source"], "hint");
    assert_eq!(loops[0]["counters"], serde_json::json!([1, 2]));
    assert!(doc["trace"].as_array().is_some_and(|t| !t.is_empty()));
    assert!(doc["oracle"].is_null());
}

#[test]
fn oracle_is_advisory() {
    let spec = corpus("loopfree/22_abs_by_choice.feht");
    let (code, out, _) = run(&[path_str(&spec), "--oracle", "--oracle-domain", "2"]);
    // The oracle finds the tuple valid; the verdict stays inconclusive.
    assert_eq!(code, EXIT_INCONCLUSIVE);
    assert!(out.contains("oracle (d=2, steps=200): valid"), "{out}");
}

#[test]
fn dump_smt_writes_queries() {
    let dir = tempfile::tempdir().unwrap();
    let spec = corpus("ex2.feht");
    let (code, _, _) = run(&[path_str(&spec), "--dump-smt", path_str(dir.path())]);
    assert_eq!(code, EXIT_VERIFIED);
    let dumped: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert!(!dumped.is_empty());
}

#[test]
fn suite_over_empty_directory_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&[path_str(dir.path())]);
    assert_eq!(code, EXIT_VERIFIED);
    assert!(out.contains("0/0 as expected"));
}

#[test]
fn suite_with_unmet_expectation_fails() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus("ex2.feht"), dir.path().join("a.feht")).unwrap();
    // No expectation comment means "verified", which this one is not.
    std::fs::write(dir.path().join("b.feht"), "[exists]\nx = nondet();\n[pre] true\n[post] x_1 == 1 && x_1 == 2\n")
        .unwrap();
    let json = dir.path().join("suite.json");
    let (code, out, _) = run(&[path_str(dir.path()), "--json", path_str(&json)]);
    assert_eq!(code, EXIT_INCONCLUSIVE);
    assert!(out.contains("1/2 as expected"), "{out}");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["passed"], 1);
    assert_eq!(doc["failed"], 1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_forex-lite");
    let status = Command::new(bin).arg(corpus("ex2.feht")).output().unwrap().status;
    assert_eq!(status.code(), Some(EXIT_VERIFIED));
    let status = Command::new(bin).arg(corpus("neg_control.feht")).output().unwrap().status;
    assert_eq!(status.code(), Some(EXIT_INCONCLUSIVE));
    let status = Command::new(bin).arg("--no-such-flag").output().unwrap().status;
    assert_eq!(status.code(), Some(EXIT_ERROR));
}
