//! Command-line front end: single-spec verification and suite runs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::Parser;
use forex_core::oracle::{feht_check_bounded, OracleVerdict};
use forex_core::smt::{resolve_solver_path, SolverConfig};
use forex_core::verify::{Rendered, Report, Verdict, VerifyConfig, VerifyError};
use forex_core::engine::EngineConfig;
use forex_core::{parse_spec, verify, Feht};
use serde_json::{json, Value};

pub const EXIT_VERIFIED: i32 = 0;
pub const EXIT_INCONCLUSIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

const JSON_SCHEMA: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "forex-lite", version, about = "Verify forall-exists Hoare tuples")]
pub struct Args {
    /// A `.feht` spec, or a directory of specs to run as a suite.
    pub spec: PathBuf,
    /// SMT solver executable (falls back to $FOREX_SOLVER, then `z3`).
    #[arg(long)]
    pub solver_path: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub smt_timeout_ms: u64,
    /// Largest loop counter tried by generated candidates.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=3))]
    pub max_unroll: u32,
    /// Loop candidates tried per loop group.
    #[arg(long, default_value_t = 500)]
    pub candidate_budget: usize,
    /// Write every solver query to this directory.
    #[arg(long)]
    pub dump_smt: Option<PathBuf>,
    /// Write a machine-readable report to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Also run the bounded brute-force check (advisory only).
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 3)]
    pub oracle_domain: i64,
    #[arg(long, default_value_t = 200)]
    pub oracle_steps: usize,
    /// Print the rule trace.
    #[arg(long)]
    pub trace: bool,
}

impl Args {
    pub fn verify_config(&self) -> VerifyConfig {
        let mut solver = SolverConfig::new(resolve_solver_path(self.solver_path.as_deref()));
        solver.timeout = Duration::from_millis(self.smt_timeout_ms.max(1));
        solver.dump_dir = self.dump_smt.clone();
        let engine =
            EngineConfig { max_unroll: self.max_unroll, candidate_budget: self.candidate_budget, ..EngineConfig::default() };
        VerifyConfig { solver, engine }
    }
}

/// Runs the tool on `argv` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_VERIFIED };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    if args.spec.is_dir() {
        return run_suite_cli(&args, out, err);
    }
    let text = match std::fs::read_to_string(&args.spec) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", args.spec.display());
            return EXIT_ERROR;
        }
    };
    let feht = match parse_spec(&text) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {}:{e}", args.spec.display());
            return EXIT_ERROR;
        }
    };
    let report = match verify(&feht, &args.verify_config()) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let oracle = args.oracle.then(|| feht_check_bounded::<i64>(&feht, args.oracle_domain, args.oracle_steps));
    let _ = out.write_all(render_report(&args.spec, &report, oracle.as_ref(), &args).as_bytes());
    if let Some(path) = &args.json {
        let doc = report_json(&args.spec, &report, oracle.as_ref(), &args);
        if let Err(e) = write_json(path, &doc) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_ERROR;
        }
    }
    if report.verdict.is_verified() {
        EXIT_VERIFIED
    } else {
        EXIT_INCONCLUSIVE
    }
}

fn write_json(path: &Path, doc: &Value) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(doc).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")
}

fn oracle_label(v: &OracleVerdict<i64>) -> String {
    match v {
        OracleVerdict::Valid => "valid".into(),
        OracleVerdict::Invalid(cx) => format!("invalid (initial state {})", cx.initial),
        OracleVerdict::Unknown(r) => format!("unknown ({r})"),
    }
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

pub fn render_report(spec: &Path, r: &Report, oracle: Option<&OracleVerdict<i64>>, args: &Args) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "spec: {}", spec.display());
    let _ = writeln!(s, "verdict: {}", r.verdict);
    if let Some(xi) = &r.xi {
        let _ = writeln!(s, "xi: {xi}");
    }
    if let Some(c) = &r.c {
        let _ = writeln!(s, "c: {c}");
    }
    for choice in &r.loop_choices {
        let _ = writeln!(
            s,
            "loops {:?}: invariant {} counters {:?} ({:?})",
            choice.copies, choice.invariant, choice.counters, choice.source
        );
    }
    let _ = writeln!(s, "candidates tried: {} ({} generated)", r.candidates_tried, r.pool_candidates_tried);
    let st = &r.solver;
    let _ = writeln!(
        s,
        "solver: {} queries ({} sat, {} unsat, {} unknown) in {} ms",
        st.queries, st.sat, st.unsat, st.unknown, st.total_time_ms
    );
    let _ = writeln!(s, "time: {:.1} ms", millis(r.wall_time));
    if let Some(o) = oracle {
        let _ = writeln!(s, "oracle (d={}, steps={}): {}", args.oracle_domain, args.oracle_steps, oracle_label(o));
    }
    if args.trace {
        for ev in &r.trace {
            let copy = ev.copy.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
            let _ = writeln!(s, "  {:?} copy {copy}: {}", ev.rule, ev.detail);
        }
    }
    s
}

fn rendered(f: Option<Rendered>) -> Value {
    match f {
        Some(r) => json!({ "pretty": r.pretty, "smt": r.smt }),
        None => Value::Null,
    }
}

pub fn report_json(spec: &Path, r: &Report, oracle: Option<&OracleVerdict<i64>>, args: &Args) -> Value {
    let (verdict, reason) = match &r.verdict {
        Verdict::Verified => ("verified", Value::Null),
        Verdict::Inconclusive(why) => ("inconclusive", Value::String(why.clone())),
    };
    let oracle = match oracle {
        Some(o) => json!({
            "domain": args.oracle_domain,
            "steps": args.oracle_steps,
            "verdict": o.label(),
            "detail": oracle_label(o),
        }),
        None => Value::Null,
    };
    json!({
        "schema": JSON_SCHEMA,
        "spec": spec.display().to_string(),
        "verdict": verdict,
        "reason": reason,
        "xi": rendered(r.xi_rendered()),
        "c": rendered(r.c_rendered()),
        "loops": r.loop_choices,
        "candidates_tried": r.candidates_tried,
        "pool_candidates_tried": r.pool_candidates_tried,
        "final_queries": r.final_queries,
        "final_query": r.final_query,
        "final_outcome": r.final_outcome.as_ref().map(|o| o.label()),
        "solver": r.solver,
        "wall_time_ms": millis(r.wall_time),
        "oracle": oracle,
        "trace": if args.trace { serde_json::to_value(&r.trace).unwrap_or(Value::Null) } else { Value::Null },
    })
}

/// What a spec file says about itself in `// expect: verified`,
/// `// oracle-domain: 3` and `// known-gap: why` comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    pub expect_verified: Option<bool>,
    pub oracle_domain: Option<i64>,
    /// Set on valid specs the verifier cannot prove by construction.
    pub known_gap: Option<String>,
}

pub fn annotations(text: &str) -> Annotations {
    let mut a = Annotations::default();
    for line in text.lines() {
        let Some(comment) = line.trim().strip_prefix("//") else { continue };
        let comment = comment.trim();
        if let Some(v) = comment.strip_prefix("expect:") {
            match v.trim() {
                "verified" => a.expect_verified = Some(true),
                "inconclusive" => a.expect_verified = Some(false),
                _ => {}
            }
        } else if let Some(v) = comment.strip_prefix("oracle-domain:") {
            a.oracle_domain = v.trim().parse().ok();
        } else if let Some(v) = comment.strip_prefix("known-gap:") {
            a.known_gap = Some(v.trim().to_string());
        }
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub file: PathBuf,
    pub expected_verified: bool,
    /// `Ok(verdict)` or the parse/solver error text.
    pub outcome: Result<Verdict, String>,
    pub time: Duration,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        matches!(&self.outcome, Ok(v) if v.is_verified() == self.expected_verified)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(SuiteEntry::passed)
    }

    pub fn table(&self) -> String {
        let width = self.entries.iter().map(|e| e.file.display().to_string().len()).max().unwrap_or(4).max(4);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:<12}  {:<12}  {:>10}  result", "spec", "expected", "verdict", "time ms");
        for e in &self.entries {
            let verdict = match &e.outcome {
                Ok(Verdict::Verified) => "verified",
                Ok(Verdict::Inconclusive(_)) => "inconclusive",
                Err(_) => "error",
            };
            let expected = if e.expected_verified { "verified" } else { "inconclusive" };
            let _ = writeln!(
                s,
                "{:<width$}  {:<12}  {:<12}  {:>10.1}  {}",
                e.file.display(),
                expected,
                verdict,
                millis(e.time),
                if e.passed() { "ok" } else { "FAIL" }
            );
        }
        let passed = self.entries.iter().filter(|e| e.passed()).count();
        let _ = writeln!(s, "{passed}/{} as expected", self.entries.len());
        s
    }

    pub fn to_json(&self) -> Value {
        let results: Vec<Value> = self
            .entries
            .iter()
            .map(|e| {
                let (verdict, reason) = match &e.outcome {
                    Ok(Verdict::Verified) => ("verified", Value::Null),
                    Ok(Verdict::Inconclusive(r)) => ("inconclusive", Value::String(r.clone())),
                    Err(msg) => ("error", Value::String(msg.clone())),
                };
                json!({
                    "spec": e.file.display().to_string(),
                    "expected": if e.expected_verified { "verified" } else { "inconclusive" },
                    "verdict": verdict,
                    "reason": reason,
                    "time_ms": millis(e.time),
                    "pass": e.passed(),
                })
            })
            .collect();
        json!({
            "schema": JSON_SCHEMA,
            "results": results,
            "passed": self.entries.iter().filter(|e| e.passed()).count(),
            "failed": self.entries.iter().filter(|e| !e.passed()).count(),
        })
    }
}

/// Every `.feht` file under `dir`, sorted.
pub fn spec_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "feht") {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

fn run_one(path: &Path, config: &VerifyConfig) -> Result<(bool, Result<Verdict, String>), VerifyError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Ok((true, Err(e.to_string()))),
    };
    let expected = annotations(&text).expect_verified.unwrap_or(true);
    let feht: Feht = match parse_spec(&text) {
        Ok(f) => f,
        Err(e) => return Ok((expected, Err(e.to_string()))),
    };
    Ok((expected, Ok(verify(&feht, config)?.verdict)))
}

/// Verifies every spec under `dir`. Specs are expected to verify unless they
/// say `// expect: inconclusive`. Solver environment errors abort the run.
pub fn run_suite(dir: &Path, config: &VerifyConfig) -> Result<SuiteReport, VerifyError> {
    let files = spec_files(dir).map_err(|e| VerifyError::Internal(format!("cannot list {}: {e}", dir.display())))?;
    let mut report = SuiteReport::default();
    for file in files {
        let start = Instant::now();
        let (expected_verified, outcome) = run_one(&file, config)?;
        report.entries.push(SuiteEntry { file, expected_verified, outcome, time: start.elapsed() });
    }
    Ok(report)
}

fn run_suite_cli(args: &Args, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let report = match run_suite(&args.spec, &args.verify_config()) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let _ = out.write_all(report.table().as_bytes());
    if let Some(path) = &args.json {
        if let Err(e) = write_json(path, &report.to_json()) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_ERROR;
        }
    }
    if report.all_passed() {
        EXIT_VERIFIED
    } else {
        EXIT_INCONCLUSIVE
    }
}
