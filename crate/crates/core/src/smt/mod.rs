//! External SMT solver driven one query at a time over SMT-LIB2 text.

pub mod emit;
mod sexp;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use serde::Serialize;
use thiserror::Error;

use crate::ast::VarName;
use crate::formula::{Formula, Param, Symbol};

pub use sexp::{parse_all, Sexp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SatOutcome {
    Sat,
    Unsat,
    Unknown(String),
}

impl SatOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatOutcome::Sat)
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SatOutcome::Unsat)
    }

    pub fn label(&self) -> &'static str {
        match self {
            SatOutcome::Sat => "sat",
            SatOutcome::Unsat => "unsat",
            SatOutcome::Unknown(_) => "unknown",
        }
    }
}

/// Integer values reported by the solver, keyed by emitted name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Model(BTreeMap<String, BigInt>);

impl Model {
    pub fn get(&self, s: &Symbol) -> Option<&BigInt> {
        self.0.get(&emit::mangle(s))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BigInt)> {
        self.0.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolverVerdict {
    pub outcome: SatOutcome,
    pub elapsed: Duration,
    pub raw: String,
    pub model: Option<Model>,
}

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("solver binary {0} not found")]
    BinaryMissing(PathBuf),
    #[error("solver exited abnormally ({status}): {stderr}")]
    Crash { status: String, stderr: String },
    #[error("unexpected solver output: {0}")]
    Malformed(String),
    #[error("query is not closed; free symbols: {0:?}")]
    NotClosed(Vec<Symbol>),
    #[error("restriction has free program variables: {0:?}")]
    NotParametric(Vec<Symbol>),
    #[error("{0} is not housed by any quantifier block of the final query")]
    Unhoused(Symbol),
    #[error("i/o error talking to solver: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    pub path: PathBuf,
    /// Command-line arguments; derived from the binary name when `None`.
    pub args: Option<Vec<String>>,
    pub timeout: Duration,
    pub dump_dir: Option<PathBuf>,
}

impl SolverConfig {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SolverConfig { path: path.into(), args: None, timeout: Duration::from_secs(10), dump_dir: None }
    }

    /// Arguments that make the solver read a script from stdin.
    pub fn effective_args(&self) -> Vec<String> {
        if let Some(a) = &self.args {
            return a.clone();
        }
        let name = self.path.file_name().map(|n| n.to_string_lossy().to_lowercase()).unwrap_or_default();
        if name.contains("cvc") {
            vec!["--lang=smt2".into()]
        } else {
            vec!["-smt2".into(), "-in".into()]
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::new("z3")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SolverStats {
    pub queries: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub total_time_ms: u64,
}

/// A configured solver plus per-run bookkeeping (query numbering, statistics).
#[derive(Debug)]
pub struct Solver {
    config: SolverConfig,
    seq: AtomicU64,
    stats: Mutex<SolverStats>,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Self {
        Solver { config, seq: AtomicU64::new(0), stats: Mutex::new(SolverStats::default()) }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn stats(&self) -> SolverStats {
        self.stats.lock().expect("stats poisoned").clone()
    }

    /// Checks a closed formula; `Sat` means it is true over the integers.
    pub fn check_closed(&self, f: &Formula) -> Result<SolverVerdict, SmtError> {
        let free = f.free_symbols();
        if !free.is_empty() {
            return Err(SmtError::NotClosed(free.into_iter().collect()));
        }
        self.run(&emit::script(f, false), false)
    }

    /// Satisfiability of a restriction over parameters.
    pub fn check_restriction_sat(&self, c: &Formula) -> Result<SolverVerdict, SmtError> {
        let stray: Vec<Symbol> = c.free_vars().into_iter().collect();
        if !stray.is_empty() {
            return Err(SmtError::NotParametric(stray));
        }
        self.run(&emit::script(c, false), false)
    }

    /// Satisfiability of an arbitrary formula, free symbols read as constants.
    pub fn check_sat(&self, f: &Formula, want_model: bool) -> Result<SolverVerdict, SmtError> {
        let mut v = self.run(&emit::script(f, false), false)?;
        if want_model && v.outcome.is_sat() {
            let with_model = self.run(&emit::script(f, true), true)?;
            v.model = with_model.model;
        }
        Ok(v)
    }

    /// Checks `not (a <=> b)` with every free symbol read universally:
    /// `Unsat` means equivalent, `Sat` comes with a distinguishing model.
    pub fn check_equiv(&self, a: &Formula, b: &Formula) -> Result<SolverVerdict, SmtError> {
        self.check_sat(&Formula::not(Formula::iff(a.clone(), b.clone())), true)
    }

    /// Runs a raw script. The first response line is the verdict.
    pub fn run(&self, script: &str, want_model: bool) -> Result<SolverVerdict, SmtError> {
        let seq = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        if let Some(dir) = &self.config.dump_dir {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("query_{seq}.smt2")), script)?;
        }
        let start = Instant::now();
        let (raw, stderr, status, timed_out) = self.spawn(script)?;
        let elapsed = start.elapsed();
        let verdict = if timed_out {
            SolverVerdict { outcome: SatOutcome::Unknown("timeout".into()), elapsed, raw, model: None }
        } else {
            interpret(raw, stderr, status, elapsed, want_model)?
        };
        let mut stats = self.stats.lock().expect("stats poisoned");
        stats.queries += 1;
        stats.total_time_ms += elapsed.as_millis() as u64;
        match verdict.outcome {
            SatOutcome::Sat => stats.sat += 1,
            SatOutcome::Unsat => stats.unsat += 1,
            SatOutcome::Unknown(_) => stats.unknown += 1,
        }
        Ok(verdict)
    }

    fn spawn(&self, script: &str) -> Result<(String, String, Option<i32>, bool), SmtError> {
        let mut child = match Command::new(&self.config.path)
            .args(self.config.effective_args())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
        {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SmtError::BinaryMissing(self.config.path.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let script = script.to_string();
        let writer = thread::spawn(move || {
            // A solver that dies early closes the pipe; the exit status tells the story.
            let _ = stdin.write_all(script.as_bytes());
        });
        let out_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stdout.read_to_string(&mut s);
            s
        });
        let err_reader = thread::spawn(move || {
            let mut s = String::new();
            let _ = stderr.read_to_string(&mut s);
            s
        });
        let deadline = Instant::now() + self.config.timeout;
        let mut timed_out = false;
        let status = loop {
            if let Some(st) = child.try_wait()? {
                break Some(st);
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                timed_out = true;
                break None;
            }
            thread::sleep(Duration::from_millis(2));
        };
        let _ = writer.join();
        let out = out_reader.join().unwrap_or_default();
        let err = err_reader.join().unwrap_or_default();
        Ok((out, err, status.and_then(|s| s.code()), timed_out))
    }
}

fn interpret(
    raw: String,
    stderr: String,
    status: Option<i32>,
    elapsed: Duration,
    want_model: bool,
) -> Result<SolverVerdict, SmtError> {
    if raw.contains("(error") {
        return Err(SmtError::Malformed(raw.trim().to_string()));
    }
    let first = raw.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let outcome = match first {
        "sat" => SatOutcome::Sat,
        "unsat" => SatOutcome::Unsat,
        "unknown" => SatOutcome::Unknown("solver returned unknown".into()),
        "timeout" => SatOutcome::Unknown("timeout".into()),
        _ if status != Some(0) => {
            return Err(SmtError::Crash {
                status: status.map_or_else(|| "signal".to_string(), |c| c.to_string()),
                stderr: stderr.trim().to_string(),
            })
        }
        other => return Err(SmtError::Malformed(other.to_string())),
    };
    let model = if want_model && outcome.is_sat() {
        let rest: String = raw.trim_start().strip_prefix("sat").unwrap_or("").to_string();
        Some(parse_model(&rest)?)
    } else {
        None
    };
    Ok(SolverVerdict { outcome, elapsed, raw, model })
}

fn parse_int(s: &Sexp) -> Option<BigInt> {
    match s {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), inner] if minus == "-" => parse_int(inner).map(|v| -v),
            _ => None,
        },
    }
}

fn parse_model(text: &str) -> Result<Model, SmtError> {
    let parsed = parse_all(text).map_err(|e| SmtError::Malformed(e.0))?;
    let mut values = BTreeMap::new();
    for top in &parsed {
        let Some(items) = top.as_list() else { continue };
        for item in items {
            let Some(def) = item.as_list() else { continue };
            if let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), value] = def {
                if kw == "define-fun" && args.is_empty() && sort == "Int" {
                    if let Some(v) = parse_int(value) {
                        values.insert(name.clone(), v);
                    }
                }
            }
        }
    }
    Ok(Model(values))
}

/// The closed formula
/// `forall U. exists P. c && forall E. (xi ==> psi)`
/// with `U` the universal copies' variables, `P` the parameters and `E` the
/// existential copies' variables.
pub fn final_validity_query(
    xi: &Formula,
    c: &Formula,
    psi: &Formula,
    universal_vars: &BTreeSet<VarName>,
    existential_vars: &BTreeSet<VarName>,
) -> Result<Formula, SmtError> {
    let u: Vec<Symbol> = universal_vars.iter().map(Symbol::var).collect();
    let e: Vec<Symbol> = existential_vars.iter().map(Symbol::var).collect();
    let mut params: BTreeSet<Param> = xi.free_params();
    params.extend(c.free_params());
    let p: Vec<Symbol> = params.into_iter().map(Symbol::Param).collect();
    let housed = |s: &Symbol, allowed: &[&[Symbol]]| allowed.iter().any(|set| set.contains(s));
    for s in xi.free_symbols() {
        if !housed(&s, &[&u, &e, &p]) {
            return Err(SmtError::Unhoused(s));
        }
    }
    for s in c.free_symbols() {
        if !housed(&s, &[&p]) {
            return Err(SmtError::Unhoused(s));
        }
    }
    for s in psi.free_symbols() {
        if !housed(&s, &[&u, &e]) {
            return Err(SmtError::Unhoused(s));
        }
    }
    let inner = Formula::forall(e, Formula::implies(xi.clone(), psi.clone()));
    let body = Formula::exists(p, Formula::and2(c.clone(), inner));
    Ok(Formula::forall(u, body))
}

/// Resolves the solver executable: explicit path, then `FOREX_SOLVER`, then `z3`.
pub fn resolve_solver_path(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os("FOREX_SOLVER") {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from("z3"),
    }
}
