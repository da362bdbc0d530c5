//! End-to-end verification of a tuple: postcondition generation, the final
//! validity query, and a report.

use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Engine, EngineConfig, EngineError, Flow, LoopChoice, TraceEvent};
use crate::feht::Feht;
use crate::formula::{Formula, NameSupply};
use crate::smt::{emit, final_validity_query, SatOutcome, SmtError, Solver, SolverConfig, SolverStats};

const ENGINE_STACK: usize = 256 * 1024 * 1024;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyConfig {
    pub solver: SolverConfig,
    pub engine: EngineConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "kebab-case")]
pub enum Verdict {
    Verified,
    Inconclusive(String),
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Verified => write!(f, "verified"),
            Verdict::Inconclusive(r) => write!(f, "inconclusive: {r}"),
        }
    }
}

/// A formula in both display syntax and SMT-LIB2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rendered {
    pub pretty: String,
    pub smt: String,
}

impl Rendered {
    pub fn of(f: &Formula) -> Self {
        Rendered { pretty: f.to_string(), smt: emit::formula(f) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub verdict: Verdict,
    /// The last parametric postcondition handed to the final query.
    pub xi: Option<Formula>,
    pub c: Option<Formula>,
    pub loop_choices: Vec<LoopChoice>,
    pub candidates_tried: usize,
    pub pool_candidates_tried: usize,
    /// Number of parametric postconditions whose final query was checked.
    pub final_queries: usize,
    /// The last final query as an SMT-LIB2 script, with its outcome.
    pub final_query: Option<String>,
    pub final_outcome: Option<SatOutcome>,
    pub solver: SolverStats,
    pub wall_time: Duration,
    pub trace: Vec<TraceEvent>,
}

impl Report {
    pub fn xi_rendered(&self) -> Option<Rendered> {
        self.xi.as_ref().map(Rendered::of)
    }

    pub fn c_rendered(&self) -> Option<Rendered> {
        self.c.as_ref().map(Rendered::of)
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    /// The solver could not be run or answered with something unusable.
    #[error("solver environment: {0}")]
    Environment(SmtError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<EngineError> for VerifyError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Smt(
                e @ (SmtError::BinaryMissing(_) | SmtError::Crash { .. } | SmtError::Malformed(_) | SmtError::Io(_)),
            ) => VerifyError::Environment(e),
            other => VerifyError::Internal(other.to_string()),
        }
    }
}

#[derive(Default)]
struct Attempt {
    xi: Option<Formula>,
    c: Option<Formula>,
    choices: Vec<LoopChoice>,
    query: Option<String>,
    outcome: Option<SatOutcome>,
    count: usize,
    verified: bool,
}

/// Verifies `f`: generates parametric postconditions (retrying loop
/// candidates) until one makes the final query hold. Never reports the tuple
/// invalid; a failed search is `Inconclusive`.
pub fn verify(f: &Feht, config: &VerifyConfig) -> Result<Report, VerifyError> {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name("forex-verify".into())
            .stack_size(ENGINE_STACK)
            .spawn_scoped(s, || verify_here(f, config))
            .map_err(|e| VerifyError::Internal(format!("cannot start verifier thread: {e}")))?
            .join()
            .map_err(|_| VerifyError::Internal("verifier thread panicked".into()))?
    })
}

fn verify_here(f: &Feht, config: &VerifyConfig) -> Result<Report, VerifyError> {
    let start = Instant::now();
    let names = NameSupply::new();
    let solver = Solver::new(config.solver.clone());
    let mut engine = Engine::new(&names, Some(&solver), config.engine.clone(), f.hints().clone());
    let psi = f.post_formula();
    let universal_vars = f.universal_vars();
    let existential_vars = f.existential_vars();
    let mut attempt = Attempt::default();

    engine.genpp(f.pre_formula(), f.universals().to_vec(), f.existentials().to_vec(), &mut |eng, pa| {
        let (xi, c) = pa.into_parts();
        let query = final_validity_query(&xi, &c, &psi, &universal_vars, &existential_vars)?;
        let verdict = solver.check_closed(&query)?;
        attempt.count += 1;
        attempt.query = Some(emit::script(&query, false));
        attempt.choices = eng.choices().to_vec();
        attempt.xi = Some(xi);
        attempt.c = Some(c);
        let flow = match &verdict.outcome {
            SatOutcome::Sat => {
                attempt.verified = true;
                Flow::Stop
            }
            SatOutcome::Unsat => {
                eng.note_failure("final query unsat");
                Flow::Continue
            }
            SatOutcome::Unknown(r) => {
                eng.note_failure(format!("final query unknown ({r})"));
                Flow::Continue
            }
        };
        attempt.outcome = Some(verdict.outcome);
        Ok(flow)
    })?;

    let verdict = if attempt.verified {
        Verdict::Verified
    } else {
        let reason = match (&attempt.outcome, engine.last_failure()) {
            (_, Some(r)) => r.to_string(),
            (Some(o), None) => format!("final query {}", o.label()),
            (None, None) => "no parametric postcondition found".to_string(),
        };
        Verdict::Inconclusive(reason)
    };
    Ok(Report {
        verdict,
        xi: attempt.xi,
        c: attempt.c,
        loop_choices: attempt.choices,
        candidates_tried: engine.candidates_tried(),
        pool_candidates_tried: engine.pool_candidates_tried(),
        final_queries: attempt.count,
        final_query: attempt.query,
        final_outcome: attempt.outcome,
        solver: solver.stats(),
        wall_time: start.elapsed(),
        trace: engine.trace().to_vec(),
    })
}
