//! Parametric postcondition generation over tuples of programs.
//!
//! The engine is written in continuation-passing style. Loop analysis guesses
//! invariants and counters, so a single tuple may admit many parametric
//! postconditions; each one is handed to the continuation, which answers
//! [`Flow::Stop`] once satisfied or [`Flow::Continue`] to request the next
//! alternative. Straight-line code yields exactly one alternative.

mod candidates;
mod loops;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ast::{ArithExpr, BoolExpr, Stmt, VarName};
use crate::feht::{Hints, QuantifiedProgram, Quantifier};
use crate::formula::{simplify, Formula, FormulaError, NameSupply, ParamOrigin, ParametricAssertion, Symbol, Term};
use crate::smt::{SatOutcome, SmtError, Solver};

pub use candidates::{Atom, Candidate, CandidateLattice, CandidateSource, CandidateStream};
pub use loops::{LoopFailure, LoopGroup, LoopMember, RestrictionTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Stop,
    Continue,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// The continuation receiving each parametric postcondition.
pub type Cont<'k, 'a> = dyn FnMut(&mut Engine<'a>, ParametricAssertion) -> Result<Flow, EngineError> + 'k;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    /// Largest loop counter tried by generated candidates.
    pub max_unroll: u32,
    /// Candidates tried per loop group before giving up on it.
    pub candidate_budget: usize,
    /// Candidates tried over the whole run, across nested loop groups.
    pub global_budget: usize,
    /// Run the simplifier on every intermediate assertion.
    pub simplify: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { max_unroll: 2, candidate_budget: 500, global_budget: 5000, simplify: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Done,
    Loops,
    ForallAssign,
    ForallHavoc,
    ForallAssume,
    ForallIf,
    ExistsAssign,
    ExistsHavoc,
    ExistsAssume,
    ExistsIf,
    Candidate,
    CandidateFailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub rule: Rule,
    pub copy: Option<u32>,
    /// Universal programs whose head was not a loop when the rule fired.
    pub pending_universal: usize,
    pub detail: String,
}

/// The invariant and counters used for one loop group on the successful path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoopChoice {
    pub copies: Vec<u32>,
    pub invariant: String,
    pub counters: Vec<u32>,
    pub source: CandidateSource,
    /// Each restriction part, as assembled into the group's restriction.
    pub restrictions: Vec<(RestrictionTag, String)>,
}

pub struct Engine<'a> {
    names: &'a NameSupply,
    solver: Option<&'a Solver>,
    config: EngineConfig,
    hints: Hints,
    trace: Vec<TraceEvent>,
    choices: Vec<LoopChoice>,
    candidates_tried: usize,
    pool_candidates_tried: usize,
    last_failure: Option<String>,
}

impl<'a> Engine<'a> {
    /// Without a solver no restriction is checked eagerly and loop candidates
    /// are never pruned; loop-free analysis is unaffected.
    pub fn new(names: &'a NameSupply, solver: Option<&'a Solver>, config: EngineConfig, hints: Hints) -> Self {
        Engine {
            names,
            solver,
            config,
            hints,
            trace: Vec::new(),
            choices: Vec::new(),
            candidates_tried: 0,
            pool_candidates_tried: 0,
            last_failure: None,
        }
    }

    pub fn names(&self) -> &'a NameSupply {
        self.names
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn choices(&self) -> &[LoopChoice] {
        &self.choices
    }

    pub fn candidates_tried(&self) -> usize {
        self.candidates_tried
    }

    pub fn pool_candidates_tried(&self) -> usize {
        self.pool_candidates_tried
    }

    pub fn last_failure(&self) -> Option<&str> {
        self.last_failure.as_deref()
    }

    pub fn note_failure(&mut self, reason: impl Into<String>) {
        self.last_failure = Some(reason.into());
    }

    fn tidy(&self, f: Formula) -> Formula {
        if self.config.simplify {
            simplify(&f, self.names)
        } else {
            f
        }
    }

    fn record(&mut self, rule: Rule, copy: Option<u32>, pending_universal: usize, detail: String) {
        self.trace.push(TraceEvent { rule, copy, pending_universal, detail });
    }

    /// Eager satisfiability check of a restriction. `false` only when the
    /// solver proves it unsatisfiable.
    fn restriction_satisfiable(&self, c: &Formula) -> Result<bool, EngineError> {
        let Some(solver) = self.solver else { return Ok(true) };
        let c = simplify(c, self.names);
        match c {
            Formula::True => return Ok(true),
            Formula::False => return Ok(false),
            _ => {}
        }
        Ok(!matches!(solver.check_restriction_sat(&c)?.outcome, SatOutcome::Unsat))
    }

    /// Runs the analysis and returns the first parametric postcondition.
    pub fn genpp_first(
        &mut self,
        phi: Formula,
        universals: Vec<QuantifiedProgram>,
        existentials: Vec<QuantifiedProgram>,
    ) -> Result<Option<ParametricAssertion>, EngineError> {
        let mut found = None;
        self.genpp(phi, universals, existentials, &mut |_, pa| {
            found = Some(pa);
            Ok(Flow::Stop)
        })?;
        Ok(found)
    }

    /// Computes parametric postconditions for `phi` and the given programs
    /// and passes each to `k` until it answers [`Flow::Stop`].
    pub fn genpp(
        &mut self,
        phi: Formula,
        mut universals: Vec<QuantifiedProgram>,
        mut existentials: Vec<QuantifiedProgram>,
        k: &mut Cont<'_, 'a>,
    ) -> Result<Flow, EngineError> {
        for p in universals.iter_mut().chain(existentials.iter_mut()) {
            p.remaining = p.remaining.normalize_head();
        }
        universals.retain(|p| !p.is_finished());
        existentials.retain(|p| !p.is_finished());

        if universals.is_empty() && existentials.is_empty() {
            self.record(Rule::Done, None, 0, String::new());
            let pa = ParametricAssertion::new(phi, Formula::True)?;
            return k(self, pa);
        }
        let pending = universals.iter().filter(|p| !p.remaining.is_while_headed()).count();
        if universals.iter().chain(&existentials).all(|p| p.remaining.is_while_headed()) {
            let copies: Vec<String> = universals.iter().chain(&existentials).map(|p| p.copy.to_string()).collect();
            self.record(Rule::Loops, None, 0, format!("copies {}", copies.join(",")));
            return self.genpp_loops(phi, universals, existentials, k);
        }
        if let Some(i) = universals.iter().position(|p| !p.remaining.is_while_headed()) {
            return self.step(phi, universals, existentials, Quantifier::Forall, i, pending, k);
        }
        let i = existentials
            .iter()
            .position(|p| !p.remaining.is_while_headed())
            .expect("some program is not loop-headed");
        self.step(phi, universals, existentials, Quantifier::Exists, i, pending, k)
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        phi: Formula,
        mut universals: Vec<QuantifiedProgram>,
        mut existentials: Vec<QuantifiedProgram>,
        side: Quantifier,
        idx: usize,
        pending: usize,
        k: &mut Cont<'_, 'a>,
    ) -> Result<Flow, EngineError> {
        let list = match side {
            Quantifier::Forall => &mut universals,
            Quantifier::Exists => &mut existentials,
        };
        let copy = list[idx].copy;
        let Stmt::Seq(head, rest) = list[idx].remaining.clone() else {
            return Err(EngineError::Internal(format!("copy {copy} is not head-normal")));
        };
        let universal = side == Quantifier::Forall;
        let rule = |forall: Rule, exists: Rule| if universal { forall } else { exists };
        match *head {
            Stmt::Assign(x, e) => {
                self.record(rule(Rule::ForallAssign, Rule::ExistsAssign), Some(copy), pending, format!("{x} := {e}"));
                list[idx].remaining = *rest;
                let next = self.tidy(sp_assign(&phi, &x, &e, self.names));
                self.genpp(next, universals, existentials, k)
            }
            Stmt::Havoc(x) => {
                list[idx].remaining = *rest;
                let next = if universal {
                    self.record(Rule::ForallHavoc, Some(copy), pending, format!("{x} := *"));
                    step_universal_nondet(&phi, &x)
                } else {
                    self.record(Rule::ExistsHavoc, Some(copy), pending, format!("{x} := *"));
                    step_existential_nondet(&phi, &x, self.names)
                };
                let next = self.tidy(next);
                self.genpp(next, universals, existentials, k)
            }
            Stmt::Assume(b) => {
                list[idx].remaining = *rest;
                let next = self.tidy(Formula::and2(phi.clone(), (&b).into()));
                if universal {
                    self.record(Rule::ForallAssume, Some(copy), pending, format!("assume({b})"));
                    return self.genpp(next, universals, existentials, k);
                }
                self.record(Rule::ExistsAssume, Some(copy), pending, format!("assume({b})"));
                let c_assume = self.tidy(restrict_assume(&phi, &b));
                if !self.restriction_satisfiable(&c_assume)? {
                    self.note_failure(format!("assume({b}) in copy {copy} cannot be satisfied by any choice"));
                    return Ok(Flow::Continue);
                }
                self.genpp(next, universals, existentials, &mut |eng, pa| {
                    let (xi, c) = pa.into_parts();
                    let c = eng.tidy(Formula::and2(c_assume.clone(), c));
                    k(eng, ParametricAssertion::new(xi, c)?)
                })
            }
            Stmt::If(b, then, otherwise) => {
                self.record(rule(Rule::ForallIf, Rule::ExistsIf), Some(copy), pending, format!("if ({b})"));
                let cond: Formula = (&b).into();
                let phi_then = self.tidy(Formula::and2(phi.clone(), cond.clone()));
                let phi_else = self.tidy(Formula::and2(phi, Formula::not(cond)));
                let mut u_else = universals.clone();
                let mut e_else = existentials.clone();
                let else_list = if universal { &mut u_else } else { &mut e_else };
                else_list[idx].remaining = Stmt::Seq(otherwise, rest.clone());
                let then_list = if universal { &mut universals } else { &mut existentials };
                then_list[idx].remaining = Stmt::Seq(then, rest);
                self.genpp(phi_then, universals, existentials, &mut |eng, left| {
                    eng.genpp(phi_else.clone(), u_else.clone(), e_else.clone(), &mut |eng, right| {
                        let joined = join_branches(&left, &right)?;
                        let (xi, c) = joined.into_parts();
                        let joined = ParametricAssertion::new(eng.tidy(xi), eng.tidy(c))?;
                        k(eng, joined)
                    })
                })
            }
            other => Err(EngineError::Internal(format!("unexpected head {other} in copy {copy}"))),
        }
    }
}

/// Floyd's forward assignment: `exists x'. phi[x'/x] && x == e[x'/x]`.
pub fn sp_assign(phi: &Formula, x: &VarName, e: &ArithExpr, names: &NameSupply) -> Formula {
    let xs = Symbol::var(x);
    let shadow = names.fresh_shadow(x);
    let old = Term::sym(&shadow);
    let body = Formula::and2(
        phi.substitute(&xs, &old, names),
        Formula::eq(Term::var(x), Term::from(e).substitute_sym(&xs, &old)),
    );
    Formula::exists([shadow], body)
}

/// Universal choice: `exists x. phi`.
pub fn step_universal_nondet(phi: &Formula, x: &VarName) -> Formula {
    Formula::exists([Symbol::var(x)], phi.clone())
}

/// Existential choice: `(exists x. phi) && x == mu` with `mu` fresh.
pub fn step_existential_nondet(phi: &Formula, x: &VarName, names: &NameSupply) -> Formula {
    let mu = names.fresh_param(ParamOrigin::ExistentialChoice { var: x.clone() });
    Formula::and2(Formula::exists([Symbol::var(x)], phi.clone()), Formula::eq(Term::var(x), Term::param(mu)))
}

/// `forall vars. (phi ==> b)` closing every free program variable.
pub fn restrict_assume(phi: &Formula, b: &BoolExpr) -> Formula {
    universal_closure(&Formula::implies(phi.clone(), b.into()))
}

/// Universally quantifies every free program variable of `f`.
pub fn universal_closure(f: &Formula) -> Formula {
    let vars: BTreeSet<Symbol> = f.free_vars();
    Formula::forall(vars, f.clone())
}

/// `(xi_1 || xi_2, c_1 && c_2)`.
pub fn join_branches(
    left: &ParametricAssertion,
    right: &ParametricAssertion,
) -> Result<ParametricAssertion, FormulaError> {
    ParametricAssertion::new(
        Formula::or([left.xi().clone(), right.xi().clone()]),
        Formula::and([left.c().clone(), right.c().clone()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{ArithOp, CmpOp};

    fn v(n: &str, c: u32) -> VarName {
        VarName::indexed(n, c)
    }

    #[test]
    fn sp_assign_shapes() {
        let names = NameSupply::new();
        let x = v("x", 1);
        let five = sp_assign(&Formula::True, &x, &ArithExpr::lit(5), &names);
        assert_eq!(simplify(&five, &names).to_string(), "x_1 == 5");
        let phi = Formula::eq(Term::var(&x), Term::lit(1));
        let inc = sp_assign(&phi, &x, &ArithExpr::bin(ArithOp::Add, ArithExpr::var(&x), ArithExpr::lit(1)), &names);
        assert_eq!(simplify(&inc, &names).to_string(), "x_1 == 2");
    }

    #[test]
    fn existential_havocs_mint_distinct_params() {
        let names = NameSupply::new();
        let x = v("x", 2);
        let a = step_existential_nondet(&Formula::True, &x, &names);
        let b = step_existential_nondet(&a, &x, &names);
        assert_eq!(b.free_params().len(), 2);
        assert_eq!(names.params_minted(), 2);
    }

    #[test]
    fn restriction_is_closed() {
        let y = v("y", 2);
        let phi = Formula::eq(Term::var(&y), Term::param(crate::formula::Param::from_id(1)));
        let b = BoolExpr::cmp(CmpOp::Ge, ArithExpr::var(&y), ArithExpr::lit(2));
        let c = restrict_assume(&phi, &b);
        assert!(c.free_vars().is_empty());
        assert_eq!(c.free_params().len(), 1);
    }

    #[test]
    fn join_is_disjunction_and_conjunction() {
        let a = ParametricAssertion::new(Formula::True, Formula::True).unwrap();
        let b = ParametricAssertion::new(Formula::False, Formula::False).unwrap();
        let j = join_branches(&a, &b).unwrap();
        assert_eq!(j.xi(), &Formula::or([Formula::True, Formula::False]));
        assert_eq!(j.c(), &Formula::and([Formula::True, Formula::False]));
    }
}
