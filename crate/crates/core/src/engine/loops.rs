//! The counting-based loop rule with guessed invariants and counters.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::candidates::{Candidate, CandidateSource, CandidateStream};
use super::{universal_closure, Cont, Engine, EngineError, Flow, LoopChoice, Rule};
use crate::ast::{BoolExpr, Stmt, VarName};
use crate::feht::{QuantifiedProgram, Quantifier};
use crate::formula::{Formula, ParametricAssertion, Symbol};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopMember {
    pub copy: u32,
    pub quantifier: Quantifier,
    pub guard: BoolExpr,
    pub body: Stmt,
    pub suffix: Stmt,
}

/// Programs that all start with a loop, universals first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopGroup {
    members: Vec<LoopMember>,
}

impl LoopGroup {
    pub fn new(universals: &[QuantifiedProgram], existentials: &[QuantifiedProgram]) -> Result<Self, EngineError> {
        let mut members = Vec::new();
        for p in universals.iter().chain(existentials) {
            match p.remaining.normalize_head() {
                Stmt::Seq(head, rest) => match *head {
                    Stmt::While(guard, body) => members.push(LoopMember {
                        copy: p.copy,
                        quantifier: p.quantifier,
                        guard,
                        body: *body,
                        suffix: *rest,
                    }),
                    other => {
                        return Err(EngineError::Internal(format!("copy {} is not loop-headed: {other}", p.copy)))
                    }
                },
                other => return Err(EngineError::Internal(format!("copy {} is not loop-headed: {other}", p.copy))),
            }
        }
        Ok(LoopGroup { members })
    }

    pub fn members(&self) -> &[LoopMember] {
        &self.members
    }

    pub fn copies(&self) -> Vec<u32> {
        self.members.iter().map(|m| m.copy).collect()
    }

    pub fn universal_count(&self) -> usize {
        self.members.iter().filter(|m| m.quantifier == Quantifier::Forall).count()
    }

    fn modified(&self) -> BTreeSet<VarName> {
        self.members.iter().flat_map(|m| m.body.mod_vars()).collect()
    }

    fn guards(&self) -> Vec<Formula> {
        self.members.iter().map(|m| Formula::from(&m.guard)).collect()
    }

    fn exit(&self) -> Formula {
        Formula::and(self.guards().into_iter().map(Formula::not))
    }

    fn programs(&self, pick: impl Fn(&LoopMember) -> Option<Stmt>) -> (Vec<QuantifiedProgram>, Vec<QuantifiedProgram>) {
        let mut univ = Vec::new();
        let mut exist = Vec::new();
        for m in &self.members {
            if let Some(s) = pick(m) {
                let p = QuantifiedProgram::new(m.copy, m.quantifier, s);
                match m.quantifier {
                    Quantifier::Forall => univ.push(p),
                    Quantifier::Exists => exist.push(p),
                }
            }
        }
        (univ, exist)
    }
}

/// Names of the parts of a loop group's restriction, in assembly order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestrictionTag {
    Init,
    Sim,
    /// Restriction of the bodies' pass in round `j`.
    Body(u32),
    /// Guards of loops still iterating hold after round `j`.
    Cont(u32),
    Ind,
    Suffix,
    /// No loop of an existential-only group is entered.
    ZeroIteration,
}

impl fmt::Display for RestrictionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestrictionTag::Init => write!(f, "init"),
            RestrictionTag::Sim => write!(f, "sim"),
            RestrictionTag::Body(j) => write!(f, "body({j})"),
            RestrictionTag::Cont(j) => write!(f, "cont({j})"),
            RestrictionTag::Ind => write!(f, "ind"),
            RestrictionTag::Suffix => write!(f, "suffix"),
            RestrictionTag::ZeroIteration => write!(f, "zero-iteration"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopFailure {
    Init,
    Sim,
    Body(u32),
    Cont(u32),
    Ind,
    Suffix,
    ExistentialOnly,
    Budget,
    Exhausted,
}

impl fmt::Display for LoopFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopFailure::Init => write!(f, "invariant not implied on entry"),
            LoopFailure::Sim => write!(f, "invariant does not force simultaneous termination"),
            LoopFailure::Body(j) => write!(f, "loop bodies unsatisfiable in round {j}"),
            LoopFailure::Cont(j) => write!(f, "loop guards may fail after round {j}"),
            LoopFailure::Ind => write!(f, "invariant not inductive"),
            LoopFailure::Suffix => write!(f, "code after the loops unsatisfiable"),
            LoopFailure::ExistentialOnly => write!(f, "only existential loops remain and they may be entered"),
            LoopFailure::Budget => write!(f, "candidate budget exhausted"),
            LoopFailure::Exhausted => write!(f, "no candidate left"),
        }
    }
}

type Parts = Vec<(RestrictionTag, Formula)>;

struct Attempt {
    group: LoopGroup,
    cand: Candidate,
    frame: Formula,
    choice_copies: Vec<u32>,
}

impl<'a> Engine<'a> {
    pub(super) fn genpp_loops(
        &mut self,
        phi: Formula,
        universals: Vec<QuantifiedProgram>,
        existentials: Vec<QuantifiedProgram>,
        k: &mut Cont<'_, 'a>,
    ) -> Result<Flow, EngineError> {
        let group = LoopGroup::new(&universals, &existentials)?;
        if group.universal_count() == 0 {
            return self.zero_iteration(phi, group, k);
        }
        let frame = frame_of(&phi, &group.modified());
        let hints = self.hints.clone();
        let mut stream = CandidateStream::new(&group, &hints, self.config.max_unroll);
        let mut tried = 0usize;
        let mut last = LoopFailure::Exhausted;
        while let Some(cand) = stream.next() {
            if tried >= self.config.candidate_budget || self.candidates_tried >= self.config.global_budget {
                last = LoopFailure::Budget;
                break;
            }
            tried += 1;
            self.candidates_tried += 1;
            if cand.source == CandidateSource::Pool {
                self.pool_candidates_tried += 1;
            }
            self.record(
                Rule::Candidate,
                None,
                0,
                format!("copies {:?}: {} with counters {:?}", group.copies(), cand.invariant, cand.counters),
            );
            let attempt =
                Attempt { group: group.clone(), cand: cand.clone(), frame: frame.clone(), choice_copies: group.copies() };
            let mut failure = None;
            let flow = self.try_candidate(&phi, &attempt, &mut failure, k)?;
            if flow == Flow::Stop {
                return Ok(Flow::Stop);
            }
            if let Some(f) = failure {
                self.record(Rule::CandidateFailed, None, 0, f.to_string());
                if let Some(atoms) = &cand.atoms {
                    match f {
                        LoopFailure::Init => stream.lattice_mut().prune_stronger(atoms),
                        LoopFailure::Sim => stream.lattice_mut().prune_weaker(atoms),
                        _ => {}
                    }
                }
                last = f;
            }
        }
        self.note_failure(format!("loops of copies {:?}: {last}", group.copies()));
        Ok(Flow::Continue)
    }

    fn zero_iteration(&mut self, phi: Formula, group: LoopGroup, k: &mut Cont<'_, 'a>) -> Result<Flow, EngineError> {
        let exit = group.exit();
        let c_zero = self.tidy(universal_closure(&Formula::implies(phi.clone(), exit.clone())));
        if !self.restriction_satisfiable(&c_zero)? {
            self.note_failure(format!("loops of copies {:?}: {}", group.copies(), LoopFailure::ExistentialOnly));
            return Ok(Flow::Continue);
        }
        let (univ, exist) = group.programs(|m| Some(m.suffix.clone()));
        let start = self.tidy(Formula::and2(phi, exit.clone()));
        self.choices.push(LoopChoice {
            copies: group.copies(),
            invariant: exit.to_string(),
            counters: vec![0; group.members().len()],
            source: CandidateSource::ZeroIteration,
            restrictions: Vec::new(),
        });
        let depth = self.choices.len();
        let result = self.genpp(start, univ, exist, &mut |eng, pa| {
            let (xi, c) = pa.into_parts();
            let c = eng.tidy(c);
            eng.choices[depth - 1].restrictions =
                vec![(RestrictionTag::ZeroIteration, c_zero.to_string()), (RestrictionTag::Suffix, c.to_string())];
            let c = eng.tidy(Formula::and2(c_zero.clone(), c));
            k(eng, ParametricAssertion::new(xi, c)?)
        });
        self.choices.truncate(depth - 1);
        result
    }

    fn check_part(&self, tag: RestrictionTag, c: Formula) -> Result<Option<Formula>, EngineError> {
        let c = self.tidy(c);
        debug_assert!(c.free_vars().is_empty(), "{tag} restriction has free variables");
        Ok(if self.restriction_satisfiable(&c)? { Some(c) } else { None })
    }

    fn try_candidate(
        &mut self,
        phi: &Formula,
        at: &Attempt,
        failure: &mut Option<LoopFailure>,
        k: &mut Cont<'_, 'a>,
    ) -> Result<Flow, EngineError> {
        let inv = &at.cand.invariant;
        let Some(c_init) = self.check_part(RestrictionTag::Init, universal_closure(&Formula::implies(phi.clone(), inv.clone())))?
        else {
            *failure = Some(LoopFailure::Init);
            return Ok(Flow::Continue);
        };
        let guards = at.group.guards();
        let agree = Formula::and(guards.iter().skip(1).map(|b| Formula::iff(guards[0].clone(), b.clone())));
        let held = Formula::and2(inv.clone(), at.frame.clone());
        let Some(c_sim) = self.check_part(RestrictionTag::Sim, universal_closure(&Formula::implies(held.clone(), agree)))?
        else {
            *failure = Some(LoopFailure::Sim);
            return Ok(Flow::Continue);
        };
        let parts = vec![(RestrictionTag::Init, c_init), (RestrictionTag::Sim, c_sim)];
        let xi = self.tidy(held);
        let mut deepest = None;
        let flow = self.round(1, xi, parts, at, &mut deepest, k)?;
        if flow == Flow::Continue && failure.is_none() {
            *failure = deepest;
        }
        Ok(flow)
    }

    /// Runs round `j` of the bodies from `xi`, then the remaining rounds,
    /// the inductiveness check and the suffix.
    fn round(
        &mut self,
        j: u32,
        xi: Formula,
        parts: Parts,
        at: &Attempt,
        failure: &mut Option<LoopFailure>,
        k: &mut Cont<'_, 'a>,
    ) -> Result<Flow, EngineError> {
        let counters = &at.cand.counters;
        if j > at.cand.bound() {
            return self.finish(xi, parts, at, failure, k);
        }
        let active = |i: usize| counters[i] >= j;
        let members = at.group.members();
        let entered = Formula::and(
            members.iter().enumerate().filter(|(i, _)| active(*i)).map(|(_, m)| Formula::from(&m.guard)),
        );
        let start = self.tidy(Formula::and2(xi, entered));
        let idx_of: Vec<u32> = members.iter().map(|m| m.copy).collect();
        let (univ, exist) =
            at.group.programs(|m| active(idx_of.iter().position(|c| *c == m.copy).expect("member")).then(|| m.body.clone()));
        let before = self.last_failure.clone();
        let mut reached = false;
        let flow = self.genpp(start, univ, exist, &mut |eng, pa| {
            reached = true;
            let (next, c_body) = pa.into_parts();
            let staying = Formula::and(
                members.iter().enumerate().filter(|(i, _)| counters[*i] > j).map(|(_, m)| Formula::from(&m.guard)),
            );
            let Some(c_cont) =
                eng.check_part(RestrictionTag::Cont(j), universal_closure(&Formula::implies(next.clone(), staying)))?
            else {
                failure.get_or_insert(LoopFailure::Cont(j));
                return Ok(Flow::Continue);
            };
            let mut parts = parts.clone();
            parts.push((RestrictionTag::Body(j), eng.tidy(c_body)));
            parts.push((RestrictionTag::Cont(j), c_cont));
            eng.round(j + 1, next, parts, at, failure, k)
        })?;
        if !reached {
            failure.get_or_insert(LoopFailure::Body(j));
            if self.last_failure == before {
                self.note_failure(format!("loop bodies of copies {:?} in round {j}", at.group.copies()));
            }
        }
        Ok(flow)
    }

    fn finish(
        &mut self,
        xi: Formula,
        parts: Parts,
        at: &Attempt,
        failure: &mut Option<LoopFailure>,
        k: &mut Cont<'_, 'a>,
    ) -> Result<Flow, EngineError> {
        let inv = at.cand.invariant.clone();
        let Some(c_ind) = self.check_part(RestrictionTag::Ind, universal_closure(&Formula::implies(xi, inv.clone())))?
        else {
            failure.get_or_insert(LoopFailure::Ind);
            return Ok(Flow::Continue);
        };
        let mut parts = parts;
        parts.push((RestrictionTag::Ind, c_ind));
        let start = self.tidy(Formula::and([inv.clone(), at.frame.clone(), at.group.exit()]));
        let (univ, exist) = at.group.programs(|m| Some(m.suffix.clone()));
        self.choices.push(LoopChoice {
            copies: at.choice_copies.clone(),
            invariant: inv.to_string(),
            counters: at.cand.counters.clone(),
            source: at.cand.source,
            restrictions: Vec::new(),
        });
        let depth = self.choices.len();
        let mut reached = false;
        let result = self.genpp(start, univ, exist, &mut |eng, pa| {
            reached = true;
            let (xi, c_rem) = pa.into_parts();
            let mut parts = parts.clone();
            parts.push((RestrictionTag::Suffix, eng.tidy(c_rem)));
            eng.choices[depth - 1].restrictions = parts.iter().map(|(t, c)| (*t, c.to_string())).collect();
            let c = eng.tidy(Formula::and(parts.into_iter().map(|(_, c)| c)));
            k(eng, ParametricAssertion::new(xi, c)?)
        });
        self.choices.truncate(depth - 1);
        if !reached {
            failure.get_or_insert(LoopFailure::Suffix);
        }
        result
    }
}

/// Top-level conjuncts of `phi` that no loop body can change.
fn frame_of(phi: &Formula, modified: &BTreeSet<VarName>) -> Formula {
    let touched = |c: &Formula| {
        c.free_vars().iter().any(|s| match s {
            Symbol::Var(v) | Symbol::Shadow(v, _) => modified.contains(v),
            Symbol::Param(_) => false,
        })
    };
    Formula::and(phi.conjuncts().into_iter().filter(|c| !touched(c)).cloned())
}
