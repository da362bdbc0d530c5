//! Forall-exists Hoare tuples and their quantified program copies.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{AstError, BoolExpr, Stmt, VarName};
use crate::formula::Formula;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantifier {
    Forall,
    Exists,
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        })
    }
}

/// One relational copy: a program whose variables all carry index `copy`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantifiedProgram {
    pub copy: u32,
    pub quantifier: Quantifier,
    pub body: Stmt,
    /// The part of `body` not yet analysed; equal to `body` on construction.
    pub remaining: Stmt,
}

impl QuantifiedProgram {
    pub fn new(copy: u32, quantifier: Quantifier, body: Stmt) -> Self {
        QuantifiedProgram { copy, quantifier, remaining: body.clone(), body }
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.remaining, Stmt::Skip)
    }
}

/// User-supplied loop hints: invariants tried before any generated candidate,
/// an optional counter per copy, and an optional unroll bound.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hints {
    pub invariants: Vec<BoolExpr>,
    pub counters: Option<Vec<u32>>,
    pub unroll: Option<u32>,
}

impl Hints {
    pub fn is_empty(&self) -> bool {
        self.invariants.is_empty() && self.counters.is_none() && self.unroll.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FehtError {
    #[error("a tuple needs at least one program")]
    NoPrograms,
    #[error(transparent)]
    Ast(#[from] AstError),
    #[error("{what} mentions {var}, which does not name a declared copy")]
    UndeclaredCopy { what: &'static str, var: VarName },
    #[error("{what} mentions unindexed variable {var}")]
    Unindexed { what: &'static str, var: VarName },
    #[error("hint counters must be positive")]
    NonPositiveCounter,
    #[error("expected {expected} hint counters, found {found}")]
    CounterArity { expected: usize, found: usize },
    #[error("unroll bound {unroll} is below the largest counter {max}")]
    UnrollBelowCounter { unroll: u32, max: u32 },
}

/// `<pre> P_1 .. P_k ~forall P_k+1 .. P_k+l ~exists <post>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feht {
    pre: BoolExpr,
    post: BoolExpr,
    universals: Vec<QuantifiedProgram>,
    existentials: Vec<QuantifiedProgram>,
    hints: Hints,
}

impl Feht {
    /// Builds a tuple from copy-free program texts; copies are numbered
    /// `1..=k` for the universal programs and `k+1..=k+l` for the existential ones.
    pub fn new(
        pre: BoolExpr,
        universals: Vec<Stmt>,
        existentials: Vec<Stmt>,
        post: BoolExpr,
        hints: Hints,
    ) -> Result<Feht, FehtError> {
        if universals.is_empty() && existentials.is_empty() {
            return Err(FehtError::NoPrograms);
        }
        let k = universals.len() as u32;
        let universals = universals
            .iter()
            .enumerate()
            .map(|(i, p)| Ok(QuantifiedProgram::new(i as u32 + 1, Quantifier::Forall, p.alpha_rename(i as u32 + 1)?)))
            .collect::<Result<Vec<_>, FehtError>>()?;
        let existentials = existentials
            .iter()
            .enumerate()
            .map(|(i, p)| Ok(QuantifiedProgram::new(k + i as u32 + 1, Quantifier::Exists, p.alpha_rename(k + i as u32 + 1)?)))
            .collect::<Result<Vec<_>, FehtError>>()?;
        let feht = Feht { pre, post, universals, existentials, hints };
        let copies = feht.copies() as u32;
        let check = |what: &'static str, b: &BoolExpr| -> Result<(), FehtError> {
            for var in b.vars() {
                match var.copy() {
                    None => return Err(FehtError::Unindexed { what, var }),
                    Some(c) if c == 0 || c > copies => return Err(FehtError::UndeclaredCopy { what, var }),
                    Some(_) => {}
                }
            }
            Ok(())
        };
        check("precondition", &feht.pre)?;
        check("postcondition", &feht.post)?;
        for inv in &feht.hints.invariants {
            check("hint invariant", inv)?;
        }
        if let Some(cs) = &feht.hints.counters {
            if cs.len() != feht.copies() {
                return Err(FehtError::CounterArity { expected: feht.copies(), found: cs.len() });
            }
            if cs.contains(&0) {
                return Err(FehtError::NonPositiveCounter);
            }
            let max = cs.iter().copied().max().unwrap_or(1);
            if let Some(unroll) = feht.hints.unroll {
                if unroll < max {
                    return Err(FehtError::UnrollBelowCounter { unroll, max });
                }
            }
        }
        Ok(feht)
    }

    pub fn pre(&self) -> &BoolExpr {
        &self.pre
    }

    pub fn post(&self) -> &BoolExpr {
        &self.post
    }

    pub fn pre_formula(&self) -> Formula {
        (&self.pre).into()
    }

    pub fn post_formula(&self) -> Formula {
        (&self.post).into()
    }

    pub fn universals(&self) -> &[QuantifiedProgram] {
        &self.universals
    }

    pub fn existentials(&self) -> &[QuantifiedProgram] {
        &self.existentials
    }

    pub fn hints(&self) -> &Hints {
        &self.hints
    }

    pub fn set_hints(&mut self, hints: Hints) {
        self.hints = hints;
    }

    /// All programs, universal copies first.
    pub fn programs(&self) -> impl Iterator<Item = &QuantifiedProgram> {
        self.universals.iter().chain(&self.existentials)
    }

    pub fn copies(&self) -> usize {
        self.universals.len() + self.existentials.len()
    }

    pub fn program(&self, copy: u32) -> Option<&QuantifiedProgram> {
        self.programs().find(|p| p.copy == copy)
    }

    pub fn has_loops(&self) -> bool {
        self.programs().any(|p| p.body.has_loops())
    }

    /// Every variable of copy `copy`: those of its program plus those the
    /// pre- and postcondition mention with that index.
    pub fn vars_of_copy(&self, copy: u32) -> BTreeSet<VarName> {
        let mut out: BTreeSet<VarName> = self.program(copy).map(|p| p.body.vars()).unwrap_or_default();
        for v in self.pre.vars().into_iter().chain(self.post.vars()) {
            if v.copy() == Some(copy) {
                out.insert(v);
            }
        }
        out
    }

    pub fn universal_vars(&self) -> BTreeSet<VarName> {
        self.universals.iter().flat_map(|p| self.vars_of_copy(p.copy)).collect()
    }

    pub fn existential_vars(&self) -> BTreeSet<VarName> {
        self.existentials.iter().flat_map(|p| self.vars_of_copy(p.copy)).collect()
    }

    /// The source text of copy `copy` with indices stripped.
    pub fn source_program(&self, copy: u32) -> Option<Stmt> {
        self.program(copy).map(|p| p.body.strip_copies())
    }
}
