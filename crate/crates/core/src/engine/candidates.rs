//! Guess-and-check candidates for loop groups.
//!
//! Hints come first. After them, invariants are conjunctions of up to three
//! atoms from a pool harvested from the loops' text, enumerated by size and,
//! within a size, in pool order. Counter tuples vary fastest: all ones, then
//! every tuple over `[1, 2]`, then over `[1, 3]` when the bound allows.

use std::collections::{BTreeSet, VecDeque};

use itertools::Itertools;
use num_bigint::BigInt;
use serde::Serialize;

use super::loops::LoopGroup;
use crate::ast::{ArithExpr, CmpOp, VarName};
use crate::feht::Hints;
use crate::formula::{Formula, Term};

const MAX_CONJUNCTS: usize = 3;
const MULTIPLIERS: [i64; 2] = [2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSource {
    Hint,
    Pool,
    /// Existential-only loops assumed not to run at all.
    ZeroIteration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub invariant: Formula,
    /// Pool indices of the conjuncts; `None` for hints.
    pub atoms: Option<BTreeSet<usize>>,
    /// One counter per group member, in member order.
    pub counters: Vec<u32>,
    pub source: CandidateSource,
}

impl Candidate {
    pub fn bound(&self) -> u32 {
        self.counters.iter().copied().max().unwrap_or(1)
    }
}

/// Pruned regions of the conjunction lattice.
#[derive(Debug, Clone, Default)]
pub struct CandidateLattice {
    /// Sets not implied by the precondition; every superset is pruned too.
    too_strong: Vec<BTreeSet<usize>>,
    /// Sets too weak for simultaneous termination; every subset is pruned too.
    too_weak: Vec<BTreeSet<usize>>,
}

impl CandidateLattice {
    pub fn prune_stronger(&mut self, set: &BTreeSet<usize>) {
        self.too_strong.push(set.clone());
    }

    pub fn prune_weaker(&mut self, set: &BTreeSet<usize>) {
        self.too_weak.push(set.clone());
    }

    pub fn is_pruned(&self, set: &BTreeSet<usize>) -> bool {
        self.too_strong.iter().any(|s| s.is_subset(set)) || self.too_weak.iter().any(|s| set.is_subset(s))
    }
}

pub struct CandidateStream {
    hints: VecDeque<Candidate>,
    pool: Vec<Atom>,
    counters: Vec<Vec<u32>>,
    lattice: CandidateLattice,
    size: usize,
    combos: Box<dyn Iterator<Item = Vec<usize>>>,
    current: Option<(BTreeSet<usize>, usize)>,
}

impl CandidateStream {
    pub fn new(group: &LoopGroup, hints: &Hints, max_unroll: u32) -> Self {
        let members = group.members();
        let hint_counters: Option<Vec<u32>> = hints
            .counters
            .as_ref()
            .map(|cs| members.iter().map(|m| cs.get(m.copy as usize - 1).copied().unwrap_or(1)).collect());
        let hint_list: VecDeque<Candidate> = hints
            .invariants
            .iter()
            .map(|inv| Candidate {
                invariant: inv.into(),
                atoms: None,
                counters: hint_counters.clone().unwrap_or_else(|| vec![1; members.len()]),
                source: CandidateSource::Hint,
            })
            .collect();
        let max_unroll = hints.unroll.unwrap_or(max_unroll).max(1);
        CandidateStream {
            hints: hint_list,
            pool: atom_pool(group),
            counters: counter_tuples(members.len(), max_unroll),
            lattice: CandidateLattice::default(),
            size: 0,
            combos: Box::new(std::iter::once(Vec::new())),
            current: None,
        }
    }

    pub fn pool(&self) -> &[Atom] {
        &self.pool
    }

    pub fn lattice_mut(&mut self) -> &mut CandidateLattice {
        &mut self.lattice
    }

    fn invariant_of(&self, set: &BTreeSet<usize>) -> Formula {
        match set.len() {
            0 => Formula::True,
            1 => self.pool[*set.iter().next().expect("one atom")].formula.clone(),
            _ => Formula::And(set.iter().map(|i| self.pool[*i].formula.clone()).collect()),
        }
    }

    fn next_set(&mut self) -> Option<BTreeSet<usize>> {
        loop {
            if let Some(combo) = self.combos.next() {
                let set: BTreeSet<usize> = combo.into_iter().collect();
                if !self.lattice.is_pruned(&set) {
                    return Some(set);
                }
                continue;
            }
            self.size += 1;
            if self.size > MAX_CONJUNCTS.min(self.pool.len()) {
                return None;
            }
            self.combos = Box::new((0..self.pool.len()).combinations(self.size));
        }
    }
}

impl Iterator for CandidateStream {
    type Item = Candidate;

    fn next(&mut self) -> Option<Candidate> {
        if let Some(h) = self.hints.pop_front() {
            return Some(h);
        }
        loop {
            match self.current.take() {
                Some((set, idx)) if idx < self.counters.len() && !self.lattice.is_pruned(&set) => {
                    let cand = Candidate {
                        invariant: self.invariant_of(&set),
                        atoms: Some(set.clone()),
                        counters: self.counters[idx].clone(),
                        source: CandidateSource::Pool,
                    };
                    self.current = Some((set, idx + 1));
                    return Some(cand);
                }
                _ => {
                    let set = self.next_set()?;
                    self.current = Some((set, 0));
                }
            }
        }
    }
}

/// All ones, then the remaining tuples over `[1, 2]`, then over `[1, 3]`.
pub fn counter_tuples(n: usize, max_unroll: u32) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![vec![1; n]];
    for b in 2..=max_unroll.min(3) {
        for t in (0..n).map(|_| 1..=b).multi_cartesian_product() {
            if !out.contains(&t) {
                out.push(t);
            }
        }
    }
    out
}

fn push_unique(pool: &mut Vec<Atom>, f: Formula) {
    if !pool.iter().any(|a| a.formula == f) {
        pool.push(Atom { formula: f });
    }
}

fn collect_guard_constants(e: &ArithExpr, out: &mut BTreeSet<BigInt>) {
    match e {
        ArithExpr::Lit(c) => {
            out.insert(c.clone());
        }
        ArithExpr::Var(_) => {}
        ArithExpr::Bin(_, a, b) => {
            collect_guard_constants(a, out);
            collect_guard_constants(b, out);
        }
    }
}

/// The atom pool for a loop group:
/// equalities between same-named variables of different copies; equalities
/// and inequalities between guard variables; `v == m*w + r` for
/// `m` in {2, 3} occurring as a factor in the loops and `r` in {-1, 0, 1};
/// and bounds of guard variables against the guards' constants.
pub fn atom_pool(group: &LoopGroup) -> Vec<Atom> {
    let members = group.members();
    let mut vars: BTreeSet<VarName> = BTreeSet::new();
    let mut guard_vars: Vec<VarName> = Vec::new();
    let mut mul_constants: BTreeSet<BigInt> = BTreeSet::new();
    let mut guard_constants: BTreeSet<BigInt> = BTreeSet::new();
    for m in members {
        vars.extend(m.guard.vars());
        vars.extend(m.body.vars());
        for v in m.guard.vars() {
            if !guard_vars.contains(&v) {
                guard_vars.push(v);
            }
        }
        mul_constants.extend(m.body.mul_constants());
        mul_constants.extend(crate::ast::Stmt::Assume(m.guard.clone()).mul_constants());
        m.guard.for_each_cmp(&mut |_, l, r| {
            collect_guard_constants(l, &mut guard_constants);
            collect_guard_constants(r, &mut guard_constants);
        });
    }
    let t = |v: &VarName| Term::var(v);
    let mut pool = Vec::new();

    let mut cross: Vec<(VarName, VarName)> = Vec::new();
    for (a, b) in vars.iter().tuple_combinations() {
        if a.base() == b.base() && a.copy() != b.copy() {
            cross.push((a.clone(), b.clone()));
            push_unique(&mut pool, Formula::eq(t(a), t(b)));
        }
    }
    let guard_pairs: Vec<(VarName, VarName)> =
        guard_vars.iter().tuple_combinations().map(|(a, b): (&VarName, &VarName)| (a.clone(), b.clone())).collect();
    for (a, b) in &guard_pairs {
        push_unique(&mut pool, Formula::eq(t(a), t(b)));
        push_unique(&mut pool, Formula::atom(CmpOp::Le, t(a), t(b)));
        push_unique(&mut pool, Formula::atom(CmpOp::Ge, t(a), t(b)));
    }
    let multipliers: Vec<i64> =
        MULTIPLIERS.iter().copied().filter(|m| mul_constants.iter().any(|c| c % BigInt::from(*m) == BigInt::from(0))).collect();
    for m in multipliers {
        for (a, b) in guard_pairs.iter().chain(&cross) {
            for (v, w) in [(a, b), (b, a)] {
                for r in [0i64, -1, 1] {
                    let scaled = Term::mul(Term::lit(m), t(w));
                    let rhs = if r == 0 { scaled } else { Term::add(scaled, Term::lit(r)) };
                    push_unique(&mut pool, Formula::eq(t(v), rhs));
                }
            }
        }
    }
    for v in &guard_vars {
        for c in &guard_constants {
            push_unique(&mut pool, Formula::atom(CmpOp::Ge, t(v), Term::Lit(c.clone())));
            push_unique(&mut pool, Formula::atom(CmpOp::Le, t(v), Term::Lit(c.clone())));
        }
    }
    pool
}
