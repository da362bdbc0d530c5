//! Concrete evaluation of formulas under a state and a parameter evaluation.
//!
//! Quantifier-free formulas are evaluated exactly. Quantifiers range over the
//! integers, which cannot be enumerated, so each bound variable is resolved by
//! the first applicable strategy:
//!
//! 1. a top-level equality pins the variable to a single value (exact);
//! 2. every atom mentioning the variable is linear in it and otherwise
//!    concrete, so truth can only change at the atoms' roots and testing the
//!    roots and their neighbours is exact;
//! 3. otherwise the variable ranges over `[-radius, radius]` plus whatever
//!    roots are known. Only this last case is a bounded approximation.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Formula, Symbol, Term};
use crate::ast::ArithOp;
use crate::scalar::{floor_div, Int};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound symbol {0}")]
    Unbound(Symbol),
    #[error("integer overflow during evaluation")]
    Overflow,
    #[error("literal does not fit the evaluation scalar")]
    Unrepresentable,
}

/// Values for free symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Env<Z> {
    values: BTreeMap<Symbol, Z>,
}

impl<Z> Default for Env<Z> {
    fn default() -> Self {
        Env { values: BTreeMap::new() }
    }
}

impl<Z: Int> Env<Z> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &Symbol) -> Option<&Z> {
        self.values.get(s)
    }

    pub fn insert(&mut self, s: Symbol, v: Z) -> Option<Z> {
        self.values.insert(s, v)
    }

    pub fn remove(&mut self, s: &Symbol) -> Option<Z> {
        self.values.remove(s)
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.values.contains_key(s)
    }

    fn restore(&mut self, s: &Symbol, prev: Option<Z>) {
        match prev {
            Some(v) => {
                self.values.insert(s.clone(), v);
            }
            None => {
                self.values.remove(s);
            }
        }
    }
}

impl<Z: Int> FromIterator<(Symbol, Z)> for Env<Z> {
    fn from_iter<I: IntoIterator<Item = (Symbol, Z)>>(iter: I) -> Self {
        Env { values: iter.into_iter().collect() }
    }
}

/// Range used for quantified variables that no exact strategy resolves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantBounds {
    pub radius: i64,
}

impl Default for QuantBounds {
    fn default() -> Self {
        QuantBounds { radius: 16 }
    }
}

pub fn eval_term<Z: Int>(t: &Term, env: &Env<Z>) -> Result<Z, EvalError> {
    match t {
        Term::Lit(c) => Z::from_big(c).ok_or(EvalError::Unrepresentable),
        Term::Sym(s) => env.get(s).cloned().ok_or_else(|| EvalError::Unbound(s.clone())),
        Term::Bin(op, a, b) => {
            let (a, b) = (eval_term(a, env)?, eval_term(b, env)?);
            arith(*op, &a, &b)
        }
    }
}

fn arith<Z: Int>(op: ArithOp, a: &Z, b: &Z) -> Result<Z, EvalError> {
    match op {
        ArithOp::Add => a.checked_add(b),
        ArithOp::Sub => a.checked_sub(b),
        ArithOp::Mul => a.checked_mul(b),
    }
    .ok_or(EvalError::Overflow)
}

pub fn eval<Z: Int>(phi: &Formula, env: &mut Env<Z>, bounds: &QuantBounds) -> Result<bool, EvalError> {
    match phi {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Atom(op, a, b) => Ok(op.holds(&eval_term(a, env)?, &eval_term(b, env)?)),
        Formula::Not(g) => Ok(!eval(g, env, bounds)?),
        Formula::And(gs) => {
            for g in gs {
                if !eval(g, env, bounds)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Or(gs) => {
            for g in gs {
                if eval(g, env, bounds)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Implies(a, b) => Ok(!eval(a, env, bounds)? || eval(b, env, bounds)?),
        Formula::Iff(a, b) => Ok(eval(a, env, bounds)? == eval(b, env, bounds)?),
        Formula::Exists(vs, body) => eval_quant(true, vs, body, env, bounds),
        Formula::Forall(vs, body) => eval_quant(false, vs, body, env, bounds),
    }
}

fn eval_quant<Z: Int>(
    exists: bool,
    vars: &[Symbol],
    body: &Formula,
    env: &mut Env<Z>,
    bounds: &QuantBounds,
) -> Result<bool, EvalError> {
    if vars.is_empty() {
        return eval(body, env, bounds);
    }
    for (i, v) in vars.iter().enumerate() {
        let rest = without(vars, i);
        match find_pin(exists, v, &rest, body, env)? {
            Some(Pin::Value(z)) => return with_binding(env, v, z, |env| eval_quant(exists, &rest, body, env, bounds)),
            Some(Pin::Unsatisfiable) => return Ok(!exists),
            None => {}
        }
    }
    let mut chosen = None;
    for (i, v) in vars.iter().enumerate() {
        let rest = without(vars, i);
        let (points, clean) = critical_points(v, &rest, body, env)?;
        if clean {
            chosen = Some((i, points));
            break;
        }
        if chosen.is_none() {
            chosen = Some((i, points));
        }
    }
    let (i, mut points) = chosen.expect("non-empty binder list");
    let v = &vars[i];
    let rest = without(vars, i);
    let (_, clean) = critical_points(v, &rest, body, env)?;
    if !clean {
        for k in -bounds.radius..=bounds.radius {
            points.insert(<Z as Int>::from_i64(k));
        }
    }
    for z in points {
        let r = with_binding(env, v, z, |env| eval_quant(exists, &rest, body, env, bounds))?;
        if r == exists {
            return Ok(exists);
        }
    }
    Ok(!exists)
}

fn without(vars: &[Symbol], i: usize) -> Vec<Symbol> {
    vars.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s.clone()).collect()
}

fn with_binding<Z: Int, R>(env: &mut Env<Z>, v: &Symbol, z: Z, f: impl FnOnce(&mut Env<Z>) -> R) -> R {
    let prev = env.insert(v.clone(), z);
    let r = f(env);
    env.restore(v, prev);
    r
}

enum Pin<Z> {
    Value(Z),
    Unsatisfiable,
}

/// Linear form `a*v + b` of `t`, or `None` when `t` is nonlinear in `v` or
/// mentions a symbol that is excluded or has no value.
fn linear<Z: Int>(t: &Term, v: &Symbol, excluded: &[Symbol], env: &Env<Z>) -> Result<Option<(Z, Z)>, EvalError> {
    Ok(match t {
        Term::Lit(c) => Some((Z::zero(), Z::from_big(c).ok_or(EvalError::Unrepresentable)?)),
        Term::Sym(s) if s == v => Some((Z::one(), Z::zero())),
        Term::Sym(s) if excluded.contains(s) => None,
        Term::Sym(s) => env.get(s).map(|z| (Z::zero(), z.clone())),
        Term::Bin(op, a, b) => {
            let (Some((a1, b1)), Some((a2, b2))) = (linear(a, v, excluded, env)?, linear(b, v, excluded, env)?) else {
                return Ok(None);
            };
            match op {
                ArithOp::Add | ArithOp::Sub => Some((arith(*op, &a1, &a2)?, arith(*op, &b1, &b2)?)),
                ArithOp::Mul if a1.is_zero() => Some((arith(*op, &b1, &a2)?, arith(*op, &b1, &b2)?)),
                ArithOp::Mul if a2.is_zero() => Some((arith(*op, &a1, &b2)?, arith(*op, &b1, &b2)?)),
                ArithOp::Mul => None,
            }
        }
    })
}

fn atom_linear<Z: Int>(
    l: &Term,
    r: &Term,
    v: &Symbol,
    excluded: &[Symbol],
    env: &Env<Z>,
) -> Result<Option<(Z, Z)>, EvalError> {
    let (Some((a1, b1)), Some((a2, b2))) = (linear(l, v, excluded, env)?, linear(r, v, excluded, env)?) else {
        return Ok(None);
    };
    Ok(Some((arith(ArithOp::Sub, &a1, &a2)?, arith(ArithOp::Sub, &b1, &b2)?)))
}

/// Equalities that constrain every witness (for `exists`) or every relevant
/// instance (for `forall`) of the bound variable.
fn pin_candidates(exists: bool, body: &Formula) -> Vec<(&Term, &Term)> {
    fn eqs(f: &Formula) -> Vec<(&Term, &Term)> {
        match f {
            Formula::Atom(crate::ast::CmpOp::Eq, l, r) => vec![(l, r)],
            _ => vec![],
        }
    }
    let mut out = Vec::new();
    if exists {
        for c in body.conjuncts() {
            out.extend(eqs(c));
        }
        return out;
    }
    match body {
        Formula::Implies(a, _) => {
            for c in a.conjuncts() {
                out.extend(eqs(c));
            }
        }
        Formula::Not(a) => {
            for c in a.conjuncts() {
                out.extend(eqs(c));
            }
        }
        Formula::Or(ds) => {
            for d in ds {
                match d {
                    Formula::Atom(crate::ast::CmpOp::Ne, l, r) => out.push((l, r)),
                    Formula::Not(inner) => out.extend(eqs(inner)),
                    _ => {}
                }
            }
        }
        _ => {}
    }
    out
}

fn find_pin<Z: Int>(
    exists: bool,
    v: &Symbol,
    rest: &[Symbol],
    body: &Formula,
    env: &Env<Z>,
) -> Result<Option<Pin<Z>>, EvalError> {
    for (l, r) in pin_candidates(exists, body) {
        if !l.mentions(v) && !r.mentions(v) {
            continue;
        }
        if let Some((a, b)) = atom_linear(l, r, v, rest, env)? {
            if a.is_zero() {
                continue;
            }
            let neg_b = Z::zero().checked_sub(&b).ok_or(EvalError::Overflow)?;
            let (q, rem) = neg_b.div_rem(&a);
            return Ok(Some(if rem.is_zero() { Pin::Value(q) } else { Pin::Unsatisfiable }));
        }
    }
    Ok(None)
}

/// Candidate values for `v` derived from the roots of every atom mentioning
/// it. The flag reports whether the set is exhaustive, i.e. every such atom
/// was linear in `v` with all other symbols concrete.
fn critical_points<Z: Int>(
    v: &Symbol,
    rest: &[Symbol],
    body: &Formula,
    env: &Env<Z>,
) -> Result<(BTreeSet<Z>, bool), EvalError> {
    let mut points = BTreeSet::new();
    let mut clean = true;
    let mut excluded: Vec<Symbol> = rest.to_vec();
    collect_points(v, body, &mut excluded, env, &mut points, &mut clean)?;
    if points.is_empty() {
        points.insert(Z::zero());
    } else {
        let lo = points.iter().next().cloned().expect("non-empty");
        let hi = points.iter().next_back().cloned().expect("non-empty");
        points.insert(lo.checked_sub(&Z::one()).ok_or(EvalError::Overflow)?);
        points.insert(hi.checked_add(&Z::one()).ok_or(EvalError::Overflow)?);
    }
    Ok((points, clean))
}

fn collect_points<Z: Int>(
    v: &Symbol,
    f: &Formula,
    excluded: &mut Vec<Symbol>,
    env: &Env<Z>,
    points: &mut BTreeSet<Z>,
    clean: &mut bool,
) -> Result<(), EvalError> {
    match f {
        Formula::True | Formula::False => Ok(()),
        Formula::Atom(_, l, r) => {
            if !l.mentions(v) && !r.mentions(v) {
                return Ok(());
            }
            match atom_linear(l, r, v, excluded, env)? {
                Some((a, b)) if !a.is_zero() => {
                    let neg_b = Z::zero().checked_sub(&b).ok_or(EvalError::Overflow)?;
                    let root = floor_div(&neg_b, &a).ok_or(EvalError::Overflow)?;
                    for d in -1..=2 {
                        let p = root.checked_add(&<Z as Int>::from_i64(d)).ok_or(EvalError::Overflow)?;
                        points.insert(p);
                    }
                }
                Some(_) => {}
                None => *clean = false,
            }
            Ok(())
        }
        Formula::Not(g) => collect_points(v, g, excluded, env, points, clean),
        Formula::And(gs) | Formula::Or(gs) => {
            for g in gs {
                collect_points(v, g, excluded, env, points, clean)?;
            }
            Ok(())
        }
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_points(v, a, excluded, env, points, clean)?;
            collect_points(v, b, excluded, env, points, clean)
        }
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            if vs.contains(v) {
                return Ok(());
            }
            let depth = excluded.len();
            excluded.extend(vs.iter().cloned());
            let r = collect_points(v, g, excluded, env, points, clean);
            excluded.truncate(depth);
            r
        }
    }
}

/// Equivalence-preserving restructuring that exposes equalities to the
/// quantifier strategies: nested binders of the same kind are merged and
/// existentials nested in conjunctions (or in a universal's antecedent) are
/// lifted into the enclosing binder when no capture can occur.
pub fn prepare(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False | Formula::Atom(..) => f.clone(),
        Formula::Not(g) => Formula::not(prepare(g)),
        Formula::And(gs) => Formula::And(flatten(gs.iter().map(prepare), true)),
        Formula::Or(gs) => Formula::Or(flatten(gs.iter().map(prepare), false)),
        Formula::Implies(a, b) => Formula::implies(prepare(a), prepare(b)),
        Formula::Iff(a, b) => Formula::iff(prepare(a), prepare(b)),
        Formula::Exists(vs, body) => {
            let mut vars = vs.clone();
            let mut body = prepare(body);
            loop {
                match body {
                    Formula::Exists(ws, inner) => {
                        vars.retain(|v| !ws.contains(v));
                        vars.extend(ws);
                        body = *inner;
                    }
                    Formula::And(cs) => {
                        let (lifted, cs) = lift_existentials(&vars, cs, &BTreeSet::new());
                        vars.extend(lifted);
                        body = Formula::And(cs);
                        break;
                    }
                    other => {
                        body = other;
                        break;
                    }
                }
            }
            Formula::Exists(vars, Box::new(body))
        }
        Formula::Forall(vs, body) => {
            let mut vars = vs.clone();
            let mut body = prepare(body);
            loop {
                match body {
                    Formula::Forall(ws, inner) => {
                        vars.retain(|v| !ws.contains(v));
                        vars.extend(ws);
                        body = *inner;
                    }
                    Formula::Implies(a, b) => {
                        let conclusion_free = b.free_symbols();
                        let cs = match *a {
                            Formula::And(cs) => cs,
                            other => vec![other],
                        };
                        let (lifted, cs) = lift_existentials(&vars, cs, &conclusion_free);
                        vars.extend(lifted);
                        body = Formula::implies(Formula::And(cs), *b);
                        break;
                    }
                    other => {
                        body = other;
                        break;
                    }
                }
            }
            Formula::Forall(vars, Box::new(body))
        }
    }
}

fn flatten(items: impl Iterator<Item = Formula>, conj: bool) -> Vec<Formula> {
    let mut out = Vec::new();
    for item in items {
        match item {
            Formula::And(inner) if conj => out.extend(inner),
            Formula::Or(inner) if !conj => out.extend(inner),
            other => out.push(other),
        }
    }
    out
}

fn lift_existentials(
    binder: &[Symbol],
    conjuncts: Vec<Formula>,
    also_free: &BTreeSet<Symbol>,
) -> (Vec<Symbol>, Vec<Formula>) {
    let mut lifted: Vec<Symbol> = Vec::new();
    let mut out: Vec<Formula> = conjuncts;
    loop {
        let mut changed = false;
        for i in 0..out.len() {
            let Formula::Exists(ws, _) = &out[i] else { continue };
            let others_free: BTreeSet<Symbol> = out
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, g)| g.free_symbols())
                .collect();
            let clash = ws.iter().any(|w| {
                binder.contains(w) || lifted.contains(w) || others_free.contains(w) || also_free.contains(w)
            });
            if clash {
                continue;
            }
            let Formula::Exists(ws, inner) = out.remove(i) else { unreachable!() };
            lifted.extend(ws);
            match *inner {
                Formula::And(cs) => out.extend(cs),
                other => out.push(other),
            }
            changed = true;
            break;
        }
        if !changed {
            return (lifted, out);
        }
    }
}
