//! Equivalence-preserving cleanup of formulas.
//!
//! Folds constants, flattens connectives, drops unused binders and eliminates
//! bound variables that are pinned by an equality (`exists v. v == t && p`
//! becomes `p[t/v]`). The result is logically equivalent to the input.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::{Formula, NameSupply, Symbol, Term};
use crate::ast::{ArithOp, CmpOp};

pub fn simplify(f: &Formula, names: &NameSupply) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(op, a, b) => atom(*op, fold(a), fold(b)),
        Formula::Not(g) => negate(simplify(g, names)),
        Formula::And(gs) => conj(gs.iter().map(|g| simplify(g, names))),
        Formula::Or(gs) => disj(gs.iter().map(|g| simplify(g, names))),
        Formula::Implies(a, b) => implies(simplify(a, names), simplify(b, names)),
        Formula::Iff(a, b) => match (simplify(a, names), simplify(b, names)) {
            (Formula::True, g) | (g, Formula::True) => g,
            (Formula::False, g) | (g, Formula::False) => negate(g),
            (a, b) if a == b => Formula::True,
            (a, b) => Formula::iff(a, b),
        },
        Formula::Exists(vs, body) => exists(vs.clone(), simplify(body, names), names),
        Formula::Forall(vs, body) => forall(vs.clone(), simplify(body, names), names),
    }
}

fn ground_value(t: &Term) -> Option<BigInt> {
    match t {
        Term::Lit(c) => Some(c.clone()),
        Term::Sym(_) => None,
        Term::Bin(op, a, b) => {
            let (a, b) = (ground_value(a)?, ground_value(b)?);
            Some(match op {
                ArithOp::Add => a + b,
                ArithOp::Sub => a - b,
                ArithOp::Mul => a * b,
            })
        }
    }
}

/// Constant folding plus the neutral-element identities.
fn fold(t: &Term) -> Term {
    match t {
        Term::Lit(_) | Term::Sym(_) => t.clone(),
        Term::Bin(op, a, b) => {
            let (a, b) = (fold(a), fold(b));
            let lit = |t: &Term| match t {
                Term::Lit(c) => Some(c.clone()),
                _ => None,
            };
            match (op, lit(&a), lit(&b)) {
                (_, Some(_), Some(_)) => Term::Lit(ground_value(&Term::bin(*op, a, b)).expect("ground")),
                (ArithOp::Add, Some(z), _) if z.is_zero() => b,
                (ArithOp::Add | ArithOp::Sub, _, Some(z)) if z.is_zero() => a,
                (ArithOp::Mul, Some(z), _) | (ArithOp::Mul, _, Some(z)) if z.is_zero() => Term::Lit(BigInt::zero()),
                (ArithOp::Mul, Some(o), _) if o.is_one() => b,
                (ArithOp::Mul, _, Some(o)) if o.is_one() => a,
                // x - (-c) and x + (-c) read better with the sign flipped.
                (ArithOp::Sub, _, Some(c)) if c.is_negative() => Term::add(a, Term::Lit(-c)),
                (ArithOp::Add, _, Some(c)) if c.is_negative() => Term::sub(a, Term::Lit(-c)),
                _ => Term::bin(*op, a, b),
            }
        }
    }
}

fn atom(op: CmpOp, a: Term, b: Term) -> Formula {
    if let (Some(x), Some(y)) = (ground_value(&a), ground_value(&b)) {
        return if op.holds(&x, &y) { Formula::True } else { Formula::False };
    }
    if a == b {
        return match op {
            CmpOp::Eq | CmpOp::Le | CmpOp::Ge => Formula::True,
            CmpOp::Ne | CmpOp::Lt | CmpOp::Gt => Formula::False,
        };
    }
    Formula::Atom(op, a, b)
}

fn negate(f: Formula) -> Formula {
    match f {
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        Formula::Not(g) => *g,
        Formula::Atom(op, a, b) => Formula::Atom(op.negate(), a, b),
        g => Formula::not(g),
    }
}

fn conj(items: impl IntoIterator<Item = Formula>) -> Formula {
    let mut out: Vec<Formula> = Vec::new();
    for item in items {
        let parts = match item {
            Formula::And(inner) => inner,
            other => vec![other],
        };
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                p if !out.contains(&p) => out.push(p),
                _ => {}
            }
        }
    }
    match out.len() {
        0 => Formula::True,
        1 => out.pop().expect("one item"),
        _ => Formula::And(out),
    }
}

fn disj(items: impl IntoIterator<Item = Formula>) -> Formula {
    let mut out: Vec<Formula> = Vec::new();
    for item in items {
        let parts = match item {
            Formula::Or(inner) => inner,
            other => vec![other],
        };
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                p if !out.contains(&p) => out.push(p),
                _ => {}
            }
        }
    }
    match out.len() {
        0 => Formula::False,
        1 => out.pop().expect("one item"),
        _ => Formula::Or(out),
    }
}

fn implies(a: Formula, b: Formula) -> Formula {
    match (a, b) {
        (Formula::True, b) => b,
        (Formula::False, _) | (_, Formula::True) => Formula::True,
        (a, Formula::False) => negate(a),
        (a, b) if a == b => Formula::True,
        (a, b) => Formula::implies(a, b),
    }
}

/// Splits `t` into `coef * v + rest` when `t` is linear in `v` with an
/// integer coefficient.
fn split(t: &Term, v: &Symbol) -> Option<(BigInt, Term)> {
    match t {
        Term::Lit(_) => Some((BigInt::zero(), t.clone())),
        Term::Sym(s) if s == v => Some((BigInt::one(), Term::lit(0))),
        Term::Sym(_) => Some((BigInt::zero(), t.clone())),
        Term::Bin(op, a, b) => {
            let (ca, ra) = split(a, v)?;
            let (cb, rb) = split(b, v)?;
            match op {
                ArithOp::Add => Some((ca + cb, Term::add(ra, rb))),
                ArithOp::Sub => Some((ca - cb, Term::sub(ra, rb))),
                ArithOp::Mul => {
                    if ca.is_zero() && cb.is_zero() {
                        Some((BigInt::zero(), Term::mul(ra, rb)))
                    } else if ca.is_zero() {
                        let k = ground_value(a)?;
                        Some((k * cb, Term::mul(ra, rb)))
                    } else if cb.is_zero() {
                        let k = ground_value(b)?;
                        Some((ca * k, Term::mul(ra, rb)))
                    } else {
                        None
                    }
                }
            }
        }
    }
}

/// Solves `l == r` for `v` when `v` has coefficient plus or minus one.
fn solve_for(v: &Symbol, l: &Term, r: &Term) -> Option<Term> {
    let (cl, rl) = split(l, v)?;
    let (cr, rr) = split(r, v)?;
    let c = cl - cr;
    // c*v + (rl - rr) == 0
    let t = if c.is_one() {
        Term::sub(rr, rl)
    } else if (-&c).is_one() {
        Term::sub(rl, rr)
    } else {
        return None;
    };
    let t = fold(&t);
    if t.mentions(v) {
        return None;
    }
    Some(t)
}

/// Finds a conjunct among `items` pinning one of `vs`; returns the variable,
/// its defining term and the index of the conjunct.
fn find_pin(vs: &[Symbol], items: &[&Formula]) -> Option<(usize, Term, usize)> {
    for (vi, v) in vs.iter().enumerate() {
        for (ci, c) in items.iter().enumerate() {
            if let Formula::Atom(CmpOp::Eq, l, r) = c {
                if !l.mentions(v) && !r.mentions(v) {
                    continue;
                }
                if let Some(t) = solve_for(v, l, r) {
                    // Defining terms must not mention other variables of the
                    // same binder block; they would be captured on substitution.
                    if vs.iter().any(|w| w != v && t.mentions(w)) {
                        continue;
                    }
                    return Some((vi, t, ci));
                }
            }
        }
    }
    None
}

fn exists(mut vs: Vec<Symbol>, body: Formula, names: &NameSupply) -> Formula {
    let body = match body {
        Formula::Exists(ws, inner) => {
            vs.retain(|v| !ws.contains(v));
            vs.extend(ws);
            *inner
        }
        b => b,
    };
    let free = body.free_symbols();
    vs.retain(|v| free.contains(v));
    let mut seen = BTreeSet::new();
    vs.retain(|v| seen.insert(v.clone()));
    if vs.is_empty() {
        return body;
    }
    if let Formula::Or(ds) = body {
        return disj(ds.into_iter().map(|d| exists(vs.clone(), d, names)));
    }
    let conjuncts: Vec<&Formula> = body.conjuncts();
    if let Some((vi, t, ci)) = find_pin(&vs, &conjuncts) {
        let v = vs.remove(vi);
        let rest = conj(conjuncts.iter().enumerate().filter(|(i, _)| *i != ci).map(|(_, c)| (*c).clone()));
        let rest = simplify(&rest.substitute(&v, &t, names), names);
        return exists(vs, rest, names);
    }
    // Conjuncts that do not mention the bound variables move outside.
    let (inside, outside): (Vec<Formula>, Vec<Formula>) = conjuncts
        .into_iter()
        .cloned()
        .partition(|c| {
            let fs = c.free_symbols();
            vs.iter().any(|v| fs.contains(v))
        });
    if outside.is_empty() {
        return Formula::Exists(vs, Box::new(body));
    }
    conj(outside.into_iter().chain([Formula::Exists(vs, Box::new(conj(inside)))]))
}

fn forall(mut vs: Vec<Symbol>, body: Formula, names: &NameSupply) -> Formula {
    let body = match body {
        Formula::Forall(ws, inner) => {
            vs.retain(|v| !ws.contains(v));
            vs.extend(ws);
            *inner
        }
        b => b,
    };
    let free = body.free_symbols();
    vs.retain(|v| free.contains(v));
    let mut seen = BTreeSet::new();
    vs.retain(|v| seen.insert(v.clone()));
    if vs.is_empty() {
        return body;
    }
    if let Formula::And(cs) = body {
        return conj(cs.into_iter().map(|c| forall(vs.clone(), c, names)));
    }
    if let Formula::Implies(a, b) = &body {
        let antecedent: Vec<&Formula> = a.conjuncts();
        if let Some((vi, t, ci)) = find_pin(&vs, &antecedent) {
            let v = vs.remove(vi);
            let rest = conj(antecedent.iter().enumerate().filter(|(i, _)| *i != ci).map(|(_, c)| (*c).clone()));
            let g = Formula::implies(rest, (**b).clone());
            let g = simplify(&g.substitute(&v, &t, names), names);
            return forall(vs, g, names);
        }
    }
    Formula::Forall(vs, Box::new(body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::VarName;

    fn s(n: &str) -> Symbol {
        Symbol::Var(VarName::new(n))
    }

    fn t(n: &str) -> Term {
        Term::sym(&s(n))
    }

    #[test]
    fn folds_ground_atoms_and_connectives() {
        let names = NameSupply::new();
        let f = Formula::and([
            Formula::atom(CmpOp::Lt, Term::lit(1), Term::add(Term::lit(1), Term::lit(1))),
            Formula::atom(CmpOp::Ge, t("x"), Term::lit(0)),
        ]);
        assert_eq!(simplify(&f, &names).to_string(), "x >= 0");
        let g = Formula::or([Formula::False, Formula::not(Formula::atom(CmpOp::Gt, t("x"), Term::lit(0)))]);
        assert_eq!(simplify(&g, &names).to_string(), "x <= 0");
    }

    #[test]
    fn one_point_elimination_of_assignment_shadow() {
        // exists x'. x' >= 0 && x == x' + 1   ~>   x - 1 >= 0
        let names = NameSupply::new();
        let xp = names.fresh_shadow(&VarName::new("x"));
        let f = Formula::exists(
            [xp.clone()],
            Formula::and([
                Formula::atom(CmpOp::Ge, Term::sym(&xp), Term::lit(0)),
                Formula::eq(t("x"), Term::add(Term::sym(&xp), Term::lit(1))),
            ]),
        );
        let g = simplify(&f, &names);
        assert!(!g.has_quantifiers(), "{g}");
        assert_eq!(g.to_string(), "(x - 1) >= 0");
    }

    #[test]
    fn unused_binders_dropped() {
        let names = NameSupply::new();
        let f = Formula::forall([s("y")], Formula::atom(CmpOp::Ge, t("x"), Term::lit(0)));
        assert_eq!(simplify(&f, &names), Formula::atom(CmpOp::Ge, t("x"), Term::lit(0)));
    }

    #[test]
    fn universal_antecedent_pin() {
        // forall x. x == 3 ==> x >= mu   ~>   3 >= mu
        let names = NameSupply::new();
        let mu = Term::param(super::super::Param::from_id(1));
        let f = Formula::forall(
            [s("x")],
            Formula::implies(Formula::eq(t("x"), Term::lit(3)), Formula::atom(CmpOp::Ge, t("x"), mu)),
        );
        assert_eq!(simplify(&f, &names).to_string(), "3 >= mu_1");
    }

    #[test]
    fn nonunit_coefficient_is_not_solved() {
        let names = NameSupply::new();
        let f = Formula::exists([s("w")], Formula::eq(t("x"), Term::mul(Term::lit(2), t("w"))));
        assert_eq!(simplify(&f, &names), f);
    }
}
