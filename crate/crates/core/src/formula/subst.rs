use std::collections::{BTreeMap, BTreeSet};

use super::{Formula, NameSupply, Symbol, Term};

pub(super) fn substitute_term(t: &Term, map: &BTreeMap<Symbol, Term>) -> Term {
    match t {
        Term::Lit(_) => t.clone(),
        Term::Sym(s) => map.get(s).cloned().unwrap_or_else(|| t.clone()),
        Term::Bin(op, a, b) => Term::bin(*op, substitute_term(a, map), substitute_term(b, map)),
    }
}

pub(super) fn substitute(f: &Formula, map: &BTreeMap<Symbol, Term>, names: &NameSupply) -> Formula {
    if map.is_empty() {
        return f.clone();
    }
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(op, a, b) => Formula::Atom(*op, substitute_term(a, map), substitute_term(b, map)),
        Formula::Not(g) => Formula::not(substitute(g, map, names)),
        Formula::And(gs) => Formula::And(gs.iter().map(|g| substitute(g, map, names)).collect()),
        Formula::Or(gs) => Formula::Or(gs.iter().map(|g| substitute(g, map, names)).collect()),
        Formula::Implies(a, b) => Formula::implies(substitute(a, map, names), substitute(b, map, names)),
        Formula::Iff(a, b) => Formula::iff(substitute(a, map, names), substitute(b, map, names)),
        Formula::Exists(vs, body) => {
            let (vs, body) = under_binder(vs, body, map, names);
            Formula::Exists(vs, Box::new(body))
        }
        Formula::Forall(vs, body) => {
            let (vs, body) = under_binder(vs, body, map, names);
            Formula::Forall(vs, Box::new(body))
        }
    }
}

fn under_binder(
    vs: &[Symbol],
    body: &Formula,
    map: &BTreeMap<Symbol, Term>,
    names: &NameSupply,
) -> (Vec<Symbol>, Formula) {
    let free = body.free_symbols();
    let mut inner: BTreeMap<Symbol, Term> = map
        .iter()
        .filter(|(k, _)| !vs.contains(k) && free.contains(k))
        .map(|(k, t)| (k.clone(), t.clone()))
        .collect();
    if inner.is_empty() {
        return (vs.to_vec(), body.clone());
    }
    let incoming: BTreeSet<Symbol> = inner.values().flat_map(Term::symbols).collect();
    let mut renamed = Vec::with_capacity(vs.len());
    for v in vs {
        if incoming.contains(v) {
            let fresh = names.rename_binder(v);
            inner.insert(v.clone(), Term::Sym(fresh.clone()));
            renamed.push(fresh);
        } else {
            renamed.push(v.clone());
        }
    }
    (renamed, substitute(body, &inner, names))
}
