//! Brute-force checks of tuple validity and parametric postconditions.
//!
//! Everything here is relative to bounded semantics: initial values and
//! universal choices range over `[-d, d]`, existential choices over a
//! (usually wider) witness range, and each path has a step bound. A cut path
//! never yields `Valid`/`Holds`; it degrades the verdict to `Unknown`.

use std::collections::BTreeSet;

use itertools::Itertools;

use crate::ast::{BoolExpr, Stmt, VarName};
use crate::feht::{Feht, QuantifiedProgram, Quantifier};
use crate::formula::{eval, prepare, Env, Formula, Param, QuantBounds, Symbol};
use crate::interp::{exec_all, live_in, ExecError, State};
use crate::scalar::Int;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    /// Initial values and universal choices range over `[-domain, domain]`.
    pub domain: i64,
    /// Existential choices range over `[-witness_domain, witness_domain]`.
    pub witness_domain: i64,
    pub steps: usize,
    /// Range for quantified variables that evaluation cannot pin exactly.
    pub quant_radius: i64,
}

impl OracleConfig {
    pub fn new(domain: i64, steps: usize) -> Self {
        OracleConfig { domain, witness_domain: 2 * domain, steps, quant_radius: (4 * domain).max(8) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample<Z> {
    pub initial: State<Z>,
    pub universal_finals: State<Z>,
    pub params: Vec<(Param, Z)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleVerdict<Z> {
    Valid,
    Invalid(Counterexample<Z>),
    Unknown(String),
}

impl<Z> OracleVerdict<Z> {
    pub fn is_valid(&self) -> bool {
        matches!(self, OracleVerdict::Valid)
    }

    pub fn is_invalid(&self) -> bool {
        matches!(self, OracleVerdict::Invalid(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            OracleVerdict::Valid => "valid",
            OracleVerdict::Invalid(_) => "invalid",
            OracleVerdict::Unknown(_) => "unknown",
        }
    }
}

/// Outcome of the parametric-postcondition check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamCheck<Z> {
    Holds,
    Fails(Counterexample<Z>),
    Unknown(String),
}

struct CopyRuns<Z> {
    quantifier: Quantifier,
    /// Initial states of this copy paired with their reachable finals.
    runs: Vec<(State<Z>, Vec<State<Z>>)>,
    cut: Vec<bool>,
}

fn copy_vars(copy: u32, program: &Stmt, assertions: &[&BTreeSet<VarName>]) -> BTreeSet<VarName> {
    let mut vars = program.vars();
    for set in assertions {
        vars.extend(set.iter().filter(|v| v.copy() == Some(copy)).cloned());
    }
    vars
}

/// Initial states of one copy. Variables that are neither constrained by the
/// precondition nor live on entry cannot influence the outcome and are fixed
/// to zero.
fn initial_states<Z: Int>(vars: &BTreeSet<VarName>, enumerated: &BTreeSet<VarName>, d: i64) -> Vec<State<Z>> {
    let free: Vec<&VarName> = vars.iter().filter(|v| enumerated.contains(*v)).collect();
    let base: State<Z> = vars.iter().map(|v| (v.clone(), Z::zero())).collect();
    if free.is_empty() {
        return vec![base];
    }
    free.iter()
        .map(|_| -d..=d)
        .multi_cartesian_product()
        .map(|vals| {
            let mut s = base.clone();
            for (v, z) in free.iter().zip(vals) {
                s.set((*v).clone(), <Z as Int>::from_i64(z));
            }
            s
        })
        .collect()
}

fn formula_vars(f: &Formula) -> BTreeSet<VarName> {
    f.free_vars()
        .into_iter()
        .filter_map(|s| match s {
            Symbol::Var(v) => Some(v),
            _ => None,
        })
        .collect()
}

fn run_copies<Z: Int>(
    programs: &[&QuantifiedProgram],
    pre_vars: &BTreeSet<VarName>,
    post_vars: &BTreeSet<VarName>,
    cfg: &OracleConfig,
) -> Result<Vec<CopyRuns<Z>>, ExecError> {
    let mut out = Vec::new();
    for p in programs {
        let vars = copy_vars(p.copy, &p.body, &[pre_vars, post_vars]);
        let live_out: BTreeSet<VarName> = post_vars.iter().filter(|v| v.copy() == Some(p.copy)).cloned().collect();
        let mut enumerated = live_in(&p.body, &live_out);
        enumerated.extend(pre_vars.iter().filter(|v| v.copy() == Some(p.copy)).cloned());
        let radius = match p.quantifier {
            Quantifier::Forall => cfg.domain,
            Quantifier::Exists => cfg.witness_domain,
        };
        let mut runs = Vec::new();
        let mut cut = Vec::new();
        for sigma in initial_states::<Z>(&vars, &enumerated, cfg.domain) {
            let r = exec_all(&p.body, &sigma, radius, cfg.steps)?;
            cut.push(r.bound_exceeded);
            runs.push((sigma, r.finals.into_iter().collect()));
        }
        out.push(CopyRuns { quantifier: p.quantifier, runs, cut });
    }
    Ok(out)
}

fn union_all<Z: Int>(states: &[&State<Z>]) -> State<Z> {
    states.iter().fold(State::new(), |acc, s| acc.union(s))
}

/// Bounded check of the tuple's validity: from every initial state satisfying
/// the precondition, every combination of universal final states must admit
/// existential final states satisfying the postcondition.
pub fn feht_check_bounded<Z: Int>(f: &Feht, d: i64, steps: usize) -> OracleVerdict<Z> {
    feht_check_bounded_with(f, &OracleConfig::new(d, steps))
}

pub fn feht_check_bounded_with<Z: Int>(f: &Feht, cfg: &OracleConfig) -> OracleVerdict<Z> {
    let pre = f.pre();
    let post = f.post();
    let programs: Vec<&QuantifiedProgram> = f.programs().collect();
    let runs = match run_copies::<Z>(&programs, &pre.vars(), &post.vars(), cfg) {
        Ok(r) => r,
        Err(e) => return OracleVerdict::Unknown(e.to_string()),
    };
    check_tuples(&runs, pre, |univ, exist_finals| {
        for ex in exist_finals {
            let mut all: Vec<&State<Z>> = univ.to_vec();
            all.extend(ex.iter().copied());
            if union_all(&all).eval_bool(post)? {
                return Ok(None);
            }
        }
        Ok(Some(Vec::new()))
    })
}

/// Shared driver: enumerates initial tuples satisfying `pre` and universal
/// final combinations, and asks `judge` whether the existential side can
/// answer. `judge` returns the failing parameter evaluation, if any.
fn check_tuples<Z: Int, F>(runs: &[CopyRuns<Z>], pre: &BoolExpr, mut judge: F) -> OracleVerdict<Z>
where
    F: FnMut(&[&State<Z>], &[Vec<&State<Z>>]) -> Result<Option<Vec<(Param, Z)>>, ExecError>,
{
    let mut unknown: Option<String> = None;
    let indices: Vec<std::ops::Range<usize>> = runs.iter().map(|r| 0..r.runs.len()).collect();
    for pick in indices.into_iter().multi_cartesian_product() {
        let initial = union_all(&runs.iter().zip(&pick).map(|(r, &i)| &r.runs[i].0).collect::<Vec<_>>());
        match initial.eval_bool(pre) {
            Ok(true) => {}
            Ok(false) => continue,
            Err(e) => return OracleVerdict::Unknown(e.to_string()),
        }
        let cut_univ = runs.iter().zip(&pick).any(|(r, &i)| r.quantifier == Quantifier::Forall && r.cut[i]);
        let cut_exist = runs.iter().zip(&pick).any(|(r, &i)| r.quantifier == Quantifier::Exists && r.cut[i]);
        if cut_univ {
            unknown.get_or_insert_with(|| format!("universal execution from {initial} hit the step bound"));
        }
        let univ_lists: Vec<&Vec<State<Z>>> = runs
            .iter()
            .zip(&pick)
            .filter(|(r, _)| r.quantifier == Quantifier::Forall)
            .map(|(r, &i)| &r.runs[i].1)
            .collect();
        let exist_lists: Vec<&Vec<State<Z>>> = runs
            .iter()
            .zip(&pick)
            .filter(|(r, _)| r.quantifier == Quantifier::Exists)
            .map(|(r, &i)| &r.runs[i].1)
            .collect();
        let exist = product(&exist_lists);
        for univ in product(&univ_lists) {
            match judge(&univ, &exist) {
                Ok(None) => {}
                Ok(Some(params)) => {
                    let universal_finals = union_all(&univ);
                    if cut_exist {
                        unknown.get_or_insert_with(|| {
                            format!("no witness from {initial}, but an existential execution hit the step bound")
                        });
                        continue;
                    }
                    return OracleVerdict::Invalid(Counterexample { initial, universal_finals, params });
                }
                Err(e) => return OracleVerdict::Unknown(e.to_string()),
            }
        }
    }
    match unknown {
        Some(reason) => OracleVerdict::Unknown(reason),
        None => OracleVerdict::Valid,
    }
}

/// Cartesian product of `lists`; zero factors give one empty tuple.
fn product<'a, T>(lists: &[&'a Vec<T>]) -> Vec<Vec<&'a T>> {
    let mut out: Vec<Vec<&'a T>> = vec![Vec::new()];
    for list in lists {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                list.iter().map(move |item| {
                    let mut next = prefix.clone();
                    next.push(item);
                    next
                })
            })
            .collect();
    }
    out
}

/// Checks that `(xi, c)` is a parametric postcondition for `phi` and
/// `programs`, in the reachable-witness reading: for every initial tuple
/// satisfying `phi`, every combination of universal final states and every
/// parameter evaluation satisfying `c`, some reachable combination of
/// existential final states satisfies `xi` under that evaluation.
///
/// Parameter evaluations range over `[-domain, domain]`.
pub fn check_parametric_postcondition<Z: Int>(
    phi: &BoolExpr,
    programs: &[QuantifiedProgram],
    xi: &Formula,
    c: &Formula,
    cfg: &OracleConfig,
) -> ParamCheck<Z> {
    let bounds = QuantBounds { radius: cfg.quant_radius };
    let xi = prepare(xi);
    let c = prepare(c);
    let params: Vec<Param> = xi.free_params().into_iter().chain(c.free_params()).collect::<BTreeSet<_>>().into_iter().collect();

    // Parameter evaluations satisfying the restriction, in lexicographic order.
    let mut kappas: Vec<Vec<(Param, Z)>> = Vec::new();
    let grid: Box<dyn Iterator<Item = Vec<i64>>> = if params.is_empty() {
        Box::new(std::iter::once(Vec::new()))
    } else {
        Box::new(params.iter().map(|_| -cfg.domain..=cfg.domain).multi_cartesian_product())
    };
    for vals in grid {
        let kappa: Vec<(Param, Z)> = params.iter().copied().zip(vals.into_iter().map(<Z as Int>::from_i64)).collect();
        let mut env: Env<Z> = kappa.iter().map(|(p, z)| (Symbol::Param(*p), z.clone())).collect();
        match eval(&c, &mut env, &bounds) {
            Ok(true) => kappas.push(kappa),
            Ok(false) => {}
            Err(e) => return ParamCheck::Unknown(format!("restriction: {e}")),
        }
    }
    if kappas.is_empty() {
        return ParamCheck::Holds;
    }

    let refs: Vec<&QuantifiedProgram> = programs.iter().collect();
    let xi_vars = formula_vars(&xi);
    let runs = match run_copies::<Z>(&refs, &phi.vars(), &xi_vars, cfg) {
        Ok(r) => r,
        Err(e) => return ParamCheck::Unknown(e.to_string()),
    };
    let mut eval_error = None;
    let verdict = check_tuples(&runs, phi, |univ, exist| {
        let univ_state = union_all(univ);
        'kappa: for kappa in &kappas {
            for ex in exist {
                let mut env = univ_state.to_env();
                for s in ex {
                    s.extend_into(&mut env);
                }
                for (p, z) in kappa {
                    env.insert(Symbol::Param(*p), z.clone());
                }
                match eval(&xi, &mut env, &bounds) {
                    Ok(true) => continue 'kappa,
                    Ok(false) => {}
                    Err(e) => {
                        eval_error.get_or_insert(e.to_string());
                        return Ok(None);
                    }
                }
            }
            return Ok(Some(kappa.clone()));
        }
        Ok(None)
    });
    if let Some(e) = eval_error {
        return ParamCheck::Unknown(format!("function-formula: {e}"));
    }
    match verdict {
        OracleVerdict::Valid => ParamCheck::Holds,
        OracleVerdict::Invalid(w) => ParamCheck::Fails(w),
        OracleVerdict::Unknown(r) => ParamCheck::Unknown(r),
    }
}

/// Bounded under-approximate triple: from every state satisfying `pre`, some
/// execution of `p` ends in a state satisfying `post`.
pub fn uht_holds<Z: Int>(pre: &BoolExpr, p: &Stmt, post: &BoolExpr, cfg: &OracleConfig) -> OracleVerdict<Z> {
    let mut vars = p.vars();
    vars.extend(pre.vars());
    vars.extend(post.vars());
    let mut enumerated = live_in(p, &post.vars());
    enumerated.extend(pre.vars());
    let mut unknown = None;
    for sigma in initial_states::<Z>(&vars, &enumerated, cfg.domain) {
        match sigma.eval_bool(pre) {
            Ok(true) => {}
            Ok(false) => continue,
            Err(e) => return OracleVerdict::Unknown(e.to_string()),
        }
        let r = match exec_all(p, &sigma, cfg.witness_domain, cfg.steps) {
            Ok(r) => r,
            Err(e) => return OracleVerdict::Unknown(e.to_string()),
        };
        let mut found = false;
        for fin in &r.finals {
            match fin.eval_bool(post) {
                Ok(true) => {
                    found = true;
                    break;
                }
                Ok(false) => {}
                Err(e) => return OracleVerdict::Unknown(e.to_string()),
            }
        }
        if !found {
            if r.bound_exceeded {
                unknown.get_or_insert_with(|| format!("execution from {sigma} hit the step bound"));
                continue;
            }
            return OracleVerdict::Invalid(Counterexample { initial: sigma, universal_finals: State::new(), params: vec![] });
        }
    }
    match unknown {
        Some(r) => OracleVerdict::Unknown(r),
        None => OracleVerdict::Valid,
    }
}
