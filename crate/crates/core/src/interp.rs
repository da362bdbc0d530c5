//! Big-step execution with bounded nondeterminism.
//!
//! `x := *` draws from `[-d, d]` and every path is cut after a fixed number of
//! statement steps. Cut paths are reported instead of dropped silently.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::{ArithExpr, ArithOp, BoolExpr, Stmt, VarName};
use crate::formula::{Env, Symbol};
use crate::scalar::Int;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("variable {0} has no value")]
    Unbound(VarName),
    #[error("integer overflow during execution")]
    Overflow,
    #[error("literal does not fit the execution scalar")]
    Unrepresentable,
}

/// A finite map from variables to integers. Relational states are plain
/// unions since copies use disjoint variable names.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State<Z>(BTreeMap<VarName, Z>);

impl<Z: Int> State<Z> {
    pub fn new() -> Self {
        State(BTreeMap::new())
    }

    pub fn get(&self, v: &VarName) -> Option<&Z> {
        self.0.get(v)
    }

    pub fn set(&mut self, v: VarName, z: Z) {
        self.0.insert(v, z);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarName, &Z)> {
        self.0.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &VarName> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The combined state of disjoint copies.
    pub fn union(&self, other: &State<Z>) -> State<Z> {
        let mut out = self.clone();
        out.0.extend(other.0.iter().map(|(k, v)| (k.clone(), v.clone())));
        out
    }

    pub fn extend_into(&self, env: &mut Env<Z>) {
        for (k, v) in &self.0 {
            env.insert(Symbol::Var(k.clone()), v.clone());
        }
    }

    pub fn to_env(&self) -> Env<Z> {
        let mut env = Env::new();
        self.extend_into(&mut env);
        env
    }

    pub fn eval_arith(&self, e: &ArithExpr) -> Result<Z, ExecError> {
        match e {
            ArithExpr::Lit(c) => Z::from_big(c).ok_or(ExecError::Unrepresentable),
            ArithExpr::Var(v) => self.get(v).cloned().ok_or_else(|| ExecError::Unbound(v.clone())),
            ArithExpr::Bin(op, a, b) => {
                let (a, b) = (self.eval_arith(a)?, self.eval_arith(b)?);
                match op {
                    ArithOp::Add => a.checked_add(&b),
                    ArithOp::Sub => a.checked_sub(&b),
                    ArithOp::Mul => a.checked_mul(&b),
                }
                .ok_or(ExecError::Overflow)
            }
        }
    }

    pub fn eval_bool(&self, b: &BoolExpr) -> Result<bool, ExecError> {
        Ok(match b {
            BoolExpr::True => true,
            BoolExpr::False => false,
            BoolExpr::Cmp(op, l, r) => op.holds(&self.eval_arith(l)?, &self.eval_arith(r)?),
            BoolExpr::Not(g) => !self.eval_bool(g)?,
            BoolExpr::And(a, c) => self.eval_bool(a)? && self.eval_bool(c)?,
            BoolExpr::Or(a, c) => self.eval_bool(a)? || self.eval_bool(c)?,
        })
    }
}

impl<Z: Int> Default for State<Z> {
    fn default() -> Self {
        Self::new()
    }
}

impl<Z: Int> FromIterator<(VarName, Z)> for State<Z> {
    fn from_iter<I: IntoIterator<Item = (VarName, Z)>>(iter: I) -> Self {
        State(iter.into_iter().collect())
    }
}

impl<Z: fmt::Display> fmt::Display for State<Z> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        f.write_str("}")
    }
}

impl<Z: fmt::Debug> fmt::Debug for State<Z> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.0.iter().map(|(k, v)| (k.to_string(), v))).finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecResult<Z> {
    pub finals: BTreeSet<State<Z>>,
    /// Some path was cut off by the step bound.
    pub bound_exceeded: bool,
}

/// All final states reachable from `sigma` when havocs draw from
/// `[-radius, radius]` and each path runs at most `step_bound` statements.
pub fn exec_all<Z: Int>(p: &Stmt, sigma: &State<Z>, radius: i64, step_bound: usize) -> Result<ExecResult<Z>, ExecError> {
    let mut result = ExecResult { finals: BTreeSet::new(), bound_exceeded: false };
    let mut work: Vec<(Vec<&Stmt>, State<Z>, usize)> = vec![(vec![p], sigma.clone(), 0)];
    while let Some((mut stack, mut state, mut steps)) = work.pop() {
        loop {
            let Some(s) = stack.pop() else {
                result.finals.insert(state);
                break;
            };
            if let Stmt::Seq(a, b) = s {
                stack.push(b);
                stack.push(a);
                continue;
            }
            if steps >= step_bound {
                result.bound_exceeded = true;
                break;
            }
            steps += 1;
            match s {
                Stmt::Skip => {}
                Stmt::Assign(x, e) => {
                    let z = state.eval_arith(e)?;
                    state.set(x.clone(), z);
                }
                Stmt::Havoc(x) => {
                    for z in (-radius..radius).rev() {
                        let mut next = state.clone();
                        next.set(x.clone(), <Z as Int>::from_i64(z));
                        work.push((stack.clone(), next, steps));
                    }
                    state.set(x.clone(), <Z as Int>::from_i64(radius));
                }
                Stmt::Assume(b) => {
                    if !state.eval_bool(b)? {
                        break;
                    }
                }
                Stmt::If(b, then, otherwise) => {
                    stack.push(if state.eval_bool(b)? { then } else { otherwise });
                }
                Stmt::While(b, body) => {
                    if state.eval_bool(b)? {
                        stack.push(s);
                        stack.push(body);
                    }
                }
                Stmt::Seq(..) => unreachable!("sequences are unfolded above"),
            }
        }
    }
    Ok(result)
}

/// Variables whose value on entry to `p` may be read before being written,
/// given the variables `live_out` that matter afterwards.
pub fn live_in(p: &Stmt, live_out: &BTreeSet<VarName>) -> BTreeSet<VarName> {
    match p {
        Stmt::Skip => live_out.clone(),
        Stmt::Assign(x, e) => {
            let mut l = live_out.clone();
            l.remove(x);
            l.extend(e.vars());
            l
        }
        Stmt::Havoc(x) => {
            let mut l = live_out.clone();
            l.remove(x);
            l
        }
        Stmt::Assume(b) => {
            let mut l = live_out.clone();
            l.extend(b.vars());
            l
        }
        Stmt::If(b, then, otherwise) => {
            let mut l = live_in(then, live_out);
            l.extend(live_in(otherwise, live_out));
            l.extend(b.vars());
            l
        }
        Stmt::While(b, body) => {
            let mut l = live_out.clone();
            l.extend(b.vars());
            loop {
                let mut next = l.clone();
                next.extend(live_in(body, &l));
                if next == l {
                    return l;
                }
                l = next;
            }
        }
        Stmt::Seq(a, b) => live_in(a, &live_in(b, live_out)),
    }
}
