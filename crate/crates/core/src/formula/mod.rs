//! First-order formulas over indexed program variables and parameters.
//!
//! Formulas are plain immutable trees. They are never simplified implicitly;
//! [`simplify`] is a separate pass run before solver emission.

mod eval;
mod simplify;
mod subst;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{ArithExpr, ArithOp, BoolExpr, CmpOp, VarName};

pub use eval::{eval, eval_term, prepare, Env, EvalError, QuantBounds};
pub use simplify::simplify;

/// A parameter `mu_n`: a symbolic stand-in for a postponed existential choice.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Param(u32);

impl Param {
    pub fn id(self) -> u32 {
        self.0
    }

    /// Builds a parameter with a fixed id, for tests and external tooling.
    /// Engine code mints parameters through [`NameSupply::fresh_param`].
    pub fn from_id(id: u32) -> Param {
        Param(id)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mu_{}", self.0)
    }
}

impl fmt::Debug for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Where a parameter came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamOrigin {
    /// Minted for the nondeterministic assignment to `var` in an existential copy.
    ExistentialChoice { var: VarName },
    /// Fresh binder introduced while renaming to avoid capture.
    BinderRename,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Var(VarName),
    /// Fresh stand-in for an earlier value of a program variable. Only ever bound.
    Shadow(VarName, u32),
    Param(Param),
}

impl Symbol {
    pub fn var(v: &VarName) -> Symbol {
        Symbol::Var(v.clone())
    }

    pub fn is_param(&self) -> bool {
        matches!(self, Symbol::Param(_))
    }

    /// The copy index of a program variable or shadow.
    pub fn copy(&self) -> Option<u32> {
        match self {
            Symbol::Var(v) | Symbol::Shadow(v, _) => v.copy(),
            Symbol::Param(_) => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Var(v) => write!(f, "{v}"),
            Symbol::Shadow(v, n) => write!(f, "{v}'{n}"),
            Symbol::Param(p) => write!(f, "{p}"),
        }
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<Param> for Symbol {
    fn from(p: Param) -> Self {
        Symbol::Param(p)
    }
}

impl From<&VarName> for Symbol {
    fn from(v: &VarName) -> Self {
        Symbol::Var(v.clone())
    }
}

/// Fresh-name supply shared by one verification run.
///
/// Counters are atomic so concurrent workers of the same run never mint the
/// same name; the origin table backs parameter provenance checks.
#[derive(Debug, Default)]
pub struct NameSupply {
    next_param: AtomicU32,
    next_shadow: AtomicU32,
    origins: Mutex<BTreeMap<Param, ParamOrigin>>,
}

impl NameSupply {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh_param(&self, origin: ParamOrigin) -> Param {
        let p = Param(self.next_param.fetch_add(1, Ordering::SeqCst) + 1);
        self.origins.lock().expect("origin table poisoned").insert(p, origin);
        p
    }

    pub fn fresh_shadow(&self, of: &VarName) -> Symbol {
        Symbol::Shadow(of.clone(), self.next_shadow.fetch_add(1, Ordering::SeqCst) + 1)
    }

    pub(crate) fn rename_binder(&self, s: &Symbol) -> Symbol {
        match s {
            Symbol::Var(v) | Symbol::Shadow(v, _) => self.fresh_shadow(v),
            Symbol::Param(_) => Symbol::Param(self.fresh_param(ParamOrigin::BinderRename)),
        }
    }

    pub fn origin(&self, p: Param) -> Option<ParamOrigin> {
        self.origins.lock().expect("origin table poisoned").get(&p).cloned()
    }

    pub fn params_minted(&self) -> u32 {
        self.next_param.load(Ordering::SeqCst)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Lit(BigInt),
    Sym(Symbol),
    Bin(ArithOp, Box<Term>, Box<Term>),
}

#[allow(clippy::should_implement_trait)]
impl Term {
    pub fn lit(v: i64) -> Term {
        Term::Lit(BigInt::from(v))
    }

    pub fn var(v: &VarName) -> Term {
        Term::Sym(Symbol::Var(v.clone()))
    }

    pub fn param(p: Param) -> Term {
        Term::Sym(Symbol::Param(p))
    }

    pub fn sym(s: &Symbol) -> Term {
        Term::Sym(s.clone())
    }

    pub fn bin(op: ArithOp, a: Term, b: Term) -> Term {
        Term::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::bin(ArithOp::Add, a, b)
    }

    pub fn sub(a: Term, b: Term) -> Term {
        Term::bin(ArithOp::Sub, a, b)
    }

    pub fn mul(a: Term, b: Term) -> Term {
        Term::bin(ArithOp::Mul, a, b)
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Term::Lit(_) => {}
            Term::Sym(s) => {
                out.insert(s.clone());
            }
            Term::Bin(_, a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn substitute_sym(&self, s: &Symbol, t: &Term) -> Term {
        let mut map = BTreeMap::new();
        map.insert(s.clone(), t.clone());
        subst::substitute_term(self, &map)
    }

    pub fn mentions(&self, s: &Symbol) -> bool {
        match self {
            Term::Lit(_) => false,
            Term::Sym(t) => t == s,
            Term::Bin(_, a, b) => a.mentions(s) || b.mentions(s),
        }
    }

    /// True when some multiplication has symbols on both sides.
    pub fn is_nonlinear(&self) -> bool {
        match self {
            Term::Lit(_) | Term::Sym(_) => false,
            Term::Bin(ArithOp::Mul, a, b) => {
                (!a.is_ground() && !b.is_ground()) || a.is_nonlinear() || b.is_nonlinear()
            }
            Term::Bin(_, a, b) => a.is_nonlinear() || b.is_nonlinear(),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Lit(_) => true,
            Term::Sym(_) => false,
            Term::Bin(_, a, b) => a.is_ground() && b.is_ground(),
        }
    }
}

impl From<&ArithExpr> for Term {
    fn from(e: &ArithExpr) -> Self {
        match e {
            ArithExpr::Lit(c) => Term::Lit(c.clone()),
            ArithExpr::Var(v) => Term::var(v),
            ArithExpr::Bin(op, a, b) => Term::bin(*op, a.as_ref().into(), b.as_ref().into()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Lit(c) if c.sign() == num_bigint::Sign::Minus => write!(f, "({c})"),
            Term::Lit(c) => write!(f, "{c}"),
            Term::Sym(s) => write!(f, "{s}"),
            Term::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    Atom(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Exists(Vec<Symbol>, Box<Formula>),
    Forall(Vec<Symbol>, Box<Formula>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("parameter {0} has no value in the evaluation")]
    MissingParam(Param),
    #[error("restriction-formula has free program variables: {0:?}")]
    RestrictionNotClosed(Vec<Symbol>),
}

impl Formula {
    pub fn atom(op: CmpOp, a: Term, b: Term) -> Formula {
        Formula::Atom(op, a, b)
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Atom(CmpOp::Eq, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(items: impl IntoIterator<Item = Formula>) -> Formula {
        Formula::And(items.into_iter().collect())
    }

    pub fn or(items: impl IntoIterator<Item = Formula>) -> Formula {
        Formula::Or(items.into_iter().collect())
    }

    pub fn and2(a: Formula, b: Formula) -> Formula {
        Formula::And(vec![a, b])
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// `exists vars. body`; an empty binder list yields `body` unchanged.
    pub fn exists(vars: impl IntoIterator<Item = Symbol>, body: Formula) -> Formula {
        let vars: Vec<Symbol> = vars.into_iter().collect();
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    /// `forall vars. body`; an empty binder list yields `body` unchanged.
    pub fn forall(vars: impl IntoIterator<Item = Symbol>, body: Formula) -> Formula {
        let vars: Vec<Symbol> = vars.into_iter().collect();
        if vars.is_empty() {
            body
        } else {
            Formula::Forall(vars, Box::new(body))
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Symbol>, out: &mut BTreeSet<Symbol>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(_, a, b) => {
                for s in a.symbols().into_iter().chain(b.symbols()) {
                    if !bound.contains(&s) {
                        out.insert(s);
                    }
                }
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    f.collect_free(bound, out);
                }
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Exists(vs, f) | Formula::Forall(vs, f) => {
                let depth = bound.len();
                bound.extend(vs.iter().cloned());
                f.collect_free(bound, out);
                bound.truncate(depth);
            }
        }
    }

    /// Free program variables (including any free shadows).
    pub fn free_vars(&self) -> BTreeSet<Symbol> {
        self.free_symbols().into_iter().filter(|s| !s.is_param()).collect()
    }

    pub fn free_params(&self) -> BTreeSet<Param> {
        self.free_symbols()
            .into_iter()
            .filter_map(|s| match s {
                Symbol::Param(p) => Some(p),
                _ => None,
            })
            .collect()
    }

    /// Every parameter mentioned, free or bound.
    pub fn all_params(&self) -> BTreeSet<Param> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |_, a, b| {
            for s in a.symbols().into_iter().chain(b.symbols()) {
                if let Symbol::Param(p) = s {
                    out.insert(p);
                }
            }
        });
        out
    }

    pub fn is_closed(&self) -> bool {
        self.free_symbols().is_empty()
    }

    pub fn has_quantifiers(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) => false,
            Formula::Not(f) => f.has_quantifiers(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().any(Formula::has_quantifiers),
            Formula::Implies(a, b) | Formula::Iff(a, b) => a.has_quantifiers() || b.has_quantifiers(),
            Formula::Exists(..) | Formula::Forall(..) => true,
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        let mut nonlinear = false;
        self.visit_atoms(&mut |_, a, b| nonlinear |= a.is_nonlinear() || b.is_nonlinear());
        nonlinear
    }

    pub fn visit_atoms(&self, f: &mut impl FnMut(CmpOp, &Term, &Term)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(op, a, b) => f(*op, a, b),
            Formula::Not(g) => g.visit_atoms(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit_atoms(f)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
            Formula::Exists(_, g) | Formula::Forall(_, g) => g.visit_atoms(f),
        }
    }

    /// Top-level conjuncts, flattening nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn go<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(fs) => fs.iter().for_each(|g| go(g, out)),
                Formula::True => {}
                g => out.push(g),
            }
        }
        go(self, &mut out);
        out
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(..) => 1,
            Formula::Not(f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
            Formula::Implies(a, b) | Formula::Iff(a, b) => 1 + a.size() + b.size(),
            Formula::Exists(_, f) | Formula::Forall(_, f) => 1 + f.size(),
        }
    }

    /// Capture-avoiding substitution of `t` for free occurrences of `s`.
    pub fn substitute(&self, s: &Symbol, t: &Term, names: &NameSupply) -> Formula {
        let mut map = BTreeMap::new();
        map.insert(s.clone(), t.clone());
        self.substitute_all(&map, names)
    }

    /// Simultaneous capture-avoiding substitution.
    pub fn substitute_all(&self, map: &BTreeMap<Symbol, Term>, names: &NameSupply) -> Formula {
        subst::substitute(self, map, names)
    }

    /// Replaces every parameter by its value under `kappa`.
    pub fn instantiate_params(&self, kappa: &ParamEvaluation) -> Result<Formula, FormulaError> {
        let mut map = BTreeMap::new();
        for p in self.free_params() {
            let v = kappa.get(p).ok_or(FormulaError::MissingParam(p))?;
            map.insert(Symbol::Param(p), Term::Lit(v.clone()));
        }
        // Literal replacements cannot be captured, so this supply never mints.
        Ok(self.substitute_all(&map, &NameSupply::new()))
    }
}

impl From<&BoolExpr> for Formula {
    fn from(b: &BoolExpr) -> Self {
        match b {
            BoolExpr::True => Formula::True,
            BoolExpr::False => Formula::False,
            BoolExpr::Cmp(op, a, c) => Formula::Atom(*op, a.into(), c.into()),
            BoolExpr::Not(inner) => Formula::not(inner.as_ref().into()),
            BoolExpr::And(a, c) => Formula::And(vec![a.as_ref().into(), c.as_ref().into()]),
            BoolExpr::Or(a, c) => Formula::Or(vec![a.as_ref().into(), c.as_ref().into()]),
        }
    }
}

fn write_joined(f: &mut fmt::Formatter<'_>, items: &[Formula], sep: &str, empty: &str) -> fmt::Result {
    if items.is_empty() {
        return f.write_str(empty);
    }
    f.write_str("(")?;
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{item}")?;
    }
    f.write_str(")")
}

fn write_binder(f: &mut fmt::Formatter<'_>, q: &str, vs: &[Symbol], body: &Formula) -> fmt::Result {
    write!(f, "({q} ")?;
    for (i, v) in vs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{v}")?;
    }
    write!(f, ". {body})")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            Formula::Not(g) => write!(f, "!({g})"),
            Formula::And(gs) => write_joined(f, gs, " && ", "true"),
            Formula::Or(gs) => write_joined(f, gs, " || ", "false"),
            Formula::Implies(a, b) => write!(f, "({a} ==> {b})"),
            Formula::Iff(a, b) => write!(f, "({a} <==> {b})"),
            Formula::Exists(vs, g) => write_binder(f, "exists", vs, g),
            Formula::Forall(vs, g) => write_binder(f, "forall", vs, g),
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A parametric assertion `(xi, c)`: a function-formula over variables and
/// parameters and a restriction-formula over parameters only.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParametricAssertion {
    xi: Formula,
    c: Formula,
}

impl ParametricAssertion {
    pub fn new(xi: Formula, c: Formula) -> Result<Self, FormulaError> {
        let stray: Vec<Symbol> = c.free_vars().into_iter().collect();
        if !stray.is_empty() {
            return Err(FormulaError::RestrictionNotClosed(stray));
        }
        Ok(ParametricAssertion { xi, c })
    }

    pub fn xi(&self) -> &Formula {
        &self.xi
    }

    pub fn c(&self) -> &Formula {
        &self.c
    }

    pub fn into_parts(self) -> (Formula, Formula) {
        (self.xi, self.c)
    }

    pub fn params(&self) -> BTreeSet<Param> {
        let mut ps = self.xi.free_params();
        ps.extend(self.c.free_params());
        ps
    }
}

/// A total assignment of integers to a finite set of parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEvaluation(BTreeMap<Param, BigInt>);

impl ParamEvaluation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, p: Param, v: impl Into<BigInt>) -> Self {
        self.0.insert(p, v.into());
        self
    }

    pub fn insert(&mut self, p: Param, v: impl Into<BigInt>) {
        self.0.insert(p, v.into());
    }

    pub fn get(&self, p: Param) -> Option<&BigInt> {
        self.0.get(&p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Param, &BigInt)> {
        self.0.iter()
    }
}

impl FromIterator<(Param, BigInt)> for ParamEvaluation {
    fn from_iter<I: IntoIterator<Item = (Param, BigInt)>>(iter: I) -> Self {
        ParamEvaluation(iter.into_iter().collect())
    }
}
