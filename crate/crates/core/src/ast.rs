//! Abstract syntax of the imperative language and its relational copies.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A program variable, optionally tagged with the relational copy it belongs to.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarName {
    base: Arc<str>,
    copy: Option<u32>,
}

impl VarName {
    /// Creates an un-renamed source variable.
    ///
    /// Panics if `base` is not an identifier; the parser validates before calling.
    pub fn new(base: &str) -> Self {
        assert!(is_identifier(base), "invalid variable name {base:?}");
        VarName { base: Arc::from(base), copy: None }
    }

    /// Creates the variable `base_copy`.
    pub fn indexed(base: &str, copy: u32) -> Self {
        assert!(copy >= 1, "copy indices start at 1");
        VarName { copy: Some(copy), ..VarName::new(base) }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn copy(&self) -> Option<u32> {
        self.copy
    }

    pub fn with_copy(&self, copy: u32) -> Self {
        assert!(copy >= 1, "copy indices start at 1");
        VarName { base: self.base.clone(), copy: Some(copy) }
    }

    pub fn without_copy(&self) -> Self {
        VarName { base: self.base.clone(), copy: None }
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.copy {
            Some(i) => write!(f, "{}_{}", self.base, i),
            None => f.write_str(&self.base),
        }
    }
}

impl fmt::Debug for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// The operator whose truth is the complement of `self`.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn holds<T: Ord>(self, a: &T, b: &T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithExpr {
    Lit(BigInt),
    Var(VarName),
    Bin(ArithOp, Box<ArithExpr>, Box<ArithExpr>),
}

impl ArithExpr {
    pub fn lit(v: i64) -> Self {
        ArithExpr::Lit(BigInt::from(v))
    }

    pub fn var(name: &VarName) -> Self {
        ArithExpr::Var(name.clone())
    }

    pub fn bin(op: ArithOp, a: ArithExpr, b: ArithExpr) -> Self {
        ArithExpr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<VarName>) {
        match self {
            ArithExpr::Lit(_) => {}
            ArithExpr::Var(v) => {
                out.insert(v.clone());
            }
            ArithExpr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub(crate) fn collect_mul_constants(&self, out: &mut BTreeSet<BigInt>) {
        if let ArithExpr::Bin(op, a, b) = self {
            if *op == ArithOp::Mul {
                for side in [a, b] {
                    if let ArithExpr::Lit(c) = side.as_ref() {
                        out.insert(c.clone());
                    }
                }
            }
            a.collect_mul_constants(out);
            b.collect_mul_constants(out);
        }
    }

    fn map_vars(&self, f: &mut impl FnMut(&VarName) -> VarName) -> ArithExpr {
        match self {
            ArithExpr::Lit(c) => ArithExpr::Lit(c.clone()),
            ArithExpr::Var(v) => ArithExpr::Var(f(v)),
            ArithExpr::Bin(op, a, b) => ArithExpr::bin(*op, a.map_vars(f), b.map_vars(f)),
        }
    }

    fn size(&self) -> usize {
        match self {
            ArithExpr::Lit(_) | ArithExpr::Var(_) => 1,
            ArithExpr::Bin(_, a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl fmt::Display for ArithExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithExpr::Lit(c) if c.sign() == num_bigint::Sign::Minus => write!(f, "({c})"),
            ArithExpr::Lit(c) => write!(f, "{c}"),
            ArithExpr::Var(v) => write!(f, "{v}"),
            ArithExpr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

impl fmt::Debug for ArithExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoolExpr {
    True,
    False,
    Cmp(CmpOp, ArithExpr, ArithExpr),
    Not(Box<BoolExpr>),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
}

#[allow(clippy::should_implement_trait)]
impl BoolExpr {
    pub fn cmp(op: CmpOp, a: ArithExpr, b: ArithExpr) -> Self {
        BoolExpr::Cmp(op, a, b)
    }

    pub fn not(b: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(b))
    }

    pub fn and(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<VarName>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            BoolExpr::Not(b) => b.collect_vars(out),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub(crate) fn map_vars(&self, f: &mut impl FnMut(&VarName) -> VarName) -> BoolExpr {
        match self {
            BoolExpr::True => BoolExpr::True,
            BoolExpr::False => BoolExpr::False,
            BoolExpr::Cmp(op, a, b) => BoolExpr::Cmp(*op, a.map_vars(f), b.map_vars(f)),
            BoolExpr::Not(b) => BoolExpr::not(b.map_vars(f)),
            BoolExpr::And(a, b) => BoolExpr::and(a.map_vars(f), b.map_vars(f)),
            BoolExpr::Or(a, b) => BoolExpr::or(a.map_vars(f), b.map_vars(f)),
        }
    }

    /// Visits every comparison atom.
    pub(crate) fn for_each_cmp(&self, f: &mut impl FnMut(CmpOp, &ArithExpr, &ArithExpr)) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Cmp(op, a, b) => f(*op, a, b),
            BoolExpr::Not(b) => b.for_each_cmp(f),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.for_each_cmp(f);
                b.for_each_cmp(f);
            }
        }
    }

    fn size(&self) -> usize {
        match self {
            BoolExpr::True | BoolExpr::False => 1,
            BoolExpr::Cmp(_, a, b) => 1 + a.size() + b.size(),
            BoolExpr::Not(b) => 1 + b.size(),
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => 1 + a.size() + b.size(),
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolExpr::True => f.write_str("true"),
            BoolExpr::False => f.write_str("false"),
            BoolExpr::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            BoolExpr::Not(b) => write!(f, "!({b})"),
            BoolExpr::And(a, b) => write!(f, "({a} && {b})"),
            BoolExpr::Or(a, b) => write!(f, "({a} || {b})"),
        }
    }
}

impl fmt::Debug for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stmt {
    Skip,
    Assign(VarName, ArithExpr),
    /// `x := *`, a nondeterministic integer choice.
    Havoc(VarName),
    Assume(BoolExpr),
    If(BoolExpr, Box<Stmt>, Box<Stmt>),
    While(BoolExpr, Box<Stmt>),
    Seq(Box<Stmt>, Box<Stmt>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AstError {
    #[error("variable {0} already carries copy index")]
    AlreadyIndexed(VarName),
}

impl Stmt {
    pub fn assign(x: &VarName, e: ArithExpr) -> Self {
        Stmt::Assign(x.clone(), e)
    }

    pub fn havoc(x: &VarName) -> Self {
        Stmt::Havoc(x.clone())
    }

    pub fn if_(b: BoolExpr, then: Stmt, otherwise: Stmt) -> Self {
        Stmt::If(b, Box::new(then), Box::new(otherwise))
    }

    pub fn while_(b: BoolExpr, body: Stmt) -> Self {
        Stmt::While(b, Box::new(body))
    }

    pub fn seq(a: Stmt, b: Stmt) -> Self {
        Stmt::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence of `stmts`; the empty sequence is `skip`.
    pub fn block(stmts: impl IntoIterator<Item = Stmt>) -> Self {
        let mut items: Vec<Stmt> = stmts.into_iter().collect();
        let mut acc = match items.pop() {
            Some(last) => last,
            None => return Stmt::Skip,
        };
        while let Some(prev) = items.pop() {
            acc = Stmt::seq(prev, acc);
        }
        acc
    }

    pub fn is_while_headed(&self) -> bool {
        matches!(self, Stmt::Seq(h, _) if matches!(h.as_ref(), Stmt::While(..)))
            || matches!(self, Stmt::While(..))
    }

    /// Number of AST nodes, counting statements and expression nodes.
    pub fn size(&self) -> usize {
        match self {
            Stmt::Skip | Stmt::Havoc(_) => 1,
            Stmt::Assign(_, e) => 1 + e.size(),
            Stmt::Assume(b) => 1 + b.size(),
            Stmt::If(b, p, q) => 1 + b.size() + p.size() + q.size(),
            Stmt::While(b, p) => 1 + b.size() + p.size(),
            Stmt::Seq(p, q) => 1 + p.size() + q.size(),
        }
    }

    /// All variables read or written.
    pub fn vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<VarName>) {
        match self {
            Stmt::Skip => {}
            Stmt::Assign(x, e) => {
                out.insert(x.clone());
                e.collect_vars(out);
            }
            Stmt::Havoc(x) => {
                out.insert(x.clone());
            }
            Stmt::Assume(b) => b.collect_vars(out),
            Stmt::If(b, p, q) => {
                b.collect_vars(out);
                p.collect_vars(out);
                q.collect_vars(out);
            }
            Stmt::While(b, p) => {
                b.collect_vars(out);
                p.collect_vars(out);
            }
            Stmt::Seq(p, q) => {
                p.collect_vars(out);
                q.collect_vars(out);
            }
        }
    }

    /// Variables on the left of an assignment or havoc anywhere in the program.
    pub fn mod_vars(&self) -> BTreeSet<VarName> {
        let mut out = BTreeSet::new();
        self.for_each(&mut |s| match s {
            Stmt::Assign(x, _) | Stmt::Havoc(x) => {
                out.insert(x.clone());
            }
            _ => {}
        });
        out
    }

    /// Pre-order traversal over statements.
    pub fn for_each(&self, f: &mut impl FnMut(&Stmt)) {
        f(self);
        match self {
            Stmt::If(_, p, q) | Stmt::Seq(p, q) => {
                p.for_each(f);
                q.for_each(f);
            }
            Stmt::While(_, p) => p.for_each(f),
            _ => {}
        }
    }

    pub fn has_loops(&self) -> bool {
        let mut found = false;
        self.for_each(&mut |s| found |= matches!(s, Stmt::While(..)));
        found
    }

    /// Constants occurring as a factor of a multiplication.
    pub fn mul_constants(&self) -> BTreeSet<BigInt> {
        let mut out = BTreeSet::new();
        self.for_each(&mut |s| match s {
            Stmt::Assign(_, e) => e.collect_mul_constants(&mut out),
            Stmt::Assume(b) | Stmt::If(b, ..) | Stmt::While(b, _) => {
                b.for_each_cmp(&mut |_, l, r| {
                    l.collect_mul_constants(&mut out);
                    r.collect_mul_constants(&mut out);
                })
            }
            _ => {}
        });
        out
    }

    /// Renames every variable `x` to `x_copy`.
    pub fn alpha_rename(&self, copy: u32) -> Result<Stmt, AstError> {
        if let Some(v) = self.vars().into_iter().find(|v| v.copy().is_some()) {
            return Err(AstError::AlreadyIndexed(v));
        }
        Ok(self.map_vars(&mut |v| v.with_copy(copy)))
    }

    /// Drops every copy index, inverting [`Stmt::alpha_rename`].
    pub fn strip_copies(&self) -> Stmt {
        self.map_vars(&mut |v| v.without_copy())
    }

    pub(crate) fn map_vars(&self, f: &mut impl FnMut(&VarName) -> VarName) -> Stmt {
        match self {
            Stmt::Skip => Stmt::Skip,
            Stmt::Assign(x, e) => Stmt::Assign(f(x), e.map_vars(f)),
            Stmt::Havoc(x) => Stmt::Havoc(f(x)),
            Stmt::Assume(b) => Stmt::Assume(b.map_vars(f)),
            Stmt::If(b, p, q) => Stmt::if_(b.map_vars(f), p.map_vars(f), q.map_vars(f)),
            Stmt::While(b, p) => Stmt::while_(b.map_vars(f), p.map_vars(f)),
            Stmt::Seq(p, q) => Stmt::seq(p.map_vars(f), q.map_vars(f)),
        }
    }

    /// Brings the program into head-normal form: either `skip`, or `h; rest`
    /// where `h` is neither a sequence nor `skip`.
    ///
    /// Drops leading `skip`s, re-associates `(p1; p2); p3` to `p1; (p2; p3)` and
    /// pads a lone statement to `p; skip`.
    pub fn normalize_head(&self) -> Stmt {
        let mut cur = self.clone();
        loop {
            cur = match cur {
                Stmt::Skip => return Stmt::Skip,
                Stmt::Seq(head, rest) => match *head {
                    Stmt::Skip => *rest,
                    Stmt::Seq(a, b) => Stmt::Seq(a, Box::new(Stmt::Seq(b, rest))),
                    h => return Stmt::Seq(Box::new(h), rest),
                },
                h => return Stmt::seq(h, Stmt::Skip),
            }
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Skip => f.write_str("skip"),
            Stmt::Assign(x, e) => write!(f, "{x} := {e}"),
            Stmt::Havoc(x) => write!(f, "{x} := *"),
            Stmt::Assume(b) => write!(f, "assume({b})"),
            Stmt::If(b, p, q) => write!(f, "if ({b}) {{ {p} }} else {{ {q} }}"),
            Stmt::While(b, p) => write!(f, "while ({b}) {{ {p} }}"),
            Stmt::Seq(p, q) => write!(f, "{p}; {q}"),
        }
    }
}

impl fmt::Debug for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> VarName {
        VarName::new("x")
    }

    fn assign_x(v: i64) -> Stmt {
        Stmt::assign(&x(), ArithExpr::lit(v))
    }

    #[test]
    fn rename_increment() {
        let p = Stmt::assign(&x(), ArithExpr::bin(ArithOp::Add, ArithExpr::var(&x()), ArithExpr::lit(1)));
        let x2 = VarName::indexed("x", 2);
        let expected =
            Stmt::assign(&x2, ArithExpr::bin(ArithOp::Add, ArithExpr::var(&x2), ArithExpr::lit(1)));
        assert_eq!(p.alpha_rename(2).unwrap(), expected);
        assert_eq!(p.alpha_rename(2).unwrap().to_string(), "x_2 := (x_2 + 1)");
    }

    #[test]
    fn rename_skip_is_skip() {
        assert_eq!(Stmt::Skip.alpha_rename(7).unwrap(), Stmt::Skip);
    }

    #[test]
    fn rename_rejects_indexed_input() {
        let p = Stmt::havoc(&VarName::indexed("x", 1));
        assert!(matches!(p.alpha_rename(2), Err(AstError::AlreadyIndexed(_))));
    }

    #[test]
    fn normalize_drops_leading_skip() {
        let p = Stmt::seq(Stmt::Skip, assign_x(1));
        assert_eq!(p.normalize_head(), Stmt::seq(assign_x(1), Stmt::Skip));
    }

    #[test]
    fn normalize_pads_single_statement() {
        assert_eq!(assign_x(1).normalize_head(), Stmt::seq(assign_x(1), Stmt::Skip));
    }

    #[test]
    fn normalize_reassociates() {
        let (a, b, c) = (assign_x(1), assign_x(2), assign_x(3));
        let p = Stmt::seq(Stmt::seq(a.clone(), b.clone()), c.clone());
        assert_eq!(p.normalize_head(), Stmt::seq(a, Stmt::seq(b, c)));
    }

    #[test]
    fn normalize_skip_chain_collapses() {
        let p = Stmt::seq(Stmt::seq(Stmt::Skip, Stmt::Skip), Stmt::Skip);
        assert_eq!(p.normalize_head(), Stmt::Skip);
    }

    #[test]
    fn mod_vars_examples() {
        let y = VarName::new("y");
        let z = VarName::new("z");
        let p = Stmt::assign(&x(), ArithExpr::bin(ArithOp::Add, ArithExpr::var(&y), ArithExpr::lit(1)));
        assert_eq!(p.mod_vars(), BTreeSet::from([x()]));
        let w = Stmt::while_(BoolExpr::True, Stmt::havoc(&z));
        assert_eq!(w.mod_vars(), BTreeSet::from([z]));
        assert!(Stmt::Skip.mod_vars().is_empty());
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("_a1"));
        assert!(is_identifier("x"));
        assert!(!is_identifier("1x"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("a-b"));
    }
}
