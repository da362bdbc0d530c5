//! SMT-LIB2 serialization.
//!
//! Symbol mangling:
//!
//! | symbol                         | emitted as     |
//! |--------------------------------|----------------|
//! | program variable `x` of copy 1 | `x_1`          |
//! | program variable `x` (no copy) | `x`            |
//! | parameter `mu_3`               | `mu_3`         |
//! | shadow 7 of `x_1`              | `x_1__7`       |
//!
//! A base name that could collide with another form (an SMT-LIB reserved
//! word, a name ending in `_` or `_<digits>`, containing `__`, starting with
//! `mu` or with `v_`) is prefixed with `v_`.

use std::collections::BTreeSet;
use std::fmt::Write;

use num_bigint::{BigInt, Sign};

use crate::ast::{ArithOp, CmpOp, VarName};
use crate::formula::{Formula, Symbol, Term};

const RESERVED: &[&str] = &[
    "and", "or", "not", "xor", "true", "false", "let", "forall", "exists", "assert", "ite", "distinct", "Int",
    "Bool", "Real", "par", "as", "match", "div", "mod", "abs", "to_real", "to_int", "is_int", "select", "store",
    "push", "pop", "model", "sat", "unsat", "unknown", "error", "success", "NUMERAL", "DECIMAL", "STRING",
    "BINARY", "HEXADECIMAL", "declare-const", "declare-fun", "define-fun", "check-sat", "get-model",
];

fn needs_escape(base: &str) -> bool {
    if RESERVED.contains(&base) || base.ends_with('_') || base.contains("__") || base.starts_with("mu") || base.starts_with("v_") {
        return true;
    }
    match base.rfind('_') {
        Some(i) => {
            let tail = &base[i + 1..];
            !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

fn mangle_var(v: &VarName) -> String {
    let base = if needs_escape(v.base()) { format!("v_{}", v.base()) } else { v.base().to_string() };
    match v.copy() {
        Some(c) => format!("{base}_{c}"),
        None => base,
    }
}

pub fn mangle(s: &Symbol) -> String {
    match s {
        Symbol::Var(v) => mangle_var(v),
        Symbol::Shadow(v, n) => format!("{}__{n}", mangle_var(v)),
        Symbol::Param(p) => format!("mu_{}", p.id()),
    }
}

fn literal(c: &BigInt) -> String {
    if c.sign() == Sign::Minus {
        format!("(- {})", -c)
    } else {
        c.to_string()
    }
}

pub fn term(t: &Term) -> String {
    let mut out = String::new();
    write_term(&mut out, t);
    out
}

fn write_term(out: &mut String, t: &Term) {
    match t {
        Term::Lit(c) => out.push_str(&literal(c)),
        Term::Sym(s) => out.push_str(&mangle(s)),
        Term::Bin(op, a, b) => {
            let op = match op {
                ArithOp::Add => "+",
                ArithOp::Sub => "-",
                ArithOp::Mul => "*",
            };
            let _ = write!(out, "({op} ");
            write_term(out, a);
            out.push(' ');
            write_term(out, b);
            out.push(')');
        }
    }
}

pub fn formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(&mut out, f);
    out
}

fn write_nary(out: &mut String, op: &str, items: &[Formula], empty: &str) {
    match items {
        [] => out.push_str(empty),
        [one] => write_formula(out, one),
        _ => {
            let _ = write!(out, "({op}");
            for item in items {
                out.push(' ');
                write_formula(out, item);
            }
            out.push(')');
        }
    }
}

fn write_formula(out: &mut String, f: &Formula) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(CmpOp::Ne, a, b) => {
            out.push_str("(not (= ");
            write_term(out, a);
            out.push(' ');
            write_term(out, b);
            out.push_str("))");
        }
        Formula::Atom(op, a, b) => {
            let op = match op {
                CmpOp::Eq => "=",
                CmpOp::Lt => "<",
                CmpOp::Le => "<=",
                CmpOp::Gt => ">",
                CmpOp::Ge => ">=",
                CmpOp::Ne => unreachable!("handled above"),
            };
            let _ = write!(out, "({op} ");
            write_term(out, a);
            out.push(' ');
            write_term(out, b);
            out.push(')');
        }
        Formula::Not(g) => {
            out.push_str("(not ");
            write_formula(out, g);
            out.push(')');
        }
        Formula::And(gs) => write_nary(out, "and", gs, "true"),
        Formula::Or(gs) => write_nary(out, "or", gs, "false"),
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            out.push_str(if matches!(f, Formula::Implies(..)) { "(=> " } else { "(= " });
            write_formula(out, a);
            out.push(' ');
            write_formula(out, b);
            out.push(')');
        }
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            let q = if matches!(f, Formula::Exists(..)) { "exists" } else { "forall" };
            let _ = write!(out, "({q} (");
            for (i, v) in vs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "({} Int)", mangle(v));
            }
            out.push_str(") ");
            write_formula(out, g);
            out.push(')');
        }
    }
}

/// The logic to declare for `f`: quantified or quantifier-free, linear or not.
pub fn logic_for(f: &Formula) -> &'static str {
    match (f.has_quantifiers(), f.is_nonlinear()) {
        (true, false) => "LIA",
        (true, true) => "NIA",
        (false, false) => "QF_LIA",
        (false, true) => "QF_NIA",
    }
}

/// A complete one-shot script asserting `f` with its free symbols declared
/// as integer constants.
pub fn script(f: &Formula, want_model: bool) -> String {
    let free: BTreeSet<Symbol> = f.free_symbols();
    let mut out = String::new();
    if want_model {
        out.push_str("(set-option :produce-models true)\n");
    }
    let _ = writeln!(out, "(set-logic {})", logic_for(f));
    for s in &free {
        let _ = writeln!(out, "(declare-const {} Int)", mangle(s));
    }
    let _ = writeln!(out, "(assert {})", formula(f));
    out.push_str("(check-sat)\n");
    if want_model {
        out.push_str("(get-model)\n");
    }
    out
}
