//! The `.feht` spec format.
//!
//! A spec is a sequence of blocks introduced by a bracketed keyword:
//!
//! ```text
//! [forall]
//! x = nondet();
//! assume(x >= 9);
//! [exists]
//! y = nondet();
//! assume(y >= 2);
//! [pre] true
//! [post] x_1 == y_2
//! ```
//!
//! Program blocks use plain variable names; the tool numbers the copies,
//! universal blocks first, each class in file order. Assertions and hints
//! name variables as `name_copy`.

use std::fmt::Write;

use num_bigint::BigInt;
use thiserror::Error;

use crate::ast::{ArithExpr, ArithOp, BoolExpr, CmpOp, Stmt, VarName};
use crate::feht::{Feht, FehtError, Hints};

const KEYWORDS: &[&str] = &["skip", "assume", "if", "else", "while", "true", "false", "nondet"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error(transparent)]
    Feht(#[from] FehtError),
}

impl ParseError {
    /// Line and column of a syntax error.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            ParseError::Syntax { line, col, .. } => Some((*line, *col)),
            ParseError::Feht(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Punct(&'static str),
    Block(String),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Block(b) => format!("`[{b}]`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, col, message: message.into() }
}

const PUNCTS: &[&str] = &["==", "!=", "<=", ">=", "&&", "||", "(", ")", "{", "}", ";", "=", "<", ">", "+", "-", "*", "!", ","];

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, chars: &[char]| {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, &chars);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, &chars);
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c == '[' {
            let mut name = String::new();
            advance(&mut i, &mut line, &mut col, &chars);
            while i < chars.len() && chars[i] != ']' && chars[i] != '\n' {
                name.push(chars[i]);
                advance(&mut i, &mut line, &mut col, &chars);
            }
            if i >= chars.len() || chars[i] != ']' {
                return Err(err(tl, tc, "unterminated block header"));
            }
            advance(&mut i, &mut line, &mut col, &chars);
            out.push(Token { tok: Tok::Block(name.trim().to_string()), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col, &chars);
            }
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                return Err(err(line, col, format!("unexpected `{}` after number", chars[i])));
            }
            out.push(Token { tok: Tok::Int(s.parse().expect("digits")), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col, &chars);
            }
            out.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.len() {
                    advance(&mut i, &mut line, &mut col, &chars);
                }
                out.push(Token { tok: Tok::Punct(p), line: tl, col: tc });
            }
            None => return Err(err(tl, tc, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// How identifiers are read: plain in programs, `name_copy` in assertions.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Names {
    Plain,
    Indexed,
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    names: Names,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn at_ident(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(q) if q == s)
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        let t = self.peek();
        Err(err(t.line, t.col, format!("expected {wanted}, found {}", t.tok.describe())))
    }

    fn expect(&mut self, p: &str) -> Result<(), ParseError> {
        if self.at(p) {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&format!("`{p}`"))
        }
    }

    fn var(&mut self) -> Result<VarName, ParseError> {
        let t = self.peek().clone();
        let Tok::Ident(s) = &t.tok else { return self.unexpected("a variable") };
        if KEYWORDS.contains(&s.as_str()) {
            return Err(err(t.line, t.col, format!("`{s}` is a keyword")));
        }
        let indexed = split_index(s);
        let v = match (self.names, indexed) {
            (Names::Plain, None) => VarName::new(s),
            (Names::Plain, Some(_)) => {
                return Err(err(t.line, t.col, format!("program variable `{s}` must not carry a copy index")))
            }
            (Names::Indexed, Some((base, copy))) => VarName::indexed(base, copy),
            (Names::Indexed, None) => {
                return Err(err(t.line, t.col, format!("variable `{s}` needs a copy index, as in `{s}_1`")))
            }
        };
        self.bump();
        Ok(v)
    }

    // Arithmetic: sums of products of unary terms.

    fn arith(&mut self) -> Result<ArithExpr, ParseError> {
        let mut acc = self.product()?;
        loop {
            let op = if self.at("+") {
                ArithOp::Add
            } else if self.at("-") {
                ArithOp::Sub
            } else {
                return Ok(acc);
            };
            self.bump();
            acc = ArithExpr::bin(op, acc, self.product()?);
        }
    }

    fn product(&mut self) -> Result<ArithExpr, ParseError> {
        let mut acc = self.unary()?;
        while self.at("*") {
            self.bump();
            acc = ArithExpr::bin(ArithOp::Mul, acc, self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<ArithExpr, ParseError> {
        if self.at("-") {
            self.bump();
            return Ok(match self.unary()? {
                ArithExpr::Lit(c) => ArithExpr::Lit(-c),
                e => ArithExpr::bin(ArithOp::Sub, ArithExpr::lit(0), e),
            });
        }
        let t = self.peek().clone();
        match &t.tok {
            Tok::Int(n) => {
                self.bump();
                Ok(ArithExpr::Lit(n.clone()))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.arith()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(_) => Ok(ArithExpr::Var(self.var()?)),
            _ => self.unexpected("an expression"),
        }
    }

    // Booleans: disjunctions of conjunctions of negations of atoms.

    fn boolean(&mut self) -> Result<BoolExpr, ParseError> {
        let mut acc = self.conjunction()?;
        while self.at("||") {
            self.bump();
            acc = BoolExpr::or(acc, self.conjunction()?);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<BoolExpr, ParseError> {
        let mut acc = self.negation()?;
        while self.at("&&") {
            self.bump();
            acc = BoolExpr::and(acc, self.negation()?);
        }
        Ok(acc)
    }

    fn negation(&mut self) -> Result<BoolExpr, ParseError> {
        if self.at("!") {
            self.bump();
            return Ok(BoolExpr::not(self.negation()?));
        }
        if self.at_ident("true") {
            self.bump();
            return Ok(BoolExpr::True);
        }
        if self.at_ident("false") {
            self.bump();
            return Ok(BoolExpr::False);
        }
        // `(` opens either an arithmetic operand or a nested condition.
        let start = self.pos;
        match self.comparison() {
            Ok(b) => Ok(b),
            Err(first) if self.toks[start].tok == Tok::Punct("(") => {
                let reached = self.pos;
                self.pos = start + 1;
                match self.boolean().and_then(|b| self.expect(")").map(|_| b)) {
                    Ok(b) => Ok(b),
                    Err(second) => {
                        // Report whichever reading got further.
                        if self.pos >= reached {
                            Err(second)
                        } else {
                            self.pos = reached;
                            Err(first)
                        }
                    }
                }
            }
            Err(e) => Err(e),
        }
    }

    fn comparison(&mut self) -> Result<BoolExpr, ParseError> {
        let a = self.arith()?;
        let op = match &self.peek().tok {
            Tok::Punct("==") => CmpOp::Eq,
            Tok::Punct("!=") => CmpOp::Ne,
            Tok::Punct("<") => CmpOp::Lt,
            Tok::Punct("<=") => CmpOp::Le,
            Tok::Punct(">") => CmpOp::Gt,
            Tok::Punct(">=") => CmpOp::Ge,
            _ => return self.unexpected("a comparison operator"),
        };
        self.bump();
        Ok(BoolExpr::cmp(op, a, self.arith()?))
    }

    // Statements.

    fn statements(&mut self, until_brace: bool) -> Result<Stmt, ParseError> {
        let mut items = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::Punct("}") if until_brace => break,
                Tok::Eof | Tok::Block(_) if !until_brace => break,
                Tok::Punct(";") => {
                    self.bump();
                }
                _ => items.push(self.statement()?),
            }
        }
        Ok(Stmt::block(items))
    }

    fn braced(&mut self) -> Result<Stmt, ParseError> {
        self.expect("{")?;
        let s = self.statements(true)?;
        self.expect("}")?;
        Ok(s)
    }

    fn condition(&mut self) -> Result<BoolExpr, ParseError> {
        self.expect("(")?;
        let b = self.boolean()?;
        self.expect(")")?;
        Ok(b)
    }

    /// Either `;` or a following `}` (or end of block) closes a simple statement.
    fn terminator(&mut self) -> Result<(), ParseError> {
        match &self.peek().tok {
            Tok::Punct(";") => {
                self.bump();
                Ok(())
            }
            Tok::Punct("}") | Tok::Eof | Tok::Block(_) => Ok(()),
            _ => self.unexpected("`;`"),
        }
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        if self.at_ident("skip") {
            self.bump();
            self.terminator()?;
            return Ok(Stmt::Skip);
        }
        if self.at_ident("assume") {
            self.bump();
            let b = self.condition()?;
            self.terminator()?;
            return Ok(Stmt::Assume(b));
        }
        if self.at_ident("if") {
            self.bump();
            let b = self.condition()?;
            let then = self.braced()?;
            let otherwise = if self.at_ident("else") {
                self.bump();
                if self.at_ident("if") {
                    self.statement()?
                } else {
                    self.braced()?
                }
            } else {
                Stmt::Skip
            };
            return Ok(Stmt::if_(b, then, otherwise));
        }
        if self.at_ident("while") {
            self.bump();
            let b = self.condition()?;
            let body = self.braced()?;
            return Ok(Stmt::while_(b, body));
        }
        let x = self.var()?;
        self.expect("=")?;
        if self.at_ident("nondet") {
            self.bump();
            self.expect("(")?;
            self.expect(")")?;
            self.terminator()?;
            return Ok(Stmt::Havoc(x));
        }
        let e = self.arith()?;
        self.terminator()?;
        Ok(Stmt::Assign(x, e))
    }

    fn assertions(&mut self) -> Result<Vec<BoolExpr>, ParseError> {
        let mut out = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::Eof | Tok::Block(_) => return Ok(out),
                Tok::Punct(";") => {
                    self.bump();
                }
                _ => out.push(self.boolean()?),
            }
        }
    }

    fn numbers(&mut self) -> Result<Vec<(u32, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof | Tok::Block(_) => return Ok(out),
                Tok::Punct(",") | Tok::Punct(";") => {
                    self.bump();
                }
                Tok::Int(n) => {
                    let v: u32 =
                        n.try_into().map_err(|_| err(t.line, t.col, format!("number {n} is too large")))?;
                    out.push((v, t.line, t.col));
                    self.bump();
                }
                Tok::Punct("-") => return Err(err(t.line, t.col, "expected a positive integer")),
                _ => return self.unexpected("a positive integer"),
            }
        }
    }
}

/// `x_12` splits into `("x", 12)`; names without a numeric suffix do not split.
fn split_index(s: &str) -> Option<(&str, u32)> {
    let i = s.rfind('_')?;
    let (base, digits) = (&s[..i], &s[i + 1..]);
    if base.is_empty() || digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if digits.len() > 1 && digits.starts_with('0') {
        return None;
    }
    Some((base, digits.parse().ok()?))
}

/// Parses a complete spec.
pub fn parse_spec(text: &str) -> Result<Feht, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks: &toks, pos: 0, names: Names::Plain };
    let mut universals = Vec::new();
    let mut existentials = Vec::new();
    let mut pre: Option<BoolExpr> = None;
    let mut post: Option<BoolExpr> = None;
    let mut hints = Hints::default();

    loop {
        let header = p.peek().clone();
        let name = match &header.tok {
            Tok::Eof => break,
            Tok::Block(name) => name.clone(),
            other => return Err(err(header.line, header.col, format!("expected a block header, found {}", other.describe()))),
        };
        p.bump();
        match name.as_str() {
            "forall" | "exists" => {
                p.names = Names::Plain;
                let body = p.statements(false)?;
                if name == "forall" {
                    universals.push(body);
                } else {
                    existentials.push(body);
                }
            }
            "pre" | "post" => {
                p.names = Names::Indexed;
                let mut found = p.assertions()?;
                let slot = if name == "pre" { &mut pre } else { &mut post };
                if slot.is_some() {
                    return Err(err(header.line, header.col, format!("duplicate [{name}] block")));
                }
                if found.len() > 1 {
                    return Err(err(header.line, header.col, format!("[{name}] holds exactly one assertion")));
                }
                *slot = Some(found.pop().unwrap_or(BoolExpr::True));
            }
            "hint-invariant" => {
                p.names = Names::Indexed;
                let found = p.assertions()?;
                if found.is_empty() {
                    return Err(err(header.line, header.col, "empty [hint-invariant] block"));
                }
                hints.invariants.extend(found);
            }
            "hint-counters" => {
                if hints.counters.is_some() {
                    return Err(err(header.line, header.col, "duplicate [hint-counters] block"));
                }
                let nums = p.numbers()?;
                if let Some((_, l, c)) = nums.iter().find(|(v, _, _)| *v == 0) {
                    return Err(err(*l, *c, "hint counters must be positive"));
                }
                hints.counters = Some(nums.into_iter().map(|(v, _, _)| v).collect());
            }
            "hint-unroll" => {
                if hints.unroll.is_some() {
                    return Err(err(header.line, header.col, "duplicate [hint-unroll] block"));
                }
                match p.numbers()?.as_slice() {
                    [(v, l, c)] if *v == 0 => return Err(err(*l, *c, "unroll bound must be positive")),
                    [(v, _, _)] => hints.unroll = Some(*v),
                    _ => return Err(err(header.line, header.col, "[hint-unroll] takes one number")),
                }
            }
            other => return Err(err(header.line, header.col, format!("unknown block [{other}]"))),
        }
    }
    let end = p.peek().clone();
    if universals.is_empty() && existentials.is_empty() {
        return Err(err(end.line, end.col, "no [forall] or [exists] block"));
    }
    let pre = pre.ok_or_else(|| err(end.line, end.col, "missing [pre] block"))?;
    let post = post.ok_or_else(|| err(end.line, end.col, "missing [post] block"))?;
    Ok(Feht::new(pre, universals, existentials, post, hints)?)
}

/// Parses the body of hint blocks on their own, for a tuple with `copies` copies.
pub fn parse_hints(text: &str, copies: usize) -> Result<Hints, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks: &toks, pos: 0, names: Names::Indexed };
    let mut hints = Hints::default();
    loop {
        let header = p.peek().clone();
        match &header.tok {
            Tok::Eof => break,
            Tok::Block(name) if name == "hint-invariant" => {
                p.bump();
                hints.invariants.extend(p.assertions()?);
            }
            Tok::Block(name) if name == "hint-counters" => {
                p.bump();
                let nums = p.numbers()?;
                if let Some((_, l, c)) = nums.iter().find(|(v, _, _)| *v == 0) {
                    return Err(err(*l, *c, "hint counters must be positive"));
                }
                if nums.len() != copies {
                    return Err(FehtError::CounterArity { expected: copies, found: nums.len() }.into());
                }
                hints.counters = Some(nums.into_iter().map(|(v, _, _)| v).collect());
            }
            Tok::Block(name) if name == "hint-unroll" => {
                p.bump();
                match p.numbers()?.as_slice() {
                    [(v, _, _)] if *v > 0 => hints.unroll = Some(*v),
                    _ => return Err(err(header.line, header.col, "[hint-unroll] takes one positive number")),
                }
            }
            other => return Err(err(header.line, header.col, format!("expected a hint block, found {}", other.describe()))),
        }
    }
    if let (Some(u), Some(cs)) = (hints.unroll, &hints.counters) {
        let max = cs.iter().copied().max().unwrap_or(1);
        if u < max {
            return Err(FehtError::UnrollBelowCounter { unroll: u, max }.into());
        }
    }
    Ok(hints)
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "    ".repeat(depth);
    match s {
        Stmt::Seq(a, b) => {
            print_stmt(out, a, depth);
            print_stmt(out, b, depth);
        }
        Stmt::Skip => {
            let _ = writeln!(out, "{pad}skip;");
        }
        Stmt::Assign(x, e) => {
            let _ = writeln!(out, "{pad}{x} = {e};");
        }
        Stmt::Havoc(x) => {
            let _ = writeln!(out, "{pad}{x} = nondet();");
        }
        Stmt::Assume(b) => {
            let _ = writeln!(out, "{pad}assume({b});");
        }
        Stmt::If(b, p, q) => {
            let _ = writeln!(out, "{pad}if ({b}) {{");
            print_stmt(out, p, depth + 1);
            let _ = writeln!(out, "{pad}}} else {{");
            print_stmt(out, q, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::While(b, p) => {
            let _ = writeln!(out, "{pad}while ({b}) {{");
            print_stmt(out, p, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

/// Program text in spec syntax.
pub fn print_program(s: &Stmt) -> String {
    let mut out = String::new();
    print_stmt(&mut out, s, 0);
    out
}

/// Renders `f` in spec syntax; parsing the result gives back `f`.
pub fn print_spec(f: &Feht) -> String {
    let mut out = String::new();
    for p in f.programs() {
        let _ = writeln!(out, "[{}]", p.quantifier);
        out.push_str(&print_program(&p.body.strip_copies()));
    }
    let _ = writeln!(out, "[pre]\n{}", f.pre());
    let _ = writeln!(out, "[post]\n{}", f.post());
    let hints = f.hints();
    for inv in &hints.invariants {
        let _ = writeln!(out, "[hint-invariant]\n{inv}");
    }
    if let Some(cs) = &hints.counters {
        let cs: Vec<String> = cs.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "[hint-counters]\n{}", cs.join(" "));
    }
    if let Some(u) = hints.unroll {
        let _ = writeln!(out, "[hint-unroll]\n{u}");
    }
    out
}
