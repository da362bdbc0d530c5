//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p forex-lite --test acceptance -- --nocapture` to see
//! the lines. A criterion that is known to be out of reach prints FAIL with
//! its analysis; the test only fails if the failure is not the documented one.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use forex_core::ast::{ArithExpr, ArithOp, BoolExpr, CmpOp, Stmt};
use forex_core::engine::Engine;
use forex_core::formula::{Formula, NameSupply, Symbol, Term};
use forex_core::oracle::{check_parametric_postcondition, feht_check_bounded, OracleConfig, ParamCheck};
use forex_core::smt::{emit, resolve_solver_path, SatOutcome, Solver, SolverConfig};
use forex_core::{parse_spec, verify, Feht, Report, VarName, VerifyConfig};
use forex_lite::{annotations, run_suite, spec_files};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const EX2_LIMIT: Duration = Duration::from_secs(2);
const EX1_LIMIT: Duration = Duration::from_secs(30);
const GNI_LIMIT: Duration = Duration::from_secs(10);
const PROP4_LIMIT: Duration = Duration::from_secs(300);
const SUITE_SPEC_LIMIT: Duration = Duration::from_secs(30);
const PROP4_CASES: usize = 200;
const PROP4_DOMAIN: i64 = 3;
const ORACLE_STEPS: usize = 200;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").canonicalize().expect("corpus directory")
}

fn config() -> VerifyConfig {
    VerifyConfig { solver: SolverConfig::new(resolve_solver_path(None)), ..VerifyConfig::default() }
}

fn load(rel: &str) -> Feht {
    let text = std::fs::read_to_string(corpus().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"));
    parse_spec(&text).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn run(f: &Feht) -> Report {
    verify(f, &config()).expect("verifier environment")
}

fn solver() -> Solver {
    Solver::new(config().solver)
}

fn equivalent(s: &Solver, a: &Formula, b: &Formula) -> bool {
    s.check_equiv(a, b).expect("solver").outcome.is_unsat()
}

struct Outcome {
    pass: bool,
    detail: String,
    /// A failure that matches the analysis recorded for this criterion.
    documented: bool,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into(), documented: false }
    }
}

fn ex2_postcondition() -> Outcome {
    let f = load("ex2.feht");
    let r = run(&f);
    let (Some(xi), Some(c)) = (&r.xi, &r.c) else {
        return Outcome::new(false, "no parametric postcondition");
    };
    let params: Vec<_> = xi.free_params().union(&c.free_params()).copied().collect();
    if params.len() != 1 {
        return Outcome::new(false, format!("expected one parameter, got {}", params.len()));
    }
    let mu = Term::param(params[0]);
    let x1 = Term::var(&VarName::indexed("x", 1));
    let y2 = Term::var(&VarName::indexed("y", 2));
    let want_xi = Formula::and([Formula::atom(CmpOp::Ge, x1, Term::lit(9)), Formula::eq(y2, mu.clone())]);
    let want_c = Formula::atom(CmpOp::Ge, mu, Term::lit(2));
    let s = solver();
    let c_ok = equivalent(&s, c, &want_c);
    let xi_ok = equivalent(&s, &Formula::and2(c.clone(), xi.clone()), &Formula::and2(want_c, want_xi));
    let fast = r.wall_time < EX2_LIMIT;
    Outcome::new(c_ok && xi_ok && fast, format!("xi: {xi}; c: {c}; {:.0} ms", r.wall_time.as_secs_f64() * 1e3))
}

fn ex2_final_query() -> Outcome {
    let r = run(&load("ex2.feht"));
    let sat = matches!(r.final_outcome, Some(SatOutcome::Sat));
    Outcome::new(
        sat && r.verdict.is_verified() && r.wall_time < EX2_LIMIT,
        format!("final query {:?}, {:.0} ms", r.final_outcome, r.wall_time.as_secs_f64() * 1e3),
    )
}

fn ex1_alignment() -> Outcome {
    let hinted = run(&load("ex1_hinted.feht"));
    let auto = run(&load("ex1_auto.feht"));
    let pass = hinted.verdict.is_verified()
        && auto.verdict.is_verified()
        && hinted.wall_time < EX1_LIMIT
        && auto.wall_time < EX1_LIMIT
        && hinted.pool_candidates_tried == 0;
    let inv = |r: &Report| r.loop_choices.first().map(|c| format!("{} {:?}", c.invariant, c.counters)).unwrap_or_default();
    Outcome::new(
        pass,
        format!(
            "hinted: {} in {:.0} ms, {} pool candidates; auto: {} after {} candidates in {:.0} ms ({})",
            hinted.verdict,
            hinted.wall_time.as_secs_f64() * 1e3,
            hinted.pool_candidates_tried,
            auto.verdict,
            auto.candidates_tried,
            auto.wall_time.as_secs_f64() * 1e3,
            inv(&auto),
        ),
    )
}

fn gni() -> Outcome {
    let r = run(&load("gni_intro.feht"));
    Outcome::new(
        r.verdict.is_verified() && r.wall_time < GNI_LIMIT,
        format!("{} in {:.0} ms", r.verdict, r.wall_time.as_secs_f64() * 1e3),
    )
}

fn negative_control() -> Outcome {
    let r = run(&load("neg_control.feht"));
    let neg_ok = !r.verdict.is_verified() && matches!(r.final_outcome, Some(SatOutcome::Unsat));
    let variant = |post: &str| {
        let f = parse_spec(&format!("[exists]\nx = nondet();\n[pre] true\n[post] {post}\n")).expect("variant");
        run(&f).verdict.is_verified()
    };
    let one = variant("x_1 == 1");
    let two = variant("x_1 == 2");
    Outcome::new(
        neg_ok && one && two,
        format!("both: {} ({:?}); x=1 verified: {one}; x=2 verified: {two}", r.verdict, r.final_outcome),
    )
}

// Random loop-free tuples over at most three indexed variables.

struct Gen {
    rng: StdRng,
}

impl Gen {
    fn lit(&mut self) -> i64 {
        self.rng.gen_range(-2..=2)
    }

    fn pick<'v>(&mut self, vars: &'v [&'v str]) -> &'v str {
        vars[self.rng.gen_range(0..vars.len())]
    }

    fn expr(&mut self, vars: &[&str]) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.lit().to_string(),
            1 => self.pick(vars).to_string(),
            2 => format!("{} + {}", self.pick(vars), self.lit()),
            _ => format!("{} - {}", self.pick(vars), self.pick(vars)),
        }
    }

    fn cmp(&mut self, lhs: &str, rhs: &str) -> String {
        let op = ["==", "!=", "<", "<=", ">", ">="][self.rng.gen_range(0..6)];
        format!("{lhs} {op} {rhs}")
    }

    fn cond(&mut self, vars: &[&str]) -> String {
        let lhs = self.pick(vars).to_string();
        let rhs = if self.rng.gen_bool(0.5) { self.lit().to_string() } else { self.pick(vars).to_string() };
        self.cmp(&lhs, &rhs)
    }

    /// At most `havocs` nondeterministic assignments.
    fn stmt(&mut self, vars: &[&str], depth: u32, havocs: &mut u32) -> String {
        let roll = self.rng.gen_range(0..10);
        match roll {
            0..=3 => format!("{} = {};", self.pick(vars), self.expr(vars)),
            4 | 5 if *havocs > 0 => {
                *havocs -= 1;
                format!("{} = nondet();", self.pick(vars))
            }
            6 | 7 => format!("assume({});", self.cond(vars)),
            8 | 9 if depth > 0 => {
                let c = self.cond(vars);
                let a = self.stmt(vars, depth - 1, havocs);
                let b = self.stmt(vars, depth - 1, havocs);
                format!("if ({c}) {{ {a} }} else {{ {b} }}")
            }
            _ => format!("{} = {};", self.pick(vars), self.expr(vars)),
        }
    }

    fn program(&mut self, vars: &[&str], havocs: &mut u32) -> String {
        let n = self.rng.gen_range(1..=3);
        (0..n).map(|_| self.stmt(vars, 1, havocs)).collect::<Vec<_>>().join("\n")
    }

    fn spec(&mut self) -> String {
        // (universal variable sets, existential variable sets); three indexed variables at most.
        const SHAPES: [(Copies, Copies); 6] = [
            (&[&["a", "b"]], &[&["a"]]),
            (&[&["a"]], &[&["a", "b"]]),
            (&[&["a"], &["a"]], &[&["a"]]),
            (&[&["a"]], &[&["a"], &["a"]]),
            (&[], &[&["a", "b"]]),
            (&[&["a"]], &[&["a"]]),
        ];
        let (univ, exist) = SHAPES[self.rng.gen_range(0..SHAPES.len())];
        let mut havocs = 2;
        let mut text = String::new();
        let mut indexed = Vec::new();
        for (copy, vars) in univ.iter().chain(exist.iter()).enumerate() {
            let tag = if copy < univ.len() { "[forall]" } else { "[exists]" };
            text += &format!("{tag}\n{}\n", self.program(vars, &mut havocs));
            indexed.extend(vars.iter().map(|v| format!("{v}_{}", copy + 1)));
        }
        let refs: Vec<&str> = indexed.iter().map(String::as_str).collect();
        let pre = match self.rng.gen_range(0..3) {
            0 => "true".to_string(),
            1 => self.cond(&refs),
            _ => format!("{} && {}", self.cond(&refs), self.cond(&refs)),
        };
        text += &format!("[pre] {pre}\n[post] true\n");
        text
    }
}

/// Variable names per program copy.
type Copies = &'static [&'static [&'static str]];

fn prop4() -> Outcome {
    let start = Instant::now();
    let mut g = Gen { rng: StdRng::seed_from_u64(0x5eed4) };
    let cfg = OracleConfig::new(PROP4_DOMAIN, ORACLE_STEPS);
    let (mut holds, mut fails, mut unknown) = (0, Vec::new(), 0);
    while holds + fails.len() + unknown < PROP4_CASES {
        let text = g.spec();
        let f = match parse_spec(&text) {
            Ok(f) => f,
            Err(e) => panic!("generator produced an unparsable spec: {e}\n{text}"),
        };
        let names = NameSupply::new();
        // Without a solver no branch is pruned, so the raw output is checked.
        let mut engine = Engine::new(&names, None, Default::default(), Default::default());
        let pa = engine
            .genpp_first(f.pre_formula(), f.universals().to_vec(), f.existentials().to_vec())
            .expect("genpp")
            .expect("loop-free programs always yield a postcondition");
        let programs: Vec<_> = f.programs().cloned().collect();
        match check_parametric_postcondition::<i64>(f.pre(), &programs, pa.xi(), pa.c(), &cfg) {
            ParamCheck::Holds => holds += 1,
            ParamCheck::Fails(_) => fails.push(text),
            ParamCheck::Unknown(_) => unknown += 1,
        }
    }
    let elapsed = start.elapsed();
    if let Some(first) = fails.first() {
        eprintln!("first failing tuple:\n{first}");
    }
    Outcome::new(
        fails.is_empty() && unknown == 0 && elapsed < PROP4_LIMIT,
        format!("{holds} hold, {} fail, {unknown} unknown at d={PROP4_DOMAIN} in {:.1} s", fails.len(), elapsed.as_secs_f64()),
    )
}

fn loopfree_decision() -> Outcome {
    let files = spec_files(&corpus().join("loopfree")).expect("loopfree corpus");
    let mut matched = 0;
    let mut gaps = Vec::new();
    let mut unexplained = Vec::new();
    for file in &files {
        let text = std::fs::read_to_string(file).expect("spec");
        let notes = annotations(&text);
        let f = parse_spec(&text).expect("spec parses");
        let d = notes.oracle_domain.expect("loop-free specs document their domain");
        let oracle = feht_check_bounded::<i64>(&f, d, ORACLE_STEPS);
        let verified = run(&f).verdict.is_verified();
        let name = file.file_name().unwrap().to_string_lossy().into_owned();
        if !oracle.is_valid() && !oracle.is_invalid() {
            unexplained.push(format!("{name}: oracle {}", oracle.label()));
        } else if verified == oracle.is_valid() {
            matched += 1;
        } else if notes.known_gap.is_some() && oracle.is_valid() && !verified {
            gaps.push(name);
        } else {
            unexplained.push(format!("{name}: verified={verified} oracle={}", oracle.label()));
        }
    }
    let total = files.len();
    let mut out = Outcome::new(
        total == 30 && matched == total,
        format!(
            "{matched}/{total} match; valid but not provable (parameters are state-independent): {}{}",
            if gaps.is_empty() { "none".to_string() } else { gaps.join(", ") },
            if unexplained.is_empty() { String::new() } else { format!("; UNEXPLAINED: {}", unexplained.join(", ")) },
        ),
    );
    out.documented = !out.pass && unexplained.is_empty() && total == 30;
    out
}

// Direct strongest postcondition for purely universal loop-free programs, in
// SSA form, checked by the solver without going through the engine.

struct Ssa {
    version: BTreeMap<String, u32>,
    decls: BTreeSet<String>,
    fresh: u32,
}

impl Ssa {
    fn cur(&mut self, v: &str) -> String {
        let n = *self.version.entry(v.to_string()).or_insert(0);
        let name = format!("{v}__{n}");
        self.decls.insert(name.clone());
        name
    }

    fn bump(&mut self, v: &str) -> String {
        self.fresh += 1;
        self.version.insert(v.to_string(), self.fresh);
        self.cur(v)
    }

    fn arith(&mut self, e: &ArithExpr) -> String {
        match e {
            ArithExpr::Lit(c) if c.sign() == num_bigint::Sign::Minus => format!("(- {})", -c),
            ArithExpr::Lit(c) => c.to_string(),
            ArithExpr::Var(v) => self.cur(&v.to_string()),
            ArithExpr::Bin(op, a, b) => {
                let op = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                };
                format!("({op} {} {})", self.arith(a), self.arith(b))
            }
        }
    }

    fn boolean(&mut self, b: &BoolExpr) -> String {
        match b {
            BoolExpr::True => "true".into(),
            BoolExpr::False => "false".into(),
            BoolExpr::Cmp(op, a, c) => {
                let (a, c) = (self.arith(a), self.arith(c));
                match op {
                    CmpOp::Eq => format!("(= {a} {c})"),
                    CmpOp::Ne => format!("(distinct {a} {c})"),
                    CmpOp::Lt => format!("(< {a} {c})"),
                    CmpOp::Le => format!("(<= {a} {c})"),
                    CmpOp::Gt => format!("(> {a} {c})"),
                    CmpOp::Ge => format!("(>= {a} {c})"),
                }
            }
            BoolExpr::Not(x) => format!("(not {})", self.boolean(x)),
            BoolExpr::And(x, y) => format!("(and {} {})", self.boolean(x), self.boolean(y)),
            BoolExpr::Or(x, y) => format!("(or {} {})", self.boolean(x), self.boolean(y)),
        }
    }

    fn stmt(&mut self, s: &Stmt) -> String {
        match s {
            Stmt::Skip => "true".into(),
            Stmt::Assign(x, e) => {
                let rhs = self.arith(e);
                format!("(= {} {rhs})", self.bump(&x.to_string()))
            }
            Stmt::Havoc(x) => {
                self.bump(&x.to_string());
                "true".into()
            }
            Stmt::Assume(b) => self.boolean(b),
            Stmt::Seq(a, b) => format!("(and {} {})", self.stmt(a), self.stmt(b)),
            Stmt::If(c, a, b) => {
                let cond = self.boolean(c);
                let before = self.version.clone();
                let then = self.stmt(a);
                let after_then = std::mem::replace(&mut self.version, before);
                let other = self.stmt(b);
                let after_else = self.version.clone();
                let (mut eq_then, mut eq_else) = (Vec::new(), Vec::new());
                let vars: BTreeSet<String> = after_then.keys().chain(after_else.keys()).cloned().collect();
                for v in vars {
                    let (t, e) = (after_then.get(&v).copied().unwrap_or(0), after_else.get(&v).copied().unwrap_or(0));
                    if t != e {
                        let m = self.bump(&v);
                        eq_then.push(format!("(= {m} {v}__{t})"));
                        eq_else.push(format!("(= {m} {v}__{e})"));
                        self.decls.insert(format!("{v}__{t}"));
                        self.decls.insert(format!("{v}__{e}"));
                    }
                }
                format!(
                    "(or (and {cond} {then} {}) (and (not {cond}) {other} {}))",
                    eq_then.join(" "),
                    eq_else.join(" ")
                )
            }
            Stmt::While(..) => panic!("the k-safety corpus is loop-free"),
        }
    }
}

fn z3(script: &str) -> String {
    let mut child = Command::new(resolve_solver_path(None))
        .args(["-in", "-smt2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .expect("solver");
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let out = child.wait_with_output().expect("solver output");
    let answer = String::from_utf8_lossy(&out.stdout).trim().to_string();
    assert!(answer == "sat" || answer == "unsat", "solver said {answer:?} on\n{script}");
    answer
}

/// The direct strongest postcondition of `f`'s universal programs, checked
/// two ways: whether it implies the postcondition, and whether it is
/// equivalent to `xi`.
fn direct_sp(f: &Feht, xi: &Formula) -> (bool, bool) {
    let mut ssa = Ssa { version: BTreeMap::new(), decls: BTreeSet::new(), fresh: 0 };
    let pre = ssa.boolean(f.pre());
    let path: Vec<String> = f.universals().iter().map(|p| ssa.stmt(&p.body)).collect();
    let post = ssa.boolean(f.post());
    let mut decls = String::new();
    for d in &ssa.decls {
        decls += &format!("(declare-const {d} Int)\n");
    }
    let valid = z3(&format!("{decls}(assert (and {pre} {} (not {post})))\n(check-sat)\n", path.join(" "))) == "unsat";

    // Equivalence over the final values: the SSA names are existential.
    let mut finals = Vec::new();
    let mut outer = String::new();
    for v in f.universal_vars() {
        let name = emit::mangle(&Symbol::var(&v));
        finals.push(format!("(= {name} {})", ssa.cur(&v.to_string())));
        outer += &format!("(declare-const {name} Int)\n");
    }
    let bound: Vec<String> = ssa.decls.iter().map(|d| format!("({d} Int)")).collect();
    let sp = format!("(exists ({}) (and {pre} {} {}))", bound.join(" "), path.join(" "), finals.join(" "));
    let equivalent =
        z3(&format!("{outer}(assert (not (= {} {sp})))\n(check-sat)\n", emit::formula(xi))) == "unsat";
    (valid, equivalent)
}

fn ksafety() -> Outcome {
    let files = spec_files(&corpus().join("ksafety")).expect("ksafety corpus");
    let mut problems = Vec::new();
    let mut verified = 0;
    for file in &files {
        let name = file.file_name().unwrap().to_string_lossy().into_owned();
        let text = std::fs::read_to_string(file).expect("spec");
        let f = parse_spec(&text).expect("spec parses");
        if !f.existentials().is_empty() {
            problems.push(format!("{name}: has existential copies"));
            continue;
        }
        let r = run(&f);
        let closed = r.c.as_ref().is_some_and(|c| c.free_params().is_empty() && c.free_vars().is_empty());
        let Some(xi) = &r.xi else {
            problems.push(format!("{name}: no postcondition"));
            continue;
        };
        let (direct, same_sp) = direct_sp(&f, xi);
        if !closed {
            problems.push(format!("{name}: restriction not closed"));
        }
        if !same_sp {
            problems.push(format!("{name}: xi differs from the direct sp"));
        }
        if r.verdict.is_verified() != direct {
            problems.push(format!("{name}: verdict {} but direct sp says valid={direct}", r.verdict));
        }
        verified += r.verdict.is_verified() as usize;
    }
    Outcome::new(
        files.len() == 10 && problems.is_empty(),
        format!("{} specs, {verified} verified, closed restrictions, xi and verdicts agree with direct sp{}", files.len(), if problems.is_empty() {
            String::new()
        } else {
            format!("; PROBLEMS: {}", problems.join(", "))
        }),
    )
}

fn suite() -> Outcome {
    let report = run_suite(&corpus(), &config()).expect("suite runs");
    println!("{}", report.table());
    let slowest = report.entries.iter().map(|e| e.time).max().unwrap_or_default();
    let fast = report.entries.iter().all(|e| e.time < SUITE_SPEC_LIMIT);
    Outcome::new(
        fast && report.all_passed() && !report.entries.is_empty(),
        format!(
            "{} specs, all expectations met: {}, slowest {:.0} ms",
            report.entries.len(),
            report.all_passed(),
            slowest.as_secs_f64() * 1e3
        ),
    )
}

type Criterion = fn() -> Outcome;

#[test]
fn acceptance() {
    let criteria: [(&str, Criterion); 9] = [
        ("1 choice example postcondition", ex2_postcondition),
        ("2 choice example final query", ex2_final_query),
        ("3 loop alignment, hinted and automatic", ex1_alignment),
        ("4 generalized non-interference", gni),
        ("5 negative control", negative_control),
        ("6 random postconditions are parametric postconditions", prop4),
        ("7 loop-free verdicts match the oracle", loopfree_decision),
        ("8 k-safety degenerates to sp + implication", ksafety),
        ("9 corpus suite timing", suite),
    ];
    let mut undocumented = Vec::new();
    for (name, check) in criteria {
        let o = check();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass && !o.documented {
            undocumented.push(name);
        }
    }
    assert!(undocumented.is_empty(), "failing criteria: {undocumented:?}");
}
