use std::path::Path;

use forex_core::ast::CmpOp;
use forex_core::formula::{Formula, NameSupply, ParamOrigin, Symbol, Term};
use forex_core::smt::{emit, final_validity_query, resolve_solver_path, SatOutcome, SmtError, Solver, SolverConfig};
use forex_core::{parse_spec, verify, VarName, VerifyConfig};

fn solver() -> Solver {
    Solver::new(SolverConfig::new(resolve_solver_path(None)))
}

fn v(name: &str, copy: u32) -> VarName {
    VarName::indexed(name, copy)
}

fn ge(a: Term, b: i64) -> Formula {
    Formula::atom(CmpOp::Ge, a, Term::lit(b))
}

#[test]
fn constants_decide_themselves() {
    let s = solver();
    assert_eq!(s.check_closed(&Formula::False).unwrap().outcome, SatOutcome::Unsat);
    assert_eq!(s.check_closed(&Formula::True).unwrap().outcome, SatOutcome::Sat);
}

#[test]
fn open_formulas_are_rejected_by_check_closed() {
    let f = ge(Term::var(&v("x", 1)), 0);
    assert!(matches!(solver().check_closed(&f), Err(SmtError::NotClosed(_))));
}

#[test]
fn final_query_of_the_choice_example() {
    let names = NameSupply::new();
    let mu = Term::param(names.fresh_param(ParamOrigin::ExistentialChoice { var: v("y", 2) }));
    let (x, y) = (Term::var(&v("x", 1)), Term::var(&v("y", 2)));
    let xi = Formula::and([ge(x.clone(), 9), Formula::eq(y.clone(), mu.clone())]);
    let c = ge(mu, 2);
    let u = [v("x", 1)].into_iter().collect();
    let e = [v("y", 2)].into_iter().collect();
    let s = solver();

    let holds = final_validity_query(&xi, &c, &Formula::eq(x.clone(), y.clone()), &u, &e).unwrap();
    assert!(holds.is_closed());
    assert_eq!(s.check_closed(&holds).unwrap().outcome, SatOutcome::Sat);

    // The parameter is chosen after x, so mu = x - 1 serves this one.
    let shifted = Formula::eq(x.clone(), Term::add(y.clone(), Term::lit(1)));
    let still_holds = final_validity_query(&xi, &c, &shifted, &u, &e).unwrap();
    assert_eq!(s.check_closed(&still_holds).unwrap().outcome, SatOutcome::Sat);

    let too_small = Formula::and([Formula::eq(x, y.clone()), Formula::atom(CmpOp::Lt, y, Term::lit(2))]);
    let fails = final_validity_query(&xi, &c, &too_small, &u, &e).unwrap();
    assert_eq!(s.check_closed(&fails).unwrap().outcome, SatOutcome::Unsat);

    let useless = final_validity_query(&xi, &Formula::False, &Formula::True, &u, &e).unwrap();
    assert_eq!(s.check_closed(&useless).unwrap().outcome, SatOutcome::Unsat);
}

#[test]
fn final_query_rejects_unhoused_symbols() {
    let stray = ge(Term::var(&v("w", 9)), 0);
    let u = [v("x", 1)].into_iter().collect();
    let e = Default::default();
    assert!(matches!(final_validity_query(&stray, &Formula::True, &Formula::True, &u, &e), Err(SmtError::Unhoused(_))));
}

#[test]
fn restriction_satisfiability() {
    let names = NameSupply::new();
    let mu = Term::param(names.fresh_param(ParamOrigin::ExistentialChoice { var: v("y", 2) }));
    let s = solver();
    assert!(s.check_restriction_sat(&ge(mu.clone(), 2)).unwrap().outcome.is_sat());
    let empty = Formula::and([ge(mu.clone(), 2), Formula::atom(CmpOp::Le, mu, Term::lit(1))]);
    assert!(s.check_restriction_sat(&empty).unwrap().outcome.is_unsat());
    assert!(s.check_restriction_sat(&Formula::False).unwrap().outcome.is_unsat());
    assert!(matches!(s.check_restriction_sat(&ge(Term::var(&v("x", 1)), 0)), Err(SmtError::NotParametric(_))));
}

#[test]
fn equivalence_checks() {
    let names = NameSupply::new();
    let mu = Term::param(names.fresh_param(ParamOrigin::ExistentialChoice { var: v("y", 2) }));
    let (x, y) = (v("x", 1), v("y", 2));
    let closed = Formula::forall(
        [Symbol::var(&x), Symbol::var(&y)],
        Formula::implies(
            Formula::and([ge(Term::var(&x), 9), Formula::eq(Term::var(&y), mu.clone())]),
            ge(Term::var(&y), 2),
        ),
    );
    let s = solver();
    assert!(s.check_equiv(&closed, &ge(mu, 2)).unwrap().outcome.is_unsat());

    let pos = Formula::atom(CmpOp::Gt, Term::var(&x), Term::lit(0));
    let nonneg = ge(Term::var(&x), 0);
    assert!(s.check_equiv(&pos, &pos).unwrap().outcome.is_unsat());
    let diff = s.check_equiv(&pos, &nonneg).unwrap();
    assert!(diff.outcome.is_sat());
    let model = diff.model.expect("distinguishing model");
    assert_eq!(model.get(&Symbol::var(&x)), Some(&0.into()));
}

#[test]
fn logic_follows_the_formula() {
    let x = Term::var(&v("x", 1));
    let linear = ge(x.clone(), 0);
    let nonlinear = ge(Term::mul(x.clone(), x), 0);
    assert_eq!(emit::logic_for(&linear), "QF_LIA");
    assert_eq!(emit::logic_for(&nonlinear), "QF_NIA");
    let q = Formula::forall([Symbol::var(&v("x", 1))], linear);
    assert_eq!(emit::logic_for(&q), "LIA");
}

#[test]
fn missing_solver_is_reported() {
    let s = Solver::new(SolverConfig::new("/nonexistent/solver"));
    assert!(matches!(s.check_closed(&Formula::True), Err(SmtError::BinaryMissing(_))));
}

#[test]
fn dumped_queries_are_accepted_by_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut cfg = VerifyConfig { solver: SolverConfig::new(resolve_solver_path(None)), ..VerifyConfig::default() };
    let names = ["ex2.feht", "gni_intro.feht", "ex1_auto.feht", "countdown.feht"];
    for name in names {
        cfg.solver.dump_dir = Some(dir.path().join(name));
        let f = parse_spec(&std::fs::read_to_string(corpus.join(name)).unwrap()).unwrap();
        verify(&f, &cfg).unwrap();
    }
    let s = solver();
    let mut count = 0;
    for name in names {
        for entry in std::fs::read_dir(dir.path().join(name)).unwrap() {
            let script = std::fs::read_to_string(entry.unwrap().path()).unwrap();
            let verdict = s.run(&script, false).unwrap();
            assert!(!verdict.raw.contains("(error"), "{}", verdict.raw);
            count += 1;
        }
    }
    assert!(count > 50, "{count} queries");
}
