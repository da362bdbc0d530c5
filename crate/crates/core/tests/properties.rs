use std::collections::BTreeMap;

use forex_core::ast::{ArithExpr, ArithOp, BoolExpr, CmpOp, Stmt, VarName};
use forex_core::formula::{eval, eval_term, Env, Formula, NameSupply, ParamEvaluation, ParamOrigin, QuantBounds, Symbol, Term};
use forex_core::interp::{exec_all, State};
use forex_core::parser::{parse_spec, print_program};
use proptest::prelude::*;

const PROGRAM_VARS: [&str; 2] = ["x", "y"];
const FORMULA_VARS: [&str; 3] = ["x", "y", "z"];

fn arith(vars: Vec<VarName>) -> BoxedStrategy<ArithExpr> {
    let leaf = prop_oneof![
        (-3i64..=3).prop_map(ArithExpr::lit),
        proptest::sample::select(vars).prop_map(ArithExpr::Var),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        (prop_oneof![Just(ArithOp::Add), Just(ArithOp::Sub), Just(ArithOp::Mul)], inner.clone(), inner)
            .prop_map(|(op, a, b)| ArithExpr::bin(op, a, b))
    })
    .boxed()
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    proptest::sample::select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge])
}

fn boolean(vars: Vec<VarName>) -> BoxedStrategy<BoolExpr> {
    let leaf = prop_oneof![
        1 => Just(BoolExpr::True),
        1 => Just(BoolExpr::False),
        6 => (cmp_op(), arith(vars.clone()), arith(vars)).prop_map(|(op, a, b)| BoolExpr::cmp(op, a, b)),
    ];
    leaf.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(BoolExpr::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| BoolExpr::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| BoolExpr::or(a, b)),
        ]
    })
    .boxed()
}

fn plain_vars() -> Vec<VarName> {
    PROGRAM_VARS.iter().map(|v| VarName::new(v)).collect()
}

fn indexed_vars() -> Vec<VarName> {
    FORMULA_VARS.iter().map(|v| VarName::indexed(v, 1)).collect()
}

/// Programs over `x` and `y` with AST size at most 8.
fn program() -> impl Strategy<Value = Stmt> {
    let vars = plain_vars();
    let leaf = prop_oneof![
        1 => Just(Stmt::Skip),
        4 => (proptest::sample::select(vars.clone()), arith(vars.clone())).prop_map(|(x, e)| Stmt::assign(&x, e)),
        1 => proptest::sample::select(vars.clone()).prop_map(|x| Stmt::havoc(&x)),
        2 => boolean(vars.clone()).prop_map(Stmt::Assume),
    ];
    let guards = boolean(vars);
    leaf.prop_recursive(3, 8, 2, move |inner| {
        prop_oneof![
            3 => (inner.clone(), inner.clone()).prop_map(|(a, b)| Stmt::seq(a, b)),
            2 => (guards.clone(), inner.clone(), inner.clone()).prop_map(|(b, p, q)| Stmt::if_(b, p, q)),
            1 => (guards.clone(), inner).prop_map(|(b, p)| Stmt::while_(b, p)),
        ]
    })
    .prop_filter("AST size at most 8", |p| p.size() <= 8)
    // A havoc inside a loop multiplies the paths on every iteration.
    .prop_filter("no havoc under a loop", |p| !havoc_in_loop(p))
}

fn havoc_in_loop(p: &Stmt) -> bool {
    let mut found = false;
    p.for_each(&mut |s| {
        if let Stmt::While(_, body) = s {
            body.for_each(&mut |t| found |= matches!(t, Stmt::Havoc(_)));
        }
    });
    found
}

fn states(vars: &[VarName], d: i64) -> Vec<State<i64>> {
    let mut out = vec![State::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|s| {
                (-d..=d).map(move |z| {
                    let mut s = s.clone();
                    s.set(v.clone(), z);
                    s
                })
            })
            .collect();
    }
    out
}

fn has_havoc_or_assume(p: &Stmt) -> bool {
    let mut found = false;
    p.for_each(&mut |s| found |= matches!(s, Stmt::Havoc(_) | Stmt::Assume(_)));
    found
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn normalize_head_is_idempotent(p in program()) {
        let once = p.normalize_head();
        prop_assert_eq!(once.normalize_head(), once);
    }

    #[test]
    fn normalize_head_preserves_final_states(p in program()) {
        let q = p.normalize_head();
        for sigma in states(&plain_vars(), 2) {
            let (Ok(a), Ok(b)) = (exec_all::<i64>(&p, &sigma, 2, 64), exec_all::<i64>(&q, &sigma, 2, 64)) else { continue };
            if a.bound_exceeded || b.bound_exceeded {
                continue;
            }
            prop_assert_eq!(a.finals, b.finals, "from {}", sigma);
        }
    }

    #[test]
    fn alpha_rename_commutes_with_normalize_and_is_invertible(p in program()) {
        let renamed = p.alpha_rename(1).unwrap();
        prop_assert_eq!(renamed.strip_copies(), p.clone());
        prop_assert_eq!(renamed.normalize_head(), p.normalize_head().alpha_rename(1).unwrap());
    }

    #[test]
    fn deterministic_programs_have_one_final_state(p in program()) {
        prop_assume!(!has_havoc_or_assume(&p));
        for sigma in states(&plain_vars(), 2) {
            let Ok(r) = exec_all::<i64>(&p, &sigma, 2, 64) else { continue };
            if !r.bound_exceeded {
                prop_assert_eq!(r.finals.len(), 1);
            }
        }
    }

    #[test]
    fn final_states_grow_with_the_havoc_range(p in program()) {
        for sigma in states(&plain_vars(), 1) {
            let (Ok(small), Ok(large)) = (exec_all::<i64>(&p, &sigma, 1, 64), exec_all::<i64>(&p, &sigma, 2, 64)) else { continue };
            if small.bound_exceeded || large.bound_exceeded {
                continue;
            }
            prop_assert!(small.finals.is_subset(&large.finals));
        }
    }

    #[test]
    fn skip_suffix_and_reassociation_keep_semantics(a in program(), b in program(), c in program()) {
        let left = Stmt::seq(Stmt::seq(a.clone(), b.clone()), c.clone());
        let right = Stmt::seq(a.clone(), Stmt::seq(b, c));
        let padded = Stmt::seq(a.clone(), Stmt::Skip);
        for sigma in states(&plain_vars(), 2) {
            let run = |p: &Stmt| exec_all::<i64>(p, &sigma, 2, 64).ok().filter(|r| !r.bound_exceeded).map(|r| r.finals);
            if let (Some(l), Some(r)) = (run(&left), run(&right)) {
                prop_assert_eq!(l, r);
            }
            if let (Some(l), Some(r)) = (run(&padded), run(&a)) {
                prop_assert_eq!(l, r);
            }
        }
    }

    #[test]
    fn printed_programs_parse_back(p in program()) {
        let text = format!("[forall]\n{}\n[pre] true\n[post] true\n", print_program(&p));
        let f = parse_spec(&text).unwrap();
        prop_assert_eq!(print_program(&f.source_program(1).unwrap()), print_program(&p));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn substitution_lemma(
        phi in boolean(indexed_vars()),
        e in arith(indexed_vars()),
        target in proptest::sample::select(indexed_vars()),
        values in proptest::collection::vec(-3i64..=3, 3),
    ) {
        let names = NameSupply::new();
        let phi = Formula::from(&phi);
        let e = Term::from(&e);
        let x = Symbol::var(&target);
        let substituted = phi.substitute(&x, &e, &names);

        let mut env: Env<i64> = Env::new();
        for (v, z) in indexed_vars().iter().zip(&values) {
            env.insert(Symbol::var(v), *z);
        }
        let bounds = QuantBounds::default();
        let Ok(value) = eval_term(&e, &env) else { return Ok(()) };
        let lhs = eval(&substituted, &mut env.clone(), &bounds);
        let mut updated = env.clone();
        updated.insert(x, value);
        let rhs = eval(&phi, &mut updated, &bounds);
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #[test]
    fn instantiation_removes_every_parameter(
        phi in boolean(indexed_vars()),
        picks in proptest::collection::vec(proptest::sample::select(indexed_vars()), 1..3),
        values in proptest::collection::vec(-5i64..=5, 3),
    ) {
        let names = NameSupply::new();
        let mut f = Formula::from(&phi);
        let mut kappa = ParamEvaluation::new();
        let mut map = BTreeMap::new();
        for (v, z) in picks.iter().zip(&values) {
            let p = names.fresh_param(ParamOrigin::ExistentialChoice { var: v.clone() });
            map.insert(Symbol::var(v), Term::param(p));
            kappa.insert(p, *z);
        }
        f = f.substitute_all(&map, &names);
        let ground = f.instantiate_params(&kappa).unwrap();
        prop_assert!(ground.free_params().is_empty());
    }
}

