mod common;

use common::qf;
use gsynth_core::lang::{parse_formula, BaseType, Expr, Formula};
use gsynth_core::logic::{encode_solver, eval_qf, substitute, Axiom, EncodeError, SmtOptions};
use gsynth_core::runtime::{Rng, Valuation, Value};
use gsynth_core::symreg;
use gsynth_core::verify::solver::{run_script, SatResult};
use gsynth_core::verify::SolverConfig;
use std::collections::BTreeMap;
use std::time::Duration;

fn val(pairs: &[(&str, f64)]) -> Valuation<f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), Value::Real(*v))).collect()
}

fn f(s: &str) -> Formula {
    parse_formula(s).unwrap()
}

#[test]
fn substitution_examples() {
    let v = val(&[("l", 0.0), ("u", 1.0), ("f", 0.5)]);
    assert_eq!(substitute(&f("l <= f && f <= u"), &v, None).unwrap(), f("0.0 <= 0.5 && 0.5 <= 1.0"));
    assert_eq!(substitute(&f("forall z: real :: z >= x"), &val(&[("x", 2.0)]), None).unwrap(), f("forall z: real :: z >= 2.0"));
    let g = f("forall z: real :: z >= x && y == sqrt(z)");
    assert_eq!(substitute(&g, &Valuation::<f64>::new(), None).unwrap(), g);
}

#[test]
fn evaluation_examples() {
    let lib = symreg::library::<f64>();
    assert!(eval_qf(&f("0.0 <= 0.5 && 0.5 <= 1.0"), &Valuation::new(), &lib).unwrap());
    assert_eq!(eval_qf(&f("f >= sqrt(x)"), &val(&[("x", 4.0), ("f", 2.0)]), &lib).unwrap(), 2.0 >= 4f64.sqrt());
    let expected = 0.4 >= 0.25f64.powf(0.8);
    assert!(expected);
    assert_eq!(eval_qf(&f("x <= 1.0 ==> p >= pow(x, 0.8)"), &val(&[("x", 0.25), ("p", 0.4)]), &lib).unwrap(), expected);
    // A failing library precondition is an error, not `false`.
    assert!(eval_qf(&f("sqrt(x) >= 0.0"), &val(&[("x", -1.0)]), &lib).is_err());
}

#[test]
fn evaluation_agrees_with_truth_tables() {
    let lib = symreg::library::<f64>();
    let mut rng = Rng::new(11);
    let mut seen = [0usize; 2];
    for _ in 0..3000 {
        let phi = qf::formula(&mut rng, 3);
        let env = qf::valuation(&mut rng);
        let v: Valuation<f64> = env.iter().map(|(k, x)| (k.clone(), Value::Real(*x))).collect();
        let got = eval_qf(&phi, &v, &lib).unwrap();
        assert_eq!(got, qf::oracle(&phi, &env), "{phi:?} at {env:?}");
        seen[got as usize] += 1;
    }
    assert!(seen[0] > 300 && seen[1] > 300, "{seen:?}");
}

#[test]
fn substitution_then_evaluation_commutes() {
    let lib = symreg::library::<f64>();
    let mut rng = Rng::new(12);
    for _ in 0..1000 {
        let phi = qf::formula(&mut rng, 3);
        let env = qf::valuation(&mut rng);
        let v: Valuation<f64> = env.iter().map(|(k, x)| (k.clone(), Value::Real(*x))).collect();
        let ground = substitute(&phi, &v, None).unwrap();
        assert_eq!(eval_qf(&ground, &Valuation::new(), &lib).unwrap(), eval_qf(&phi, &v, &lib).unwrap());
    }
}

#[test]
fn monotonicity_axiom_is_declared_uninterpreted() {
    let ax = Axiom::new("mono", f("forall x: real, d1: real, d2: real :: x >= 1.0 && d1 >= d2 ==> pow(x, d1) >= pow(x, d2)"));
    let script = encode_solver(&Formula::Const(true), &[ax], &symreg::signatures(), &BTreeMap::new(), &SmtOptions::default()).unwrap();
    assert!(script.contains("(declare-fun f.pow (Real Real) Real)"), "{script}");
    assert!(script.contains("(forall ((v.x Real) (v.d1 Real) (v.d2 Real))"), "{script}");
    assert!(script.contains("(check-sat)"));
}

#[test]
fn trivial_goal_is_unsat_when_negated() {
    let opts = SmtOptions { timeout_ms: Some(2000), ..SmtOptions::default() };
    let script = encode_solver(&Formula::Const(true), &[], &symreg::signatures(), &BTreeMap::new(), &opts).unwrap();
    assert!(script.contains("(assert (not true))"));
    assert!(script.contains("(set-option :timeout 2000)"));
    assert_eq!(run_script(&SolverConfig::default(), &script, Duration::from_secs(5)).unwrap(), SatResult::Unsat);
}

#[test]
fn unknown_symbols_are_rejected() {
    let r = encode_solver(&f("foo(x) > 0.0"), &[], &symreg::signatures(), &[("x".to_string(), BaseType::Real)].into(), &SmtOptions::default());
    assert!(matches!(r, Err(EncodeError::UnknownSymbol(s)) if s == "foo"));
}

fn ground_arith(rng: &mut Rng, depth: u32) -> Expr {
    use gsynth_core::lang::BinOp;
    if depth == 0 || rng.below(3) == 0 {
        // Small integers written as reals: float arithmetic on them is exact.
        let n = rng.below(21) as i64 - 10;
        let e = Expr::real_text(&format!("{}.0", n.abs()));
        return if n < 0 { Expr::neg(e) } else { e };
    }
    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul][rng.below(3)];
    Expr::bin(op, ground_arith(rng, depth - 1), ground_arith(rng, depth - 1))
}

#[test]
fn solver_verdicts_match_ground_evaluation() {
    use gsynth_core::lang::RelOp;
    let lib = symreg::library::<f64>();
    let cfg = SolverConfig::default();
    let mut rng = Rng::new(13);
    let ops = [RelOp::Eq, RelOp::Ne, RelOp::Lt, RelOp::Gt, RelOp::Le, RelOp::Ge];
    for _ in 0..40 {
        let a = Formula::rel(ops[rng.below(6)], ground_arith(&mut rng, 2), ground_arith(&mut rng, 2));
        let b = Formula::rel(ops[rng.below(6)], ground_arith(&mut rng, 2), ground_arith(&mut rng, 2));
        let g = if rng.below(2) == 0 { Formula::or(a, Formula::not(b)) } else { Formula::implies(a, b) };
        let truth = eval_qf(&g, &Valuation::new(), &lib).unwrap();
        let script = encode_solver(&g, &[], &symreg::signatures(), &BTreeMap::new(), &SmtOptions::default()).unwrap();
        let verdict = run_script(&cfg, &script, Duration::from_secs(5)).unwrap();
        assert_eq!(verdict == SatResult::Unsat, truth, "{g:?}");
    }
}
