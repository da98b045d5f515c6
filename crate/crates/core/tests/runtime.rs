use gsynth_core::lang::{parse_fggm, parse_formula, parse_program, BaseType, FggmDef};
use gsynth_core::runtime::gm::zoo;
use gsynth_core::runtime::*;
use gsynth_core::symreg;
use gsynth_core::verify::{ProgramSpec, SolverConfig, VerificationContext};

const FGGM: &str = include_str!("../assets/bounded_param.fggm");

const POWER: &str = "function agent(x: real): (real) {
  if (x <= 0.0) { return 0.0; }
  var a: real := boundedParam(1.0, 1.5);
  var d: real := boundedParam(0.5, 0.8);
  assert x >= 0.0;
  var pow_x: real := pow(x, d);
  assert (d <= 0.8); assert (d >= 0.5);
  assert (x <= 1.0) ==> (pow_x >= pow(x, 0.8));
  assert (x >= 1.0) ==> (pow_x >= pow(x, 0.5));
  assert (x >= 0.0) ==> (pow(x, 0.5) == sqrt(x));
  var y: real := a * pow_x;
  return y;
}";

fn bounded() -> FggmDef {
    parse_fggm(FGGM).unwrap()
}

fn real_args(xs: &[f64]) -> Vec<Value<f64>> {
    xs.iter().map(|&x| Value::Real(x)).collect()
}

fn constant(v: f64) -> Box<dyn GenerativeModel<f64>> {
    Box::new(zoo::Constant { inputs: vec![BaseType::Real], value: Value::Real(v) })
}

fn tuned_models() -> ModelBindings<f64> {
    let mut m = ModelBindings::new();
    m.insert("boundedParam#0".into(), constant(1.11));
    m.insert("boundedParam#1".into(), constant(0.503));
    m
}

#[test]
fn power_law_agent_with_tuned_constants() {
    let lib = symreg::library::<f64>();
    let prog = parse_program(POWER).unwrap();
    let agent = Agent::new(&prog, &lib, &[bounded()]).unwrap();
    let models = tuned_models();
    let mut rng = Rng::new(0);
    let (y, calls) = agent.run_args(&models, &real_args(&[2.0]), &mut rng).unwrap();
    let expected = 1.11 * 2f64.powf(0.503);
    assert!((y.as_real().unwrap() - expected).abs() < 1e-12);
    assert!((expected - 1.573).abs() < 1e-3);
    assert_eq!(calls.len(), 2);
    assert!(calls.iter().all(|c| c.accepted == Some(1) && !c.fallback));

    let (y, calls) = agent.run_args(&models, &real_args(&[-1.0]), &mut rng).unwrap();
    assert_eq!(y, Value::Real(0.0));
    assert!(calls.is_empty());

    let id = parse_program("function f(x: real): (real) { return x; }").unwrap();
    assert_eq!(run_program(&id, &lib, &real_args(&[7.0])).unwrap(), Value::Real(7.0));
}

fn lu(l: f64, u: f64) -> Valuation<f64> {
    [("l".to_string(), Value::Real(l)), ("u".to_string(), Value::Real(u))].into()
}

#[test]
fn contract_check_examples() {
    let lib = symreg::library::<f64>();
    let g = bounded();
    assert!(!contract_check(&g, &lu(0.0, 1.0), &Value::Real(2.0), &lib, None));
    assert!(contract_check(&g, &lu(0.0, 1.0), &Value::Real(0.42), &lib, None));
    // Wrong output type is never accepted.
    assert!(!contract_check(&g, &lu(0.0, 1.0), &Value::Bool(true), &lib, None));
}

#[test]
fn quantified_contracts_go_to_the_solver() {
    let lib = symreg::library::<f64>();
    let ctx = VerificationContext::new(symreg::signatures(), symreg::axioms(), symreg::models().signatures(), SolverConfig::default());
    let mut g = bounded();
    g.params = vec![gsynth_core::lang::Param::new("d", BaseType::Real)];
    g.requires = parse_formula("d >= 0.5").unwrap();
    g.ensures = parse_formula("forall z: real :: z >= 1.0 ==> pow(z, result) >= pow(z, 0.5)").unwrap();
    let d: Valuation<f64> = [("d".to_string(), Value::Real(0.7))].into();
    assert!(contract_check(&g, &d, &Value::Real(0.7), &lib, Some(&ctx)));
    // Exponent below 0.5: the monotonicity axiom cannot establish it.
    assert!(!contract_check(&g, &d, &Value::Real(0.3), &lib, Some(&ctx)));
    // Without a solver a quantified contract is never accepted.
    assert!(!contract_check(&g, &d, &Value::Real(0.7), &lib, None));
}

fn prepared() -> PreparedFggm {
    PreparedFggm::new(&bounded(), &symreg::signatures()).unwrap()
}

#[test]
fn sampler_examples() {
    let lib = symreg::library::<f64>();
    let g = prepared();
    let mut rng = Rng::new(1);
    let args = real_args(&[0.0, 1.0]);
    let (y, rec) = fggm_call(&g, constant(5.0).as_ref(), &args, &lib, 5, None, &mut rng, "s").unwrap();
    assert_eq!((y, rec.fallback, rec.draws), (Value::Real(1.0), true, 5));
    let (y, rec) = fggm_call(&g, constant(0.42).as_ref(), &args, &lib, 5, None, &mut rng, "s").unwrap();
    assert_eq!((y, rec.accepted, rec.fallback), (Value::Real(0.42), Some(1), false));
    let seq = zoo::Sequence::new(vec![BaseType::Real], real_args(&[3.0, -1.0, 0.7]));
    let (y, rec) = fggm_call(&g, &seq, &args, &lib, 5, None, &mut rng, "s").unwrap();
    assert_eq!((y, rec.accepted, rec.draws), (Value::Real(0.7), Some(3), 3));
}

#[test]
fn guarded_calls_always_meet_their_contract() {
    let lib = symreg::library::<f64>();
    let g = prepared();
    let reg = symreg::models();
    let zoo_models: Vec<(&str, Box<dyn GenerativeModel<f64>>)> = vec![
        ("always-valid", Box::new(zoo::FromInput { inputs: vec![BaseType::Real], output: BaseType::Real, f: |_| Value::Real(0.0) })),
        ("always-invalid", constant(1e6)),
        ("mixed", Box::new(zoo::Sequence::new(vec![BaseType::Real], real_args(&[1e6, -1e6, 1e6, 0.0, 1e6, -1e6, 1e6])))),
        ("random", Box::new(zoo::UniformReal { inputs: vec![BaseType::Real], lo: -20.0, hi: 20.0 })),
        ("failing", Box::new(zoo::Failing { inputs: vec![BaseType::Real], output: BaseType::Real })),
        ("network", reg.instantiate("neural2", &reg.random_params("neural2", &mut Rng::new(3))).unwrap()),
    ];
    for (name, gm) in &zoo_models {
        let mut rng = Rng::new(7);
        let (mut fallbacks, mut violations) = (0, 0);
        for _ in 0..10_000 {
            // φ-satisfying arguments; the always-valid model proposes 0,
            // so make sure 0 lies inside [l, u].
            let l = -rng.uniform(0.0, 5.0);
            let u = rng.uniform(0.0, 5.0);
            let (y, rec) = fggm_call(&g, gm.as_ref(), &real_args(&[l, u]), &lib, 5, None, &mut rng, "s").unwrap();
            let y = y.as_real().unwrap();
            if !(l <= y && y <= u) {
                violations += 1;
            }
            assert!((1..=5).contains(&rec.draws));
            assert_eq!(rec.fallback, rec.accepted.is_none());
            assert!(!rec.fallback || rec.draws == 5);
            fallbacks += rec.fallback as usize;
        }
        assert_eq!(violations, 0, "{name}");
        match *name {
            "always-valid" => assert_eq!(fallbacks, 0),
            "always-invalid" | "failing" => assert_eq!(fallbacks, 10_000),
            _ => {}
        }
    }
}

#[test]
fn executions_are_reproducible() {
    let lib = symreg::library::<f64>();
    let prog = parse_program(POWER).unwrap();
    let agent = Agent::new(&prog, &lib, &[bounded()]).unwrap();
    let reg = symreg::models();
    let theta = reg.random_params("neural2", &mut Rng::new(5));
    let models = || {
        let mut m: ModelBindings<f64> = ModelBindings::new();
        m.insert("boundedParam".into(), reg.instantiate("neural2", &theta).unwrap());
        m
    };
    let input: Valuation<f64> = [("x".to_string(), Value::Real(2.5))].into();
    let (a, ta) = agent.run(&models(), &input, &mut Rng::new(9)).unwrap();
    let (b, tb) = agent.run(&models(), &input, &mut Rng::new(9)).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta.to_json(), tb.to_json());
}

fn running_spec() -> ProgramSpec {
    let inst = symreg::make_instance(&symreg::Manifest::new(symreg::RUNNING, 0.05, 1)).unwrap();
    inst.spec()
}

#[test]
fn fuzzing_a_verified_agent_finds_nothing() {
    let lib = symreg::library::<f64>();
    let prog = parse_program(POWER).unwrap();
    let agent = Agent::new(&prog, &lib, &[bounded()]).unwrap();
    let reg = symreg::models();
    let sampler = |rng: &mut Rng| {
        let mut m: ModelBindings<f64> = ModelBindings::new();
        for site in ["boundedParam#0", "boundedParam#1"] {
            m.insert(site.into(), reg.instantiate("neural2", &reg.random_params("neural2", rng)).unwrap());
        }
        m
    };
    let cfg = FuzzConfig { n_inputs: 10_000, n_batches: 100, ..FuzzConfig::default() };
    let report = fuzz_spec(&agent, &running_spec(), &InputDomain::default().with("x", -1.0, 4.0), sampler, &cfg);
    assert_eq!((report.runs, report.violations, report.faults), (10_000, 0, 0));
}

#[test]
fn corrupted_fallback_is_caught() {
    let lib = symreg::library::<f64>();
    let prog = parse_program(POWER).unwrap();
    let corrupt = parse_fggm(&FGGM.replace("return min(max(l, y), u);", "return y;")).unwrap();
    let agent = Agent::new(&prog, &lib, &[corrupt]).unwrap();
    // Exponents far outside [0.5, 0.8] are rejected and passed through.
    let sampler = |_: &mut Rng| {
        let mut m: ModelBindings<f64> = ModelBindings::new();
        m.insert("boundedParam#0".into(), constant(1.2));
        m.insert("boundedParam#1".into(), constant(3.0));
        m
    };
    let report = fuzz_spec(&agent, &running_spec(), &InputDomain::default().with("x", 0.0, 4.0), sampler, &FuzzConfig { n_inputs: 1000, n_batches: 10, ..FuzzConfig::default() });
    assert!(report.violations >= 1);
    assert!(!report.witnesses.is_empty());
}

#[test]
fn unsatisfiable_precondition_draws_nothing() {
    let lib = symreg::library::<f64>();
    let prog = parse_program(POWER).unwrap();
    let agent = Agent::new(&prog, &lib, &[bounded()]).unwrap();
    let mut spec = running_spec();
    spec.requires = parse_formula("x >= 100.0").unwrap();
    let report = fuzz_spec(&agent, &spec, &InputDomain::default().with("x", -1.0, 4.0), |_| tuned_models(), &FuzzConfig { n_inputs: 500, n_batches: 5, max_tries: 20, seed: 1 });
    assert_eq!((report.inputs_drawn, report.violations), (0, 0));
    assert!(report.note.is_some());
}
