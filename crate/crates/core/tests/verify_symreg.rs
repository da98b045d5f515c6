use gsynth_core::lang::{parse_fggm, parse_program};
use gsynth_core::symreg;
use gsynth_core::verify::{validate_fggm, verify_program, SolverConfig, VerificationContext};

const FGGM: &str = include_str!("../assets/bounded_param.fggm");

const AFFINE: &str = "function agent(x: real): (real) {
  var a: real := boundedParam(0.0, 1.0);
  var b: real := boundedParam(0.0, 1.0);
  var linear_x: real := a * x;
  var y: real := linear_x + b;
  return y;
}";

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

fn ctx() -> VerificationContext {
    VerificationContext::new(symreg::signatures(), symreg::axioms(), symreg::models().signatures(), SolverConfig::default())
}

#[test]
fn bounded_param_is_valid() {
    let def = parse_fggm(FGGM).unwrap();
    let errs = validate_fggm(&def, &ctx()).unwrap();
    assert!(errs.is_empty(), "{errs:?}");
}

#[test]
fn guarded_power_law_verifies_and_affine_is_pruned() {
    let def = parse_fggm(FGGM).unwrap();
    let c = ctx().with_fggms(&[def]);
    let inst = symreg::make_instance(&symreg::Manifest::new(symreg::RUNNING, 0.05, 1)).unwrap();
    let spec = inst.spec();
    let t = std::time::Instant::now();
    let good = verify_program(&parse_program(POWER).unwrap(), &c, Some(&spec)).unwrap();
    eprintln!("power: {:?} {:?}", t.elapsed(), good.messages());
    assert!(good.verified, "{:#?}", good.messages());
    let bad = verify_program(&parse_program(AFFINE).unwrap(), &c, Some(&spec)).unwrap();
    eprintln!("affine: {:?}", bad.messages());
    assert!(!bad.verified);
}
