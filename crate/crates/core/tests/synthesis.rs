use gsynth_core::lang::{parse_formula, parse_program, BaseType, Param};
use gsynth_core::learn::{bind_models, Example};
use gsynth_core::runtime::gm::zoo;
use gsynth_core::runtime::{Agent, ModelBindings, Rng, Value};
use gsynth_core::symreg;
use gsynth_core::synthesis::templates::{Family, TemplateVariant, BOUNDED_PARAM};
use gsynth_core::synthesis::*;
use gsynth_core::verify::{validate_fggm, verify_program, ProgramSpec, SolverConfig};
use std::sync::{Arc, Mutex};

fn running_task() -> (Task, symreg::SymRegInstance) {
    let inst = symreg::make_instance(&symreg::Manifest::new(symreg::RUNNING, 0.05, 1)).unwrap();
    (Task::symreg(&inst, SolverConfig::default()), inst)
}

fn fig5() -> Vec<TemplateVariant> {
    vec![
        TemplateVariant::new(Family::Affine, &[("a", 0.0, 1.0), ("b", 0.0, 1.0)]),
        TemplateVariant::new(Family::PowerGuarded, &[("a", 1.0, 1.5), ("d", 0.5, 0.8)]),
    ]
}

/// Replays fixed proposals and records every request it receives.
struct Replay {
    proposals: Vec<Proposal>,
    next: usize,
    seen_errors: Arc<Mutex<Vec<Vec<String>>>>,
}

impl Replay {
    fn new(proposals: Vec<Proposal>) -> Self {
        Replay { proposals, next: 0, seen_errors: Arc::default() }
    }
}

impl Planner for Replay {
    fn name(&self) -> &str {
        "replay"
    }
    fn propose(&mut self, req: &PlannerRequest) -> Result<Proposal, PlannerError> {
        self.seen_errors.lock().unwrap().push(req.prior_errors.to_vec());
        let p = self.proposals.get(self.next).cloned().ok_or(PlannerError::Exhausted);
        self.next += 1;
        p
    }
}

fn program_only(src: &str) -> Proposal {
    Proposal { fggms: vec![], program: src.to_string() }
}

const BROKEN_FGGM: &str = "brokenParam ; neural2 ; (l: real, u: real) -> real ;
requires l <= u ;
ensures l <= brokenParam(l, u) && brokenParam(l, u) <= u ;
function prompt(l: real, u: real): (real) { return u - l; } ;
function fallback(l: real, u: real, y: real): (real) { return y; } ;
\"fallback does not clamp\"";

#[test]
fn second_template_verifies_after_the_first_is_pruned() {
    let (task, _) = running_task();
    let mut planner = ScriptedPlanner::new(fig5());
    let out = search_verify(&task, &mut planner, 2, None, None, 0).unwrap();
    let cand = out.candidate.expect("power-law template verifies");
    assert_eq!(cand.attempt, 2);
    assert_eq!(out.attempts.len(), 2);
    assert!(!out.attempts[0].verified && !out.attempts[0].errors.is_empty());
    assert!(cand.source.contains("pow(x, d)"));
}

#[test]
fn invalid_guarded_models_exhaust_the_budget() {
    let (task, _) = running_task();
    let bad = Proposal { fggms: vec![BROKEN_FGGM.into()], program: fig5()[1].render().replace("boundedParam", "brokenParam") };
    let mut planner = Replay::new(vec![bad.clone(), bad.clone(), bad]);
    let out = search_verify(&task, &mut planner, 3, None, None, 0).unwrap();
    assert!(out.candidate.is_none());
    assert_eq!(out.attempts.len(), 3);
    for a in &out.attempts {
        assert!(a.errors.iter().any(|e| e.contains("brokenParam")), "{:?}", a.errors);
    }
}

#[test]
fn errors_of_a_failed_attempt_reach_the_next_proposal() {
    let (task, _) = running_task();
    let bad = Proposal { fggms: vec![BROKEN_FGGM.into()], program: "function agent(x: real): (real) { return 0.0; }".into() };
    let good = Proposal { fggms: vec![BOUNDED_PARAM.into()], program: fig5()[1].render() };
    let mut planner = Replay::new(vec![bad, good]);
    let seen = planner.seen_errors.clone();
    let out = search_verify(&task, &mut planner, 2, None, None, 0).unwrap();
    assert_eq!(out.candidate.unwrap().attempt, 2);
    let seen = seen.lock().unwrap();
    assert!(seen[0].is_empty());
    assert_eq!(seen[1], out.attempts[0].errors);
    assert!(!seen[1].is_empty());
}

fn constant_task(targets: &[f64]) -> Task {
    let (mut task, _) = running_task();
    task.spec.ensures = parse_formula("result >= 0.0").unwrap();
    task.train = targets.iter().enumerate().map(|(i, &y)| Example { args: vec![Value::Real(i as f64)], target: y }).collect();
    task
}

#[test]
fn returns_the_pool_argmin() {
    // Targets all 1: NMSE of a constant c is (c − 1)².
    let task = constant_task(&[1.0; 4]);
    let mut planner = Replay::new(vec![
        program_only("function agent(x: real): (real) { return 1.5477225575051661; }"),
        program_only("function agent(x: real): (real) { return 1.316227766016838; }"),
        program_only("function agent(x: real): (real) { return 2.0; }"),
    ]);
    let cfg = SynthesisConfig { total_budget: 3, per_candidate_budget: 1, ..SynthesisConfig::default() };
    let run = run_synthesis(&task, &mut planner, &cfg).unwrap();
    assert_eq!(run.pool.len(), 3);
    let losses: Vec<f64> = run.pool.iter().map(|c| c.train_loss).collect();
    assert!((losses[0] - 0.3).abs() < 1e-9 && (losses[1] - 0.1).abs() < 1e-9 && (losses[2] - 1.0).abs() < 1e-12, "{losses:?}");
    let best = run.best().unwrap();
    assert!((best.train_loss - 0.1).abs() < 1e-9);
    assert!(run.pool.iter().all(|c| best.train_loss <= c.train_loss));
}

#[test]
fn failed_search_returns_nothing() {
    let task = constant_task(&[1.0; 4]);
    let mut planner = Replay::new(vec![]);
    let run = run_synthesis(&task, &mut planner, &SynthesisConfig::default()).unwrap();
    assert!(run.best().is_none() && run.pool.is_empty());
}

#[test]
fn budget_is_charged_per_search_call() {
    let task = constant_task(&[1.0; 4]);
    let mut planner = Replay::new(vec![]);
    let cfg = SynthesisConfig { total_budget: 5, per_candidate_budget: 2, ..SynthesisConfig::default() };
    let run = run_synthesis(&task, &mut planner, &cfg).unwrap();
    let charged: Vec<usize> = run.iterations.iter().map(|i| i.budget_charged).collect();
    assert_eq!(charged, vec![2, 2, 2]);
    assert!(run.proposals <= cfg.total_budget);
    assert!(run.iterations.iter().all(|i| i.attempts.len() <= cfg.per_candidate_budget));

    let mut planner = Replay::new(vec![program_only("function agent(x: real): (real) { return 1.0; }")]);
    let exact = SynthesisConfig { exact_budget: true, ..cfg };
    let run = run_synthesis(&task, &mut planner, &exact).unwrap();
    // One attempt charged for the first (successful) call, then two per call.
    assert_eq!(run.iterations[0].budget_charged, 1);
    assert!(run.proposals <= exact.total_budget);
}

#[test]
fn invalid_configuration_is_rejected() {
    let task = constant_task(&[1.0]);
    let cfg = SynthesisConfig { total_budget: 1, per_candidate_budget: 2, ..SynthesisConfig::default() };
    assert!(matches!(run_synthesis(&task, &mut Replay::new(vec![]), &cfg), Err(SynthesisError::Config(_))));
}

#[test]
fn feedback_lists_each_failed_example() {
    // `return x` on inputs 0..9; three targets are far off.
    let mut targets: Vec<f64> = (0..10).map(|i| i as f64).collect();
    targets[0] = 0.0;
    for i in [2, 5, 7] {
        targets[i] += 5.0;
    }
    let task = constant_task(&targets);
    let mut planner = Replay::new(vec![program_only("function agent(x: real): (real) { if (x <= 0.0) { return 0.0; } return x; }")]);
    let cfg = SynthesisConfig { total_budget: 1, per_candidate_budget: 1, ..SynthesisConfig::default() };
    let run = run_synthesis(&task, &mut planner, &cfg).unwrap();
    let fb = &run.feedback[0];
    assert_eq!(fb.failures.len(), 3, "{fb:?}");
    assert_eq!(fb.previous_score, run.best().unwrap().train_loss);
    for f in &fb.failures {
        assert!(f.output.is_some() && !f.error.is_empty() && !f.description.is_empty() && !f.suggested_fix.is_empty());
        assert!(f.input.is_array());
    }
    assert_eq!(fb.digest(2).failures.len(), 2);

    let exact = constant_task(&(1..=10).map(|i| i as f64).collect::<Vec<_>>());
    let mut planner = Replay::new(vec![program_only("function agent(x: real): (real) { if (x <= 0.0) { return 1.0; } return x + 1.0; }")]);
    let run = run_synthesis(&exact, &mut planner, &cfg).unwrap();
    assert!(run.feedback[0].failures.is_empty());
    assert_eq!(run.feedback[0].previous_score, 0.0);
}

#[test]
fn tuned_power_law_is_accurate_and_reproducible() {
    let (task, inst) = running_task();
    let cfg = SynthesisConfig { total_budget: 2, per_candidate_budget: 2, ..SynthesisConfig::default() };
    let run = run_synthesis(&task, &mut ScriptedPlanner::new(fig5()), &cfg).unwrap();
    let best = run.best().unwrap();
    assert!(best.tuning.is_some());
    let agent = Agent::new(&best.program, &task.lib, &best.fggms).unwrap();
    let models = bind_models(&best.sites, &task.registry, &best.params).unwrap();
    let report = symreg::evaluate_agent(&agent, &models, &inst.test, &inst.psi, 3);
    // Independent NMSE against the noiseless ground truth.
    let gt = symreg::ground_truth(symreg::RUNNING).unwrap();
    let mut rng = Rng::new(4);
    let (mut num, mut den) = (0.0, 0.0);
    for &(x, _) in &inst.test {
        let (y, _) = agent.run_args(&models, &[Value::Real(x)], &mut rng).unwrap();
        let t = (gt.f)(x);
        num += (y.as_real().unwrap() - t).powi(2);
        den += t * t;
    }
    assert!(num / den <= 0.01, "nmse {}", num / den);
    assert_eq!(report.violation_rate, 0.0);

    let again = run_synthesis(&task, &mut ScriptedPlanner::new(fig5()), &cfg).unwrap();
    let b2 = again.best().unwrap();
    assert_eq!(best.source, b2.source);
    assert_eq!(best.params, b2.params);
    assert_eq!(best.tuning.as_ref().unwrap().history, b2.tuning.as_ref().unwrap().history);
}

// Loss satisfying "violations cost more than any valid output": a
// violation costs 2, a valid output at most 1.
fn penalised_loss(ok: bool, y: f64, t: f64) -> f64 {
    if ok {
        (y - t).powi(2).min(1.0)
    } else {
        2.0
    }
}

#[test]
fn guarding_a_bare_model_never_increases_the_loss() {
    let spec = ProgramSpec {
        params: vec![Param::new("x", BaseType::Real)],
        ret: BaseType::Real,
        requires: parse_formula("x >= 0.0").unwrap(),
        ensures: parse_formula("result >= 0.0 && result <= x + 1.0").unwrap(),
    };
    let prompt = parse_program("function prompt(x: real): (real) { return x; }").unwrap();
    let fallback = parse_program("function fallback(x: real, y: real): (real) { return x; }").unwrap();
    let (def, prog) = sufficient_success_agent(&spec, "neural1", prompt, fallback);
    let (task, _) = running_task();
    assert!(validate_fggm(&def, &task.ctx).unwrap().is_empty());
    let ctx = task.ctx.with_fggms(std::slice::from_ref(&def));
    assert!(verify_program(&prog, &ctx, Some(&spec)).unwrap().verified);

    let data = [(0.0, 0.5), (0.5, 1.0), (1.0, 1.5), (2.0, 2.0), (3.0, 3.5)];
    let psi = |x: f64, y: f64| y >= 0.0 && y <= x + 1.0;
    let lib = symreg::library::<f64>();
    let agent = Agent::new(&prog, &lib, std::slice::from_ref(&def)).unwrap();
    let total = |bare: fn(&[Value<f64>]) -> Value<f64>| {
        let mut models: ModelBindings<f64> = ModelBindings::new();
        models.insert("guarded".into(), Box::new(zoo::FromInput { inputs: vec![BaseType::Real], output: BaseType::Real, f: bare }));
        let (mut l_bare, mut l_guarded) = (0.0, 0.0);
        for &(x, t) in &data {
            let b = bare(&[Value::Real(x)]).as_real().unwrap();
            l_bare += penalised_loss(psi(x, b), b, t);
            let (y, _) = agent.run_args(&models, &[Value::Real(x)], &mut Rng::new(0)).unwrap();
            let y = y.as_real().unwrap();
            assert!(psi(x, y));
            l_guarded += penalised_loss(true, y, t);
        }
        (l_bare, l_guarded)
    };
    // 2x − 1 violates at x = 0 and x = 3 (−1 < 0, 5 > 4).
    let (bare, guarded) = total(|a| Value::Real(2.0 * a[0].as_real().unwrap() - 1.0));
    assert!(guarded < bare, "{guarded} vs {bare}");
    // x + 0.5 never violates: the guard returns it unchanged.
    let (bare, guarded) = total(|a| Value::Real(a[0].as_real().unwrap() + 0.5));
    assert_eq!(guarded, bare);
}
