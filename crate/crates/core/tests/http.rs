mod common;

use common::mock::{dead_url, serve, Reply};
use gsynth_core::lang::{parse_fggm, BaseType};
use gsynth_core::runtime::http::HttpGm;
use gsynth_core::runtime::{fggm_call, GenerativeModel, PreparedFggm, Rng, RuntimeFault, Value};
use gsynth_core::symreg;
use gsynth_core::synthesis::http::HttpPlanner;
use gsynth_core::synthesis::*;
use serde_json::json;
use std::time::Duration;

const FGGM: &str = include_str!("../assets/bounded_param.fggm");

fn guarded() -> PreparedFggm {
    PreparedFggm::new(&parse_fggm(FGGM).unwrap(), &symreg::signatures()).unwrap()
}

#[test]
fn remote_model_round_trip() {
    let server = serve(|req| {
        let p = req["prompt"].as_str().unwrap_or("").to_string();
        Reply::json(json!({ "output": if p == "2.0" { "0.5" } else { "7" } }))
    });
    let gm = HttpGm::new(&server.url, vec![BaseType::Real], BaseType::Real, Duration::from_secs(5));
    let y: Value<f64> = gm.propose(&[Value::Real(2.0)], &mut Rng::new(0)).unwrap();
    assert_eq!(y, Value::Real(0.5));
    assert_eq!(server.requests.lock().unwrap()[0], json!({ "prompt": "2.0" }));

    // Through the guarded sampler: prompt u − l = 1 → "7" is rejected
    // every time and the clamp returns u.
    let lib = symreg::library::<f64>();
    let (y, rec) = fggm_call(&guarded(), &gm, &[Value::Real(0.0), Value::Real(1.0)], &lib, 3, None, &mut Rng::new(0), "s").unwrap();
    assert_eq!((y, rec.fallback, rec.draws), (Value::Real(1.0), true, 3));
    assert_eq!(server.requests.lock().unwrap().len(), 4);
}

#[test]
fn string_outputs_are_bounded() {
    let server = serve(|_| Reply::json(json!({ "output": "abcdefghij" })));
    let mut gm = HttpGm::new(&server.url, vec![BaseType::String], BaseType::String, Duration::from_secs(5));
    gm.max_output_len = 4;
    let y: Value<f64> = gm.propose(&[Value::Str("q".into())], &mut Rng::new(0)).unwrap();
    assert_eq!(y, Value::Str("abcd".into()));
}

#[test]
fn slow_or_missing_models_degrade_to_the_fallback() {
    let lib = symreg::library::<f64>();
    let slow = serve(|_| Reply::json(json!({ "output": "0.5" })).delayed(Duration::from_millis(1500)));
    let gm = HttpGm::new(&slow.url, vec![BaseType::Real], BaseType::Real, Duration::from_millis(200));
    let r: Result<Value<f64>, _> = gm.propose(&[Value::Real(1.0)], &mut Rng::new(0));
    assert!(matches!(r, Err(RuntimeFault::Model(_))), "{r:?}");

    let garbled = serve(|_| Reply::json(json!({ "text": "0.5" })));
    for url in [slow.url.clone(), dead_url(), garbled.url.clone()] {
        let gm = HttpGm::new(&url, vec![BaseType::Real], BaseType::Real, Duration::from_millis(200));
        let (y, rec) = fggm_call(&guarded(), &gm, &[Value::Real(-1.0), Value::Real(1.0)], &lib, 2, None, &mut Rng::new(0), "s").unwrap();
        assert!(rec.fallback && rec.samples.is_empty());
        // Fallback on the type's zero: clamp(0) = 0 ∈ [−1, 1].
        assert_eq!(y, Value::Real(0.0));
    }
}

fn task() -> Task {
    let inst = symreg::make_instance(&symreg::Manifest::new(symreg::RUNNING, 0.05, 1)).unwrap();
    let mut t = Task::symreg(&inst, Default::default());
    t.train.truncate(20);
    t
}

#[test]
fn remote_planner_round_trip() {
    let server = serve(|req| {
        if req.get("explain").is_some() {
            Reply::json(json!({ "description": "too small", "suggestedFix": "grow" }))
        } else {
            Reply::json(json!({ "fggms": [], "program": "function agent(x: real): (real) { return max(sqrt(x), 1.0) + x; }" }))
        }
    });
    let t = task();
    let mut planner = HttpPlanner::new(&server.url, Duration::from_secs(5));
    let cfg = SynthesisConfig { total_budget: 1, per_candidate_budget: 1, ..SynthesisConfig::default() };
    let run = run_synthesis(&t, &mut planner, &cfg).unwrap();
    let best = run.best().expect("remote proposal verifies");
    assert_eq!(best.planner, "external");
    let reqs = server.requests.lock().unwrap();
    let first = &reqs[0];
    for key in ["taskInfo", "libraryDoc", "axioms", "feedback", "priorErrors", "promptTemplate"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert_eq!(first["taskInfo"]["psi"], json!(t.info.psi));
    let prompt = first["promptTemplate"].as_str().unwrap();
    assert!(prompt.contains(&t.info.agent_signature) && !prompt.contains("{task_description}"));
    // Every failed training point was explained remotely.
    let fb = &run.feedback[0];
    assert!(!fb.failures.is_empty());
    assert!(fb.failures.iter().all(|f| f.description == "too small" && f.suggested_fix == "grow"));
    assert_eq!(reqs.iter().filter(|r| r.get("explain").is_some()).count(), fb.failures.len());
}

#[test]
fn unreachable_planner_exhausts_the_budget_gracefully() {
    let t = task();
    let mut planner = HttpPlanner::new(&dead_url(), Duration::from_millis(300));
    let cfg = SynthesisConfig { total_budget: 4, per_candidate_budget: 2, ..SynthesisConfig::default() };
    let run = run_synthesis(&t, &mut planner, &cfg).unwrap();
    assert!(run.best().is_none());
    assert_eq!(run.proposals, 4);
    for it in &run.iterations {
        assert!(it.attempts.iter().all(|a| a.errors.iter().any(|e| e.starts_with("planner error"))));
    }
}

#[test]
fn malformed_planner_replies_become_attempt_errors() {
    let server = serve(|_| Reply::json(json!({ "program": 3 })));
    let mut planner = HttpPlanner::new(&server.url, Duration::from_secs(5));
    let out = search_verify(&task(), &mut planner, 1, None, None, 0).unwrap();
    assert!(out.candidate.is_none());
    assert!(out.attempts[0].errors[0].contains("malformed"), "{:?}", out.attempts[0].errors);
}

#[test]
fn explanations_fall_back_to_templated_text() {
    let slow = serve(|_| Reply::json(json!({ "description": "late", "suggestedFix": "late" })).delayed(Duration::from_millis(1500)));
    let mut planner = HttpPlanner::new(&slow.url, Duration::from_millis(200));
    let case = FailureCase {
        input: json!([2.0]),
        output: Some(json!(0.1)),
        target: 1.7,
        loss: 0.5,
        error: "relative error 94.1% exceeds 10.0%".into(),
        description: String::new(),
        suggested_fix: String::new(),
    };
    let (d, f) = planner.explain(&task().info, &case);
    assert!(d.contains("planner explanation unavailable") && d.contains("[2.0]"), "{d}");
    assert!(!f.is_empty());
}
