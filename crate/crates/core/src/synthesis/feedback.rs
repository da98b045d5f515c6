//! Per-example diagnostics of a candidate, passed back to the planner.

use super::planner::Planner;
use super::search::Candidate;
use super::Task;
use crate::learn::bind_models;
use crate::lang::RESULT;
use crate::logic::eval::eval_qf;
use crate::runtime::interp::{Agent, RunOptions};
use crate::runtime::rng::Rng;
use crate::runtime::value::Valuation;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FailureCase {
    pub input: serde_json::Value,
    pub output: Option<serde_json::Value>,
    pub target: f64,
    /// Per-point normalized squared error (`f64::MAX` when the run failed).
    pub loss: f64,
    pub error: String,
    pub description: String,
    pub suggested_fix: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Feedback {
    pub previous_score: f64,
    pub failures: Vec<FailureCase>,
}

impl Feedback {
    /// The `n` worst failures by loss, worst first.
    pub fn digest(&self, n: usize) -> Feedback {
        let mut failures = self.failures.clone();
        failures.sort_by(|a, b| b.loss.total_cmp(&a.loss));
        failures.truncate(n);
        Feedback { previous_score: self.previous_score, failures }
    }
}

/// Run `cand` over the training set and record every example that faults,
/// violates the output specification, or misses its target by more than
/// `tolerance` (relative error). Failures are ordered worst first.
pub fn collect_feedback(cand: &Candidate, task: &Task, planner: &mut dyn Planner, tolerance: f64, k: usize, seed: u64) -> Feedback {
    let mut fb = Feedback { previous_score: cand.train_loss, failures: Vec::new() };
    let Ok(agent) = Agent::new(&cand.program, &task.lib, &cand.fggms) else {
        return fb;
    };
    let agent = agent.with_options(RunOptions { k, ..RunOptions::default() });
    let Ok(models) = bind_models(&cand.sites, &task.registry, &cand.params) else {
        return fb;
    };
    let c: f64 = task.train.iter().map(|e| e.target * e.target).sum::<f64>().max(f64::MIN_POSITIVE);
    let root = Rng::new(seed);
    let names: Vec<String> = task.spec.params.iter().map(|p| p.name.clone()).collect();
    for (i, ex) in task.train.iter().enumerate() {
        let input = serde_json::Value::Array(ex.args.iter().map(|v| v.to_json()).collect());
        let mut case = FailureCase {
            input,
            output: None,
            target: ex.target,
            loss: f64::MAX,
            error: String::new(),
            description: String::new(),
            suggested_fix: String::new(),
        };
        match agent.run_args(&models, &ex.args, &mut root.derive("feedback", i as u64)) {
            Err(e) => case.error = format!("runtime fault: {e}"),
            Ok((y, _)) => {
                case.output = Some(y.to_json());
                let Ok(v) = y.as_real() else {
                    case.error = "output is not a real number".into();
                    fb.failures.push(case);
                    continue;
                };
                case.loss = (v - ex.target).powi(2) / c;
                let mut env: Valuation<f64> = names.iter().cloned().zip(ex.args.iter().cloned()).collect();
                env.insert(RESULT.into(), y.clone());
                let rel = (v - ex.target).abs() / ex.target.abs().max(1e-9);
                if !eval_qf(&task.spec.ensures, &env, &task.lib).unwrap_or(false) {
                    case.error = "output violates the specification".into();
                } else if rel > tolerance {
                    case.error = format!("relative error {:.1}% exceeds {:.1}%", rel * 100.0, tolerance * 100.0);
                } else {
                    continue;
                }
            }
        }
        fb.failures.push(case);
    }
    fb.failures.sort_by(|a, b| b.loss.total_cmp(&a.loss));
    for case in &mut fb.failures {
        let (d, f) = planner.explain(&task.info, case);
        case.description = d;
        case.suggested_fix = f;
    }
    fb
}
