//! Benchmark instances: ground truths, behavioural specifications, noisy
//! datasets and agent evaluation.

use super::library::library;
use crate::lang::{parse_formula, Formula, Param, BaseType, RESULT};
use crate::logic::eval::eval_qf;
use crate::runtime::interp::{Agent, ModelBindings};
use crate::runtime::rng::Rng;
use crate::runtime::value::{Valuation, Value};
use crate::verify::ProgramSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SymRegError {
    #[error("unknown ground truth `{0}`")]
    UnknownGroundTruth(String),
    #[error("ground truth violates the output specification at x = {x} (f(x) = {y})")]
    SpecInconsistent { x: f64, y: f64 },
    #[error("x range [{0}, {1}] does not satisfy the input specification")]
    BadRange(f64, f64),
    #[error("train and test sets must be non-empty")]
    EmptySplit,
    #[error("dataset targets are all zero; normalized error is undefined")]
    DegenerateDataset,
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed dataset {path}: {message}")]
    Csv { path: String, message: String },
}

/// A known function with its behavioural specification.
#[derive(Clone, Copy, Debug)]
pub struct GroundTruth {
    pub id: &'static str,
    pub description: &'static str,
    pub f: fn(f64) -> f64,
    pub x_range: (f64, f64),
    pub phi: &'static str,
    pub psi: &'static str,
}

pub const RUNNING: &str = "running";

pub const GROUND_TRUTHS: &[GroundTruth] = &[
    GroundTruth {
        id: RUNNING,
        description: "sqrt(1.23 * max(x, 0))",
        f: |x| (1.23 * x.max(0.0)).sqrt(),
        x_range: (0.0, 4.0),
        phi: "x >= 0.0",
        psi: "(x <= 1.0 ==> result >= pow(x, 0.8)) && (x >= 1.0 ==> result >= sqrt(x))",
    },
    GroundTruth {
        id: "affine_offset",
        description: "0.7 * x + 0.45",
        f: |x| 0.7 * x + 0.45,
        x_range: (0.0, 4.0),
        phi: "x >= 0.0",
        psi: "result >= 0.25",
    },
    GroundTruth {
        id: "power_growth",
        description: "0.8 * x^1.4",
        f: |x| 0.8 * x.max(0.0).powf(1.4),
        x_range: (0.0, 3.0),
        phi: "x >= 0.0",
        psi: "result >= 0.0 && (x <= 1.0 ==> result <= 1.0)",
    },
    GroundTruth {
        id: "damped_exp",
        description: "2.2 * exp(-0.6 * x)",
        f: |x| 2.2 * (-0.6 * x).exp(),
        x_range: (0.0, 5.0),
        phi: "x >= 0.0",
        psi: "result >= 0.0 && result <= 3.0",
    },
    GroundTruth {
        id: "sine_offset",
        description: "1.2 * sin(0.9 * x) + 0.1",
        f: |x| 1.2 * (0.9 * x).sin() + 0.1,
        x_range: (0.0, 6.0),
        phi: "x >= 0.0",
        psi: "result >= -2.0 && result <= 2.0",
    },
];

pub fn ground_truth(id: &str) -> Option<&'static GroundTruth> {
    GROUND_TRUTHS.iter().find(|g| g.id == id)
}

/// `(Φ, Ψ)` of the running instance.
pub fn behavioral_spec_running() -> (Formula, Formula) {
    let g = ground_truth(RUNNING).unwrap();
    (parse_formula(g.phi).unwrap(), parse_formula(g.psi).unwrap())
}

/// Parameters that determine an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub gt_id: String,
    pub epsilon: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub x_range: Option<(f64, f64)>,
}

impl Manifest {
    pub fn new(gt_id: &str, epsilon: f64, seed: u64) -> Self {
        Manifest { gt_id: gt_id.into(), epsilon, seed, n_train: 600, n_test: 400, x_range: None }
    }
}

#[derive(Clone, Debug)]
pub struct SymRegInstance {
    pub manifest: Manifest,
    pub truth: &'static GroundTruth,
    pub x_range: (f64, f64),
    pub phi: Formula,
    pub psi: Formula,
    pub train: Vec<(f64, f64)>,
    pub test: Vec<(f64, f64)>,
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n).sqrt()
}

/// Build an instance: `x` uniform over the range, training targets with
/// Gaussian noise of standard deviation `ε · std(clean targets)`, noiseless
/// test targets.
pub fn make_instance(m: &Manifest) -> Result<SymRegInstance, SymRegError> {
    let truth = ground_truth(&m.gt_id).ok_or_else(|| SymRegError::UnknownGroundTruth(m.gt_id.clone()))?;
    if m.n_train == 0 || m.n_test == 0 {
        return Err(SymRegError::EmptySplit);
    }
    let (lo, hi) = m.x_range.unwrap_or(truth.x_range);
    let phi = parse_formula(truth.phi).expect("shipped spec parses");
    let psi = parse_formula(truth.psi).expect("shipped spec parses");
    let lib = library::<f64>();
    let holds_phi = |x: f64| {
        let mut env = Valuation::new();
        env.insert("x".to_string(), Value::Real(x));
        eval_qf(&phi, &env, &lib).unwrap_or(false)
    };
    if !(holds_phi(lo) && holds_phi(hi)) {
        return Err(SymRegError::BadRange(lo, hi));
    }
    let root = Rng::new(m.seed);
    let mut xr = root.derive("train-x", 0);
    let train_x: Vec<f64> = (0..m.n_train).map(|_| xr.uniform(lo, hi)).collect();
    let clean: Vec<f64> = train_x.iter().map(|&x| (truth.f)(x)).collect();
    let sigma = m.epsilon * std_dev(&clean);
    let mut nr = root.derive("noise", 0);
    let train = train_x.iter().zip(&clean).map(|(&x, &y)| (x, y + sigma * nr.normal())).collect();
    let mut tr = root.derive("test-x", 0);
    let test: Vec<(f64, f64)> = (0..m.n_test)
        .map(|_| {
            let x = tr.uniform(lo, hi);
            (x, (truth.f)(x))
        })
        .collect();
    for &(x, y) in &test {
        let mut env = Valuation::new();
        env.insert("x".to_string(), Value::Real(x));
        env.insert(RESULT.to_string(), Value::Real(y));
        if !eval_qf(&psi, &env, &lib).unwrap_or(false) {
            return Err(SymRegError::SpecInconsistent { x, y });
        }
    }
    Ok(SymRegInstance { manifest: m.clone(), truth, x_range: (lo, hi), phi, psi, train, test })
}

impl SymRegInstance {
    /// Task contract for synthesized agents: `(x: real) -> real`.
    pub fn spec(&self) -> ProgramSpec {
        ProgramSpec {
            params: vec![Param::new("x", BaseType::Real)],
            ret: BaseType::Real,
            requires: self.phi.clone(),
            ensures: self.psi.clone(),
        }
    }
}

/// Sum of squared errors normalized by the sum of squared targets.
pub fn nmse(pred: &[f64], data: &[(f64, f64)]) -> Result<f64, SymRegError> {
    let c: f64 = data.iter().map(|(_, y)| y * y).sum();
    if c == 0.0 {
        return Err(SymRegError::DegenerateDataset);
    }
    Ok(pred.iter().zip(data).map(|(p, (_, y))| (p - y) * (p - y)).sum::<f64>() / c)
}

pub fn write_csv(path: &Path, data: &[(f64, f64)]) -> Result<(), SymRegError> {
    let io = |e: csv::Error| SymRegError::Csv { path: path.display().to_string(), message: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["x", "y"]).map_err(io)?;
    for (x, y) in data {
        w.write_record([x.to_string(), y.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| SymRegError::Io { path: path.display().to_string(), source: e })
}

pub fn read_csv(path: &Path) -> Result<Vec<(f64, f64)>, SymRegError> {
    let bad = |m: String| SymRegError::Csv { path: path.display().to_string(), message: m };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(bad("expected header `x,y`".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let x: f64 = rec[0].trim().parse().map_err(|_| bad(format!("bad number `{}`", &rec[0])))?;
        let y: f64 = rec[1].trim().parse().map_err(|_| bad(format!("bad number `{}`", &rec[1])))?;
        out.push((x, y));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub test_nmse: f64,
    /// Fraction of test inputs whose output violates Ψ (faults count).
    pub violation_rate: f64,
    /// Fraction of guarded calls that ended in the fallback.
    pub fallback_rate: f64,
    /// Fraction of proposals accepted by the contract checker.
    pub acceptance_rate: f64,
    pub faults: usize,
}

/// Run the agent on every test input.
pub fn evaluate_agent(agent: &Agent<'_, f64>, models: &ModelBindings<f64>, data: &[(f64, f64)], psi: &Formula, seed: u64) -> EvalReport {
    let root = Rng::new(seed).derive("eval", 0);
    let runs: Vec<_> = data
        .par_iter()
        .enumerate()
        .map(|(i, &(x, _))| {
            let mut rng = root.derive("point", i as u64);
            let r = agent.run_args(models, &[Value::Real(x)], &mut rng);
            match r {
                Ok((y, calls)) => {
                    let mut env = Valuation::new();
                    env.insert("x".to_string(), Value::Real(x));
                    env.insert(RESULT.to_string(), y.clone());
                    let ok = eval_qf(psi, &env, agent.lib).unwrap_or(false);
                    let yv = y.as_real().unwrap_or(f64::NAN);
                    let fb = calls.iter().filter(|c| c.fallback).count();
                    let draws: usize = calls.iter().map(|c| c.draws).sum();
                    let acc = calls.iter().filter(|c| c.accepted.is_some()).count();
                    (Some(yv), ok, calls.len(), fb, draws, acc)
                }
                Err(_) => (None, false, 0, 0, 0, 0),
            }
        })
        .collect();
    let n = data.len().max(1) as f64;
    let faults = runs.iter().filter(|r| r.0.is_none()).count();
    let preds: Vec<f64> = runs.iter().map(|r| r.0.unwrap_or(0.0)).collect();
    let calls: usize = runs.iter().map(|r| r.2).sum();
    let fbs: usize = runs.iter().map(|r| r.3).sum();
    let draws: usize = runs.iter().map(|r| r.4).sum();
    let acc: usize = runs.iter().map(|r| r.5).sum();
    EvalReport {
        test_nmse: nmse(&preds, data).unwrap_or(f64::NAN),
        violation_rate: runs.iter().filter(|r| !r.1).count() as f64 / n,
        fallback_rate: if calls == 0 { 0.0 } else { fbs as f64 / calls as f64 },
        acceptance_rate: if draws == 0 { 1.0 } else { acc as f64 / draws as f64 },
        faults,
    }
}
