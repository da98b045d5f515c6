//! Empirical check of a task postcondition on random inputs and random
//! model parameters.

use super::interp::{Agent, ModelBindings};
use super::rng::Rng;
use super::value::{valuation_json, Valuation, Value};
use crate::lang::ast::{BaseType, RESULT};
use crate::logic::eval::eval_qf;
use crate::scalar::Scalar;
use crate::verify::ProgramSpec;
use num_bigint::BigInt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Sampling ranges per parameter name. Parameters without a range use
/// `[-10, 10]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputDomain {
    pub ranges: BTreeMap<String, (f64, f64)>,
}

impl InputDomain {
    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.ranges.insert(name.to_string(), (lo, hi));
        self
    }

    pub fn sample<S: Scalar>(&self, name: &str, ty: BaseType, rng: &mut Rng) -> Value<S> {
        let (lo, hi) = self.ranges.get(name).copied().unwrap_or((-10.0, 10.0));
        match ty {
            BaseType::Real => Value::Real(S::lit(rng.uniform(lo, hi))),
            BaseType::Int => {
                let span = (hi.floor() - lo.ceil()).max(0.0) as usize + 1;
                Value::Int(BigInt::from(lo.ceil() as i64 + rng.below(span) as i64))
            }
            BaseType::Bool => Value::Bool(rng.below(2) == 1),
            BaseType::String => {
                let n = rng.below(8);
                Value::Str((0..n).map(|_| (b'a' + rng.below(26) as u8) as char).collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzConfig {
    /// Total number of agent runs.
    pub n_inputs: usize,
    /// Number of independent parameter draws; inputs are split evenly.
    pub n_batches: usize,
    /// Attempts to find an input satisfying the precondition.
    pub max_tries: usize,
    pub seed: u64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig { n_inputs: 10_000, n_batches: 100, max_tries: 100, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub batch: usize,
    pub input: serde_json::Value,
    pub output: Option<serde_json::Value>,
    pub fault: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzReport {
    pub inputs_drawn: usize,
    pub runs: usize,
    /// Runs whose output violated the postcondition.
    pub violations: usize,
    /// Runs that ended in a runtime fault.
    pub faults: usize,
    /// Up to 20 examples of violations and faults.
    pub witnesses: Vec<Witness>,
    pub note: Option<String>,
}

impl FuzzReport {
    pub fn clean(&self) -> bool {
        self.violations == 0 && self.faults == 0
    }
}

const MAX_WITNESSES: usize = 20;

/// Run `agent` on random inputs satisfying the spec's precondition, with
/// fresh model parameters per batch from `sampler`, and count outputs that
/// violate the postcondition.
pub fn fuzz_spec<S, F>(agent: &Agent<'_, S>, spec: &ProgramSpec, domain: &InputDomain, sampler: F, cfg: &FuzzConfig) -> FuzzReport
where
    S: Scalar,
    F: Fn(&mut Rng) -> ModelBindings<S> + Sync,
{
    let root = Rng::new(cfg.seed);
    let batches = cfg.n_batches.max(1);
    let per = cfg.n_inputs / batches;
    let extra = cfg.n_inputs % batches;
    let parts: Vec<FuzzReport> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rep = FuzzReport::default();
            let models = sampler(&mut root.derive("theta", b as u64));
            let mut rng = root.derive("inputs", b as u64);
            let n = per + usize::from(b < extra);
            for i in 0..n {
                let Some(input) = draw_input(spec, domain, agent, &mut rng, cfg.max_tries) else { continue };
                rep.inputs_drawn += 1;
                rep.runs += 1;
                let mut run_rng = root.derive(&format!("run{b}"), i as u64);
                let args: Vec<Value<S>> = spec.params.iter().map(|p| input[&p.name].clone()).collect();
                match agent.run_args(&models, &args, &mut run_rng) {
                    Ok((y, _)) => {
                        let mut env = input.clone();
                        env.insert(RESULT.to_string(), y.clone());
                        if !eval_qf(&spec.ensures, &env, agent.lib).unwrap_or(false) {
                            rep.violations += 1;
                            if rep.witnesses.len() < MAX_WITNESSES {
                                rep.witnesses.push(Witness {
                                    batch: b,
                                    input: valuation_json(&input),
                                    output: Some(y.to_json()),
                                    fault: None,
                                });
                            }
                        }
                    }
                    Err(e) => {
                        rep.faults += 1;
                        if rep.witnesses.len() < MAX_WITNESSES {
                            rep.witnesses.push(Witness {
                                batch: b,
                                input: valuation_json(&input),
                                output: None,
                                fault: Some(e.to_string()),
                            });
                        }
                    }
                }
            }
            rep
        })
        .collect();
    let mut total = FuzzReport::default();
    for p in parts {
        total.inputs_drawn += p.inputs_drawn;
        total.runs += p.runs;
        total.violations += p.violations;
        total.faults += p.faults;
        for w in p.witnesses {
            if total.witnesses.len() < MAX_WITNESSES {
                total.witnesses.push(w);
            }
        }
    }
    if total.inputs_drawn == 0 && cfg.n_inputs > 0 {
        total.note = Some("no input satisfying the precondition was found in the sampling domain".into());
    }
    total
}

fn draw_input<S: Scalar>(
    spec: &ProgramSpec,
    domain: &InputDomain,
    agent: &Agent<'_, S>,
    rng: &mut Rng,
    max_tries: usize,
) -> Option<Valuation<S>> {
    for _ in 0..max_tries.max(1) {
        let v: Valuation<S> = spec.params.iter().map(|p| (p.name.clone(), domain.sample(&p.name, p.ty, rng))).collect();
        if eval_qf(&spec.requires, &v, agent.lib).unwrap_or(false) {
            return Some(v);
        }
    }
    None
}
