//! Task loss, contract-conformance loss and the fine-tuning reward.

use super::LearnError;
use crate::lang::ast::*;
use crate::lang::fggm::FggmDef;
use crate::logic::eval::{eval_expr, eval_qf};
use crate::runtime::error::RuntimeFault;
use crate::runtime::gm::GenerativeModel;
use crate::runtime::interp::contract_check;
use crate::runtime::library::Library;
use crate::runtime::rng::Rng;
use crate::runtime::value::{Valuation, Value};
use crate::scalar::{sigmoid, Scalar};
use crate::verify::VerificationContext;

/// Per-point normalized squared error `(pᵢ − yᵢ)² / Σ yⱼ²` and its sum.
pub fn task_loss_nmse<S: Scalar>(targets: &[f64], preds: &[S]) -> Result<(Vec<S>, S), LearnError> {
    let c: f64 = targets.iter().map(|y| y * y).sum();
    if targets.is_empty() || c == 0.0 {
        return Err(LearnError::DegenerateDataset);
    }
    let c = S::lit(c);
    let per: Vec<S> = preds.iter().zip(targets).map(|(&p, &y)| (p - S::lit(y)) * (p - S::lit(y)) / c).collect();
    let total = per.iter().fold(S::zero(), |a, &b| a + b);
    Ok((per, total))
}

/// How contract satisfaction of a proposal is scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Conformance {
    /// `1 − 𝟙(check)`: the reported metric.
    Indicator,
    /// Squared hinge on the violated atomic inequalities: differentiable,
    /// zero exactly when the contract holds.
    Surrogate,
}

/// One prompt of a guarded call site with the arguments it was made with.
#[derive(Clone, Debug)]
pub struct PromptRecord<S> {
    pub site: String,
    pub args: Vec<Value<S>>,
    pub prompt: Vec<Value<S>>,
}

fn hinge<S: Scalar>(v: S) -> S {
    if v > S::zero() {
        v * v
    } else {
        S::zero()
    }
}

fn smaller<S: Scalar>(a: S, b: S) -> S {
    if a <= b {
        a
    } else {
        b
    }
}

fn indicator<S: Scalar>(f: &Formula, env: &Valuation<S>, lib: &Library<S>, positive: bool) -> S {
    match eval_qf(f, env, lib) {
        Ok(b) if b == positive => S::zero(),
        _ => S::one(),
    }
}

/// Smooth violation of `f` (or of `¬f` when `positive` is false).
pub fn violation<S: Scalar>(f: &Formula, env: &Valuation<S>, lib: &Library<S>, positive: bool) -> S {
    match f {
        Formula::Const(b) => {
            if *b == positive {
                S::zero()
            } else {
                S::one()
            }
        }
        Formula::Rel(op, a, b) => {
            let op = if positive { *op } else { op.negate() };
            let (x, y) = match (eval_expr(a, env, lib), eval_expr(b, env, lib)) {
                (Ok(Value::Real(x)), Ok(Value::Real(y))) => (x, y),
                (Ok(x @ Value::Real(_)), Ok(y @ Value::Int(_))) | (Ok(x @ Value::Int(_)), Ok(y @ Value::Real(_))) => {
                    match (x.as_real(), y.as_real()) {
                        (Ok(x), Ok(y)) => (x, y),
                        _ => return S::one(),
                    }
                }
                _ => return indicator(&Formula::Rel(op, a.clone(), b.clone()), env, lib, true),
            };
            match op {
                RelOp::Le | RelOp::Lt => hinge(x - y),
                RelOp::Ge | RelOp::Gt => hinge(y - x),
                RelOp::Eq => (x - y) * (x - y),
                RelOp::Ne => {
                    if x == y {
                        S::one()
                    } else {
                        S::zero()
                    }
                }
            }
        }
        Formula::Not(g) => violation(g, env, lib, !positive),
        Formula::And(a, b) => {
            if positive {
                violation(a, env, lib, true) + violation(b, env, lib, true)
            } else {
                smaller(violation(a, env, lib, false), violation(b, env, lib, false))
            }
        }
        Formula::Or(a, b) => {
            if positive {
                smaller(violation(a, env, lib, true), violation(b, env, lib, true))
            } else {
                violation(a, env, lib, false) + violation(b, env, lib, false)
            }
        }
        Formula::Implies(a, b) => {
            if positive {
                smaller(violation(a, env, lib, false), violation(b, env, lib, true))
            } else {
                violation(a, env, lib, true) + violation(b, env, lib, false)
            }
        }
        Formula::Iff(a, b) => {
            let both = violation(a, env, lib, true) + violation(b, env, lib, true);
            let neither = violation(a, env, lib, false) + violation(b, env, lib, false);
            let ab = violation(a, env, lib, true) + violation(b, env, lib, false);
            let ba = violation(a, env, lib, false) + violation(b, env, lib, true);
            if positive {
                smaller(both, neither)
            } else {
                smaller(ab, ba)
            }
        }
        Formula::Pred(..) | Formula::BoolVar(_) | Formula::Forall(..) | Formula::Exists(..) => {
            indicator(f, env, lib, positive)
        }
    }
}

/// Score one proposal `y` against the contract of `def` at `args`.
pub fn score_proposal<S: Scalar>(
    def: &FggmDef,
    args: &[Value<S>],
    y: &Value<S>,
    lib: &Library<S>,
    kind: Conformance,
    solver: Option<&VerificationContext>,
) -> S {
    let mut env: Valuation<S> = def.params.iter().map(|p| p.name.clone()).zip(args.iter().cloned()).collect();
    match kind {
        Conformance::Indicator => {
            if contract_check(def, &env, y, lib, solver) {
                S::zero()
            } else {
                S::one()
            }
        }
        Conformance::Surrogate => {
            if y.base_type() != def.ret {
                return S::one();
            }
            env.insert(RESULT.to_string(), y.clone());
            if def.ensures.is_quantifier_free() {
                violation(&def.ensures, &env, lib, true)
            } else if contract_check(def, &env, y, lib, solver) {
                S::zero()
            } else {
                S::one()
            }
        }
    }
}

/// Monte-Carlo estimate of the expected rejection rate of `gm` over a
/// prompt set: `(1/|P|) Σ_p E_y[1 − 𝟙(check)]`, with `samples` draws per
/// prompt. With [`Conformance::Surrogate`] the summand is the smooth
/// violation instead.
#[allow(clippy::too_many_arguments)]
pub fn conformance_loss<S: Scalar>(
    def: &FggmDef,
    gm: &dyn GenerativeModel<S>,
    prompts: &[PromptRecord<S>],
    lib: &Library<S>,
    samples: usize,
    kind: Conformance,
    solver: Option<&VerificationContext>,
    rng: &mut Rng,
) -> Result<S, RuntimeFault> {
    if prompts.is_empty() {
        return Ok(S::zero());
    }
    let samples = samples.max(1);
    let mut total = S::zero();
    for p in prompts {
        for _ in 0..samples {
            let y = match gm.propose(&p.prompt, rng) {
                Ok(y) => y,
                Err(_) => {
                    total = total + S::one();
                    continue;
                }
            };
            total = total + score_proposal(def, &p.args, &y, lib, kind, solver);
        }
    }
    Ok(total / S::lit((prompts.len() * samples) as f64))
}

/// Reward handed to an external fine-tuner:
/// `1 − σ(L·𝟙(final) + λ·(1 − 𝟙(check)))`.
pub fn reward(loss: f64, is_final: bool, check_passed: bool, lambda: f64) -> f64 {
    let penalty = if is_final { loss } else { 0.0 } + if check_passed { 0.0 } else { lambda };
    1.0 - sigmoid(penalty)
}
