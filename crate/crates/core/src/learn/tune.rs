//! Gradient-based tuning of model parameters.
//!
//! The objective is evaluated with a fixed noise seed at every step (common
//! random numbers), which makes it a deterministic, almost-everywhere
//! differentiable function of θ that reverse-mode AD and finite differences
//! can both evaluate.

use super::loss::{conformance_loss, task_loss_nmse, Conformance, PromptRecord};
use super::optim::Adam;
use super::{GradientMode, LearnError, LossConfig, TuneMode};
use crate::autodiff::{Tape, Var};
use crate::lang::ast::Program;
use crate::lang::fggm::FggmDef;
use crate::lang::typeck::call_sites;
use crate::lang::elaborate;
use crate::runtime::gm::GmRegistry;
use crate::runtime::interp::{Agent, ModelBindings, RunOptions};
use crate::runtime::library::Library;
use crate::runtime::rng::Rng;
use crate::runtime::value::Value;
use crate::scalar::Scalar;
use crate::verify::VerificationContext;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Parameters per call site (`name#k`).
pub type Params = BTreeMap<String, Vec<f64>>;

/// One training or test point.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub args: Vec<Value<f64>>,
    pub target: f64,
}

/// A guarded call site together with the model behind it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SiteInfo {
    pub site: String,
    pub fggm: String,
    pub gm: String,
    pub dim: usize,
}

/// Everything needed to evaluate the tuning objective.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub program: &'a Program,
    pub fggms: &'a [FggmDef],
    pub registry: &'a GmRegistry,
    pub lib: &'a Library<f64>,
    pub lib_ad: &'a Library<Var>,
    pub data: &'a [Example],
    pub solver: Option<&'a VerificationContext>,
    pub k: usize,
}

/// Decomposition of a loss value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossParts {
    pub total: f64,
    pub task: f64,
    pub conformance: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub step: usize,
    /// Site optimised in this record (`None` in joint mode).
    pub site: Option<String>,
    pub objective: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TuneResult {
    pub params: Params,
    pub history: Vec<StepRecord>,
    /// Augmented loss (indicator conformance) before tuning.
    pub initial: LossParts,
    /// Augmented loss (indicator conformance) after tuning.
    #[serde(rename = "final")]
    pub final_loss: LossParts,
}

/// Guarded call sites of `program`, with their model and parameter count.
pub fn parametric_sites(
    program: &Program,
    fggms: &[FggmDef],
    lib: &Library<f64>,
    registry: &GmRegistry,
) -> Result<Vec<SiteInfo>, LearnError> {
    let mut sigs = lib.sigs.clone();
    for d in fggms {
        sigs.insert(d.signature());
    }
    let elab = elaborate(program, &sigs).map_err(|e| LearnError::Type(e[0].to_string()))?;
    call_sites(&elab)
        .into_iter()
        .map(|(site, name)| {
            let def = fggms
                .iter()
                .find(|d| d.id == name)
                .ok_or_else(|| LearnError::Config(format!("no definition for guarded model `{name}`")))?;
            Ok(SiteInfo { site, fggm: name, gm: def.gm_id.clone(), dim: registry.param_dim(&def.gm_id) })
        })
        .collect()
}

/// Registry initial parameters, one independent stream per site.
pub fn initial_params(sites: &[SiteInfo], registry: &GmRegistry, seed: u64) -> Params {
    let root = Rng::new(seed);
    sites
        .iter()
        .enumerate()
        .map(|(k, s)| (s.site.clone(), registry.initial_params(&s.gm, &mut root.derive("init", k as u64))))
        .collect()
}

/// Instantiate one model per call site.
pub fn bind_models<S: Scalar>(
    sites: &[SiteInfo],
    registry: &GmRegistry,
    theta: &BTreeMap<String, Vec<S>>,
) -> Result<ModelBindings<S>, LearnError> {
    let mut out: ModelBindings<S> = BTreeMap::new();
    for s in sites {
        let t = theta.get(&s.site).cloned().unwrap_or_default();
        out.insert(s.site.clone(), registry.instantiate(&s.gm, &t)?);
    }
    Ok(out)
}

struct Evaluated<S> {
    total: S,
    task: S,
    conformance: BTreeMap<String, S>,
}

/// The objective at `theta`. With `gate = Some(site)` only the task error
/// of points whose final output was produced by that site counts, and only
/// that site's conformance is added.
fn objective<S: Scalar>(
    p: &Problem,
    sites: &[SiteInfo],
    lib: &Library<S>,
    models: &ModelBindings<S>,
    cfg: &LossConfig,
    kind: Conformance,
    gate: Option<&str>,
) -> Result<Evaluated<S>, LearnError> {
    let mut agent = Agent::new(p.program, lib, p.fggms)
        .map_err(|e| LearnError::Type(e[0].to_string()))?
        .with_options(RunOptions { k: p.k, ..RunOptions::default() });
    if let Some(ctx) = p.solver {
        agent = agent.with_solver(ctx);
    }
    let root = Rng::new(cfg.seed);
    let targets: Vec<f64> = p.data.iter().map(|e| e.target).collect();
    let mut preds = Vec::with_capacity(p.data.len());
    let mut prompts: BTreeMap<String, Vec<PromptRecord<S>>> = BTreeMap::new();
    let mut gated = S::zero();
    let c: f64 = targets.iter().map(|y| y * y).sum();
    for (i, ex) in p.data.iter().enumerate() {
        let args: Vec<Value<S>> = ex.args.iter().map(|v| v.cast()).collect();
        let (y, calls) = agent.run_args(models, &args, &mut root.derive("point", i as u64))?;
        let y_real = y.as_real()?;
        preds.push(y_real);
        for rec in calls {
            if let Some(g) = gate {
                if rec.site == g && rec.output.cast::<f64>() == y.cast::<f64>() {
                    let out = rec.output.as_real()?;
                    let d = out - S::lit(ex.target);
                    gated = gated + d * d;
                }
            }
            prompts.entry(rec.site.clone()).or_default().push(PromptRecord {
                site: rec.site,
                args: rec.args,
                prompt: rec.prompt,
            });
        }
    }
    let task = match gate {
        None => task_loss_nmse(&targets, &preds)?.1,
        Some(_) => {
            if p.data.is_empty() || c == 0.0 {
                return Err(LearnError::DegenerateDataset);
            }
            gated / S::lit(c)
        }
    };
    let mut conformance = BTreeMap::new();
    let mut total = task;
    for (k, s) in sites.iter().enumerate() {
        if gate.is_some_and(|g| g != s.site) {
            continue;
        }
        let def = p.fggms.iter().find(|d| d.id == s.fggm).expect("site has a definition");
        let recs = prompts.get(&s.site).map(Vec::as_slice).unwrap_or(&[]);
        let mut rng = root.derive("conformance", k as u64);
        let gm = models
            .get(&s.site)
            .or_else(|| models.get(&s.fggm))
            .ok_or_else(|| LearnError::Config(format!("no model bound for `{}`", s.site)))?;
        let l = conformance_loss(def, gm.as_ref(), recs, lib, cfg.conformance_samples, kind, p.solver, &mut rng)?;
        total = total + S::lit(cfg.lambda) * l;
        conformance.insert(s.site.clone(), l);
    }
    Ok(Evaluated { total, task, conformance })
}

fn parts(e: Evaluated<f64>) -> LossParts {
    LossParts { total: e.total, task: e.task, conformance: e.conformance }
}

/// Augmented loss with the indicator conformance: task NMSE plus λ times
/// the estimated rejection rate of every site.
pub fn augmented_loss(p: &Problem, sites: &[SiteInfo], params: &Params, cfg: &LossConfig) -> Result<LossParts, LearnError> {
    augmented_loss_with(p, sites, &bind_models(sites, p.registry, params)?, cfg)
}

/// [`augmented_loss`] for arbitrary (possibly non-parametric) models.
pub fn augmented_loss_with(
    p: &Problem,
    sites: &[SiteInfo],
    models: &ModelBindings<f64>,
    cfg: &LossConfig,
) -> Result<LossParts, LearnError> {
    objective(p, sites, p.lib, models, cfg, Conformance::Indicator, None).map(parts)
}

/// Decomposed loss of one site with the indicator conformance.
pub fn decomposed_loss(
    p: &Problem,
    sites: &[SiteInfo],
    params: &Params,
    site: &str,
    cfg: &LossConfig,
) -> Result<LossParts, LearnError> {
    decomposed_loss_with(p, sites, &bind_models(sites, p.registry, params)?, site, cfg)
}

/// [`decomposed_loss`] for arbitrary models.
pub fn decomposed_loss_with(
    p: &Problem,
    sites: &[SiteInfo],
    models: &ModelBindings<f64>,
    site: &str,
    cfg: &LossConfig,
) -> Result<LossParts, LearnError> {
    objective(p, sites, p.lib, models, cfg, Conformance::Indicator, Some(site)).map(parts)
}

/// Flatten the parameters of `active` sites in site order.
fn flatten(params: &Params, active: &[&SiteInfo]) -> Vec<f64> {
    active.iter().flat_map(|s| params.get(&s.site).cloned().unwrap_or_default()).collect()
}

fn unflatten(params: &mut Params, active: &[&SiteInfo], flat: &[f64]) {
    let mut off = 0;
    for s in active {
        params.insert(s.site.clone(), flat[off..off + s.dim].to_vec());
        off += s.dim;
    }
}

/// Surrogate objective and its gradient with respect to the parameters of
/// `active` sites, by reverse-mode AD.
pub fn reverse_gradient(
    p: &Problem,
    sites: &[SiteInfo],
    params: &Params,
    active: &[&SiteInfo],
    cfg: &LossConfig,
    gate: Option<&str>,
) -> Result<(f64, Vec<f64>), LearnError> {
    Tape::reset();
    let mut theta: BTreeMap<String, Vec<Var>> =
        params.iter().map(|(k, v)| (k.clone(), v.iter().map(|&x| Var::constant(x)).collect())).collect();
    let mut leaves = Vec::new();
    for s in active {
        let vars: Vec<Var> = params.get(&s.site).cloned().unwrap_or_default().into_iter().map(Tape::leaf).collect();
        leaves.extend(vars.iter().copied());
        theta.insert(s.site.clone(), vars);
    }
    let models = bind_models(sites, p.registry, &theta)?;
    let e = objective(p, sites, p.lib_ad, &models, cfg, Conformance::Surrogate, gate)?;
    let g = Tape::gradient(e.total, &leaves);
    Tape::reset();
    Ok((e.total.val(), g))
}

/// Central-difference gradient of the same surrogate objective in `f64`.
pub fn finite_difference_gradient(
    p: &Problem,
    sites: &[SiteInfo],
    params: &Params,
    active: &[&SiteInfo],
    cfg: &LossConfig,
    gate: Option<&str>,
    h: f64,
) -> Result<(f64, Vec<f64>), LearnError> {
    let f = |params: &Params| -> Result<f64, LearnError> {
        let models = bind_models(sites, p.registry, params)?;
        Ok(objective(p, sites, p.lib, &models, cfg, Conformance::Surrogate, gate)?.total)
    };
    let base = f(params)?;
    let flat = flatten(params, active);
    let mut grad = Vec::with_capacity(flat.len());
    let mut work = params.clone();
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += h;
        unflatten(&mut work, active, &plus);
        let fp = f(&work)?;
        let mut minus = flat.clone();
        minus[i] -= h;
        unflatten(&mut work, active, &minus);
        let fm = f(&work)?;
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok((base, grad))
}

fn optimise(
    p: &Problem,
    sites: &[SiteInfo],
    start: &Params,
    active: &[&SiteInfo],
    cfg: &LossConfig,
    gate: Option<&str>,
) -> Result<(Params, Vec<StepRecord>), LearnError> {
    let mut params = start.clone();
    let mut flat = flatten(&params, active);
    let mut opt = Adam::new(flat.len(), cfg.learning_rate);
    let mut halved = false;
    let mut history = Vec::new();
    let mut step = 0;
    while step < cfg.steps {
        let (obj, grad) = match cfg.gradient {
            GradientMode::Reverse => reverse_gradient(p, sites, &params, active, cfg, gate)?,
            GradientMode::CentralDifference { h } => finite_difference_gradient(p, sites, &params, active, cfg, gate, h)?,
        };
        if !obj.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            if halved {
                return Err(LearnError::NonFiniteGradient(step));
            }
            halved = true;
            opt.lr /= 2.0;
            continue;
        }
        history.push(StepRecord { step, site: gate.map(str::to_string), objective: obj, learning_rate: opt.lr });
        opt.step(&mut flat, &grad);
        unflatten(&mut params, active, &flat);
        step += 1;
    }
    Ok((params, history))
}

/// Tune the parameters of every parametric call site.
///
/// In [`TuneMode::Joint`] a single optimiser minimises the augmented loss;
/// in [`TuneMode::Decomposed`] each site gets its own optimiser on its
/// gated loss, all running concurrently against the *initial* parameters
/// of the other sites.
pub fn tune_parameters(p: &Problem, sites: &[SiteInfo], init: &Params, cfg: &LossConfig) -> Result<TuneResult, LearnError> {
    cfg.validate()?;
    let initial = augmented_loss(p, sites, init, cfg)?;
    let trainable: Vec<&SiteInfo> = sites.iter().filter(|s| s.dim > 0).collect();
    let (params, history) = match cfg.mode {
        TuneMode::Joint => optimise(p, sites, init, &trainable, cfg, None)?,
        TuneMode::Decomposed => {
            let results: Vec<Result<(Params, Vec<StepRecord>), LearnError>> = trainable
                .par_iter()
                .map(|s| optimise(p, sites, init, &[*s], cfg, Some(&s.site)))
                .collect();
            let mut params = init.clone();
            let mut history = Vec::new();
            for (s, r) in trainable.iter().zip(results) {
                let (ps, h) = r?;
                params.insert(s.site.clone(), ps[&s.site].clone());
                history.extend(h);
            }
            (params, history)
        }
    };
    let final_loss = augmented_loss(p, sites, &params, cfg)?;
    Ok(TuneResult { params, history, initial, final_loss })
}

/// Mean model output per site at the prompts seen on the first example.
pub fn site_means(p: &Problem, sites: &[SiteInfo], params: &Params, seed: u64) -> Result<BTreeMap<String, f64>, LearnError> {
    let ex = p.data.first().ok_or(LearnError::DegenerateDataset)?;
    let mut agent = Agent::new(p.program, p.lib, p.fggms)
        .map_err(|e| LearnError::Type(e[0].to_string()))?
        .with_options(RunOptions { k: p.k, ..RunOptions::default() });
    if let Some(ctx) = p.solver {
        agent = agent.with_solver(ctx);
    }
    let models = bind_models(sites, p.registry, params)?;
    let (_, calls) = agent.run_args(&models, &ex.args, &mut Rng::new(seed))?;
    let mut out = BTreeMap::new();
    for rec in calls {
        if let Some(m) = models.get(&rec.site).and_then(|gm| gm.mean(&rec.prompt)) {
            out.insert(rec.site.clone(), m?.as_real()?);
        }
    }
    Ok(out)
}
