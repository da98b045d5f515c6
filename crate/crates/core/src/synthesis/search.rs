//! The search-verify loop and the outer loop over a pool of verified
//! candidates.

use super::feedback::{collect_feedback, Feedback};
use super::planner::{Planner, PlannerRequest};
use super::{SynthesisConfig, SynthesisError, Task};
use crate::lang::{parse_fggm, parse_program, print_program, FggmDef, Program};
use crate::learn::{augmented_loss, initial_params, parametric_sites, tune_parameters, LossConfig, Params, Problem, SiteInfo, TuneResult};
use crate::runtime::rng::Rng;
use crate::verify::{validate_fggm, verify_program, VerifyReport};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// A verified program, possibly tuned.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub program: Program,
    /// Canonical (pretty-printed) source of `program`.
    pub source: String,
    pub fggms: Vec<FggmDef>,
    pub fggm_sources: Vec<String>,
    pub sites: Vec<SiteInfo>,
    pub params: Params,
    /// Aggregate training loss (NMSE) with `params`.
    pub train_loss: f64,
    pub iteration: usize,
    pub attempt: usize,
    pub planner: String,
    pub tuning: Option<TuneResult>,
    pub report: VerifyReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttemptLog {
    pub attempt: usize,
    pub program: Option<String>,
    pub verified: bool,
    pub errors: Vec<String>,
    pub millis: u64,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub candidate: Option<Candidate>,
    pub attempts: Vec<AttemptLog>,
}

/// Propose, validate and verify up to `budget` times. Errors of each failed
/// attempt are handed to the next planner call.
pub fn search_verify(
    task: &Task,
    planner: &mut dyn Planner,
    budget: usize,
    feedback: Option<&Feedback>,
    previous_program: Option<&str>,
    iteration: usize,
) -> Result<SearchOutcome, SynthesisError> {
    let mut attempts = Vec::new();
    let mut prior: Vec<String> = Vec::new();
    for attempt in 1..=budget {
        let t0 = Instant::now();
        let req = PlannerRequest { task: &task.info, feedback, prior_errors: &prior, previous_program };
        let (result, program) = match planner.propose(&req) {
            Err(e) => (Err(vec![format!("planner error: {e}")]), None),
            Ok(p) => {
                let r = check_proposal(task, &p.fggms, &p.program)?;
                (r, Some(p.program))
            }
        };
        match result {
            Ok((program_ast, fggms, report)) => {
                attempts.push(AttemptLog { attempt, program, verified: true, errors: vec![], millis: t0.elapsed().as_millis() as u64 });
                let fggm_sources = fggms.iter().map(crate::lang::print_fggm).collect();
                let sites = parametric_sites(&program_ast, &fggms, &task.lib, &task.registry)?;
                let source = print_program(&program_ast);
                return Ok(SearchOutcome {
                    candidate: Some(Candidate {
                        program: program_ast,
                        source,
                        fggms,
                        fggm_sources,
                        sites,
                        params: Params::new(),
                        train_loss: f64::INFINITY,
                        iteration,
                        attempt,
                        planner: planner.name().to_string(),
                        tuning: None,
                        report,
                    }),
                    attempts,
                });
            }
            Err(errors) => {
                planner.report_failure(&errors);
                attempts.push(AttemptLog {
                    attempt,
                    program,
                    verified: false,
                    errors: errors.clone(),
                    millis: t0.elapsed().as_millis() as u64,
                });
                prior = errors;
            }
        }
    }
    Ok(SearchOutcome { candidate: None, attempts })
}

type Checked = (Program, Vec<FggmDef>, VerifyReport);

/// `Ok(Err(errors))` for a rejected proposal; `Err` only when the solver
/// itself cannot be used.
fn check_proposal(task: &Task, fggm_srcs: &[String], program: &str) -> Result<Result<Checked, Vec<String>>, SynthesisError> {
    let mut fggms = Vec::new();
    let mut errors = Vec::new();
    for src in fggm_srcs {
        match parse_fggm(src) {
            Ok(d) => fggms.push(d),
            Err(e) => errors.push(format!("guarded model does not parse: {e}")),
        }
    }
    if !errors.is_empty() {
        return Ok(Err(errors));
    }
    for d in &fggms {
        for e in validate_fggm(d, &task.ctx)? {
            errors.push(format!("guarded model `{}`: {e}", d.id));
        }
    }
    if !errors.is_empty() {
        return Ok(Err(errors));
    }
    let prog = match parse_program(program) {
        Ok(p) => p,
        Err(e) => return Ok(Err(vec![format!("program does not parse: {e}")])),
    };
    let ctx = task.ctx.with_fggms(&fggms);
    let report = verify_program(&prog, &ctx, Some(&task.spec))?;
    if report.verified {
        Ok(Ok((prog, fggms, report)))
    } else {
        Ok(Err(report.messages()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationLog {
    pub iteration: usize,
    pub budget_charged: usize,
    pub budget_remaining: usize,
    pub attempts: Vec<AttemptLog>,
    /// Training loss of the candidate admitted in this iteration.
    pub admitted_loss: Option<f64>,
    pub best_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SynthesisRun {
    pub pool: Vec<Candidate>,
    /// Index of the returned agent in `pool` (`None`: search failed).
    pub best: Option<usize>,
    pub iterations: Vec<IterationLog>,
    pub feedback: Vec<Feedback>,
    pub proposals: usize,
}

impl SynthesisRun {
    pub fn best(&self) -> Option<&Candidate> {
        self.best.map(|i| &self.pool[i])
    }
}

fn tune(task: &Task, cand: &mut Candidate, cfg: &SynthesisConfig, iteration: usize) -> Result<(), SynthesisError> {
    let ctx = task.ctx.with_fggms(&cand.fggms);
    let problem = Problem {
        program: &cand.program,
        fggms: &cand.fggms,
        registry: &task.registry,
        lib: &task.lib,
        lib_ad: &task.lib_ad,
        data: &task.train,
        solver: Some(&ctx),
        k: cfg.k,
    };
    let root = Rng::new(cfg.seed);
    let init_seed = root.derive("init", iteration as u64).next_u64();
    let loss_cfg = LossConfig { seed: root.derive("tune", iteration as u64).next_u64(), ..cfg.loss };
    cand.params = initial_params(&cand.sites, &task.registry, init_seed);
    if cand.sites.iter().any(|s| s.dim > 0) {
        let r = tune_parameters(&problem, &cand.sites, &cand.params, &loss_cfg)?;
        cand.params = r.params.clone();
        cand.train_loss = r.final_loss.task;
        cand.tuning = Some(r);
    } else {
        cand.train_loss = augmented_loss(&problem, &cand.sites, &cand.params, &loss_cfg)?.task;
    }
    Ok(())
}

/// Repeated search-verify within the total budget; every verified candidate
/// is tuned and admitted to the pool, and the pool's training-loss argmin
/// is returned.
pub fn run_synthesis(task: &Task, planner: &mut dyn Planner, cfg: &SynthesisConfig) -> Result<SynthesisRun, SynthesisError> {
    cfg.validate()?;
    let mut run = SynthesisRun { pool: Vec::new(), best: None, iterations: Vec::new(), feedback: Vec::new(), proposals: 0 };
    let mut remaining = cfg.total_budget;
    let mut digest: Option<Feedback> = None;
    let mut iteration = 0;
    while remaining > 0 {
        let budget = cfg.per_candidate_budget.min(remaining);
        let previous = run.best().map(|c| c.source.clone());
        let out = search_verify(task, planner, budget, digest.as_ref(), previous.as_deref(), iteration)?;
        run.proposals += out.attempts.len();
        let charged = if cfg.exact_budget { out.attempts.len().max(1) } else { cfg.per_candidate_budget };
        remaining = remaining.saturating_sub(charged);
        let mut admitted = None;
        if let Some(mut cand) = out.candidate {
            tune(task, &mut cand, cfg, iteration)?;
            admitted = Some(cand.train_loss);
            run.pool.push(cand);
        }
        // Strict `<` keeps the earliest candidate on ties.
        run.best = run
            .pool
            .iter()
            .enumerate()
            .fold(None, |best: Option<usize>, (i, c)| match best {
                Some(b) if run.pool[b].train_loss <= c.train_loss => Some(b),
                _ => Some(i),
            });
        if let Some(b) = run.best {
            let seed = Rng::new(cfg.seed).derive("feedback", iteration as u64).next_u64();
            let fb = collect_feedback(&run.pool[b], task, planner, cfg.failure_tolerance, cfg.k, seed);
            digest = Some(fb.digest(cfg.feedback_digest));
            run.feedback.push(fb);
        }
        run.iterations.push(IterationLog {
            iteration,
            budget_charged: charged,
            budget_remaining: remaining,
            attempts: out.attempts,
            admitted_loss: admitted,
            best_loss: run.best().map(|c| c.train_loss),
        });
        iteration += 1;
    }
    Ok(run)
}
