//! The command implementations, callable without going through argv.

use crate::artifact::{self, ParamsFile, PoolEntry, StoredAgent};
use crate::error::{CliError, CliResult, ExitContext, EXIT_FAILURE, EXIT_INPUT};
use crate::spec::{read_manifest, LoadedSpec, Overrides, TaskData};
use gsynth_core::lang::{elaborate, parse_fggms, parse_program, print_program, FggmDef, Program};
use gsynth_core::learn::{bind_models, initial_params, parametric_sites, tune_parameters, Params, Problem, SiteInfo, TuneResult};
use gsynth_core::runtime::{fuzz_spec, Agent, FuzzConfig, FuzzReport, InputDomain, ModelBindings, Rng, RunOptions};
use gsynth_core::symreg::{self, Manifest};
use gsynth_core::synthesis::templates::BOUNDED_PARAM;
use gsynth_core::synthesis::{run_synthesis, SynthesisRun, Task};
use gsynth_core::verify::{validate_fggm, verify_program, SolverConfig, VerificationContext, VerifyReport};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).input_err(format!("cannot read {}", path.display()))
}

/// The built-in `boundedParam` definition followed by those in `files`; a
/// later definition replaces an earlier one with the same name.
pub fn load_fggms(files: &[PathBuf]) -> CliResult<Vec<FggmDef>> {
    let mut defs = parse_fggms(BOUNDED_PARAM).expect("built-in definition parses");
    for f in files {
        let parsed = parse_fggms(&read(f)?).input_err(format!("{} does not parse", f.display()))?;
        for d in parsed {
            defs.retain(|e| e.id != d.id);
            defs.push(d);
        }
    }
    Ok(defs)
}

/// Library context without a task file.
pub fn builtin_context(ov: &Overrides) -> VerificationContext {
    let mut solver = SolverConfig::default();
    if let Some(p) = &ov.solver {
        solver.path = p.clone();
    }
    if let Some(t) = ov.timeout_sec {
        solver.timeout_per_vc = Duration::from_secs_f64(t);
    }
    VerificationContext::new(symreg::signatures(), symreg::axioms(), symreg::models().signatures(), solver)
}

fn context(spec: Option<&LoadedSpec>, ov: &Overrides) -> CliResult<VerificationContext> {
    match spec {
        Some(s) => s.context(),
        None => Ok(builtin_context(ov)),
    }
}

fn parse_and_check(path: &Path, ctx: &VerificationContext) -> CliResult<Program> {
    let src = read(path)?;
    let prog = parse_program(&src).map_err(|e| CliError::msg(EXIT_INPUT, format!("{}:{e}", path.display())))?;
    elaborate(&prog, &ctx.sigs()).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("{}: type error: {e}", path.display())).collect();
        CliError::msg(EXIT_INPUT, lines.join("\n"))
    })?;
    Ok(prog)
}

/// Parse and type-check; returns the pretty-printed program.
pub fn cmd_parse(path: &Path, fggm_files: &[PathBuf], ov: &Overrides) -> CliResult<String> {
    let ctx = builtin_context(ov).with_fggms(&load_fggms(fggm_files)?);
    Ok(print_program(&parse_and_check(path, &ctx)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FggmCheck {
    pub id: String,
    pub valid: bool,
    pub errors: Vec<String>,
}

pub fn cmd_check_fggm(path: &Path, spec: Option<&LoadedSpec>, ov: &Overrides) -> CliResult<Vec<FggmCheck>> {
    let defs = parse_fggms(&read(path)?).input_err(format!("{} does not parse", path.display()))?;
    let ctx = context(spec, ov)?;
    defs.iter()
        .map(|d| {
            let errors = validate_fggm(d, &ctx)?;
            Ok(FggmCheck { id: d.id.clone(), valid: errors.is_empty(), errors })
        })
        .collect()
}

/// Verify a program, against the task contract when a spec is given.
pub fn cmd_verify(path: &Path, fggm_files: &[PathBuf], spec: Option<&LoadedSpec>, ov: &Overrides) -> CliResult<VerifyReport> {
    let ctx = context(spec, ov)?.with_fggms(&load_fggms(fggm_files)?);
    let prog = parse_and_check(path, &ctx)?;
    let contract = match spec {
        Some(s) => {
            let (phi, psi) = s.contract()?;
            Some(Task::symreg_data(&s.file.task, &phi, &psi, &[], s.solver.clone()).spec)
        }
        None => None,
    };
    Ok(verify_program(&prog, &ctx, contract.as_ref())?)
}

/// Metrics of an agent on the held-out split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalJson {
    #[serde(rename = "testNMSE")]
    pub test_nmse: f64,
    pub violation_rate: f64,
    pub fallback_rate: f64,
    pub acceptance_rate: f64,
    pub faults: usize,
    pub n_test: usize,
}

fn evaluate(task: &Task, data: &TaskData, stored: &StoredAgent, params: &ParamsFile, k: usize, seed: u64) -> CliResult<EvalJson> {
    let ctx = task.ctx.with_fggms(&stored.fggms);
    let agent = agent_of(task, stored, &ctx, k)?;
    let models = bind_models(&params.sites, &task.registry, &params.theta).input_err("parameters do not fit the agent")?;
    let r = symreg::evaluate_agent(&agent, &models, &data.test, &data.psi, seed);
    Ok(EvalJson {
        test_nmse: r.test_nmse,
        violation_rate: r.violation_rate,
        fallback_rate: r.fallback_rate,
        acceptance_rate: r.acceptance_rate,
        faults: r.faults,
        n_test: data.test.len(),
    })
}

fn agent_of<'a>(task: &'a Task, stored: &StoredAgent, ctx: &'a VerificationContext, k: usize) -> CliResult<Agent<'a, f64>> {
    let agent = Agent::new(&stored.program, &task.lib, &stored.fggms).map_err(|errs| {
        let lines: Vec<String> = errs.iter().map(|e| format!("type error: {e}")).collect();
        CliError::msg(EXIT_INPUT, format!("malformed artifact: {}", lines.join("; ")))
    })?;
    Ok(agent.with_options(RunOptions { k, ..RunOptions::default() }).with_solver(ctx))
}

/// Parameters of a stored agent, checked against its call sites.
fn stored_params(task: &Task, stored: &StoredAgent) -> CliResult<ParamsFile> {
    let sites = parametric_sites(&stored.program, &stored.fggms, &task.lib, &task.registry)
        .map_err(|e| CliError::msg(EXIT_INPUT, format!("malformed artifact: {e}")))?;
    let params = stored.params.clone().unwrap_or_default();
    for s in &sites {
        match params.theta.get(&s.site) {
            Some(t) if t.len() == s.dim => {}
            Some(t) => {
                return Err(CliError::msg(EXIT_INPUT, format!("malformed artifact: site {} has {} parameters, expected {}", s.site, t.len(), s.dim)))
            }
            None => return Err(CliError::msg(EXIT_INPUT, format!("malformed artifact: no parameters for site {}", s.site))),
        }
    }
    Ok(ParamsFile { sites, theta: params.theta })
}

pub fn cmd_eval(dir: &Path, spec: &LoadedSpec) -> CliResult<EvalJson> {
    let stored = artifact::load(dir)?;
    let data = spec.data()?;
    let task = spec.task(&data)?;
    let params = stored_params(&task, &stored)?;
    evaluate(&task, &data, &stored, &params, spec.file.budgets.k, spec.seeds.evaluation)
}

/// Fuzz a stored agent over Φ-satisfying inputs with random parameters.
pub fn cmd_fuzz(dir: &Path, spec: &LoadedSpec, n_inputs: usize, n_batches: usize) -> CliResult<FuzzReport> {
    let stored = artifact::load(dir)?;
    let data = spec.data()?;
    let task = spec.task(&data)?;
    let sites = stored_params(&task, &stored)?.sites;
    let ctx = task.ctx.with_fggms(&stored.fggms);
    let agent = agent_of(&task, &stored, &ctx, spec.file.budgets.k)?;
    let registry = &task.registry;
    let sampler = |rng: &mut Rng| -> ModelBindings<f64> {
        let theta: Params = sites.iter().map(|s| (s.site.clone(), registry.random_params(&s.gm, rng))).collect();
        bind_models(&sites, registry, &theta).expect("random parameters have the registry's dimensions")
    };
    let domain = InputDomain::default().with("x", data.x_range.0, data.x_range.1);
    let cfg = FuzzConfig { n_inputs, n_batches, seed: spec.seeds.fuzzing, ..FuzzConfig::default() };
    Ok(fuzz_spec(&agent, &task.spec, &domain, sampler, &cfg))
}

/// What `synthesize` prints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthesisSummary {
    pub task: String,
    pub returned: bool,
    pub proposals: usize,
    pub pool_size: usize,
    pub train_loss: Option<f64>,
    pub eval: Option<EvalJson>,
    pub out: PathBuf,
}

/// Full result of a synthesis command, for callers that want more than the
/// summary.
pub struct SynthesisOutcome {
    pub summary: SynthesisSummary,
    pub run: SynthesisRun,
    pub data: TaskData,
}

pub fn cmd_synthesize(spec: &LoadedSpec, out: &Path) -> CliResult<SynthesisOutcome> {
    let data = spec.data()?;
    let task = spec.task(&data)?;
    let cfg = spec.synthesis_config();
    let mut planner = spec.planner()?;
    let run = run_synthesis(&task, planner.as_mut(), &cfg)?;

    artifact::create_dir(out)?;
    artifact::write_json(out, artifact::TASK, &spec.resolved_file())?;
    artifact::write_json(out, artifact::SEEDS, &spec.seeds)?;
    artifact::write_jsonl(out, artifact::ITERATIONS, &run.iterations)?;
    artifact::write_jsonl(out, artifact::FEEDBACK, &run.feedback)?;
    let pool: Vec<PoolEntry> = run
        .pool
        .iter()
        .enumerate()
        .map(|(i, c)| PoolEntry {
            index: i,
            iteration: c.iteration,
            attempt: c.attempt,
            planner: c.planner.clone(),
            train_loss: c.train_loss,
            returned: run.best == Some(i),
            source: c.source.clone(),
        })
        .collect();
    artifact::write_json(out, artifact::POOL, &pool)?;

    let mut summary = SynthesisSummary {
        task: data.id.clone(),
        returned: false,
        proposals: run.proposals,
        pool_size: run.pool.len(),
        train_loss: None,
        eval: None,
        out: out.to_path_buf(),
    };
    if let Some(best) = run.best() {
        let params = ParamsFile { sites: best.sites.clone(), theta: best.params.clone() };
        let stored = StoredAgent { source: best.source.clone(), program: best.program.clone(), fggms: best.fggms.clone(), params: Some(params.clone()) };
        write_agent(out, &stored, &params, best.tuning.as_ref())?;
        let eval = evaluate(&task, &data, &stored, &params, cfg.k, spec.seeds.evaluation)?;
        artifact::write_json(out, artifact::EVAL, &eval)?;
        summary.returned = true;
        summary.train_loss = Some(best.train_loss);
        summary.eval = Some(eval);
    }
    Ok(SynthesisOutcome { summary, run, data })
}

fn write_agent(out: &Path, stored: &StoredAgent, params: &ParamsFile, tuning: Option<&TuneResult>) -> CliResult<()> {
    artifact::write(out, artifact::AGENT, &stored.source)?;
    let fggms: Vec<String> = stored.fggms.iter().map(gsynth_core::lang::print_fggm).collect();
    artifact::write(out, artifact::FGGMS, &fggms.join("\n"))?;
    artifact::write_json(out, artifact::PARAMS, params)?;
    artifact::write_json(out, artifact::TUNING, &tuning)
}

/// What `tune` prints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TuneSummary {
    pub sites: Vec<SiteInfo>,
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub eval: EvalJson,
}

/// Verify a hand-written program against the task, then tune its guarded
/// models on the training split.
pub fn cmd_tune(path: &Path, fggm_files: &[PathBuf], spec: &LoadedSpec, out: Option<&Path>) -> CliResult<TuneSummary> {
    let report = cmd_verify(path, fggm_files, Some(spec), &Overrides::default())?;
    if !report.verified {
        return Err(CliError::msg(EXIT_FAILURE, format!("program does not verify:\n{}", report.messages().join("\n"))));
    }
    let data = spec.data()?;
    let task = spec.task(&data)?;
    let fggms = load_fggms(fggm_files)?;
    let program = parse_program(&read(path)?).expect("parsed during verification");
    let ctx = task.ctx.with_fggms(&fggms);
    let sites = parametric_sites(&program, &fggms, &task.lib, &task.registry).map_err(CliError::input)?;
    let cfg = spec.synthesis_config();
    let problem = Problem {
        program: &program,
        fggms: &fggms,
        registry: &task.registry,
        lib: &task.lib,
        lib_ad: &task.lib_ad,
        data: &task.train,
        solver: Some(&ctx),
        k: cfg.k,
    };
    let root = Rng::new(cfg.seed);
    let init = initial_params(&sites, &task.registry, root.derive("init", 0).next_u64());
    let loss_cfg = gsynth_core::learn::LossConfig { seed: root.derive("tune", 0).next_u64(), ..cfg.loss };
    let tuning = if sites.iter().any(|s| s.dim > 0) {
        Some(tune_parameters(&problem, &sites, &init, &loss_cfg).map_err(CliError::input)?)
    } else {
        None
    };
    let theta = tuning.as_ref().map(|t| t.params.clone()).unwrap_or(init);
    let params = ParamsFile { sites: sites.clone(), theta };
    let stored = StoredAgent { source: print_program(&program), program, fggms, params: Some(params.clone()) };
    let eval = evaluate(&task, &data, &stored, &params, cfg.k, spec.seeds.evaluation)?;
    if let Some(out) = out {
        artifact::create_dir(out)?;
        artifact::write_json(out, artifact::TASK, &spec.resolved_file())?;
        artifact::write_json(out, artifact::SEEDS, &spec.seeds)?;
        write_agent(out, &stored, &params, tuning.as_ref())?;
        artifact::write_json(out, artifact::EVAL, &eval)?;
    }
    Ok(TuneSummary {
        sites,
        initial_loss: tuning.as_ref().map(|t| t.initial.total),
        final_loss: tuning.as_ref().map(|t| t.final_loss.total),
        eval,
    })
}

/// What `make-instance` prints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceSummary {
    pub manifest: Manifest,
    pub x_range: (f64, f64),
    pub n_train: usize,
    pub n_test: usize,
}

/// Materialise a dataset manifest as `train.csv` / `test.csv`.
pub fn cmd_make_instance(manifest: &Path, out: &Path) -> CliResult<InstanceSummary> {
    let m = read_manifest(manifest)?;
    let inst = symreg::make_instance(&m).map_err(CliError::input)?;
    artifact::create_dir(out)?;
    artifact::write_json(out, "manifest.json", &m)?;
    symreg::write_csv(&out.join("train.csv"), &inst.train).map_err(CliError::env)?;
    symreg::write_csv(&out.join("test.csv"), &inst.test).map_err(CliError::env)?;
    Ok(InstanceSummary { manifest: m, x_range: inst.x_range, n_train: inst.train.len(), n_test: inst.test.len() })
}
