//! Task specification files and their resolution into a synthesis task.

use crate::error::{CliError, CliResult, ExitContext, EXIT_FAILURE};
use gsynth_core::lang::{parse_formula, Formula};
use gsynth_core::logic::{eval_qf, Axiom, AxiomText};
use gsynth_core::runtime::{Rng, Valuation, Value};
use gsynth_core::symreg::{self, Manifest};
use gsynth_core::synthesis::templates::{default_variants, TemplateVariant};
use gsynth_core::synthesis::{Planner, ScriptedPlanner, SynthesisConfig, Task};
use gsynth_core::learn::LossConfig;
use gsynth_core::verify::{SolverConfig, VerificationContext};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;

/// Library packs that can be named in a task file.
pub const LIBRARY_PACKS: &[&str] = &["symreg"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TaskSpecFile {
    pub task: String,
    #[serde(default = "default_library")]
    pub library: String,
    /// JSON file with extra axioms: `[{"name": ..., "formula": ...}]`.
    #[serde(default)]
    pub axioms: Option<String>,
    /// Overrides the dataset's input specification.
    #[serde(default)]
    pub phi: Option<String>,
    /// Overrides the dataset's output specification.
    #[serde(default)]
    pub psi: Option<String>,
    #[serde(default = "default_loss")]
    pub loss: String,
    pub dataset: DatasetRef,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_library() -> String {
    "symreg".into()
}

fn default_loss() -> String {
    "nmse".into()
}

/// Where the data comes from: an inline manifest, a manifest file, or a
/// pair of CSV files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    Manifest(Manifest),
    Csv { train: String, test: String },
    Path(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// Proposals per search-verify call.
    #[serde(default = "d_delta")]
    pub delta: usize,
    /// Total proposals.
    #[serde(rename = "Delta", default = "d_total")]
    pub total: usize,
    /// Proposals per guarded call.
    #[serde(rename = "K", default = "d_k")]
    pub k: usize,
    /// Weight of the conformance loss.
    #[serde(default = "d_lambda")]
    pub lambda: f64,
}

fn d_delta() -> usize {
    SynthesisConfig::default().per_candidate_budget
}
fn d_total() -> usize {
    SynthesisConfig::default().total_budget
}
fn d_k() -> usize {
    SynthesisConfig::default().k
}
fn d_lambda() -> f64 {
    LossConfig::default().lambda
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { delta: d_delta(), total: d_total(), k: d_k(), lambda: d_lambda() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlannerSpec {
    /// `scripted` (default) or `http`.
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// `default` or a JSON file with a list of template variants.
    #[serde(default)]
    pub template_set: Option<String>,
    #[serde(default)]
    pub timeout_sec: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub timeout_sec: Option<f64>,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub solver: Option<PathBuf>,
    pub timeout_sec: Option<f64>,
}

/// Child seeds, all derived from the one seed of the spec file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Seeds {
    pub spec: u64,
    /// Seed of the dataset manifest (datasets are inputs and keep their own).
    pub dataset: Option<u64>,
    pub synthesis: u64,
    pub evaluation: u64,
    pub fuzzing: u64,
}

impl Seeds {
    pub fn from_spec(seed: u64, dataset: Option<u64>) -> Self {
        let root = Rng::new(seed);
        let child = |name: &str| root.derive(name, 0).next_u64();
        Seeds { spec: seed, dataset, synthesis: child("synthesis"), evaluation: child("evaluation"), fuzzing: child("fuzzing") }
    }
}

/// A parsed and checked task file; paths are resolved against its directory.
#[derive(Clone, Debug)]
pub struct LoadedSpec {
    pub file: TaskSpecFile,
    pub dir: PathBuf,
    pub solver: SolverConfig,
    pub seeds: Seeds,
}

pub fn read_spec(path: &Path, ov: &Overrides) -> CliResult<LoadedSpec> {
    let text = std::fs::read_to_string(path).input_err(format!("cannot read task spec {}", path.display()))?;
    let mut file: TaskSpecFile = serde_json::from_str(&text).input_err(format!("malformed task spec {}", path.display()))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(s) = ov.seed {
        file.seed = s;
    }
    if let Some(p) = &ov.solver {
        file.solver.path = Some(p.display().to_string());
    }
    if let Some(t) = ov.timeout_sec {
        file.solver.timeout_sec = Some(t);
    }
    check(&file, &dir)?;
    let mut solver = SolverConfig::default();
    if let Some(p) = &file.solver.path {
        solver.path = PathBuf::from(p);
    }
    if let Some(t) = file.solver.timeout_sec {
        solver.timeout_per_vc = Duration::from_secs_f64(t);
    }
    let dataset_seed = match &file.dataset {
        DatasetRef::Manifest(m) => Some(m.seed),
        DatasetRef::Path(p) => Some(read_manifest(&dir.join(p))?.seed),
        DatasetRef::Csv { .. } => None,
    };
    let seeds = Seeds::from_spec(file.seed, dataset_seed);
    Ok(LoadedSpec { file, dir, solver, seeds })
}

fn check(f: &TaskSpecFile, dir: &Path) -> CliResult<()> {
    let bad = |m: String| Err(CliError::input(anyhow::anyhow!(m)));
    if !LIBRARY_PACKS.contains(&f.library.as_str()) {
        return bad(format!("unknown library pack `{}` (available: {})", f.library, LIBRARY_PACKS.join(", ")));
    }
    if f.loss != "nmse" {
        return bad(format!("unknown loss `{}` (available: nmse)", f.loss));
    }
    let b = &f.budgets;
    if b.delta == 0 || b.total == 0 || b.k == 0 {
        return bad("budgets delta, Delta and K must be positive".into());
    }
    if b.delta > b.total {
        return bad(format!("delta ({}) exceeds Delta ({})", b.delta, b.total));
    }
    if !(b.lambda >= 0.0 && b.lambda.is_finite()) {
        return bad("lambda must be a non-negative number".into());
    }
    if let Some(t) = f.solver.timeout_sec {
        if !(t > 0.0 && t.is_finite()) {
            return bad("solver timeoutSec must be positive".into());
        }
    }
    let mut paths: Vec<&str> = Vec::new();
    paths.extend(f.axioms.as_deref());
    match &f.dataset {
        DatasetRef::Csv { train, test } => paths.extend([train.as_str(), test.as_str()]),
        DatasetRef::Path(p) => paths.push(p),
        DatasetRef::Manifest(_) => {}
    }
    if let Some(t) = f.planner.template_set.as_deref().filter(|t| *t != "default") {
        paths.push(t);
    }
    for p in paths {
        if !dir.join(p).exists() {
            return bad(format!("referenced file `{p}` does not exist"));
        }
    }
    match f.planner.backend.as_deref().unwrap_or("scripted") {
        "scripted" => {}
        "http" if f.planner.endpoint.is_some() => {}
        "http" => return bad("the http planner needs an endpoint".into()),
        other => return bad(format!("unknown planner backend `{other}` (available: scripted, http)")),
    }
    Ok(())
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let text = std::fs::read_to_string(path).input_err(format!("cannot read manifest {}", path.display()))?;
    serde_json::from_str(&text).input_err(format!("malformed manifest {}", path.display()))
}

/// The resolved data and contract of a task.
#[derive(Clone, Debug)]
pub struct TaskData {
    pub id: String,
    pub manifest: Option<Manifest>,
    pub phi: Formula,
    pub psi: Formula,
    pub x_range: (f64, f64),
    pub train: Vec<(f64, f64)>,
    pub test: Vec<(f64, f64)>,
}

fn formula(text: &str, what: &str) -> CliResult<Formula> {
    parse_formula(text).input_err(format!("{what} does not parse"))
}

impl LoadedSpec {
    /// Input and output specification only, without building the dataset.
    pub fn contract(&self) -> CliResult<(Formula, Formula)> {
        let truth = match &self.file.dataset {
            DatasetRef::Manifest(m) => Some(m.gt_id.clone()),
            DatasetRef::Path(p) => Some(read_manifest(&self.dir.join(p))?.gt_id),
            DatasetRef::Csv { .. } => None,
        };
        let truth = match truth {
            Some(id) => Some(symreg::ground_truth(&id).ok_or_else(|| CliError::msg(2, format!("unknown ground truth `{id}`")))?),
            None => None,
        };
        let pick = |own: &Option<String>, builtin: Option<&str>, what: &str| match (own, builtin) {
            (Some(t), _) => formula(t, what),
            (None, Some(t)) => formula(t, what),
            (None, None) => Err(CliError::msg(2, format!("{what} must be given for CSV datasets"))),
        };
        Ok((pick(&self.file.phi, truth.map(|g| g.phi), "phi")?, pick(&self.file.psi, truth.map(|g| g.psi), "psi")?))
    }

    pub fn data(&self) -> CliResult<TaskData> {
        let (phi, psi) = self.contract()?;
        let (manifest, x_range, train, test) = match &self.file.dataset {
            DatasetRef::Csv { train, test } => {
                let train = symreg::read_csv(&self.dir.join(train)).map_err(CliError::input)?;
                let test = symreg::read_csv(&self.dir.join(test)).map_err(CliError::input)?;
                let lo = train.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                let hi = train.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
                (None, (lo, hi), train, test)
            }
            other => {
                let m = match other {
                    DatasetRef::Manifest(m) => m.clone(),
                    DatasetRef::Path(p) => read_manifest(&self.dir.join(p))?,
                    DatasetRef::Csv { .. } => unreachable!(),
                };
                let inst = symreg::make_instance(&m).map_err(CliError::input)?;
                (Some(m), inst.x_range, inst.train, inst.test)
            }
        };
        if train.is_empty() || test.is_empty() {
            return Err(CliError::msg(2, "dataset has an empty train or test split"));
        }
        // Only inputs meeting Φ are part of the task.
        let lib = symreg::library::<f64>();
        let holds = |x: f64| {
            let env: Valuation<f64> = [("x".to_string(), Value::Real(x))].into();
            eval_qf(&phi, &env, &lib).unwrap_or(false)
        };
        let train: Vec<_> = train.into_iter().filter(|p| holds(p.0)).collect();
        let test: Vec<_> = test.into_iter().filter(|p| holds(p.0)).collect();
        if train.is_empty() || test.is_empty() {
            return Err(CliError::msg(
                EXIT_FAILURE,
                format!(
                    "the input specification `{}` is unsatisfiable over the data range [{}, {}]: no sample satisfies it",
                    gsynth_core::lang::print_formula(&phi),
                    x_range.0,
                    x_range.1
                ),
            ));
        }
        Ok(TaskData { id: self.file.task.clone(), manifest, phi, psi, x_range, train, test })
    }

    /// The task file with every referenced path made absolute, so that it
    /// can be rerun from anywhere.
    pub fn resolved_file(&self) -> TaskSpecFile {
        let abs = |p: &str| {
            let joined = self.dir.join(p);
            joined.canonicalize().unwrap_or(joined).display().to_string()
        };
        let mut f = self.file.clone();
        f.axioms = f.axioms.as_deref().map(abs);
        f.dataset = match &f.dataset {
            DatasetRef::Csv { train, test } => DatasetRef::Csv { train: abs(train), test: abs(test) },
            DatasetRef::Path(p) => DatasetRef::Path(abs(p)),
            m => m.clone(),
        };
        if let Some(t) = f.planner.template_set.as_deref().filter(|t| *t != "default") {
            f.planner.template_set = Some(abs(t));
        }
        f
    }

    pub fn extra_axioms(&self) -> CliResult<Vec<Axiom>> {
        let Some(p) = &self.file.axioms else { return Ok(vec![]) };
        let path = self.dir.join(p);
        let text = std::fs::read_to_string(&path).input_err(format!("cannot read axioms {}", path.display()))?;
        let raw: Vec<AxiomText> = serde_json::from_str(&text).input_err(format!("malformed axioms {}", path.display()))?;
        raw.iter().map(|a| Ok(Axiom::new(&a.name, formula(&a.formula, &format!("axiom `{}`", a.name))?))).collect()
    }

    /// Verification context of the library pack plus the file's axioms.
    pub fn context(&self) -> CliResult<VerificationContext> {
        let mut ctx = VerificationContext::new(symreg::signatures(), symreg::axioms(), symreg::models().signatures(), self.solver.clone());
        ctx.axioms.extend(self.extra_axioms()?);
        Ok(ctx)
    }

    pub fn task(&self, data: &TaskData) -> CliResult<Task> {
        let mut task = Task::symreg_data(&data.id, &data.phi, &data.psi, &data.train, self.solver.clone());
        task.ctx = self.context()?;
        Ok(task)
    }

    pub fn synthesis_config(&self) -> SynthesisConfig {
        let b = &self.file.budgets;
        let base = SynthesisConfig::default();
        SynthesisConfig {
            total_budget: b.total,
            per_candidate_budget: b.delta,
            k: b.k,
            loss: LossConfig { lambda: b.lambda, ..base.loss },
            seed: self.seeds.synthesis,
            ..base
        }
    }

    pub fn planner(&self) -> CliResult<Box<dyn Planner>> {
        let p = &self.file.planner;
        match p.backend.as_deref().unwrap_or("scripted") {
            "http" => http_planner(p),
            _ => {
                let variants = match p.template_set.as_deref() {
                    None | Some("default") => default_variants(),
                    Some(path) => {
                        let path = self.dir.join(path);
                        let text = std::fs::read_to_string(&path).input_err(format!("cannot read template set {}", path.display()))?;
                        serde_json::from_str::<Vec<TemplateVariant>>(&text).input_err(format!("malformed template set {}", path.display()))?
                    }
                };
                Ok(Box::new(ScriptedPlanner::new(variants)))
            }
        }
    }
}

fn http_planner(p: &PlannerSpec) -> CliResult<Box<dyn Planner>> {
    let endpoint = p.endpoint.as_deref().unwrap_or_default();
    let timeout = Duration::from_secs_f64(p.timeout_sec.unwrap_or(60.0));
    Ok(Box::new(gsynth_core::synthesis::http::HttpPlanner::new(endpoint, timeout)))
}
