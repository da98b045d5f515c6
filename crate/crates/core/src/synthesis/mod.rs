//! Program synthesis: planners, the search-verify loop and the outer
//! candidate-pool loop.

pub mod feedback;
#[cfg(feature = "http")]
pub mod http;
pub mod planner;
pub mod search;
pub mod sufficiency;
pub mod templates;

use crate::autodiff::Var;
use crate::lang::{print_formula, BaseType, Formula, Param};
use crate::learn::{Example, LearnError, LossConfig};
use crate::runtime::gm::GmRegistry;
use crate::runtime::library::Library;
use crate::symreg::{self, SymRegInstance};
use crate::verify::{ProgramSpec, SolverConfig, VerificationContext, VerifyError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use feedback::{collect_feedback, FailureCase, Feedback};
pub use planner::{fill_prompt, Planner, PlannerError, PlannerRequest, Proposal, ScriptedPlanner, PROMPT_TEMPLATE};
pub use search::{run_synthesis, search_verify, AttemptLog, Candidate, IterationLog, SearchOutcome, SynthesisRun};
pub use sufficiency::sufficient_success_agent;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid synthesis configuration: {0}")]
    Config(String),
    /// The solver could not be run at all.
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// What a planner is told about the task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskInfo {
    pub id: String,
    pub description: String,
    pub agent_signature: String,
    pub phi: String,
    pub psi: String,
    pub library_doc: String,
    pub axioms: Vec<String>,
}

/// Everything the synthesis loop needs about one task.
pub struct Task {
    pub info: TaskInfo,
    pub ctx: VerificationContext,
    pub spec: ProgramSpec,
    pub lib: Library<f64>,
    pub lib_ad: Library<Var>,
    pub registry: GmRegistry,
    pub train: Vec<Example>,
}

impl Task {
    /// A symbolic-regression task over the built-in library pack.
    pub fn symreg(inst: &SymRegInstance, solver: SolverConfig) -> Task {
        Task::symreg_data(&inst.manifest.gt_id, &inst.phi, &inst.psi, &inst.train, solver)
    }

    /// A one-input regression task over the built-in library pack from raw
    /// `(x, y)` training pairs and an explicit behavioural specification.
    pub fn symreg_data(id: &str, phi: &Formula, psi: &Formula, train: &[(f64, f64)], solver: SolverConfig) -> Task {
        let registry = symreg::models();
        let ctx = VerificationContext::new(symreg::signatures(), symreg::axioms(), registry.signatures(), solver);
        let spec = ProgramSpec {
            params: vec![Param::new("x", BaseType::Real)],
            ret: BaseType::Real,
            requires: phi.clone(),
            ensures: psi.clone(),
        };
        let info = TaskInfo {
            id: id.to_string(),
            description: format!(
                "Fit a function of one real input x to {} noisy samples while meeting the output specification.",
                train.len()
            ),
            agent_signature: format!(
                "function agent(x: real): (real)\n  requires {}\n  ensures {}",
                print_formula(&spec.requires),
                print_formula(&spec.ensures)
            ),
            phi: print_formula(phi),
            psi: print_formula(psi),
            library_doc: symreg::documentation(),
            axioms: symreg::axioms().iter().map(|a| format!("{}: {}", a.name, print_formula(&a.formula))).collect(),
        };
        Task {
            info,
            ctx,
            spec,
            lib: symreg::library(),
            lib_ad: symreg::library(),
            registry,
            train: train.iter().map(|&(x, y)| Example { args: vec![crate::runtime::Value::Real(x)], target: y }).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SynthesisConfig {
    /// Total planner budget Δ.
    pub total_budget: usize,
    /// Attempts per search-verify call δ.
    pub per_candidate_budget: usize,
    /// Proposals per guarded call.
    pub k: usize,
    pub loss: LossConfig,
    /// Charge only the attempts actually used instead of a full δ per
    /// search-verify call.
    pub exact_budget: bool,
    /// Relative error above which a training point is reported as failed.
    pub failure_tolerance: f64,
    /// Failures passed back to the planner.
    pub feedback_digest: usize,
    pub seed: u64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            total_budget: 10,
            per_candidate_budget: 2,
            k: crate::runtime::interp::DEFAULT_K,
            loss: LossConfig::default(),
            exact_budget: false,
            failure_tolerance: 0.1,
            feedback_digest: 5,
            seed: 0,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.per_candidate_budget == 0 || self.total_budget == 0 {
            return Err(SynthesisError::Config("budgets must be positive".into()));
        }
        if self.per_candidate_budget > self.total_budget {
            return Err(SynthesisError::Config("per-candidate budget exceeds the total budget".into()));
        }
        if self.k == 0 {
            return Err(SynthesisError::Config("at least one proposal per call is required".into()));
        }
        self.loss.validate()?;
        Ok(())
    }
}
