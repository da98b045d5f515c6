//! Parameter learning for the generative models inside a verified program.
//!
//! Verification holds for every parameter value, so tuning is ordinary
//! unconstrained optimisation: the task loss on the training data plus a
//! conformance term that rewards proposals the contract checker accepts.

pub mod hook;
pub mod loss;
pub mod optim;
pub mod tune;

use crate::runtime::error::RuntimeFault;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loss::{conformance_loss, reward, task_loss_nmse, violation, Conformance, PromptRecord};
pub use optim::Adam;
pub use tune::{
    augmented_loss, augmented_loss_with, bind_models, decomposed_loss, decomposed_loss_with, finite_difference_gradient, initial_params, parametric_sites,
    reverse_gradient, site_means, tune_parameters, Example, LossParts, Params, Problem, SiteInfo, StepRecord,
    TuneResult,
};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("dataset is empty or its targets are all zero")]
    DegenerateDataset,
    #[error("gradient is not finite at step {0}")]
    NonFiniteGradient(usize),
    #[error(transparent)]
    Runtime(#[from] RuntimeFault),
    #[error("program does not type-check: {0}")]
    Type(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "camelCase")]
pub enum GradientMode {
    Reverse,
    CentralDifference { h: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TuneMode {
    /// One optimiser over all parameters on the augmented loss.
    Joint,
    /// One optimiser per call site on its gated loss, run concurrently.
    Decomposed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossConfig {
    /// Weight of the conformance term.
    pub lambda: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub gradient: GradientMode,
    /// Fresh proposals per prompt when estimating conformance.
    pub conformance_samples: usize,
    pub mode: TuneMode,
    /// Seed of the (fixed) noise used to evaluate the objective.
    pub seed: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 1.0,
            learning_rate: 0.05,
            steps: 40,
            gradient: GradientMode::Reverse,
            conformance_samples: 1,
            mode: TuneMode::Joint,
            seed: 0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.learning_rate > 0.0) {
            return Err(LearnError::Config("learning rate must be positive".into()));
        }
        if self.steps == 0 {
            return Err(LearnError::Config("at least one step is required".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(LearnError::Config("lambda must be non-negative".into()));
        }
        if let GradientMode::CentralDifference { h } = self.gradient {
            if !(h > 0.0) {
                return Err(LearnError::Config("finite-difference step must be positive".into()));
            }
        }
        Ok(())
    }
}
