//! Constrained symbolic regression: the library pack, benchmark instances
//! and evaluation.

pub mod instance;
pub mod library;

pub use instance::{
    behavioral_spec_running, evaluate_agent, ground_truth, make_instance, nmse, read_csv, write_csv, EvalReport,
    GroundTruth, Manifest, SymRegError, SymRegInstance, GROUND_TRUTHS, RUNNING,
};
pub use library::{axioms, documentation, library, models, signatures};
