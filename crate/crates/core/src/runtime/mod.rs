//! Execution: values, the library, generative models, the interpreter with
//! guarded-call rejection sampling, and fuzzing.

pub mod error;
pub mod fuzz;
pub mod gm;
#[cfg(feature = "http")]
pub mod http;
pub mod interp;
pub mod library;
pub mod ops;
pub mod rng;
pub mod value;

pub use error::RuntimeFault;
pub use fuzz::{fuzz_spec, FuzzConfig, FuzzReport, InputDomain};
pub use gm::{GenerativeModel, GmKind, GmRegistry, GmSignature, MlpGm};
pub use interp::{
    contract_check, fggm_call, run_agent, run_program, Agent, CallRecord, ExecTrace, ModelBindings, PreparedFggm,
    RunOptions,
};
pub use library::Library;
pub use rng::Rng;
pub use value::{Valuation, Value};
