//! Synthesis of programs that call generative models through formally
//! guarded wrappers: a small verified language, a VC generator backed by an
//! SMT solver, an interpreter with rejection-sampling guarded calls,
//! gradient-based tuning of model parameters, and a search loop that
//! proposes, verifies and tunes candidate programs.
//!
//! The numeric core is generic over the scalar type ([`Scalar`]); the
//! aliases below fix it to `f64` for ordinary use.

pub mod autodiff;
pub mod lang;
pub mod learn;
pub mod logic;
pub mod runtime;
pub mod scalar;
pub mod symreg;
pub mod synthesis;
pub mod verify;

pub use scalar::Scalar;

/// Runtime value over `f64` reals.
pub type Value64 = runtime::Value<f64>;
/// Valuation over `f64` reals.
pub type Valuation64 = runtime::Valuation<f64>;
/// Library with `f64` natives.
pub type Library64 = runtime::Library<f64>;
/// Runtime value over single-precision reals.
pub type Value32 = runtime::Value<f32>;
/// Library with `f32` natives.
pub type Library32 = runtime::Library<f32>;
