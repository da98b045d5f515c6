use gsynth_core::synthesis::SynthesisError;
use gsynth_core::verify::VerifyError;
use std::fmt;

/// Success.
pub const EXIT_OK: i32 = 0;
/// Synthesis returned nothing, or the program did not verify.
pub const EXIT_FAILURE: i32 = 1;
/// Malformed input: unreadable spec, parse or type errors, bad artifact.
pub const EXIT_INPUT: i32 = 2;
/// The environment let us down: missing solver, unwritable output, …
pub const EXIT_ENV: i32 = 3;

/// An error together with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn input(e: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_INPUT, error: e.into() }
    }

    pub fn env(e: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_ENV, error: e.into() }
    }

    pub fn failure(e: impl Into<anyhow::Error>) -> Self {
        CliError { code: EXIT_FAILURE, error: e.into() }
    }

    pub fn msg(code: i32, m: impl fmt::Display) -> Self {
        CliError { code, error: anyhow::anyhow!("{m}") }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Solver(_) => CliError::env(e),
            _ => CliError::input(e),
        }
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::Verify(v) => v.into(),
            other => CliError::input(other),
        }
    }
}

/// Attach an exit code to any error.
pub trait ExitContext<T> {
    fn input_err(self, what: impl fmt::Display) -> CliResult<T>;
    fn env_err(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> ExitContext<T> for Result<T, E> {
    fn input_err(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::input(e.into().context(what.to_string())))
    }

    fn env_err(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::env(e.into().context(what.to_string())))
    }
}
