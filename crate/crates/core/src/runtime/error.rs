use thiserror::Error;

/// Faults raised while evaluating programs or formulas on concrete values.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum RuntimeFault {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("precondition of `{0}` violated")]
    PreconditionViolated(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite real value ({0})")]
    NonFinite(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("formula is not quantifier-free")]
    NotQuantifierFree,
    #[error("execution exceeded {0} steps")]
    StepLimit(u64),
    #[error("no generative model bound for call site `{0}`")]
    MissingModel(String),
    #[error("generative model failure: {0}")]
    Model(String),
    #[error("function `{0}` finished without returning")]
    NoReturn(String),
    #[error("contract check failed: {0}")]
    Solver(String),
}
