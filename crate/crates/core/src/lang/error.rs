use super::ast::{BaseType, Span};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
#[error("parse error at {span}: {message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

impl ParseError {
    pub fn new(span: Span, message: impl Into<String>) -> Self {
        ParseError { span, message: message.into() }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TypeError {
    #[error("{span}: expected {expected}, found {found}")]
    Mismatch { span: Span, expected: BaseType, found: BaseType },
    #[error("{span}: unknown identifier `{name}`")]
    UnknownIdentifier { span: Span, name: String },
    #[error("{span}: unknown function `{name}`")]
    UnknownFunction { span: Span, name: String },
    #[error("{span}: `{name}` expects {expected} argument(s), got {found}")]
    Arity { span: Span, name: String, expected: usize, found: usize },
    #[error("{span}: `{name}` is already declared")]
    Duplicate { span: Span, name: String },
    #[error("{span}: cannot assign to `{name}`: {reason}")]
    BadAssignment { span: Span, name: String, reason: String },
    #[error("`{name}`: not every control path ends in a return")]
    MissingReturn { name: String },
    #[error("recursive call cycle through `{name}`")]
    Recursion { name: String },
    #[error("{span}: {message}")]
    Other { span: Span, message: String },
}

/// Errors produced when reading a guarded-model definition.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum FggmParseError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}`: {source}")]
    Field { field: String, source: ParseError },
    #[error("{0}")]
    Malformed(String),
}
