//! The restricted, verification-aware programming language: syntax,
//! printing, typing, and guarded-model definitions.

pub mod ast;
pub mod error;
pub mod fggm;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod sig;
pub mod typeck;

pub use ast::*;
pub use error::{FggmParseError, ParseError, TypeError};
pub use fggm::{parse_fggm, parse_fggms, print_fggm, FggmDef};
pub use parser::{parse_expr, parse_formula, parse_program, parse_type};
pub use printer::{print_decl, print_expr, print_formula, print_program};
pub use sig::{FnKind, FnSig, SignatureTable};
pub use typeck::{check_formula, elaborate, typecheck, Scope};
