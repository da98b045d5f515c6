//! Formulas as data: substitution, concrete evaluation, simplification and
//! the SMT-LIB encoding.

pub mod eval;
pub mod simplify;
pub mod smt;
pub mod subst;

use crate::lang::ast::*;
use crate::lang::sig::{FnKind, FnSig, SignatureTable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{eval_expr, eval_qf};
pub use smt::{encode_solver, SmtOptions};
pub use subst::{free_vars, subst_formula, substitute};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LogicError {
    #[error("`{var}` is declared {expected} but bound to a {found}")]
    TypeMismatch { var: String, expected: BaseType, found: BaseType },
    #[error("`{0}` is bound to a non-finite value")]
    NonFinite(String),
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
}

/// A named closed formula assumed by the verifier.
#[derive(Clone, Debug, PartialEq)]
pub struct Axiom {
    pub name: String,
    pub formula: Formula,
}

impl Axiom {
    pub fn new(name: &str, formula: Formula) -> Self {
        Axiom { name: name.to_string(), formula }
    }
}

/// Serializable form used in task files: `{ "name": ..., "formula": "..." }`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AxiomText {
    pub name: String,
    pub formula: String,
}

/// `∀ params. requires ⟹ ensures[f(params)/result]` for a function with a
/// specification.
pub fn contract_axiom(sig: &FnSig) -> Option<Axiom> {
    if !sig.has_contract() {
        return None;
    }
    let app = Expr::call(&sig.name, sig.params.iter().map(|p| Expr::var(&p.name)).collect());
    let mut m = std::collections::BTreeMap::new();
    m.insert(RESULT.to_string(), app);
    let post = subst_formula(&sig.ensures, &m);
    let body = Formula::implies_simpl(sig.requires.clone(), post);
    let binders = sig.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
    Some(Axiom::new(&format!("contract:{}", sig.name), Formula::forall(binders, body)))
}

/// Contract axioms for every specified, deterministic library function.
pub fn library_axioms(sigs: &SignatureTable) -> Vec<Axiom> {
    sigs.iter().filter(|s| s.kind == FnKind::NonParametric).filter_map(contract_axiom).collect()
}
