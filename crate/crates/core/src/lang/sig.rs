//! Function signatures visible to programs: library functions, guarded
//! generative models, and (during checking) the program's own declarations.

use super::ast::*;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub enum FnKind {
    /// Deterministic library function with a specification.
    NonParametric,
    /// Raw parametric model from the library (e.g. a small network). Programs
    /// must not call these directly; they are wrapped by guarded models.
    Parametric { dim: usize },
    /// A guarded generative model with contract (`requires`/`ensures`).
    Guarded,
    /// A declaration of the program under check.
    User,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FnSig {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: BaseType,
    /// Precondition over the parameter names.
    pub requires: Formula,
    /// Postcondition over the parameter names and [`RESULT`].
    pub ensures: Formula,
    pub kind: FnKind,
    pub doc: String,
}

impl FnSig {
    pub fn new(name: &str, params: Vec<Param>, ret: BaseType, kind: FnKind) -> Self {
        FnSig {
            name: name.to_string(),
            params,
            ret,
            requires: Formula::Const(true),
            ensures: Formula::Const(true),
            kind,
            doc: String::new(),
        }
    }

    pub fn with_contract(mut self, requires: Formula, ensures: Formula) -> Self {
        self.requires = rewrite_self_calls(&requires, &self.name, &self.params, RESULT);
        self.ensures = rewrite_self_calls(&ensures, &self.name, &self.params, RESULT);
        self
    }

    pub fn with_doc(mut self, doc: &str) -> Self {
        self.doc = doc.to_string();
        self
    }

    pub fn param_types(&self) -> Vec<BaseType> {
        self.params.iter().map(|p| p.ty).collect()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn has_contract(&self) -> bool {
        self.requires != Formula::Const(true) || self.ensures != Formula::Const(true)
    }
}

/// Ordered table of callable functions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SignatureTable {
    fns: BTreeMap<String, FnSig>,
}

impl SignatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sig: FnSig) -> Option<FnSig> {
        self.fns.insert(sig.name.clone(), sig)
    }

    pub fn get(&self, name: &str) -> Option<&FnSig> {
        self.fns.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.fns.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FnSig> {
        self.fns.values()
    }

    pub fn remove(&mut self, name: &str) -> Option<FnSig> {
        self.fns.remove(name)
    }

    pub fn extend(&mut self, other: &SignatureTable) {
        for s in other.iter() {
            self.insert(s.clone());
        }
    }

    pub fn is_guarded(&self, name: &str) -> bool {
        matches!(self.get(name).map(|s| &s.kind), Some(FnKind::Guarded))
    }

    /// A human-readable listing used in planner prompts.
    pub fn documentation(&self) -> String {
        use super::printer::print_formula;
        let mut out = String::new();
        for s in self.iter() {
            let ps: Vec<String> = s.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
            out.push_str(&format!("{}({}) -> {}", s.name, ps.join(", "), s.ret));
            if s.requires != Formula::Const(true) {
                out.push_str(&format!("\n  requires {}", print_formula(&s.requires)));
            }
            if s.ensures != Formula::Const(true) {
                out.push_str(&format!("\n  ensures {}", print_formula(&s.ensures)));
            }
            if !s.doc.is_empty() {
                out.push_str(&format!("\n  // {}", s.doc));
            }
            out.push('\n');
        }
        out
    }
}

/// Replace calls `name(p1, ..., pn)` whose arguments are exactly the
/// parameter variables by the result variable.
pub fn rewrite_self_calls(f: &Formula, name: &str, params: &[Param], result: &str) -> Formula {
    let rw = |e: &Expr| rewrite_expr(e, name, params, result);
    match f {
        Formula::Const(_) | Formula::BoolVar(_) => f.clone(),
        Formula::Rel(op, a, b) => Formula::Rel(*op, rw(a), rw(b)),
        Formula::Pred(n, args) => {
            let e = Expr::call(n, args.clone());
            match rewrite_expr(&e, name, params, result).kind {
                ExprKind::Var(v) => Formula::BoolVar(v),
                _ => Formula::Pred(n.clone(), args.iter().map(rw).collect()),
            }
        }
        Formula::Not(g) => Formula::not(rewrite_self_calls(g, name, params, result)),
        Formula::And(a, b) => Formula::and(
            rewrite_self_calls(a, name, params, result),
            rewrite_self_calls(b, name, params, result),
        ),
        Formula::Or(a, b) => Formula::or(
            rewrite_self_calls(a, name, params, result),
            rewrite_self_calls(b, name, params, result),
        ),
        Formula::Implies(a, b) => Formula::implies(
            rewrite_self_calls(a, name, params, result),
            rewrite_self_calls(b, name, params, result),
        ),
        Formula::Iff(a, b) => Formula::iff(
            rewrite_self_calls(a, name, params, result),
            rewrite_self_calls(b, name, params, result),
        ),
        Formula::Forall(bs, g) => Formula::Forall(bs.clone(), Box::new(rewrite_self_calls(g, name, params, result))),
        Formula::Exists(bs, g) => Formula::Exists(bs.clone(), Box::new(rewrite_self_calls(g, name, params, result))),
    }
}

fn rewrite_expr(e: &Expr, name: &str, params: &[Param], result: &str) -> Expr {
    let kind = match &e.kind {
        ExprKind::Call { name: n, args, site } => {
            let is_self = n == name
                && args.len() == params.len()
                && args.iter().zip(params).all(|(a, p)| matches!(&a.kind, ExprKind::Var(v) if *v == p.name));
            if is_self {
                ExprKind::Var(result.to_string())
            } else {
                ExprKind::Call {
                    name: n.clone(),
                    args: args.iter().map(|a| rewrite_expr(a, name, params, result)).collect(),
                    site: *site,
                }
            }
        }
        ExprKind::Neg(a) => ExprKind::Neg(Box::new(rewrite_expr(a, name, params, result))),
        ExprKind::Bin(op, a, b) => ExprKind::Bin(
            *op,
            Box::new(rewrite_expr(a, name, params, result)),
            Box::new(rewrite_expr(b, name, params, result)),
        ),
        k => k.clone(),
    };
    Expr { kind, span: e.span }
}
