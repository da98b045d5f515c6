//! Concrete evaluation of quantifier-free formulas.
//!
//! Connectives are evaluated left to right with short-circuiting, matching
//! the definedness obligations generated for conditions.

use crate::lang::ast::*;
use crate::runtime::error::RuntimeFault;
use crate::runtime::library::Library;
use crate::runtime::ops;
use crate::runtime::value::{Valuation, Value};
use crate::scalar::Scalar;

pub fn eval_expr<S: Scalar>(e: &Expr, env: &Valuation<S>, lib: &Library<S>) -> Result<Value<S>, RuntimeFault> {
    match &e.kind {
        ExprKind::Lit(l) => ops::literal(l),
        ExprKind::Var(v) => env.get(v).cloned().ok_or_else(|| RuntimeFault::UnboundVariable(v.clone())),
        ExprKind::Neg(a) => ops::neg(eval_expr(a, env, lib)?),
        ExprKind::Bin(op, a, b) => {
            let x = eval_expr(a, env, lib)?;
            let y = eval_expr(b, env, lib)?;
            ops::binary(*op, x, y)
        }
        ExprKind::Call { name, args, .. } => {
            let vals = args.iter().map(|a| eval_expr(a, env, lib)).collect::<Result<Vec<_>, _>>()?;
            lib.call(name, &vals)
        }
    }
}

/// Truth value of a quantifier-free formula under a complete valuation.
pub fn eval_qf<S: Scalar>(f: &Formula, env: &Valuation<S>, lib: &Library<S>) -> Result<bool, RuntimeFault> {
    Ok(match f {
        Formula::Const(b) => *b,
        Formula::Rel(op, a, b) => {
            let x = eval_expr(a, env, lib)?;
            let y = eval_expr(b, env, lib)?;
            ops::compare(*op, &x, &y)?
        }
        Formula::Pred(name, args) => {
            let vals = args.iter().map(|a| eval_expr(a, env, lib)).collect::<Result<Vec<_>, _>>()?;
            lib.call(name, &vals)?.as_bool()?
        }
        Formula::BoolVar(v) => env.get(v).ok_or_else(|| RuntimeFault::UnboundVariable(v.clone()))?.as_bool()?,
        Formula::Not(g) => !eval_qf(g, env, lib)?,
        Formula::And(a, b) => eval_qf(a, env, lib)? && eval_qf(b, env, lib)?,
        Formula::Or(a, b) => eval_qf(a, env, lib)? || eval_qf(b, env, lib)?,
        Formula::Implies(a, b) => !eval_qf(a, env, lib)? || eval_qf(b, env, lib)?,
        Formula::Iff(a, b) => eval_qf(a, env, lib)? == eval_qf(b, env, lib)?,
        Formula::Forall(..) | Formula::Exists(..) => return Err(RuntimeFault::NotQuantifierFree),
    })
}
