//! Free variables and capture-avoiding substitution.

use super::LogicError;
use crate::lang::ast::*;
use crate::runtime::value::Valuation;
use crate::scalar::Scalar;
use std::collections::{BTreeMap, BTreeSet};

pub fn free_vars_expr(e: &Expr, out: &mut BTreeSet<String>) {
    e.walk(&mut |x| {
        if let ExprKind::Var(v) = &x.kind {
            out.insert(v.clone());
        }
    });
}

pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_free(f, &mut out);
    out
}

fn collect_free(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Const(_) => {}
        Formula::BoolVar(v) => {
            out.insert(v.clone());
        }
        Formula::Rel(_, a, b) => {
            free_vars_expr(a, out);
            free_vars_expr(b, out);
        }
        Formula::Pred(_, args) => args.iter().for_each(|a| free_vars_expr(a, out)),
        Formula::Not(g) => collect_free(g, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_free(a, out);
            collect_free(b, out);
        }
        Formula::Forall(bs, g) | Formula::Exists(bs, g) => {
            let mut inner = BTreeSet::new();
            collect_free(g, &mut inner);
            for (b, _) in bs {
                inner.remove(b);
            }
            out.extend(inner);
        }
    }
}

/// Every variable name occurring anywhere (free or bound).
pub fn all_names(f: &Formula) -> BTreeSet<String> {
    let mut out = free_vars(f);
    fn bound(f: &Formula, out: &mut BTreeSet<String>) {
        match f {
            Formula::Not(g) => bound(g, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                bound(a, out);
                bound(b, out);
            }
            Formula::Forall(bs, g) | Formula::Exists(bs, g) => {
                out.extend(bs.iter().map(|b| b.0.clone()));
                bound(g, out);
            }
            _ => {}
        }
    }
    bound(f, &mut out);
    out
}

/// `base__k` for the smallest `k` not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.split("__").next().unwrap_or(base);
    (1..).map(|k| format!("{stem}__{k}")).find(|n| !avoid.contains(n)).unwrap()
}

pub fn subst_expr(e: &Expr, map: &BTreeMap<String, Expr>) -> Expr {
    let kind = match &e.kind {
        ExprKind::Var(v) => match map.get(v) {
            Some(r) => return r.clone(),
            None => ExprKind::Var(v.clone()),
        },
        ExprKind::Lit(l) => ExprKind::Lit(l.clone()),
        ExprKind::Neg(a) => ExprKind::Neg(Box::new(subst_expr(a, map))),
        ExprKind::Bin(op, a, b) => ExprKind::Bin(*op, Box::new(subst_expr(a, map)), Box::new(subst_expr(b, map))),
        ExprKind::Call { name, args, site } => ExprKind::Call {
            name: name.clone(),
            args: args.iter().map(|a| subst_expr(a, map)).collect(),
            site: *site,
        },
    };
    Expr { kind, span: e.span }
}

/// Simultaneous capture-avoiding substitution of expressions for variables.
pub fn subst_formula(f: &Formula, map: &BTreeMap<String, Expr>) -> Formula {
    if map.is_empty() {
        return f.clone();
    }
    match f {
        Formula::Const(_) => f.clone(),
        Formula::BoolVar(v) => match map.get(v) {
            Some(e) => match &e.kind {
                ExprKind::Var(w) => Formula::BoolVar(w.clone()),
                ExprKind::Lit(Literal::Bool(b)) => Formula::Const(*b),
                ExprKind::Call { name, args, .. } => Formula::Pred(name.clone(), args.clone()),
                _ => Formula::Rel(RelOp::Eq, e.clone(), Expr::bool(true)),
            },
            None => f.clone(),
        },
        Formula::Rel(op, a, b) => Formula::Rel(*op, subst_expr(a, map), subst_expr(b, map)),
        Formula::Pred(n, args) => Formula::Pred(n.clone(), args.iter().map(|a| subst_expr(a, map)).collect()),
        Formula::Not(g) => Formula::not(subst_formula(g, map)),
        Formula::And(a, b) => Formula::and(subst_formula(a, map), subst_formula(b, map)),
        Formula::Or(a, b) => Formula::or(subst_formula(a, map), subst_formula(b, map)),
        Formula::Implies(a, b) => Formula::implies(subst_formula(a, map), subst_formula(b, map)),
        Formula::Iff(a, b) => Formula::iff(subst_formula(a, map), subst_formula(b, map)),
        Formula::Forall(bs, g) | Formula::Exists(bs, g) => {
            let universal = matches!(f, Formula::Forall(..));
            let body_free = free_vars(g);
            // drop bindings shadowed by the quantifier or irrelevant to the body
            let inner: BTreeMap<String, Expr> = map
                .iter()
                .filter(|(k, _)| body_free.contains(*k) && !bs.iter().any(|(b, _)| b == *k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            if inner.is_empty() {
                return f.clone();
            }
            let mut repl_free = BTreeSet::new();
            for e in inner.values() {
                free_vars_expr(e, &mut repl_free);
            }
            let mut avoid: BTreeSet<String> = all_names(g);
            avoid.extend(repl_free.iter().cloned());
            avoid.extend(inner.keys().cloned());
            let mut renaming = BTreeMap::new();
            let mut new_bs = Vec::new();
            for (b, t) in bs {
                if repl_free.contains(b) {
                    let nb = fresh_name(b, &avoid);
                    avoid.insert(nb.clone());
                    renaming.insert(b.clone(), Expr::var(&nb));
                    new_bs.push((nb, *t));
                } else {
                    new_bs.push((b.clone(), *t));
                }
            }
            let body = if renaming.is_empty() { (**g).clone() } else { subst_formula(g, &renaming) };
            let body = Box::new(subst_formula(&body, &inner));
            if universal {
                Formula::Forall(new_bs, body)
            } else {
                Formula::Exists(new_bs, body)
            }
        }
    }
}

/// Replace free variables bound in `v` by literals denoting their values.
/// When `types` is given, every bound value must match the variable's
/// declared type.
pub fn substitute<S: Scalar>(
    f: &Formula,
    v: &Valuation<S>,
    types: Option<&BTreeMap<String, BaseType>>,
) -> Result<Formula, LogicError> {
    let mut map = BTreeMap::new();
    for (name, value) in v {
        if let Some(ts) = types {
            if let Some(t) = ts.get(name) {
                if *t != value.base_type() {
                    return Err(LogicError::TypeMismatch {
                        var: name.clone(),
                        expected: *t,
                        found: value.base_type(),
                    });
                }
            }
        }
        if let crate::runtime::value::Value::Real(r) = value {
            if !r.is_finite() {
                return Err(LogicError::NonFinite(name.clone()));
            }
        }
        map.insert(name.clone(), value.to_expr());
    }
    Ok(subst_formula(f, &map))
}
