//! Verification-condition generation by backward weakest preconditions.
//!
//! * Deterministic library calls stay as uninterpreted function terms; their
//!   contracts are axioms and each call site gets a precondition obligation.
//! * Calls to guarded models and to other program declarations are modelled
//!   by a fresh, universally quantified result constrained only by the
//!   callee's output contract (`∀r. ψ(args, r) ⟹ G`). Two calls with equal
//!   arguments are therefore *not* assumed to return equal values, which
//!   matches their sampling semantics.
//! * Loops use their invariants and `decreases` measure; variables assigned
//!   in the body are quantified afresh.
//! * Assertions are ghost: proved, then assumed.
//! * Executable divisions produce divisor-non-zero obligations; ghost
//!   formulas are not evaluated at run time and get none.

use super::VerifyError;
use crate::lang::ast::*;
use crate::lang::sig::{FnKind, FnSig, SignatureTable};
use crate::logic::simplify::simplify;
use crate::logic::subst::{all_names, fresh_name, subst_formula};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VcKind {
    Postcondition,
    Assertion,
    InvariantEntry,
    InvariantPreserved,
    DecreasesBounded,
    DecreasesStrict,
    CallPrecondition,
    DivisionByZero,
}

/// A closed formula whose validity establishes part of a declaration's
/// correctness.
#[derive(Clone, Debug, PartialEq)]
pub struct Vc {
    pub decl: String,
    pub kind: VcKind,
    pub span: Span,
    pub description: String,
    pub formula: Formula,
}

#[derive(Clone, Debug)]
struct Goal {
    kind: VcKind,
    span: Span,
    description: String,
    formula: Formula,
}

impl Goal {
    fn map(self, f: impl FnOnce(Formula) -> Formula) -> Goal {
        Goal { formula: f(self.formula), ..self }
    }
}

enum Step {
    Check(Goal),
    Havoc { var: String, ty: BaseType, assume: Formula },
}

struct Gen<'a> {
    sigs: &'a SignatureTable,
    /// Contracts of the program's own declarations.
    decls: &'a BTreeMap<String, FnSig>,
    types: BTreeMap<String, BaseType>,
    avoid: BTreeSet<String>,
    ensures: Vec<Formula>,
    result: String,
}

/// Generate the verification conditions of one (elaborated) declaration.
/// `extra_requires`/`extra_ensures` are conjoined to its own contract; they
/// are how a task-level specification is imposed on an entry point.
pub fn generate_vcs(
    decl: &Decl,
    sigs: &SignatureTable,
    decls: &BTreeMap<String, FnSig>,
    extra_requires: &[Formula],
    extra_ensures: &[Formula],
) -> Result<Vec<Vc>, VerifyError> {
    let result = decl.result_var().to_string();
    let mut ensures: Vec<Formula> = Vec::new();
    for e in decl.ensures.iter().chain(extra_ensures) {
        // An explicit `ensures true` still yields its (trivial) obligation.
        if *e == Formula::Const(true) {
            ensures.push(e.clone());
        }
        split_conjuncts(e, &mut ensures);
    }
    let mut types: BTreeMap<String, BaseType> = decl.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
    walk_stmts(&decl.body, &mut |s| {
        if let StmtKind::VarDecl { name, ty, .. } = &s.kind {
            types.insert(name.clone(), *ty);
        }
    });
    let mut avoid: BTreeSet<String> = types.keys().cloned().collect();
    avoid.insert(result.clone());
    for f in decl.requires.iter().chain(extra_requires).chain(&ensures) {
        avoid.extend(all_names(f));
    }
    walk_stmts(&decl.body, &mut |s| match &s.kind {
        StmtKind::Assert(f) | StmtKind::If { cond: f, .. } => avoid.extend(all_names(f)),
        StmtKind::While { cond, invariants, .. } => {
            avoid.extend(all_names(cond));
            for i in invariants {
                avoid.extend(all_names(i));
            }
        }
        _ => {}
    });
    let mut g = Gen { sigs, decls, types, avoid, ensures, result };
    let goals = g.block(&decl.body, Vec::new())?;
    let pre = Formula::conj(decl.requires.iter().chain(extra_requires).cloned());
    let binders: Vec<Binder> = decl.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
    Ok(goals
        .into_iter()
        .map(|goal| Vc {
            decl: decl.name.clone(),
            kind: goal.kind,
            span: goal.span,
            description: goal.description,
            formula: simplify(&Formula::forall(binders.clone(), Formula::implies_simpl(pre.clone(), goal.formula))),
        })
        .collect())
}

fn split_conjuncts(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::And(a, b) => {
            split_conjuncts(a, out);
            split_conjuncts(b, out);
        }
        Formula::Const(true) => {}
        other => out.push(other.clone()),
    }
}

fn zero_of(t: BaseType) -> Expr {
    match t {
        BaseType::Int => Expr::int(0),
        _ => Expr::real(0.0),
    }
}

impl Gen<'_> {
    fn fresh(&mut self, base: &str, ty: BaseType) -> String {
        let n = fresh_name(base, &self.avoid);
        self.avoid.insert(n.clone());
        self.types.insert(n.clone(), ty);
        n
    }

    fn callee(&self, name: &str) -> Option<&FnSig> {
        self.decls.get(name).or_else(|| self.sigs.get(name))
    }

    fn sort_of(&self, e: &Expr) -> BaseType {
        match &e.kind {
            ExprKind::Lit(Literal::Int(_)) => BaseType::Int,
            ExprKind::Lit(Literal::Real(_)) => BaseType::Real,
            ExprKind::Lit(Literal::Bool(_)) => BaseType::Bool,
            ExprKind::Lit(Literal::Str(_)) => BaseType::String,
            ExprKind::Var(v) => self.types.get(v).copied().unwrap_or(BaseType::Real),
            ExprKind::Neg(a) | ExprKind::Bin(_, a, _) => self.sort_of(a),
            ExprKind::Call { name, .. } => self.callee(name).map(|s| s.ret).unwrap_or(BaseType::Real),
        }
    }

    fn bind_args(sig: &FnSig, args: &[Expr]) -> BTreeMap<String, Expr> {
        sig.params.iter().zip(args).map(|(p, a)| (p.name.clone(), a.clone())).collect()
    }

    /// Pure version of an executable expression, plus the checks and havocs
    /// its evaluation entails, in evaluation order.
    fn lower(&mut self, e: &Expr, steps: &mut Vec<Step>) -> Result<Expr, VerifyError> {
        let span = e.span;
        Ok(match &e.kind {
            ExprKind::Lit(_) | ExprKind::Var(_) => e.clone(),
            ExprKind::Neg(a) => Expr::at(ExprKind::Neg(Box::new(self.lower(a, steps)?)), span),
            ExprKind::Bin(op, a, b) => {
                let a2 = self.lower(a, steps)?;
                let b2 = self.lower(b, steps)?;
                if *op == BinOp::Div {
                    let z = zero_of(self.sort_of(&b2));
                    steps.push(Step::Check(Goal {
                        kind: VcKind::DivisionByZero,
                        span,
                        description: format!("divisor `{}` is non-zero", crate::lang::print_expr(b)),
                        formula: Formula::Rel(RelOp::Ne, b2.clone(), z),
                    }));
                }
                Expr::at(ExprKind::Bin(*op, Box::new(a2), Box::new(b2)), span)
            }
            ExprKind::Call { name, args, site } => {
                let mut lowered = Vec::new();
                for a in args {
                    lowered.push(self.lower(a, steps)?);
                }
                let sig = self.callee(name).cloned().ok_or_else(|| VerifyError::UnknownFunction(name.clone()))?;
                let binding = Self::bind_args(&sig, &lowered);
                let pre = subst_formula(&sig.requires, &binding);
                if pre != Formula::Const(true) {
                    steps.push(Step::Check(Goal {
                        kind: VcKind::CallPrecondition,
                        span,
                        description: format!("precondition of `{name}`"),
                        formula: pre,
                    }));
                }
                match sig.kind {
                    FnKind::NonParametric => {
                        Expr::at(ExprKind::Call { name: name.clone(), args: lowered, site: *site }, span)
                    }
                    FnKind::Guarded | FnKind::User | FnKind::Parametric { .. } => {
                        let r = self.fresh(name, sig.ret);
                        let mut b = binding;
                        b.insert(RESULT.to_string(), Expr::var(&r));
                        let assume = subst_formula(&sig.ensures, &b);
                        steps.push(Step::Havoc { var: r.clone(), ty: sig.ret, assume });
                        Expr::at(ExprKind::Var(r), span)
                    }
                }
            }
        })
    }

    fn with_expr(
        &mut self,
        e: &Expr,
        k: impl FnOnce(&mut Self, Expr) -> Result<Vec<Goal>, VerifyError>,
    ) -> Result<Vec<Goal>, VerifyError> {
        let mut steps = Vec::new();
        let pure = self.lower(e, &mut steps)?;
        let mut goals = k(self, pure)?;
        for step in steps.into_iter().rev() {
            match step {
                Step::Check(g) => goals.push(g),
                Step::Havoc { var, ty, assume } => {
                    goals = goals
                        .into_iter()
                        .map(|g| g.map(|f| Formula::forall(vec![(var.clone(), ty)], Formula::implies_simpl(assume.clone(), f))))
                        .collect();
                }
            }
        }
        Ok(goals)
    }

    /// Definedness obligations of an executed condition (short-circuit).
    fn defined(&self, f: &Formula, span: Span) -> Vec<Goal> {
        let mut out = Vec::new();
        let expr_checks = |e: &Expr, out: &mut Vec<Goal>| {
            e.walk(&mut |x| match &x.kind {
                ExprKind::Bin(BinOp::Div, _, b) => out.push(Goal {
                    kind: VcKind::DivisionByZero,
                    span,
                    description: format!("divisor `{}` is non-zero", crate::lang::print_expr(b)),
                    formula: Formula::Rel(RelOp::Ne, (**b).clone(), zero_of(self.sort_of(b))),
                }),
                ExprKind::Call { name, args, .. } => {
                    if let Some(sig) = self.callee(name) {
                        let pre = subst_formula(&sig.requires, &Self::bind_args(sig, args));
                        if pre != Formula::Const(true) {
                            out.push(Goal {
                                kind: VcKind::CallPrecondition,
                                span,
                                description: format!("precondition of `{name}`"),
                                formula: pre,
                            });
                        }
                    }
                }
                _ => {}
            });
        };
        match f {
            Formula::Rel(_, a, b) => {
                expr_checks(a, &mut out);
                expr_checks(b, &mut out);
            }
            Formula::Pred(name, args) => {
                let e = Expr::call(name, args.clone());
                expr_checks(&e, &mut out);
            }
            Formula::Not(g) => out.extend(self.defined(g, span)),
            Formula::And(a, b) | Formula::Implies(a, b) => {
                out.extend(self.defined(a, span));
                let guard = (**a).clone();
                out.extend(self.defined(b, span).into_iter().map(|g| g.map(|x| Formula::implies(guard.clone(), x))));
            }
            Formula::Or(a, b) => {
                out.extend(self.defined(a, span));
                let guard = Formula::not((**a).clone());
                out.extend(self.defined(b, span).into_iter().map(|g| g.map(|x| Formula::implies(guard.clone(), x))));
            }
            Formula::Iff(a, b) => {
                out.extend(self.defined(a, span));
                out.extend(self.defined(b, span));
            }
            _ => {}
        }
        out
    }

    fn block(&mut self, stmts: &[Stmt], post: Vec<Goal>) -> Result<Vec<Goal>, VerifyError> {
        let mut goals = post;
        for s in stmts.iter().rev() {
            goals = self.stmt(s, goals)?;
        }
        Ok(goals)
    }

    fn assign(&mut self, name: &str, e: &Expr, q: Vec<Goal>) -> Result<Vec<Goal>, VerifyError> {
        let name = name.to_string();
        self.with_expr(e, move |_, pure| {
            let mut m = BTreeMap::new();
            m.insert(name, pure);
            Ok(q.into_iter().map(|g| g.map(|f| subst_formula(&f, &m))).collect())
        })
    }

    fn stmt(&mut self, s: &Stmt, q: Vec<Goal>) -> Result<Vec<Goal>, VerifyError> {
        let span = s.span;
        match &s.kind {
            StmtKind::VarDecl { name, init, .. } => self.assign(name, init, q),
            StmtKind::Assign { name, value } => self.assign(name, value, q),
            StmtKind::Call(e) => self.with_expr(e, |_, _| Ok(q)),
            StmtKind::Return(e) => {
                let result = self.result.clone();
                let ensures = self.ensures.clone();
                self.with_expr(e, move |_, pure| {
                    let mut m = BTreeMap::new();
                    m.insert(result, pure);
                    Ok(ensures
                        .iter()
                        .map(|f| Goal {
                            kind: VcKind::Postcondition,
                            span,
                            description: format!("postcondition `{}`", crate::lang::print_formula(f)),
                            formula: subst_formula(f, &m),
                        })
                        .collect())
                })
            }
            StmtKind::Assert(f) => {
                let mut out = vec![Goal {
                    kind: VcKind::Assertion,
                    span,
                    description: format!("assertion `{}`", crate::lang::print_formula(f)),
                    formula: f.clone(),
                }];
                out.extend(q.into_iter().map(|g| g.map(|x| Formula::implies(f.clone(), x))));
                Ok(out)
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let t = self.block(then_branch, q.clone())?;
                let e = match else_branch {
                    Some(b) => self.block(b, q)?,
                    None => q,
                };
                let mut out = self.defined(cond, span);
                out.extend(t.into_iter().map(|g| g.map(|x| Formula::implies(cond.clone(), x))));
                let neg = Formula::not(cond.clone());
                out.extend(e.into_iter().map(|g| g.map(|x| Formula::implies(neg.clone(), x))));
                Ok(out)
            }
            StmtKind::While { cond, invariants, decreases, body } => {
                let measure = decreases.as_ref().ok_or(VerifyError::MissingDecreases(span))?;
                // variables assigned in the body but declared outside it
                let mut declared = BTreeSet::new();
                let mut assigned = BTreeSet::new();
                walk_stmts(body, &mut |s| match &s.kind {
                    StmtKind::VarDecl { name, .. } => {
                        declared.insert(name.clone());
                    }
                    StmtKind::Assign { name, .. } => {
                        assigned.insert(name.clone());
                    }
                    _ => {}
                });
                let modified: Vec<Binder> = assigned
                    .difference(&declared)
                    .map(|v| (v.clone(), self.types.get(v).copied().unwrap_or(BaseType::Real)))
                    .collect();
                let inv = Formula::conj(invariants.iter().cloned());
                let close = |f: Formula| Formula::forall(modified.clone(), f);

                let mut out: Vec<Goal> = invariants
                    .iter()
                    .map(|i| Goal {
                        kind: VcKind::InvariantEntry,
                        span,
                        description: format!("invariant `{}` holds on entry", crate::lang::print_formula(i)),
                        formula: i.clone(),
                    })
                    .collect();

                let snap = self.fresh("measure", BaseType::Int);
                let mut body_post: Vec<Goal> = invariants
                    .iter()
                    .map(|i| Goal {
                        kind: VcKind::InvariantPreserved,
                        span,
                        description: format!("invariant `{}` is preserved", crate::lang::print_formula(i)),
                        formula: i.clone(),
                    })
                    .collect();
                body_post.push(Goal {
                    kind: VcKind::DecreasesStrict,
                    span,
                    description: "loop measure decreases".into(),
                    formula: Formula::Rel(RelOp::Lt, measure.clone(), Expr::var(&snap)),
                });
                let body_goals = self.block(body, body_post)?;
                let mut m = BTreeMap::new();
                m.insert(snap, measure.clone());
                let inv_and_c = Formula::and(inv.clone(), cond.clone());
                for g in body_goals {
                    out.push(g.map(|f| close(Formula::implies(inv_and_c.clone(), subst_formula(&f, &m)))));
                }
                out.push(Goal {
                    kind: VcKind::DecreasesBounded,
                    span,
                    description: "loop measure is non-negative".into(),
                    formula: close(Formula::implies(
                        inv_and_c.clone(),
                        Formula::Rel(RelOp::Ge, measure.clone(), Expr::int(0)),
                    )),
                });
                for d in self.defined(cond, span) {
                    out.push(d.map(|f| close(Formula::implies(inv.clone(), f))));
                }
                let exit = Formula::and(inv, Formula::not(cond.clone()));
                for g in q {
                    out.push(g.map(|f| close(Formula::implies(exit.clone(), f))));
                }
                Ok(out)
            }
        }
    }
}
