//! Type checking and elaboration.
//!
//! Elaboration produces a copy of the program in which integer literals used
//! in real contexts have become real literals and every call to a guarded
//! model carries a call-site index. Later stages (verification, execution)
//! only ever see elaborated programs.

use super::ast::*;
use super::error::TypeError;
use super::sig::{rewrite_self_calls, FnKind, FnSig, SignatureTable};
use std::collections::{BTreeMap, BTreeSet};

/// Inferred type: integer literals stay polymorphic until context decides.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Ty {
    Exact(BaseType),
    NumLit,
}

impl Ty {
    fn resolve(self) -> BaseType {
        match self {
            Ty::Exact(t) => t,
            Ty::NumLit => BaseType::Int,
        }
    }
}

/// Variables in scope, with whether they may be assigned.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    vars: BTreeMap<String, (BaseType, bool)>,
}

impl Scope {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_params(params: &[Param]) -> Self {
        let mut s = Scope::new();
        for p in params {
            s.vars.insert(p.name.clone(), (p.ty, false));
        }
        s
    }

    pub fn with(mut self, name: &str, ty: BaseType) -> Self {
        self.vars.insert(name.to_string(), (ty, false));
        self
    }

    pub fn get(&self, name: &str) -> Option<BaseType> {
        self.vars.get(name).map(|v| v.0)
    }

    pub fn types(&self) -> BTreeMap<String, BaseType> {
        self.vars.iter().map(|(k, v)| (k.clone(), v.0)).collect()
    }
}

/// Which calls may appear in a context.
#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    /// Executable code: anything callable.
    Code,
    /// Formulas (specifications, conditions): only deterministic library
    /// functions.
    Logic,
}

struct Checker<'a> {
    env: &'a SignatureTable,
    decls: BTreeMap<String, FnSig>,
    errors: Vec<TypeError>,
}

pub fn typecheck(prog: &Program, env: &SignatureTable) -> Result<(), Vec<TypeError>> {
    elaborate(prog, env).map(|_| ())
}

/// Type-check and return the elaborated program.
pub fn elaborate(prog: &Program, env: &SignatureTable) -> Result<Program, Vec<TypeError>> {
    let mut ck = Checker { env, decls: BTreeMap::new(), errors: Vec::new() };
    for d in &prog.decls {
        if env.contains(&d.name) || ck.decls.contains_key(&d.name) {
            ck.errors.push(TypeError::Duplicate { span: d.span, name: d.name.clone() });
            continue;
        }
        ck.decls.insert(d.name.clone(), decl_sig(d));
    }
    let mut out = Program::default();
    for d in &prog.decls {
        out.decls.push(ck.decl(d));
    }
    ck.check_acyclic(&out);
    if !ck.errors.is_empty() {
        return Err(ck.errors);
    }
    number_sites(&mut out, env);
    Ok(out)
}

/// Signature of a program declaration (contracts with self-calls rewritten).
pub fn decl_sig(d: &Decl) -> FnSig {
    let result = d.result_var();
    let req = Formula::conj(d.requires.iter().cloned());
    let ens = rewrite_self_calls(&Formula::conj(d.ensures.iter().cloned()), &d.name, &d.params, result);
    let ens = if result != RESULT { rename_result(&ens, result) } else { ens };
    let mut s = FnSig::new(&d.name, d.params.clone(), d.ret, FnKind::User);
    s.requires = req;
    s.ensures = ens;
    s
}

fn rename_result(f: &Formula, from: &str) -> Formula {
    let mut m = BTreeMap::new();
    m.insert(from.to_string(), Expr::var(RESULT));
    crate::logic::subst::subst_formula(f, &m)
}

/// Check a formula over the given scope and return it elaborated. Only
/// deterministic library functions may be called.
pub fn check_formula(f: &Formula, scope: &Scope, env: &SignatureTable) -> Result<Formula, Vec<TypeError>> {
    let mut ck = Checker { env, decls: BTreeMap::new(), errors: Vec::new() };
    let out = ck.formula(f, scope, Ctx::Logic);
    if ck.errors.is_empty() {
        Ok(out)
    } else {
        Err(ck.errors)
    }
}

/// Check an executable expression against an expected type.
pub fn check_expr(e: &Expr, expected: BaseType, scope: &Scope, env: &SignatureTable) -> Result<Expr, Vec<TypeError>> {
    let mut ck = Checker { env, decls: BTreeMap::new(), errors: Vec::new() };
    let out = ck.expect(e, expected, scope, Ctx::Code);
    if ck.errors.is_empty() {
        Ok(out)
    } else {
        Err(ck.errors)
    }
}

fn coerce(e: &Expr, target: BaseType) -> Expr {
    let kind = match &e.kind {
        ExprKind::Lit(Literal::Int(s)) if target == BaseType::Real => ExprKind::Lit(Literal::Real(format!("{s}.0"))),
        ExprKind::Neg(a) => ExprKind::Neg(Box::new(coerce(a, target))),
        ExprKind::Bin(op, a, b) => ExprKind::Bin(*op, Box::new(coerce(a, target)), Box::new(coerce(b, target))),
        k => k.clone(),
    };
    Expr { kind, span: e.span }
}

fn is_numeric(t: Ty) -> bool {
    matches!(t, Ty::NumLit | Ty::Exact(BaseType::Int) | Ty::Exact(BaseType::Real))
}

impl Checker<'_> {
    fn lookup(&self, name: &str) -> Option<&FnSig> {
        self.decls.get(name).or_else(|| self.env.get(name))
    }

    fn decl(&mut self, d: &Decl) -> Decl {
        let mut scope = Scope::new();
        let mut seen = BTreeSet::new();
        for p in &d.params {
            if !seen.insert(p.name.clone()) {
                self.errors.push(TypeError::Duplicate { span: d.span, name: p.name.clone() });
            }
            if p.name == RESULT || Some(&p.name) == d.result_name.as_ref() {
                self.errors.push(TypeError::Other {
                    span: d.span,
                    message: format!("parameter may not be named `{}`", p.name),
                });
            }
            scope.vars.insert(p.name.clone(), (p.ty, false));
        }
        let requires: Vec<Formula> = d.requires.iter().map(|f| self.formula(f, &scope, Ctx::Logic)).collect();
        let result = d.result_var().to_string();
        let post_scope = scope.clone().with(&result, d.ret);
        let ensures: Vec<Formula> = d
            .ensures
            .iter()
            .map(|f| {
                let f = rewrite_self_calls(f, &d.name, &d.params, &result);
                self.formula(&f, &post_scope, Ctx::Logic)
            })
            .collect();
        let body = self.block(&d.body, &mut scope.clone(), d.ret);
        if !block_returns(&d.body) {
            self.errors.push(TypeError::MissingReturn { name: d.name.clone() });
        }
        Decl { requires, ensures, body, ..d.clone() }
    }

    fn block(&mut self, stmts: &[Stmt], scope: &mut Scope, ret: BaseType) -> Vec<Stmt> {
        stmts.iter().map(|s| self.stmt(s, scope, ret)).collect()
    }

    fn stmt(&mut self, s: &Stmt, scope: &mut Scope, ret: BaseType) -> Stmt {
        let kind = match &s.kind {
            StmtKind::VarDecl { name, ty, init } => {
                let init = self.expect(init, *ty, scope, Ctx::Code);
                if scope.vars.contains_key(name) {
                    self.errors.push(TypeError::Duplicate { span: s.span, name: name.clone() });
                }
                scope.vars.insert(name.clone(), (*ty, true));
                StmtKind::VarDecl { name: name.clone(), ty: *ty, init }
            }
            StmtKind::Assign { name, value } => match scope.vars.get(name).copied() {
                None => {
                    self.errors.push(TypeError::UnknownIdentifier { span: s.span, name: name.clone() });
                    s.kind.clone()
                }
                Some((ty, assignable)) => {
                    if !assignable {
                        self.errors.push(TypeError::BadAssignment {
                            span: s.span,
                            name: name.clone(),
                            reason: "parameters are immutable".into(),
                        });
                    }
                    StmtKind::Assign { name: name.clone(), value: self.expect(value, ty, scope, Ctx::Code) }
                }
            },
            StmtKind::Call(e) => {
                let (e, _) = self.infer(e, scope, Ctx::Code);
                StmtKind::Call(e)
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let cond = self.formula(cond, scope, Ctx::Logic);
                let then_branch = self.block(then_branch, &mut scope.clone(), ret);
                let else_branch = else_branch.as_ref().map(|b| self.block(b, &mut scope.clone(), ret));
                StmtKind::If { cond, then_branch, else_branch }
            }
            StmtKind::While { cond, invariants, decreases, body } => {
                let cond = self.formula(cond, scope, Ctx::Logic);
                let invariants = invariants.iter().map(|i| self.formula(i, scope, Ctx::Logic)).collect();
                let decreases = decreases.as_ref().map(|d| self.expect(d, BaseType::Int, scope, Ctx::Logic));
                let body = self.block(body, &mut scope.clone(), ret);
                StmtKind::While { cond, invariants, decreases, body }
            }
            StmtKind::Assert(f) => StmtKind::Assert(self.formula(f, scope, Ctx::Logic)),
            StmtKind::Return(e) => StmtKind::Return(self.expect(e, ret, scope, Ctx::Code)),
        };
        Stmt { kind, span: s.span }
    }

    fn expect(&mut self, e: &Expr, expected: BaseType, scope: &Scope, ctx: Ctx) -> Expr {
        let (e2, t) = self.infer(e, scope, ctx);
        match t {
            Ty::NumLit if matches!(expected, BaseType::Int | BaseType::Real) => coerce(&e2, expected),
            Ty::NumLit => {
                self.errors.push(TypeError::Mismatch { span: e.span, expected, found: BaseType::Int });
                e2
            }
            Ty::Exact(t) if t == expected => e2,
            Ty::Exact(t) => {
                self.errors.push(TypeError::Mismatch { span: e.span, expected, found: t });
                e2
            }
        }
    }

    /// Unify two operand types, coercing literal sides.
    fn unify(&mut self, a: (Expr, Ty), b: (Expr, Ty), span: Span) -> (Expr, Expr, Ty) {
        match (a.1, b.1) {
            (Ty::NumLit, Ty::Exact(t)) if matches!(t, BaseType::Int | BaseType::Real) => {
                (coerce(&a.0, t), b.0, Ty::Exact(t))
            }
            (Ty::Exact(t), Ty::NumLit) if matches!(t, BaseType::Int | BaseType::Real) => {
                (a.0, coerce(&b.0, t), Ty::Exact(t))
            }
            (x, y) if x == y => (a.0, b.0, x),
            (x, y) => {
                self.errors.push(TypeError::Mismatch { span, expected: x.resolve(), found: y.resolve() });
                (a.0, b.0, x)
            }
        }
    }

    fn infer(&mut self, e: &Expr, scope: &Scope, ctx: Ctx) -> (Expr, Ty) {
        let span = e.span;
        match &e.kind {
            ExprKind::Lit(l) => {
                let t = match l {
                    Literal::Bool(_) => Ty::Exact(BaseType::Bool),
                    Literal::Int(_) => Ty::NumLit,
                    Literal::Real(_) => Ty::Exact(BaseType::Real),
                    Literal::Str(_) => Ty::Exact(BaseType::String),
                };
                (e.clone(), t)
            }
            ExprKind::Var(v) => match scope.get(v) {
                Some(t) => (e.clone(), Ty::Exact(t)),
                None => {
                    self.errors.push(TypeError::UnknownIdentifier { span, name: v.clone() });
                    (e.clone(), Ty::Exact(BaseType::Real))
                }
            },
            ExprKind::Neg(a) => {
                let (a2, t) = self.infer(a, scope, ctx);
                if !is_numeric(t) {
                    self.errors.push(TypeError::Mismatch { span, expected: BaseType::Real, found: t.resolve() });
                }
                (Expr::at(ExprKind::Neg(Box::new(a2)), span), t)
            }
            ExprKind::Bin(op, a, b) => {
                let ra = self.infer(a, scope, ctx);
                let rb = self.infer(b, scope, ctx);
                for (t, sp) in [(ra.1, a.span), (rb.1, b.span)] {
                    if !is_numeric(t) {
                        self.errors.push(TypeError::Mismatch { span: sp, expected: BaseType::Real, found: t.resolve() });
                    }
                }
                let (a2, b2, t) = self.unify(ra, rb, span);
                (Expr::at(ExprKind::Bin(*op, Box::new(a2), Box::new(b2)), span), t)
            }
            ExprKind::Call { name, args, site } => {
                let Some(sig) = self.lookup(name).cloned() else {
                    self.errors.push(TypeError::UnknownFunction { span, name: name.clone() });
                    let args = args.iter().map(|a| self.infer(a, scope, ctx).0).collect();
                    return (Expr::at(ExprKind::Call { name: name.clone(), args, site: *site }, span), Ty::Exact(BaseType::Real));
                };
                if ctx == Ctx::Logic && sig.kind != FnKind::NonParametric {
                    self.errors.push(TypeError::Other {
                        span,
                        message: format!("`{name}` cannot be called inside a specification or condition"),
                    });
                }
                if sig.params.len() != args.len() {
                    self.errors.push(TypeError::Arity {
                        span,
                        name: name.clone(),
                        expected: sig.params.len(),
                        found: args.len(),
                    });
                }
                let args = args
                    .iter()
                    .enumerate()
                    .map(|(i, a)| match sig.params.get(i) {
                        Some(p) => self.expect(a, p.ty, scope, ctx),
                        None => self.infer(a, scope, ctx).0,
                    })
                    .collect();
                (Expr::at(ExprKind::Call { name: name.clone(), args, site: *site }, span), Ty::Exact(sig.ret))
            }
        }
    }

    fn formula(&mut self, f: &Formula, scope: &Scope, ctx: Ctx) -> Formula {
        match f {
            Formula::Const(_) => f.clone(),
            Formula::Rel(op, a, b) => {
                let ra = self.infer(a, scope, ctx);
                let rb = self.infer(b, scope, ctx);
                let span = a.span;
                let (a2, b2, t) = self.unify(ra, rb, span);
                if op.is_ordering() && !is_numeric(t) {
                    self.errors.push(TypeError::Other {
                        span,
                        message: format!("`{}` needs numeric operands, found {}", op.symbol(), t.resolve()),
                    });
                }
                // both sides literal: default to int
                Formula::Rel(*op, a2, b2)
            }
            Formula::Pred(name, args) => {
                let e = Expr::call(name, args.clone());
                let (e2, t) = self.infer(&e, scope, ctx);
                if t != Ty::Exact(BaseType::Bool) {
                    self.errors.push(TypeError::Mismatch { span: e.span, expected: BaseType::Bool, found: t.resolve() });
                }
                match e2.kind {
                    ExprKind::Call { args, .. } => Formula::Pred(name.clone(), args),
                    _ => unreachable!(),
                }
            }
            Formula::BoolVar(v) => {
                match scope.get(v) {
                    Some(BaseType::Bool) => {}
                    Some(t) => self.errors.push(TypeError::Mismatch { span: Span::default(), expected: BaseType::Bool, found: t }),
                    None => self.errors.push(TypeError::UnknownIdentifier { span: Span::default(), name: v.clone() }),
                }
                f.clone()
            }
            Formula::Not(g) => Formula::not(self.formula(g, scope, ctx)),
            Formula::And(a, b) => Formula::and(self.formula(a, scope, ctx), self.formula(b, scope, ctx)),
            Formula::Or(a, b) => Formula::or(self.formula(a, scope, ctx), self.formula(b, scope, ctx)),
            Formula::Implies(a, b) => Formula::implies(self.formula(a, scope, ctx), self.formula(b, scope, ctx)),
            Formula::Iff(a, b) => Formula::iff(self.formula(a, scope, ctx), self.formula(b, scope, ctx)),
            Formula::Forall(bs, g) | Formula::Exists(bs, g) => {
                let mut inner = scope.clone();
                for (n, t) in bs {
                    inner.vars.insert(n.clone(), (*t, false));
                }
                let body = Box::new(self.formula(g, &inner, ctx));
                if matches!(f, Formula::Forall(..)) {
                    Formula::Forall(bs.clone(), body)
                } else {
                    Formula::Exists(bs.clone(), body)
                }
            }
        }
    }

    fn check_acyclic(&mut self, prog: &Program) {
        let names: BTreeSet<&str> = prog.decls.iter().map(|d| d.name.as_str()).collect();
        let mut edges: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
        for d in &prog.decls {
            let mut callees = BTreeSet::new();
            walk_block_exprs(&d.body, &mut |e| {
                if let ExprKind::Call { name, .. } = &e.kind {
                    if names.contains(name.as_str()) {
                        callees.insert(name.clone());
                    }
                }
            });
            edges.insert(&d.name, callees);
        }
        // depth-first search for a cycle
        fn visit<'a>(
            n: &'a str,
            edges: &'a BTreeMap<&'a str, BTreeSet<String>>,
            state: &mut BTreeMap<&'a str, u8>,
        ) -> Option<String> {
            match state.get(n) {
                Some(1) => return Some(n.to_string()),
                Some(2) => return None,
                _ => {}
            }
            state.insert(n, 1);
            if let Some(cs) = edges.get(n) {
                for c in cs {
                    if let Some((k, _)) = edges.get_key_value(c.as_str()) {
                        if let Some(cyc) = visit(k, edges, state) {
                            return Some(cyc);
                        }
                    }
                }
            }
            state.insert(n, 2);
            None
        }
        let mut state = BTreeMap::new();
        for d in &prog.decls {
            if let Some(name) = visit(&d.name, &edges, &mut state) {
                self.errors.push(TypeError::Recursion { name });
                return;
            }
        }
    }
}

/// True when every control path through the block ends in `return`.
pub fn block_returns(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::If { then_branch, else_branch: Some(e), .. } => block_returns(then_branch) && block_returns(e),
        _ => false,
    })
}

fn number_sites(prog: &mut Program, env: &SignatureTable) {
    let mut next = 0u32;
    fn expr(e: &mut Expr, env: &SignatureTable, next: &mut u32) {
        match &mut e.kind {
            ExprKind::Call { name, args, site } => {
                if env.is_guarded(name) {
                    *site = Some(*next);
                    *next += 1;
                }
                for a in args {
                    expr(a, env, next);
                }
            }
            ExprKind::Neg(a) => expr(a, env, next),
            ExprKind::Bin(_, a, b) => {
                expr(a, env, next);
                expr(b, env, next);
            }
            _ => {}
        }
    }
    fn block(stmts: &mut [Stmt], env: &SignatureTable, next: &mut u32) {
        for s in stmts {
            match &mut s.kind {
                StmtKind::VarDecl { init: e, .. }
                | StmtKind::Assign { value: e, .. }
                | StmtKind::Call(e)
                | StmtKind::Return(e) => expr(e, env, next),
                StmtKind::If { then_branch, else_branch, .. } => {
                    block(then_branch, env, next);
                    if let Some(b) = else_branch {
                        block(b, env, next);
                    }
                }
                StmtKind::While { body, .. } => block(body, env, next),
                StmtKind::Assert(_) => {}
            }
        }
    }
    for d in &mut prog.decls {
        block(&mut d.body, env, &mut next);
    }
}

/// Stable identifier of a guarded-model call site (`name#index`).
pub fn site_id(name: &str, site: u32) -> String {
    format!("{name}#{site}")
}

/// All guarded-model call sites of an elaborated program, in order.
pub fn call_sites(prog: &Program) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for d in &prog.decls {
        walk_block_exprs(&d.body, &mut |e| {
            if let ExprKind::Call { name, site: Some(k), .. } = &e.kind {
                out.push((site_id(name, *k), name.clone()));
            }
        });
    }
    out.sort_by_key(|(id, _)| id.rsplit('#').next().and_then(|k| k.parse::<u32>().ok()).unwrap_or(0));
    out
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_program;
    use super::*;

    fn env() -> SignatureTable {
        let mut t = SignatureTable::new();
        t.insert(FnSig::new(
            "sqrt",
            vec![Param::new("x", BaseType::Real)],
            BaseType::Real,
            FnKind::NonParametric,
        ));
        t.insert(FnSig::new(
            "bp",
            vec![Param::new("l", BaseType::Real), Param::new("u", BaseType::Real)],
            BaseType::Real,
            FnKind::Guarded,
        ));
        t
    }

    #[test]
    fn int_literal_into_real_var_is_coerced() {
        let p = parse_program("function f(x: real): (real) { var y: real := 1; return y + x * 2; }").unwrap();
        let e = elaborate(&p, &env()).unwrap();
        let printed = super::super::printer::print_program(&e);
        assert!(printed.contains("var y: real := 1.0;"), "{printed}");
        assert!(printed.contains("x * 2.0"), "{printed}");
    }

    #[test]
    fn real_into_int_is_an_error() {
        let p = parse_program("function f(x: int): (int) { var y: int := 1.5; return y; }").unwrap();
        let errs = typecheck(&p, &env()).unwrap_err();
        assert!(matches!(errs[0], TypeError::Mismatch { expected: BaseType::Int, found: BaseType::Real, .. }));
    }

    #[test]
    fn unknown_identifier_and_missing_return() {
        let p = parse_program("function f(x: real): (real) { var y: real := z; }").unwrap();
        let errs = typecheck(&p, &env()).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, TypeError::UnknownIdentifier { name, .. } if name == "z")));
        assert!(errs.iter().any(|e| matches!(e, TypeError::MissingReturn { .. })));
    }

    #[test]
    fn assignment_to_parameter_rejected() {
        let p = parse_program("function f(x: real): (real) { x := 1.0; return x; }").unwrap();
        let errs = typecheck(&p, &env()).unwrap_err();
        assert!(matches!(errs[0], TypeError::BadAssignment { .. }));
    }

    #[test]
    fn recursion_rejected() {
        let p = parse_program(
            "function f(x: real): (real) { return g(x); }\nfunction g(x: real): (real) { return f(x); }",
        )
        .unwrap();
        let errs = typecheck(&p, &env()).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, TypeError::Recursion { .. })));
    }

    #[test]
    fn guarded_call_sites_are_numbered() {
        let p = parse_program(
            "function agent(x: real): (real) { var a: real := bp(0.0, 1.0); var b: real := bp(0.0, 1.0); return a * x + b; }",
        )
        .unwrap();
        let e = elaborate(&p, &env()).unwrap();
        let sites = call_sites(&e);
        assert_eq!(sites, vec![("bp#0".to_string(), "bp".to_string()), ("bp#1".to_string(), "bp".to_string())]);
    }

    #[test]
    fn guarded_call_in_formula_rejected() {
        let p = parse_program("function agent(x: real): (real) ensures bp(0.0, 1.0) >= 0.0 { return x; }").unwrap();
        assert!(typecheck(&p, &env()).is_err());
    }

    #[test]
    fn self_reference_in_ensures_is_the_result() {
        let p = parse_program("function f(x: real): (real) ensures f(x) >= x { return x; }").unwrap();
        let e = elaborate(&p, &env()).unwrap();
        assert_eq!(
            e.decls[0].ensures[0],
            Formula::Rel(RelOp::Ge, Expr::var(RESULT), Expr::var("x"))
        );
    }
}
