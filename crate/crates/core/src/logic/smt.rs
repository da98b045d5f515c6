//! SMT-LIB v2 encoding.
//!
//! Program variables are emitted as `v.<name>` and functions as `f.<name>`
//! so that user names never collide with solver built-ins (`abs`, `pi`, …).
//! A script checks the *validity* of a goal: it asserts the axioms and the
//! negated goal; `unsat` means the goal holds in every model of the axioms.

use super::{Axiom, EncodeError};
use crate::lang::ast::*;
use crate::lang::sig::SignatureTable;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

pub const VAR_PREFIX: &str = "v.";
pub const FN_PREFIX: &str = "f.";

#[derive(Clone, Debug)]
pub struct SmtOptions {
    /// SMT-LIB logic, e.g. `ALL` or `AUFNIRA`.
    pub logic: String,
    /// Solver-side soft timeout in milliseconds.
    pub timeout_ms: Option<u64>,
    pub random_seed: u32,
    /// Ask for a model after `sat`.
    pub produce_model: bool,
}

impl Default for SmtOptions {
    fn default() -> Self {
        SmtOptions { logic: "ALL".into(), timeout_ms: None, random_seed: 0, produce_model: true }
    }
}

fn sort_name(t: BaseType) -> &'static str {
    match t {
        BaseType::Bool => "Bool",
        BaseType::Int => "Int",
        BaseType::Real => "Real",
        BaseType::String => "String",
    }
}

struct Encoder<'a> {
    sigs: &'a SignatureTable,
    used_fns: BTreeSet<String>,
}

type Env = BTreeMap<String, BaseType>;

pub fn smt_string_literal(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\"\""),
            ' '..='~' if c != '\\' => out.push(c),
            c => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
        }
    }
    out.push('"');
    out
}

impl Encoder<'_> {
    fn sort_of(&self, e: &Expr, env: &Env) -> Result<BaseType, EncodeError> {
        Ok(match &e.kind {
            ExprKind::Lit(Literal::Bool(_)) => BaseType::Bool,
            ExprKind::Lit(Literal::Int(_)) => BaseType::Int,
            ExprKind::Lit(Literal::Real(_)) => BaseType::Real,
            ExprKind::Lit(Literal::Str(_)) => BaseType::String,
            ExprKind::Var(v) => *env.get(v).ok_or_else(|| EncodeError::UnknownSymbol(v.clone()))?,
            ExprKind::Neg(a) => self.sort_of(a, env)?,
            ExprKind::Bin(_, a, b) => {
                let (x, y) = (self.sort_of(a, env)?, self.sort_of(b, env)?);
                if x == BaseType::Real || y == BaseType::Real {
                    BaseType::Real
                } else {
                    x
                }
            }
            ExprKind::Call { name, .. } => {
                self.sigs.get(name).ok_or_else(|| EncodeError::UnknownSymbol(name.clone()))?.ret
            }
        })
    }

    /// Encode, converting an integer term to real when `want` is real.
    fn expr_as(&mut self, e: &Expr, env: &Env, want: BaseType) -> Result<String, EncodeError> {
        let s = self.expr(e, env)?;
        if want == BaseType::Real && self.sort_of(e, env)? == BaseType::Int {
            Ok(format!("(to_real {s})"))
        } else {
            Ok(s)
        }
    }

    fn expr(&mut self, e: &Expr, env: &Env) -> Result<String, EncodeError> {
        Ok(match &e.kind {
            ExprKind::Lit(Literal::Bool(b)) => b.to_string(),
            ExprKind::Lit(Literal::Int(s)) => s.clone(),
            ExprKind::Lit(Literal::Real(s)) => {
                if s.contains('.') {
                    s.clone()
                } else {
                    format!("{s}.0")
                }
            }
            ExprKind::Lit(Literal::Str(s)) => smt_string_literal(s),
            ExprKind::Var(v) => {
                if !env.contains_key(v) {
                    return Err(EncodeError::UnknownSymbol(v.clone()));
                }
                format!("{VAR_PREFIX}{v}")
            }
            ExprKind::Neg(a) => format!("(- {})", self.expr(a, env)?),
            ExprKind::Bin(op, a, b) => {
                let sort = self.sort_of(e, env)?;
                if !matches!(sort, BaseType::Int | BaseType::Real) {
                    return Err(EncodeError::UnsupportedConstruct(format!("arithmetic on {sort}")));
                }
                let x = self.expr_as(a, env, sort)?;
                let y = self.expr_as(b, env, sort)?;
                let o = match (op, sort) {
                    (BinOp::Div, BaseType::Int) => "div",
                    (op, _) => op.symbol(),
                };
                format!("({o} {x} {y})")
            }
            ExprKind::Call { name, args, .. } => self.call(name, args, env)?,
        })
    }

    fn call(&mut self, name: &str, args: &[Expr], env: &Env) -> Result<String, EncodeError> {
        let sig = self.sigs.get(name).ok_or_else(|| EncodeError::UnknownSymbol(name.to_string()))?;
        if sig.params.len() != args.len() {
            return Err(EncodeError::UnsupportedConstruct(format!("`{name}` applied to {} arguments", args.len())));
        }
        let ptys = sig.param_types();
        self.used_fns.insert(name.to_string());
        if args.is_empty() {
            return Ok(format!("{FN_PREFIX}{name}"));
        }
        let mut parts = Vec::new();
        for (a, t) in args.iter().zip(ptys) {
            parts.push(self.expr_as(a, env, t)?);
        }
        Ok(format!("({FN_PREFIX}{name} {})", parts.join(" ")))
    }

    fn formula(&mut self, f: &Formula, env: &Env) -> Result<String, EncodeError> {
        Ok(match f {
            Formula::Const(b) => b.to_string(),
            Formula::Rel(op, a, b) => {
                let (sa, sb) = (self.sort_of(a, env)?, self.sort_of(b, env)?);
                let want = if sa == BaseType::Real || sb == BaseType::Real { BaseType::Real } else { sa };
                if op.is_ordering() && !matches!(want, BaseType::Int | BaseType::Real) {
                    return Err(EncodeError::UnsupportedConstruct(format!("ordering on {want}")));
                }
                let x = self.expr_as(a, env, want)?;
                let y = self.expr_as(b, env, want)?;
                match op {
                    RelOp::Eq => format!("(= {x} {y})"),
                    RelOp::Ne => format!("(not (= {x} {y}))"),
                    _ => format!("({} {x} {y})", op.symbol()),
                }
            }
            Formula::Pred(name, args) => self.call(name, args, env)?,
            Formula::BoolVar(v) => {
                if !env.contains_key(v) {
                    return Err(EncodeError::UnknownSymbol(v.clone()));
                }
                format!("{VAR_PREFIX}{v}")
            }
            Formula::Not(g) => format!("(not {})", self.formula(g, env)?),
            Formula::And(a, b) => format!("(and {} {})", self.formula(a, env)?, self.formula(b, env)?),
            Formula::Or(a, b) => format!("(or {} {})", self.formula(a, env)?, self.formula(b, env)?),
            Formula::Implies(a, b) => format!("(=> {} {})", self.formula(a, env)?, self.formula(b, env)?),
            Formula::Iff(a, b) => format!("(= {} {})", self.formula(a, env)?, self.formula(b, env)?),
            Formula::Forall(bs, g) | Formula::Exists(bs, g) => {
                let q = if matches!(f, Formula::Forall(..)) { "forall" } else { "exists" };
                let mut inner = env.clone();
                let mut decls = Vec::new();
                for (n, t) in bs {
                    inner.insert(n.clone(), *t);
                    decls.push(format!("({VAR_PREFIX}{n} {})", sort_name(*t)));
                }
                format!("({q} ({}) {})", decls.join(" "), self.formula(g, &inner)?)
            }
        })
    }
}

/// Function symbols occurring in a formula.
pub fn function_symbols(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fn go(f: &Formula, out: &mut BTreeSet<String>) {
        match f {
            Formula::Pred(n, _) => {
                out.insert(n.clone());
            }
            Formula::Not(g) | Formula::Forall(_, g) | Formula::Exists(_, g) => go(g, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                go(a, out);
                go(b, out);
            }
            _ => {}
        }
    }
    go(f, &mut out);
    f.walk_exprs(&mut |e| {
        if let ExprKind::Call { name, .. } = &e.kind {
            out.insert(name.clone());
        }
    });
    out
}

/// Axioms transitively sharing a function symbol with the goal. Dropping
/// the others never makes an invalid goal valid, and — for a consistent
/// axiom set over disjoint symbols — does not create spurious models.
pub fn relevant_axioms<'a>(goal: &Formula, axioms: &'a [Axiom]) -> Vec<&'a Axiom> {
    let mut syms = function_symbols(goal);
    let ax_syms: Vec<BTreeSet<String>> = axioms.iter().map(|a| function_symbols(&a.formula)).collect();
    let mut taken = vec![false; axioms.len()];
    loop {
        let mut changed = false;
        for (i, s) in ax_syms.iter().enumerate() {
            if !taken[i] && (s.is_empty() || !s.is_disjoint(&syms)) {
                taken[i] = true;
                syms.extend(s.iter().cloned());
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    axioms.iter().zip(taken).filter(|(_, t)| *t).map(|(a, _)| a).collect()
}

/// SMT-LIB script checking validity of `goal` under `axioms`. Free
/// variables of the goal must be given sorts in `free`.
pub fn encode_solver(
    goal: &Formula,
    axioms: &[Axiom],
    sigs: &SignatureTable,
    free: &BTreeMap<String, BaseType>,
    opts: &SmtOptions,
) -> Result<String, EncodeError> {
    let mut enc = Encoder { sigs, used_fns: BTreeSet::new() };
    let env: Env = free.clone();
    let mut body = String::new();
    for ax in axioms {
        let s = enc.formula(&ax.formula, &BTreeMap::new())?;
        let _ = writeln!(body, "; axiom {}\n(assert {s})", ax.name);
    }
    let g = enc.formula(goal, &env)?;
    let _ = writeln!(body, "(assert (not {g}))");

    let mut out = String::new();
    out.push_str("(set-option :print-success false)\n");
    if opts.produce_model {
        out.push_str("(set-option :produce-models true)\n");
    }
    let _ = writeln!(out, "(set-option :smt.random_seed {})", opts.random_seed);
    if let Some(ms) = opts.timeout_ms {
        let _ = writeln!(out, "(set-option :timeout {ms})");
    }
    let _ = writeln!(out, "(set-logic {})", opts.logic);
    for name in &enc.used_fns {
        let sig = sigs.get(name).expect("checked during encoding");
        let ps: Vec<&str> = sig.params.iter().map(|p| sort_name(p.ty)).collect();
        let _ = writeln!(out, "(declare-fun {FN_PREFIX}{name} ({}) {})", ps.join(" "), sort_name(sig.ret));
    }
    for (v, t) in free {
        let _ = writeln!(out, "(declare-const {VAR_PREFIX}{v} {})", sort_name(*t));
    }
    out.push_str(&body);
    out.push_str("(check-sat)\n(get-info :reason-unknown)\n");
    if opts.produce_model {
        out.push_str("(get-model)\n");
    }
    out.push_str("(exit)\n");
    Ok(out)
}
