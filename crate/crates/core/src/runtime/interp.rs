//! Tree-walking interpreter and the rejection sampler behind guarded calls.

use super::error::RuntimeFault;
use super::gm::GenerativeModel;
use super::library::Library;
use super::ops;
use super::rng::Rng;
use super::value::{valuation_json, Valuation, Value};
use crate::lang::ast::*;
use crate::lang::fggm::FggmDef;
use crate::lang::sig::SignatureTable;
use crate::lang::typeck::{elaborate, site_id};
use crate::lang::TypeError;
use crate::logic::eval::eval_qf;
use crate::logic::subst::substitute;
use crate::scalar::Scalar;
use crate::verify::{discharge, VerificationContext};
use serde::Serialize;
use std::cell::Cell;
use std::collections::BTreeMap;

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;

/// Models bound to call sites (`name#k`) or, as a fallback, to a guarded
/// model's name for every site calling it.
pub type ModelBindings<S> = BTreeMap<String, Box<dyn GenerativeModel<S>>>;

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Proposals per guarded call before falling back.
    pub k: usize,
    pub step_limit: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { k: DEFAULT_K, step_limit: DEFAULT_STEP_LIMIT }
    }
}

/// One guarded-model interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct CallRecord<S> {
    pub site: String,
    pub fggm: String,
    pub args: Vec<Value<S>>,
    /// Input handed to the model.
    pub prompt: Vec<Value<S>>,
    /// Proposals drawn, in order (failed draws are not recorded).
    pub samples: Vec<Value<S>>,
    /// Number of draws attempted, including failed ones.
    pub draws: usize,
    /// 1-based index of the accepted proposal.
    pub accepted: Option<usize>,
    pub fallback: bool,
    pub output: Value<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecTrace<S> {
    pub input: Valuation<S>,
    pub calls: Vec<CallRecord<S>>,
    pub output: Option<Value<S>>,
    /// Whether the output satisfied the task postcondition, when checked.
    pub psi: Option<bool>,
}

#[derive(Serialize)]
struct CallJson {
    site: String,
    fggm: String,
    prompt: Vec<serde_json::Value>,
    samples: Vec<serde_json::Value>,
    draws: usize,
    accepted: Option<usize>,
    fallback: bool,
    output: serde_json::Value,
}

impl<S: Scalar> ExecTrace<S> {
    pub fn new(input: Valuation<S>) -> Self {
        ExecTrace { input, calls: Vec::new(), output: None, psi: None }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let calls: Vec<CallJson> = self
            .calls
            .iter()
            .map(|c| CallJson {
                site: c.site.clone(),
                fggm: c.fggm.clone(),
                prompt: c.prompt.iter().map(Value::to_json).collect(),
                samples: c.samples.iter().map(Value::to_json).collect(),
                draws: c.draws,
                accepted: c.accepted,
                fallback: c.fallback,
                output: c.output.to_json(),
            })
            .collect();
        serde_json::json!({
            "input": valuation_json(&self.input),
            "calls": calls,
            "output": self.output.as_ref().map(Value::to_json),
            "psi": self.psi,
        })
    }
}

/// A guarded model with its prompt and fallback programs elaborated.
#[derive(Clone, Debug)]
pub struct PreparedFggm {
    pub def: FggmDef,
    pub prompt: Program,
    pub fallback: Program,
}

impl PreparedFggm {
    pub fn new(def: &FggmDef, lib: &SignatureTable) -> Result<Self, Vec<TypeError>> {
        Ok(PreparedFggm { def: def.clone(), prompt: elaborate(&def.prompt, lib)?, fallback: elaborate(&def.fallback, lib)? })
    }
}

/// Contract checker: does `y` satisfy the output contract of `def` at the
/// given arguments? Quantifier-free contracts are evaluated directly;
/// quantified ones are sent to the solver and count as satisfied only when
/// proven valid within the timeout. Any failure yields `false`.
pub fn contract_check<S: Scalar>(
    def: &FggmDef,
    args: &Valuation<S>,
    y: &Value<S>,
    lib: &Library<S>,
    solver: Option<&VerificationContext>,
) -> bool {
    if y.base_type() != def.ret {
        return false;
    }
    let mut env = args.clone();
    env.insert(RESULT.to_string(), y.clone());
    if def.ensures.is_quantifier_free() {
        return eval_qf(&def.ensures, &env, lib).unwrap_or(false);
    }
    let Some(ctx) = solver else { return false };
    let mut types: BTreeMap<String, BaseType> = def.params.iter().map(|p| (p.name.clone(), p.ty)).collect();
    types.insert(RESULT.to_string(), def.ret);
    let (Ok(pre), Ok(post)) = (substitute(&def.requires, &env, Some(&types)), substitute(&def.ensures, &env, Some(&types)))
    else {
        return false;
    };
    let goal = Formula::implies(pre, post);
    matches!(discharge(&goal, ctx, &ctx.library, ctx.solver.timeout_per_vc), Ok(d) if d.is_valid())
}

fn bind_params<S: Scalar>(params: &[Param], args: &[Value<S>]) -> Result<Valuation<S>, RuntimeFault> {
    if params.len() != args.len() {
        return Err(RuntimeFault::TypeMismatch(format!("expected {} arguments, got {}", params.len(), args.len())));
    }
    let mut env = Valuation::new();
    for (p, a) in params.iter().zip(args) {
        let a = coerce(a.clone(), p.ty)?;
        env.insert(p.name.clone(), a);
    }
    Ok(env)
}

fn coerce<S: Scalar>(v: Value<S>, ty: BaseType) -> Result<Value<S>, RuntimeFault> {
    match (&v, ty) {
        (Value::Int(_), BaseType::Real) => Value::real(v.as_real()?),
        _ if v.base_type() == ty => Ok(v),
        _ => Err(RuntimeFault::TypeMismatch(format!("expected {ty}, found {}", v.base_type()))),
    }
}

/// Rejection sampler with verified fallback. Draws up to `k` proposals from
/// `gm` and returns the first that passes [`contract_check`]; otherwise runs
/// the fallback program on the arguments and the last proposal.
#[allow(clippy::too_many_arguments)]
pub fn fggm_call<S: Scalar>(
    g: &PreparedFggm,
    gm: &dyn GenerativeModel<S>,
    args: &[Value<S>],
    lib: &Library<S>,
    k: usize,
    solver: Option<&VerificationContext>,
    rng: &mut Rng,
    site: &str,
) -> Result<(Value<S>, CallRecord<S>), RuntimeFault> {
    let def = &g.def;
    let env = bind_params(&def.params, args)?;
    let args: Vec<Value<S>> = def.params.iter().map(|p| env[&p.name].clone()).collect();
    let prompt = if gm.signature().inputs.len() == 1 {
        vec![run_program(&g.prompt, lib, &args)?]
    } else {
        args.clone()
    };
    let mut rec = CallRecord {
        site: site.to_string(),
        fggm: def.id.clone(),
        args: args.clone(),
        prompt,
        samples: Vec::new(),
        draws: 0,
        accepted: None,
        fallback: false,
        output: Value::zero_of(def.ret),
    };
    let mut last = None;
    for i in 0..k.max(1) {
        rec.draws += 1;
        let y = match gm.propose(&rec.prompt, rng) {
            Ok(y) => y,
            Err(_) => continue,
        };
        rec.samples.push(y.clone());
        if contract_check(def, &env, &y, lib, solver) {
            rec.accepted = Some(i + 1);
            rec.output = y.clone();
            return Ok((y, rec));
        }
        if y.base_type() == def.ret {
            last = Some(y);
        }
    }
    rec.fallback = true;
    let mut fb_args = args;
    fb_args.push(last.unwrap_or_else(|| Value::zero_of(def.ret)));
    // No check here: the fallback's contract is established statically by
    // `validate_fggm`, and unvalidated definitions are what fuzzing exists
    // to catch.
    let out = run_program(&g.fallback, lib, &fb_args)?;
    rec.output = out.clone();
    Ok((out, rec))
}

/// Run the entry point of a program that makes no guarded calls.
pub fn run_program<S: Scalar>(prog: &Program, lib: &Library<S>, args: &[Value<S>]) -> Result<Value<S>, RuntimeFault> {
    let fggms = BTreeMap::new();
    let models = ModelBindings::new();
    let ex = Exec { prog, lib, fggms: &fggms, models: &models, opts: RunOptions::default(), solver: None, steps: Cell::new(0) };
    let entry = prog.entry().ok_or_else(|| RuntimeFault::UnknownFunction(ENTRY.into()))?;
    let mut rng = Rng::new(0);
    let mut calls = Vec::new();
    ex.call_decl(entry, args.to_vec(), &mut rng, &mut calls)
}

/// An elaborated agent ready to run.
#[derive(Clone, Debug)]
pub struct Agent<'a, S> {
    pub program: Program,
    pub lib: &'a Library<S>,
    pub fggms: BTreeMap<String, PreparedFggm>,
    pub opts: RunOptions,
    /// Solver context for quantified contracts.
    pub solver: Option<&'a VerificationContext>,
}

impl<'a, S: Scalar> Agent<'a, S> {
    pub fn new(prog: &Program, lib: &'a Library<S>, fggms: &[FggmDef]) -> Result<Self, Vec<TypeError>> {
        let mut sigs = lib.sigs.clone();
        let mut prepared = BTreeMap::new();
        for d in fggms {
            sigs.insert(d.signature());
            prepared.insert(d.id.clone(), PreparedFggm::new(d, &lib.sigs)?);
        }
        Ok(Agent { program: elaborate(prog, &sigs)?, lib, fggms: prepared, opts: RunOptions::default(), solver: None })
    }

    pub fn with_options(mut self, opts: RunOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn with_solver(mut self, ctx: &'a VerificationContext) -> Self {
        self.solver = Some(ctx);
        self
    }

    pub fn entry(&self) -> &Decl {
        self.program.entry().expect("elaborated program has an entry point")
    }

    /// Run the entry point on a valuation of its parameters.
    pub fn run(
        &self,
        models: &ModelBindings<S>,
        input: &Valuation<S>,
        rng: &mut Rng,
    ) -> Result<(Value<S>, ExecTrace<S>), RuntimeFault> {
        let entry = self.entry();
        let args = entry
            .params
            .iter()
            .map(|p| input.get(&p.name).cloned().ok_or_else(|| RuntimeFault::UnboundVariable(p.name.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let (v, calls) = self.run_args(models, &args, rng)?;
        let mut trace = ExecTrace::new(input.clone());
        trace.calls = calls;
        trace.output = Some(v.clone());
        Ok((v, trace))
    }

    pub fn run_args(
        &self,
        models: &ModelBindings<S>,
        args: &[Value<S>],
        rng: &mut Rng,
    ) -> Result<(Value<S>, Vec<CallRecord<S>>), RuntimeFault> {
        let ex = Exec {
            prog: &self.program,
            lib: self.lib,
            fggms: &self.fggms,
            models,
            opts: self.opts,
            solver: self.solver,
            steps: Cell::new(0),
        };
        let mut calls = Vec::new();
        let v = ex.call_decl(self.entry(), args.to_vec(), rng, &mut calls)?;
        Ok((v, calls))
    }
}

/// Run an agent once (convenience wrapper around [`Agent`]).
pub fn run_agent<S: Scalar>(
    prog: &Program,
    fggms: &[FggmDef],
    lib: &Library<S>,
    models: &ModelBindings<S>,
    input: &Valuation<S>,
    rng: &mut Rng,
) -> Result<(Value<S>, ExecTrace<S>), RuntimeFault> {
    let agent = Agent::new(prog, lib, fggms).map_err(|e| RuntimeFault::TypeMismatch(e[0].to_string()))?;
    agent.run(models, input, rng)
}

struct Exec<'a, S> {
    prog: &'a Program,
    lib: &'a Library<S>,
    fggms: &'a BTreeMap<String, PreparedFggm>,
    models: &'a ModelBindings<S>,
    opts: RunOptions,
    solver: Option<&'a VerificationContext>,
    steps: Cell<u64>,
}

impl<S: Scalar> Exec<'_, S> {
    fn tick(&self) -> Result<(), RuntimeFault> {
        let n = self.steps.get() + 1;
        self.steps.set(n);
        if n > self.opts.step_limit {
            Err(RuntimeFault::StepLimit(self.opts.step_limit))
        } else {
            Ok(())
        }
    }

    fn call_decl(
        &self,
        d: &Decl,
        args: Vec<Value<S>>,
        rng: &mut Rng,
        calls: &mut Vec<CallRecord<S>>,
    ) -> Result<Value<S>, RuntimeFault> {
        let mut env = bind_params(&d.params, &args)?;
        match self.block(&d.body, &mut env, rng, calls)? {
            Some(v) => coerce(v, d.ret),
            None => Err(RuntimeFault::NoReturn(d.name.clone())),
        }
    }

    fn block(
        &self,
        stmts: &[Stmt],
        env: &mut Valuation<S>,
        rng: &mut Rng,
        calls: &mut Vec<CallRecord<S>>,
    ) -> Result<Option<Value<S>>, RuntimeFault> {
        for s in stmts {
            self.tick()?;
            match &s.kind {
                StmtKind::VarDecl { name, ty, init } => {
                    let v = coerce(self.eval(init, env, rng, calls)?, *ty)?;
                    env.insert(name.clone(), v);
                }
                StmtKind::Assign { name, value } => {
                    let v = self.eval(value, env, rng, calls)?;
                    let ty = env.get(name).map(Value::base_type).ok_or_else(|| RuntimeFault::UnboundVariable(name.clone()))?;
                    env.insert(name.clone(), coerce(v, ty)?);
                }
                StmtKind::Call(e) => {
                    self.eval(e, env, rng, calls)?;
                }
                StmtKind::If { cond, then_branch, else_branch } => {
                    let r = if eval_qf(cond, env, self.lib)? {
                        self.block(then_branch, env, rng, calls)?
                    } else if let Some(b) = else_branch {
                        self.block(b, env, rng, calls)?
                    } else {
                        None
                    };
                    if r.is_some() {
                        return Ok(r);
                    }
                }
                StmtKind::While { cond, body, .. } => {
                    while eval_qf(cond, env, self.lib)? {
                        self.tick()?;
                        if let Some(v) = self.block(body, env, rng, calls)? {
                            return Ok(Some(v));
                        }
                    }
                }
                StmtKind::Assert(_) => {}
                StmtKind::Return(e) => return Ok(Some(self.eval(e, env, rng, calls)?)),
            }
        }
        Ok(None)
    }

    fn eval(
        &self,
        e: &Expr,
        env: &Valuation<S>,
        rng: &mut Rng,
        calls: &mut Vec<CallRecord<S>>,
    ) -> Result<Value<S>, RuntimeFault> {
        match &e.kind {
            ExprKind::Lit(l) => ops::literal(l),
            ExprKind::Var(v) => env.get(v).cloned().ok_or_else(|| RuntimeFault::UnboundVariable(v.clone())),
            ExprKind::Neg(a) => ops::neg(self.eval(a, env, rng, calls)?),
            ExprKind::Bin(op, a, b) => {
                let x = self.eval(a, env, rng, calls)?;
                let y = self.eval(b, env, rng, calls)?;
                ops::binary(*op, x, y)
            }
            ExprKind::Call { name, args, site } => {
                let vals = args.iter().map(|a| self.eval(a, env, rng, calls)).collect::<Result<Vec<_>, _>>()?;
                if let Some(g) = self.fggms.get(name) {
                    let sid = site_id(name, site.unwrap_or(0));
                    let gm = self
                        .models
                        .get(&sid)
                        .or_else(|| self.models.get(name))
                        .ok_or_else(|| RuntimeFault::MissingModel(sid.clone()))?;
                    let (v, rec) = fggm_call(g, gm.as_ref(), &vals, self.lib, self.opts.k, self.solver, rng, &sid)?;
                    calls.push(rec);
                    Ok(v)
                } else if let Some(d) = self.prog.decl(name) {
                    self.tick()?;
                    self.call_decl(d, vals, rng, calls)
                } else {
                    self.lib.call(name, &vals)
                }
            }
        }
    }
}
