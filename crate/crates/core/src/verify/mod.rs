//! Static verification: VC generation, discharge through an SMT solver,
//! termination checks, and validation of guarded models and candidate
//! programs.

pub mod solver;
pub mod vcgen;

use crate::lang::ast::*;
use crate::lang::fggm::FggmDef;
use crate::lang::sig::{FnKind, FnSig, SignatureTable};
use crate::lang::typeck::{decl_sig, elaborate};
use crate::lang::{print_formula, Scope};
use crate::logic::simplify::simplify;
use crate::logic::smt::{encode_solver, function_symbols, relevant_axioms, SmtOptions};
use crate::logic::subst::{free_vars, subst_formula};
use crate::logic::{contract_axiom, library_axioms, Axiom, EncodeError};
use crate::runtime::gm::GmSignature;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::{Duration, Instant};
use thiserror::Error;

pub use solver::{Discharge, SolverConfig, SolverError};
pub use vcgen::{generate_vcs, Vc, VcKind};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("loop at {0} has no decreases clause")]
    MissingDecreases(Span),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Everything the verifier may assume: library signatures and contracts,
/// guarded-model definitions, extra axioms, and the solver to use.
#[derive(Clone, Debug)]
pub struct VerificationContext {
    pub library: SignatureTable,
    pub fggms: Vec<FggmDef>,
    pub axioms: Vec<Axiom>,
    pub gms: BTreeMap<String, GmSignature>,
    pub solver: SolverConfig,
}

impl VerificationContext {
    pub fn new(library: SignatureTable, axioms: Vec<Axiom>, gms: BTreeMap<String, GmSignature>, solver: SolverConfig) -> Self {
        VerificationContext { library, fggms: Vec::new(), axioms, gms, solver }
    }

    /// Context extended with guarded-model definitions.
    pub fn with_fggms(&self, defs: &[FggmDef]) -> Self {
        let mut c = self.clone();
        for d in defs {
            c.fggms.retain(|g| g.id != d.id);
            c.fggms.push(d.clone());
        }
        c
    }

    /// Library plus guarded-model signatures.
    pub fn sigs(&self) -> SignatureTable {
        let mut t = self.library.clone();
        for d in &self.fggms {
            t.insert(d.signature());
        }
        t
    }

    /// Library contracts, extra axioms, and guarded-model contracts.
    pub fn all_axioms(&self) -> Vec<Axiom> {
        let mut out = library_axioms(&self.library);
        out.extend(self.axioms.iter().cloned());
        for d in &self.fggms {
            out.extend(contract_axiom(&d.signature()));
        }
        out
    }
}

/// Task-level contract imposed on an entry point: `requires` over the
/// parameters, `ensures` over the parameters and `result`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramSpec {
    pub params: Vec<Param>,
    pub ret: BaseType,
    pub requires: Formula,
    pub ensures: Formula,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObligationReport {
    pub decl: String,
    pub kind: VcKind,
    pub line: u32,
    pub col: u32,
    pub description: String,
    pub formula: String,
    pub outcome: Discharge,
    pub millis: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub verified: bool,
    /// Errors that prevented or invalidated verification (typing,
    /// signature mismatch, forbidden calls, termination).
    pub errors: Vec<String>,
    pub obligations: Vec<ObligationReport>,
}

impl VerifyReport {
    pub fn failed_obligations(&self) -> impl Iterator<Item = &ObligationReport> {
        self.obligations.iter().filter(|o| !o.outcome.is_valid())
    }

    /// One line per problem, suitable for planner feedback.
    pub fn messages(&self) -> Vec<String> {
        let mut out = self.errors.clone();
        for o in self.failed_obligations() {
            let why = match &o.outcome {
                Discharge::Valid => unreachable!(),
                Discharge::Unknown { reason } => format!("unproven ({reason})"),
                Discharge::Countermodel { assignments } => {
                    let parts: Vec<String> = assignments.iter().map(|(k, v)| format!("{k} = {v}")).collect();
                    format!("countermodel: {}", parts.join(", "))
                }
            };
            out.push(format!("{}:{} in `{}`: {} might not hold — {why}", o.line, o.col, o.decl, o.description));
        }
        out
    }
}

/// Check validity of a closed formula under the context's axioms.
pub fn discharge(
    vc: &Formula,
    ctx: &VerificationContext,
    sigs: &SignatureTable,
    timeout: Duration,
) -> Result<Discharge, VerifyError> {
    let f = simplify(vc);
    match f {
        Formula::Const(true) => return Ok(Discharge::Valid),
        Formula::Const(false) => {
            return Ok(Discharge::Countermodel { assignments: BTreeMap::new() });
        }
        _ => {}
    }
    let axioms = ctx.all_axioms();
    let relevant: Vec<Axiom> = relevant_axioms(&f, &axioms).into_iter().cloned().collect();
    let mut free = BTreeMap::new();
    let f = peel_universals(f, &mut free);
    let opts = SmtOptions {
        logic: ctx.solver.logic.clone(),
        timeout_ms: Some(timeout.as_millis() as u64),
        random_seed: ctx.solver.random_seed,
        produce_model: true,
    };
    let script = encode_solver(&f, &relevant, sigs, &free, &opts)?;
    Ok(match solver::run_script(&ctx.solver, &script, timeout)? {
        solver::SatResult::Unsat => Discharge::Valid,
        solver::SatResult::Sat(model) => Discharge::Countermodel { assignments: solver::parse_model(&model) },
        solver::SatResult::Unknown(reason) => Discharge::Unknown { reason },
    })
}

/// Turn leading universal binders (also those under the consequent of an
/// implication) into free constants. Validity is unchanged, and a
/// countermodel then assigns them concrete values.
fn peel_universals(f: Formula, free: &mut BTreeMap<String, BaseType>) -> Formula {
    let fresh = |bs: &[Binder], free: &BTreeMap<String, BaseType>, avoid: &std::collections::BTreeSet<String>| {
        bs.iter().all(|(n, _)| !free.contains_key(n) && !avoid.contains(n))
    };
    match f {
        Formula::Forall(bs, body) if fresh(&bs, free, &Default::default()) => {
            free.extend(bs);
            peel_universals(*body, free)
        }
        Formula::Implies(a, b) => match *b {
            Formula::Forall(bs, body) if fresh(&bs, free, &free_vars(&a)) => {
                free.extend(bs);
                let body = peel_universals(*body, free);
                Formula::Implies(a, Box::new(body))
            }
            b => Formula::Implies(a, Box::new(b)),
        },
        f => f,
    }
}

/// Discharge a batch of VCs in parallel under the program budget.
pub fn discharge_all(vcs: &[Vc], ctx: &VerificationContext, sigs: &SignatureTable) -> Result<Vec<ObligationReport>, VerifyError> {
    let start = Instant::now();
    let budget = ctx.solver.program_budget;
    vcs.par_iter()
        .map(|vc| {
            let t0 = Instant::now();
            let elapsed = start.elapsed();
            let outcome = if elapsed >= budget {
                Discharge::Unknown { reason: "program budget exhausted".into() }
            } else {
                let timeout = ctx.solver.timeout_per_vc.min(budget - elapsed);
                discharge(&vc.formula, ctx, sigs, timeout)?
            };
            Ok(ObligationReport {
                decl: vc.decl.clone(),
                kind: vc.kind.clone(),
                line: vc.span.line,
                col: vc.span.col,
                description: vc.description.clone(),
                formula: print_formula(&vc.formula),
                outcome,
                millis: t0.elapsed().as_millis() as u64,
            })
        })
        .collect()
}

fn direct_parametric_calls(prog: &Program, sigs: &SignatureTable) -> Vec<String> {
    let mut out = Vec::new();
    for d in &prog.decls {
        walk_block_exprs(&d.body, &mut |e| {
            if let ExprKind::Call { name, .. } = &e.kind {
                if matches!(sigs.get(name).map(|s| &s.kind), Some(FnKind::Parametric { .. })) {
                    out.push(format!("{}: direct call to parametric function `{name}`", e.span));
                }
            }
        });
    }
    out
}

/// Rename a spec's parameters to the entry point's parameter names.
fn spec_for(decl: &Decl, spec: &ProgramSpec) -> (Formula, Formula) {
    let mut m = BTreeMap::new();
    for (sp, dp) in spec.params.iter().zip(&decl.params) {
        if sp.name != dp.name {
            m.insert(sp.name.clone(), Expr::var(&dp.name));
        }
    }
    let result = decl.result_var();
    let mut post = m.clone();
    if result != RESULT {
        post.insert(RESULT.to_string(), Expr::var(result));
    }
    (subst_formula(&spec.requires, &m), subst_formula(&spec.ensures, &post))
}

/// Type-check, generate VCs for every declaration and discharge them. When
/// `spec` is given it is imposed on the entry point.
pub fn verify_program(prog: &Program, ctx: &VerificationContext, spec: Option<&ProgramSpec>) -> Result<VerifyReport, VerifyError> {
    let sigs = ctx.sigs();
    let mut report = VerifyReport::default();
    let elab = match elaborate(prog, &sigs) {
        Ok(p) => p,
        Err(errs) => {
            report.errors = errs.iter().map(|e| format!("type error: {e}")).collect();
            return Ok(report);
        }
    };
    report.errors.extend(direct_parametric_calls(&elab, &sigs));
    let entry = match elab.entry() {
        Some(e) => e.clone(),
        None => {
            report.errors.push("program has no declarations".into());
            return Ok(report);
        }
    };
    if let Some(s) = spec {
        if entry.param_types() != s.params.iter().map(|p| p.ty).collect::<Vec<_>>() || entry.ret != s.ret {
            report.errors.push(format!("entry point `{}` does not match the task signature", entry.name));
        }
    }
    let decl_sigs: BTreeMap<String, FnSig> = elab.decls.iter().map(|d| (d.name.clone(), decl_sig(d))).collect();
    let mut vcs = Vec::new();
    for d in &elab.decls {
        let (req, ens) = match spec {
            Some(s) if d.name == entry.name && report.errors.is_empty() => {
                let (r, e) = spec_for(d, s);
                (vec![r], vec![e])
            }
            _ => (vec![], vec![]),
        };
        match generate_vcs(d, &sigs, &decl_sigs, &req, &ens) {
            Ok(v) => vcs.extend(v),
            Err(VerifyError::MissingDecreases(span)) => {
                report.errors.push(format!("termination: loop at {span} in `{}` has no decreases clause", d.name))
            }
            Err(e) => return Err(e),
        }
    }
    report.obligations = discharge_all(&vcs, ctx, &sigs)?;
    report.verified = report.errors.is_empty() && report.obligations.iter().all(|o| o.outcome.is_valid());
    Ok(report)
}

/// Errors of a candidate program against a task (empty when verified).
pub fn validate_program(prog: &Program, ctx: &VerificationContext, spec: &ProgramSpec) -> Result<Vec<String>, VerifyError> {
    Ok(verify_program(prog, ctx, Some(spec))?.messages())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "risk", rename_all = "camelCase")]
pub enum TerminationRisk {
    MissingDecreases { line: u32, col: u32 },
    Recursion { name: String },
    MeasureNotProven { line: u32, col: u32, outcome: Discharge },
}

/// Termination of one declaration within its program: every loop needs a
/// proven `decreases` measure and the call graph must be acyclic.
pub fn check_termination(decl_name: &str, prog: &Program, ctx: &VerificationContext) -> Result<Vec<TerminationRisk>, VerifyError> {
    let sigs = ctx.sigs();
    let elab = match elaborate(prog, &sigs) {
        Ok(p) => p,
        Err(errs) => {
            return Ok(errs
                .into_iter()
                .filter_map(|e| match e {
                    crate::lang::TypeError::Recursion { name } => Some(TerminationRisk::Recursion { name }),
                    _ => None,
                })
                .collect())
        }
    };
    let Some(decl) = elab.decl(decl_name) else { return Ok(vec![]) };
    let decl_sigs: BTreeMap<String, FnSig> = elab.decls.iter().map(|d| (d.name.clone(), decl_sig(d))).collect();
    let mut risks = Vec::new();
    let mut missing = false;
    walk_stmts(&decl.body, &mut |s| {
        if let StmtKind::While { decreases: None, .. } = &s.kind {
            risks.push(TerminationRisk::MissingDecreases { line: s.span.line, col: s.span.col });
            missing = true;
        }
    });
    if missing {
        return Ok(risks);
    }
    let vcs: Vec<Vc> = generate_vcs(decl, &sigs, &decl_sigs, &[], &[])?
        .into_iter()
        .filter(|v| matches!(v.kind, VcKind::DecreasesBounded | VcKind::DecreasesStrict))
        .collect();
    for o in discharge_all(&vcs, ctx, &sigs)? {
        if !o.outcome.is_valid() {
            risks.push(TerminationRisk::MeasureNotProven { line: o.line, col: o.col, outcome: o.outcome });
        }
    }
    Ok(risks)
}

pub const ERR_TYPE_SIGNATURE: &str = "Invalid type signature";
pub const ERR_INPUT_CONTRACT: &str = "Invalid input contract";
pub const ERR_OUTPUT_CONTRACT: &str = "Invalid output contract";
pub const ERR_LIBRARY_TERMS_PRE: &str = "Invalid library terms in Φl";
pub const ERR_LIBRARY_TERMS_POST: &str = "Invalid library terms in Ψl";
pub const ERR_PROMPTING_PROGRAM: &str = "Invalid prompting program";
pub const ERR_FALLBACK_PROGRAM: &str = "Invalid fallback program";
pub const ERR_FALLBACK_CONTRACT: &str = "Fallback violates contract";

fn non_library_calls(f: &Formula, lib: &SignatureTable) -> Vec<String> {
    function_symbols(f)
        .into_iter()
        .filter(|n| !matches!(lib.get(n).map(|s| &s.kind), Some(FnKind::NonParametric)))
        .collect()
}

/// Validate a guarded-model definition. Returns the list of errors; empty
/// means the definition may be added to the context.
pub fn validate_fggm(def: &FggmDef, ctx: &VerificationContext) -> Result<Vec<String>, VerifyError> {
    let mut errs = Vec::new();
    let lib = &ctx.library;
    // 1. signature and model compatibility
    let mut names = std::collections::BTreeSet::new();
    let dup = def.params.iter().any(|p| !names.insert(p.name.clone()) || p.name == RESULT);
    let gm = ctx.gms.get(&def.gm_id);
    let prompt_entry = def.prompt.entry();
    match gm {
        None => errs.push(format!("{ERR_TYPE_SIGNATURE}: unknown generative model `{}`", def.gm_id)),
        Some(_) if dup => errs.push(format!("{ERR_TYPE_SIGNATURE}: duplicate or reserved parameter name")),
        Some(_) if lib.contains(&def.id) => {
            errs.push(format!("{ERR_TYPE_SIGNATURE}: `{}` clashes with a library function", def.id))
        }
        Some(g) => {
            if g.output != def.ret {
                errs.push(format!("{ERR_TYPE_SIGNATURE}: model `{}` produces {}, not {}", def.gm_id, g.output, def.ret));
            }
            if g.inputs.len() == 1 {
                if let Some(p) = prompt_entry {
                    if p.ret != g.inputs[0] {
                        errs.push(format!(
                            "{ERR_TYPE_SIGNATURE}: prompt type {} does not match model input {}",
                            p.ret, g.inputs[0]
                        ));
                    }
                }
            } else if g.inputs != def.params.iter().map(|p| p.ty).collect::<Vec<_>>() {
                errs.push(format!("{ERR_TYPE_SIGNATURE}: model `{}` expects inputs {:?}", def.gm_id, g.inputs));
            }
        }
    }
    // 2-5. contracts
    let scope = Scope::from_params(&def.params);
    let bad_pre = non_library_calls(&def.requires, lib);
    let bad_post: Vec<String> = non_library_calls(&def.ensures, lib);
    let pre_ok = bad_pre.is_empty() && crate::lang::check_formula(&def.requires, &scope, lib).is_ok();
    let post_scope = scope.clone().with(RESULT, def.ret);
    let post_ok = bad_post.is_empty() && crate::lang::check_formula(&def.ensures, &post_scope, lib).is_ok();
    if bad_pre.is_empty() {
        if let Err(e) = crate::lang::check_formula(&def.requires, &scope, lib) {
            errs.push(format!("{ERR_INPUT_CONTRACT}: {}", e[0]));
        }
    }
    if bad_post.is_empty() {
        if let Err(e) = crate::lang::check_formula(&def.ensures, &post_scope, lib) {
            errs.push(format!("{ERR_OUTPUT_CONTRACT}: {}", e[0]));
        }
    }
    if !bad_pre.is_empty() {
        errs.push(format!("{ERR_LIBRARY_TERMS_PRE}: {}", bad_pre.join(", ")));
    }
    if !bad_post.is_empty() {
        errs.push(format!("{ERR_LIBRARY_TERMS_POST}: {}", bad_post.join(", ")));
    }
    // 6. prompting program
    let plain_lib = deterministic_only(lib);
    let prompt_ok = match prompt_entry {
        None => false,
        Some(p) => p.params == def.params && elaborate(&def.prompt, &plain_lib).is_ok(),
    };
    if !prompt_ok {
        let detail = match elaborate(&def.prompt, &plain_lib) {
            Err(e) => e[0].to_string(),
            Ok(_) => "parameters must match the model's type signature".into(),
        };
        errs.push(format!("{ERR_PROMPTING_PROGRAM}: {detail}"));
    }
    // 7. fallback program
    let fb = def.fallback.entry();
    let fb_shape_ok = fb.is_some_and(|d| {
        d.params.len() == def.params.len() + 1
            && d.params[..def.params.len()] == def.params[..]
            && d.params[def.params.len()].ty == def.ret
            && d.ret == def.ret
    });
    let fb_elab = elaborate(&def.fallback, &plain_lib);
    if !fb_shape_ok || fb_elab.is_err() {
        let detail = match &fb_elab {
            Err(e) => e[0].to_string(),
            Ok(_) => format!("expected parameters of the signature followed by one {} proposal", def.ret),
        };
        errs.push(format!("{ERR_FALLBACK_PROGRAM}: {detail}"));
        return Ok(errs);
    }
    // 8. fallback satisfies the contract
    if pre_ok && post_ok {
        let spec = ProgramSpec {
            params: fb.unwrap().params.clone(),
            ret: def.ret,
            requires: def.requires.clone(),
            ensures: def.ensures.clone(),
        };
        let plain_ctx = VerificationContext { library: plain_lib, fggms: vec![], ..ctx.clone() };
        let report = verify_program(&def.fallback, &plain_ctx, Some(&spec))?;
        if !report.verified {
            let msgs = report.messages();
            errs.push(format!("{ERR_FALLBACK_CONTRACT}: {}", msgs.join("; ")));
        }
    }
    Ok(errs)
}

fn deterministic_only(lib: &SignatureTable) -> SignatureTable {
    let mut t = SignatureTable::new();
    for s in lib.iter().filter(|s| s.kind == FnKind::NonParametric) {
        t.insert(s.clone());
    }
    t
}

/// Free variables of a formula that are not listed (diagnostic helper).
pub fn unbound_variables(f: &Formula, allowed: &[&str]) -> Vec<String> {
    free_vars(f).into_iter().filter(|v| !allowed.contains(&v.as_str())).collect()
}
