//! The constructive argument that wrapping a bare model call in a guarded
//! model never loses: a single guarded model whose local contract *is* the
//! task specification, called once by the agent.

use crate::lang::ast::*;
use crate::lang::fggm::FggmDef;
use crate::verify::ProgramSpec;

/// Name of the guarded model built by [`sufficient_success_agent`].
pub const GUARD_ID: &str = "guarded";

/// Build `(G, P)` where `G` guards model `gm_id` with the task's (Φ, Ψ) as
/// its local contract, and `P` is `return guarded(x₁, …, xₙ)`.
///
/// `prompt` maps the task inputs to the model input; `fallback` takes the
/// inputs plus the last proposal and must satisfy (Φ, Ψ).
pub fn sufficient_success_agent(spec: &ProgramSpec, gm_id: &str, prompt: Program, fallback: Program) -> (FggmDef, Program) {
    let def = FggmDef {
        id: GUARD_ID.to_string(),
        gm_id: gm_id.to_string(),
        params: spec.params.clone(),
        ret: spec.ret,
        requires: spec.requires.clone(),
        ensures: spec.ensures.clone(),
        prompt,
        fallback,
        info: "The task specification enforced on a single model call".into(),
    };
    let args = spec.params.iter().map(|p| Expr::var(&p.name)).collect();
    let decl = Decl {
        kind: DeclKind::Function,
        name: "agent".into(),
        params: spec.params.clone(),
        result_name: None,
        ret: spec.ret,
        requires: vec![],
        ensures: vec![],
        body: vec![Stmt::new(StmtKind::Return(Expr::call(GUARD_ID, args)))],
        span: Span::default(),
    };
    (def, Program { decls: vec![decl] })
}
