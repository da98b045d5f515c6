//! Canonical pretty-printer. `parse(print(ast)) == ast` for every AST the
//! parser can produce; parentheses are inserted only where precedence or
//! associativity requires them.

use super::ast::*;
use std::fmt::Write;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, d) in p.decls.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&print_decl(d));
    }
    out
}

pub fn print_decl(d: &Decl) -> String {
    let mut out = String::new();
    let kw = match d.kind {
        DeclKind::Function => "function",
        DeclKind::Method => "method",
    };
    let params: Vec<String> = d.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
    let _ = write!(out, "{kw} {}({})", d.name, params.join(", "));
    match (d.kind, &d.result_name) {
        (DeclKind::Function, None) => {
            let _ = write!(out, ": ({})", d.ret);
        }
        (DeclKind::Function, Some(r)) => {
            let _ = write!(out, ": ({r}: {})", d.ret);
        }
        (DeclKind::Method, r) => {
            let _ = write!(out, " returns ({}: {})", r.as_deref().unwrap_or(RESULT), d.ret);
        }
    }
    let simple = d.requires.is_empty()
        && d.ensures.is_empty()
        && d.body.len() == 1
        && matches!(d.body[0].kind, StmtKind::Return(_) | StmtKind::Assign { .. } | StmtKind::VarDecl { .. });
    if simple {
        let _ = writeln!(out, " {{ {} }}", print_stmt_line(&d.body[0]).unwrap());
        return out;
    }
    out.push('\n');
    for r in &d.requires {
        let _ = writeln!(out, "  requires {}", print_formula(r));
    }
    for e in &d.ensures {
        let _ = writeln!(out, "  ensures {}", print_formula(e));
    }
    out.push_str("{\n");
    print_block(&mut out, &d.body, 1);
    out.push_str("}\n");
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// Single-line rendering for simple statements.
fn print_stmt_line(s: &Stmt) -> Option<String> {
    Some(match &s.kind {
        StmtKind::VarDecl { name, ty, init } => format!("var {name}: {ty} := {};", print_expr(init)),
        StmtKind::Assign { name, value } => format!("{name} := {};", print_expr(value)),
        StmtKind::Call(e) => format!("{};", print_expr(e)),
        StmtKind::Assert(f) => format!("assert {};", print_formula(f)),
        StmtKind::Return(e) => format!("return {};", print_expr(e)),
        _ => return None,
    })
}

fn print_block(out: &mut String, stmts: &[Stmt], level: usize) {
    for s in stmts {
        print_stmt(out, s, level);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    if let Some(line) = print_stmt_line(s) {
        indent(out, level);
        out.push_str(&line);
        out.push('\n');
        return;
    }
    match &s.kind {
        StmtKind::If { cond, then_branch, else_branch } => {
            indent(out, level);
            let _ = writeln!(out, "if ({}) {{", print_formula(cond));
            print_block(out, then_branch, level + 1);
            indent(out, level);
            out.push('}');
            if let Some(e) = else_branch {
                out.push_str(" else {\n");
                print_block(out, e, level + 1);
                indent(out, level);
                out.push('}');
            }
            out.push('\n');
        }
        StmtKind::While { cond, invariants, decreases, body } => {
            indent(out, level);
            let _ = writeln!(out, "while ({})", print_formula(cond));
            for i in invariants {
                indent(out, level + 1);
                let _ = writeln!(out, "invariant {}", print_formula(i));
            }
            if let Some(d) = decreases {
                indent(out, level + 1);
                let _ = writeln!(out, "decreases {}", print_expr(d));
            }
            indent(out, level);
            out.push_str("{\n");
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        _ => unreachable!("simple statements handled above"),
    }
}

pub fn print_literal(l: &Literal) -> String {
    match l {
        Literal::Bool(b) => b.to_string(),
        Literal::Int(s) | Literal::Real(s) => s.clone(),
        Literal::Str(s) => {
            let mut o = String::from("\"");
            for c in s.chars() {
                match c {
                    '"' => o.push_str("\\\""),
                    '\\' => o.push_str("\\\\"),
                    '\n' => o.push_str("\\n"),
                    '\t' => o.push_str("\\t"),
                    c => o.push(c),
                }
            }
            o.push('"');
            o
        }
    }
}

fn expr_prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Bin(op, ..) => op.precedence(),
        ExprKind::Neg(_) => 3,
        _ => 4,
    }
}

pub fn print_expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Lit(l) => print_literal(l),
        ExprKind::Var(v) => v.clone(),
        ExprKind::Neg(inner) => {
            if matches!(inner.kind, ExprKind::Bin(..) | ExprKind::Neg(_)) {
                format!("-({})", print_expr(inner))
            } else {
                format!("-{}", print_expr(inner))
            }
        }
        ExprKind::Bin(op, a, b) => {
            let p = op.precedence();
            let l = if expr_prec(a) < p { format!("({})", print_expr(a)) } else { print_expr(a) };
            let r = if expr_prec(b) <= p { format!("({})", print_expr(b)) } else { print_expr(b) };
            format!("{l} {} {r}", op.symbol())
        }
        ExprKind::Call { name, args, .. } => {
            let a: Vec<String> = args.iter().map(print_expr).collect();
            format!("{name}({})", a.join(", "))
        }
    }
}

fn formula_prec(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => 1,
        Formula::Implies(..) => 2,
        Formula::Or(..) => 3,
        Formula::And(..) => 4,
        Formula::Not(_) => 5,
        // quantifiers are always wrapped when nested
        Formula::Forall(..) | Formula::Exists(..) => 0,
        _ => 6,
    }
}

pub fn print_formula(f: &Formula) -> String {
    let wrap = |g: &Formula, need: bool| {
        if need {
            format!("({})", print_formula(g))
        } else {
            print_formula(g)
        }
    };
    match f {
        Formula::Const(b) => b.to_string(),
        Formula::Rel(op, a, b) => format!("{} {} {}", print_expr(a), op.symbol(), print_expr(b)),
        Formula::Pred(name, args) => {
            let a: Vec<String> = args.iter().map(print_expr).collect();
            format!("{name}({})", a.join(", "))
        }
        Formula::BoolVar(v) => v.clone(),
        Formula::Not(g) => format!("!{}", wrap(g, formula_prec(g) < 6)),
        Formula::And(a, b) => format!("{} && {}", wrap(a, formula_prec(a) < 4), wrap(b, formula_prec(b) <= 4)),
        Formula::Or(a, b) => format!("{} || {}", wrap(a, formula_prec(a) < 3), wrap(b, formula_prec(b) <= 3)),
        Formula::Implies(a, b) => {
            format!("{} ==> {}", wrap(a, formula_prec(a) <= 2), wrap(b, formula_prec(b) < 2))
        }
        Formula::Iff(a, b) => format!("{} <==> {}", wrap(a, formula_prec(a) < 1), wrap(b, formula_prec(b) <= 1)),
        Formula::Forall(bs, body) | Formula::Exists(bs, body) => {
            let q = if matches!(f, Formula::Forall(..)) { "forall" } else { "exists" };
            let bs: Vec<String> = bs.iter().map(|(n, t)| format!("{n}: {t}")).collect();
            format!("{q} {} :: {}", bs.join(", "), print_formula(body))
        }
    }
}

/// Render a formula so that it can be embedded anywhere (quantifiers and
/// binary connectives parenthesised).
pub fn print_formula_atomic(f: &Formula) -> String {
    if formula_prec(f) < 6 {
        format!("({})", print_formula(f))
    } else {
        print_formula(f)
    }
}
