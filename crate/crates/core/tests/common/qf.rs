//! Random quantifier-free contracts over the regression library and an
//! independent evaluator for them.
//!
//! Generated terms keep every library precondition satisfied by
//! construction (`sqrt(abs(e))`, `pow(abs(e) + 0.5, c)`, `e / (abs(e) + 1.0)`)
//! and stay bounded (`exp` only of `sin`/`cos`), so evaluation never faults.
#![allow(dead_code)]

use gsynth_core::lang::{BinOp, Expr, ExprKind, Formula, Literal, RelOp};
use gsynth_core::runtime::Rng;
use std::collections::BTreeMap;

pub const VARS: &[&str] = &["l", "u", "result"];

fn lit(rng: &mut Rng) -> Expr {
    let v = (rng.uniform(-4.0, 4.0) * 100.0).round() / 100.0;
    let e = Expr::real_text(&format!("{:.2}", v.abs()));
    if v < 0.0 {
        Expr::neg(e)
    } else {
        e
    }
}

pub fn term(rng: &mut Rng, depth: u32) -> Expr {
    if depth == 0 || rng.below(3) == 0 {
        return if rng.below(3) == 0 { lit(rng) } else { Expr::var(VARS[rng.below(VARS.len())]) };
    }
    let sub = |rng: &mut Rng| term(rng, depth - 1);
    let abs = |e: Expr| Expr::call("abs", vec![e]);
    match rng.below(11) {
        0 => Expr::bin(BinOp::Add, sub(rng), sub(rng)),
        1 => Expr::bin(BinOp::Sub, sub(rng), sub(rng)),
        2 => Expr::bin(BinOp::Mul, sub(rng), sub(rng)),
        3 => Expr::bin(BinOp::Div, sub(rng), Expr::bin(BinOp::Add, abs(sub(rng)), Expr::real_text("1.0"))),
        4 => abs(sub(rng)),
        5 => Expr::call(if rng.below(2) == 0 { "max" } else { "min" }, vec![sub(rng), sub(rng)]),
        6 => Expr::call(if rng.below(2) == 0 { "sin" } else { "cos" }, vec![sub(rng)]),
        7 => Expr::call("sqrt", vec![abs(sub(rng))]),
        8 => {
            let d = ["0.5", "0.8", "2.0", "1.5"][rng.below(4)];
            Expr::call("pow", vec![Expr::bin(BinOp::Add, abs(sub(rng)), Expr::real_text("0.5")), Expr::real_text(d)])
        }
        9 => Expr::call("exp", vec![Expr::call("sin", vec![sub(rng)])]),
        _ => Expr::neg(sub(rng)),
    }
}

pub fn formula(rng: &mut Rng, depth: u32) -> Formula {
    if depth == 0 || rng.below(3) == 0 {
        if rng.below(12) == 0 {
            return Formula::Const(rng.below(2) == 0);
        }
        let ops = [RelOp::Eq, RelOp::Ne, RelOp::Lt, RelOp::Gt, RelOp::Le, RelOp::Ge];
        let op = ops[rng.below(ops.len())];
        let a = term(rng, 3);
        // Equalities between unrelated random terms are almost never true;
        // compare a term with itself sometimes so both outcomes occur.
        let b = if matches!(op, RelOp::Eq | RelOp::Ne) && rng.below(2) == 0 { a.clone() } else { term(rng, 3) };
        return Formula::rel(op, a, b);
    }
    let sub = |rng: &mut Rng| formula(rng, depth - 1);
    match rng.below(5) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 => Formula::implies(sub(rng), sub(rng)),
        _ => Formula::iff(sub(rng), sub(rng)),
    }
}

pub fn valuation(rng: &mut Rng) -> BTreeMap<String, f64> {
    let l = rng.uniform(-5.0, 5.0);
    let u = l + rng.uniform(0.0, 5.0);
    let result = if rng.below(2) == 0 { rng.uniform(l, u) } else { rng.uniform(-10.0, 10.0) };
    [("l", l), ("u", u), ("result", result)].into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

// ---- independent evaluator ----

fn num(e: &Expr, env: &BTreeMap<String, f64>) -> f64 {
    match &e.kind {
        ExprKind::Lit(Literal::Real(s)) | ExprKind::Lit(Literal::Int(s)) => s.parse().unwrap(),
        ExprKind::Lit(other) => panic!("non-numeric literal {other:?}"),
        ExprKind::Var(v) => env[v],
        ExprKind::Neg(a) => -num(a, env),
        ExprKind::Bin(op, a, b) => {
            let (x, y) = (num(a, env), num(b, env));
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
            }
        }
        ExprKind::Call { name, args, .. } => {
            let a: Vec<f64> = args.iter().map(|x| num(x, env)).collect();
            match name.as_str() {
                "abs" => a[0].abs(),
                "max" => {
                    if a[0] >= a[1] {
                        a[0]
                    } else {
                        a[1]
                    }
                }
                "min" => {
                    if a[0] <= a[1] {
                        a[0]
                    } else {
                        a[1]
                    }
                }
                "sin" => a[0].sin(),
                "cos" => a[0].cos(),
                "sqrt" => a[0].sqrt(),
                "exp" => a[0].exp(),
                // The library evaluates the exponent 0.5 as a square root so
                // that `sqrt(x) == pow(x, 0.5)` holds exactly.
                "pow" if a[1] == 0.5 => a[0].sqrt(),
                "pow" => a[0].powf(a[1]),
                other => panic!("generator never emits {other}"),
            }
        }
    }
}

fn atoms<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::Rel(..) | Formula::Const(_) => out.push(f),
        Formula::Not(g) => atoms(g, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
            atoms(a, out);
            atoms(b, out);
        }
        other => panic!("generator never emits {other:?}"),
    }
}

/// Evaluate the propositional skeleton under a truth assignment to its
/// atoms (in left-to-right order), as a row of the truth table.
fn skeleton(f: &Formula, row: &[bool], next: &mut usize) -> bool {
    match f {
        Formula::Rel(..) | Formula::Const(_) => {
            *next += 1;
            row[*next - 1]
        }
        Formula::Not(g) => !skeleton(g, row, next),
        Formula::And(a, b) => {
            let x = skeleton(a, row, next);
            let y = skeleton(b, row, next);
            x & y
        }
        Formula::Or(a, b) => {
            let x = skeleton(a, row, next);
            let y = skeleton(b, row, next);
            x | y
        }
        Formula::Implies(a, b) => {
            let x = skeleton(a, row, next);
            let y = skeleton(b, row, next);
            !x | y
        }
        Formula::Iff(a, b) => {
            let x = skeleton(a, row, next);
            let y = skeleton(b, row, next);
            x == y
        }
        _ => unreachable!(),
    }
}

/// Truth value computed by numerically evaluating each atom and looking up
/// the matching row of the formula's truth table.
pub fn oracle(f: &Formula, env: &BTreeMap<String, f64>) -> bool {
    let mut ats = Vec::new();
    atoms(f, &mut ats);
    let row: Vec<bool> = ats
        .iter()
        .map(|a| match a {
            Formula::Const(b) => *b,
            Formula::Rel(op, x, y) => {
                let (x, y) = (num(x, env), num(y, env));
                match op {
                    RelOp::Eq => x == y,
                    RelOp::Ne => x != y,
                    RelOp::Lt => x < y,
                    RelOp::Gt => x > y,
                    RelOp::Le => x <= y,
                    RelOp::Ge => x >= y,
                }
            }
            _ => unreachable!(),
        })
        .collect();
    // Brute force: enumerate every row, keep the one matching the atoms.
    let n = row.len().min(16);
    let mut verdict = None;
    if n == row.len() {
        for bits in 0u32..(1 << n) {
            let r: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            if r == row {
                verdict = Some(skeleton(f, &r, &mut 0));
            }
        }
    }
    verdict.unwrap_or_else(|| skeleton(f, &row, &mut 0))
}
