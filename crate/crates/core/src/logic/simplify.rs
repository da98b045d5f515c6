//! Light structural simplification of formulas with constant parts.

use crate::lang::ast::Formula;

pub fn simplify(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        Not(g) => match simplify(g) {
            Const(b) => Const(!b),
            Not(h) => *h,
            h => Formula::not(h),
        },
        And(a, b) => match (simplify(a), simplify(b)) {
            (Const(false), _) | (_, Const(false)) => Const(false),
            (Const(true), x) | (x, Const(true)) => x,
            (x, y) => Formula::and(x, y),
        },
        Or(a, b) => match (simplify(a), simplify(b)) {
            (Const(true), _) | (_, Const(true)) => Const(true),
            (Const(false), x) | (x, Const(false)) => x,
            (x, y) => Formula::or(x, y),
        },
        Implies(a, b) => match (simplify(a), simplify(b)) {
            (Const(false), _) | (_, Const(true)) => Const(true),
            (Const(true), x) => x,
            (x, Const(false)) => Formula::not(x),
            (x, y) => Formula::implies(x, y),
        },
        Iff(a, b) => match (simplify(a), simplify(b)) {
            (Const(x), Const(y)) => Const(x == y),
            (x, y) => Formula::iff(x, y),
        },
        Forall(bs, g) => match simplify(g) {
            Const(b) => Const(b),
            h => Forall(bs.clone(), Box::new(h)),
        },
        Exists(bs, g) => match simplify(g) {
            Const(b) => Const(b),
            h => Exists(bs.clone(), Box::new(h)),
        },
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_formula;

    #[test]
    fn folds_constants() {
        let f = parse_formula("forall x: real :: true && (x > 0 ==> true)").unwrap();
        assert_eq!(simplify(&f), Formula::Const(true));
        let g = parse_formula("a && true").unwrap();
        assert_eq!(simplify(&g), Formula::BoolVar("a".into()));
    }
}
