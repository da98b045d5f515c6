//! Recursive-descent parser.
//!
//! A parenthesis at the start of an atom is ambiguous between a grouped
//! formula and a grouped arithmetic expression (`(a + b) < c`); the parser
//! tries the relation reading first and backtracks.

use super::ast::*;
use super::error::ParseError;
use super::lexer::{tokenize, Tok, Token, KEYWORDS};

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(src)?;
    let mut decls = Vec::new();
    while !p.at_eof() {
        decls.push(p.decl()?);
    }
    Ok(Program { decls })
}

pub fn parse_formula(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(src)?;
    let f = p.formula()?;
    p.expect_eof()?;
    Ok(f)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_type(src: &str) -> Result<BaseType, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.base_type()?;
    p.expect_eof()?;
    Ok(t)
}

/// `(x: real, y: real) -> real`
pub fn parse_type_signature(src: &str) -> Result<(Vec<Param>, BaseType), ParseError> {
    let mut p = Parser::new(src)?;
    p.expect_sym("(")?;
    let params = p.params()?;
    p.expect_sym(")")?;
    p.expect_sym("->")?;
    let ret = if p.eat_sym("(") {
        let t = p.base_type()?;
        p.expect_sym(")")?;
        t
    } else {
        p.base_type()?
    };
    p.expect_eof()?;
    Ok((params, ret))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError::new(self.span(), format!("expected {expected}, found {}", self.peek().describe())))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(&format!("`{s}`"))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error("end of input")
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error("identifier"),
        }
    }

    fn base_type(&mut self) -> Result<BaseType, ParseError> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(t) = BaseType::from_keyword(s) {
                self.bump();
                return Ok(t);
            }
        }
        self.error("a type (bool, int, real, string)")
    }

    fn params(&mut self) -> Result<Vec<Param>, ParseError> {
        let mut out = Vec::new();
        if self.is_sym(")") {
            return Ok(out);
        }
        loop {
            let name = self.ident()?;
            self.expect_sym(":")?;
            let ty = self.base_type()?;
            out.push(Param { name, ty });
            if !self.eat_sym(",") {
                return Ok(out);
            }
        }
    }

    fn decl(&mut self) -> Result<Decl, ParseError> {
        let span = self.span();
        let kind = if self.eat_kw("function") {
            DeclKind::Function
        } else if self.eat_kw("method") {
            DeclKind::Method
        } else {
            return self.error("`function` or `method`");
        };
        let name = self.ident()?;
        self.expect_sym("(")?;
        let params = self.params()?;
        self.expect_sym(")")?;
        let (result_name, ret) = if self.eat_kw("returns") {
            self.expect_sym("(")?;
            let r = self.ident()?;
            self.expect_sym(":")?;
            let t = self.base_type()?;
            self.expect_sym(")")?;
            (Some(r), t)
        } else {
            self.expect_sym(":")?;
            if self.eat_sym("(") {
                if matches!(self.peek_at(1), Tok::Sym(":")) {
                    let r = self.ident()?;
                    self.expect_sym(":")?;
                    let t = self.base_type()?;
                    self.expect_sym(")")?;
                    (Some(r), t)
                } else {
                    let t = self.base_type()?;
                    self.expect_sym(")")?;
                    (None, t)
                }
            } else {
                (None, self.base_type()?)
            }
        };
        let result_name = result_name.filter(|r| r != RESULT);
        let mut requires = Vec::new();
        let mut ensures = Vec::new();
        loop {
            if self.eat_kw("requires") {
                requires.push(self.formula()?);
            } else if self.eat_kw("ensures") {
                ensures.push(self.formula()?);
            } else {
                break;
            }
            self.eat_sym(";");
        }
        let body = self.block()?;
        Ok(Decl { kind, name, params, result_name, ret, requires, ensures, body, span })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        while !self.is_sym("}") {
            if self.at_eof() {
                return self.error("`}`");
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        let kind = if self.eat_kw("var") {
            let name = self.ident()?;
            self.expect_sym(":")?;
            let ty = self.base_type()?;
            self.expect_sym(":=")?;
            let init = self.expr()?;
            self.expect_sym(";")?;
            StmtKind::VarDecl { name, ty, init }
        } else if self.eat_kw("if") {
            return self.if_rest(span);
        } else if self.eat_kw("while") {
            let cond = self.formula()?;
            let mut invariants = Vec::new();
            let mut decreases = None;
            loop {
                if self.eat_kw("invariant") {
                    invariants.push(self.formula()?);
                } else if self.eat_kw("decreases") {
                    if decreases.is_some() {
                        return self.error("a single `decreases` clause");
                    }
                    decreases = Some(self.expr()?);
                } else {
                    break;
                }
            }
            let body = self.block()?;
            StmtKind::While { cond, invariants, decreases, body }
        } else if self.eat_kw("assert") {
            let f = self.formula()?;
            self.expect_sym(";")?;
            StmtKind::Assert(f)
        } else if self.eat_kw("return") {
            let e = self.expr()?;
            self.expect_sym(";")?;
            StmtKind::Return(e)
        } else {
            let name = self.ident()?;
            if self.eat_sym(":=") {
                let value = self.expr()?;
                self.expect_sym(";")?;
                StmtKind::Assign { name, value }
            } else if self.is_sym("(") {
                self.bump();
                let args = self.args()?;
                self.expect_sym(";")?;
                StmtKind::Call(Expr::at(ExprKind::Call { name, args, site: None }, span))
            } else {
                return self.error("`:=` or `(`");
            }
        };
        Ok(Stmt { kind, span })
    }

    fn if_rest(&mut self, span: Span) -> Result<Stmt, ParseError> {
        let cond = self.formula()?;
        let then_branch = self.block()?;
        let else_branch = if self.eat_kw("else") {
            if self.is_kw("if") {
                let s = self.span();
                self.bump();
                Some(vec![self.if_rest(s)?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt { kind: StmtKind::If { cond, then_branch, else_branch }, span })
    }

    /// Arguments after the opening parenthesis, consuming the closing one.
    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut out = Vec::new();
        if self.eat_sym(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat_sym(")") {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    // ---- formulas ----

    fn formula(&mut self) -> Result<Formula, ParseError> {
        self.iff()
    }

    fn iff(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.implication()?;
        while self.eat_sym("<==>") {
            let rhs = self.implication()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat_sym("==>") {
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat_sym("||") {
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary_formula()?;
        while self.eat_sym("&&") {
            let rhs = self.unary_formula()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary_formula(&mut self) -> Result<Formula, ParseError> {
        if self.eat_sym("!") {
            return Ok(Formula::not(self.unary_formula()?));
        }
        if self.is_kw("forall") || self.is_kw("exists") {
            let universal = self.is_kw("forall");
            self.bump();
            let mut binders = Vec::new();
            loop {
                let name = self.ident()?;
                self.expect_sym(":")?;
                let ty = self.base_type()?;
                binders.push((name, ty));
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("::")?;
            let body = Box::new(self.formula()?);
            return Ok(if universal { Formula::Forall(binders, body) } else { Formula::Exists(binders, body) });
        }
        self.atom()
    }

    fn rel_op(&self) -> Option<RelOp> {
        match self.peek() {
            Tok::Sym("=") | Tok::Sym("==") => Some(RelOp::Eq),
            Tok::Sym("!=") => Some(RelOp::Ne),
            Tok::Sym("<") => Some(RelOp::Lt),
            Tok::Sym(">") => Some(RelOp::Gt),
            Tok::Sym("<=") => Some(RelOp::Le),
            Tok::Sym(">=") => Some(RelOp::Ge),
            _ => None,
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        let start = self.pos;
        let relation_err = match self.expr() {
            Ok(lhs) => {
                if let Some(op) = self.rel_op() {
                    self.bump();
                    let rhs = self.expr()?;
                    let mut f = Formula::Rel(op, lhs, rhs.clone());
                    // chained comparisons: a <= b <= c
                    let mut prev = rhs;
                    while let Some(op) = self.rel_op() {
                        self.bump();
                        let next = self.expr()?;
                        f = Formula::and(f, Formula::Rel(op, prev, next.clone()));
                        prev = next;
                    }
                    return Ok(f);
                }
                None
            }
            Err(e) => Some(e),
        };
        let after_expr = self.pos;
        self.pos = start;
        if self.eat_sym("(") {
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        if self.eat_kw("true") {
            return Ok(Formula::Const(true));
        }
        if self.eat_kw("false") {
            return Ok(Formula::Const(false));
        }
        if let Tok::Ident(name) = self.peek().clone() {
            if !KEYWORDS.contains(&name.as_str()) {
                self.bump();
                if self.eat_sym("(") {
                    let args = self.args()?;
                    return Ok(Formula::Pred(name, args));
                }
                return Ok(Formula::BoolVar(name));
            }
        }
        if let Some(e) = relation_err {
            return Err(e);
        }
        self.pos = after_expr;
        self.error("a comparison operator")
    }

    // ---- expressions ----

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.is_sym("+") {
                BinOp::Add
            } else if self.is_sym("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let span = lhs.span;
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::at(ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.is_sym("*") {
                BinOp::Mul
            } else if self.is_sym("/") {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let span = lhs.span;
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::at(ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        if self.eat_sym("-") {
            let inner = self.factor()?;
            return Ok(Expr::at(ExprKind::Neg(Box::new(inner)), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(s) => {
                self.bump();
                ExprKind::Lit(Literal::Int(s))
            }
            Tok::Real(s) => {
                self.bump();
                ExprKind::Lit(Literal::Real(s))
            }
            Tok::Str(s) => {
                self.bump();
                ExprKind::Lit(Literal::Str(s))
            }
            Tok::Ident(w) if w == "true" || w == "false" => {
                self.bump();
                ExprKind::Lit(Literal::Bool(w == "true"))
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.eat_sym("(") {
                    let args = self.args()?;
                    ExprKind::Call { name, args, site: None }
                } else {
                    ExprKind::Var(name)
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                return Ok(e);
            }
            _ => return self.error("an expression"),
        };
        Ok(Expr::at(kind, span))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_of_arithmetic() {
        let e = parse_expr("1 + 2 * x - y / 3").unwrap();
        let expected = Expr::bin(
            BinOp::Sub,
            Expr::bin(BinOp::Add, Expr::int(1), Expr::bin(BinOp::Mul, Expr::int(2), Expr::var("x"))),
            Expr::bin(BinOp::Div, Expr::var("y"), Expr::int(3)),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn parenthesised_arithmetic_in_relation() {
        let f = parse_formula("(a + b) * 2 < c").unwrap();
        assert!(matches!(f, Formula::Rel(RelOp::Lt, _, _)));
        let g = parse_formula("(x <= 1) ==> (y >= 0)").unwrap();
        assert!(matches!(g, Formula::Implies(_, _)));
    }

    #[test]
    fn implication_is_right_associative() {
        let f = parse_formula("a ==> b ==> c").unwrap();
        match f {
            Formula::Implies(l, r) => {
                assert_eq!(*l, Formula::BoolVar("a".into()));
                assert!(matches!(*r, Formula::Implies(_, _)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quantifier_and_predicates() {
        let f = parse_formula("forall x: real, d: real :: x >= 1.0 ==> pow(x, d) >= 1.0").unwrap();
        match f {
            Formula::Forall(bs, _) => assert_eq!(bs.len(), 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_formula("parse(p)").unwrap(), Formula::Pred("parse".into(), vec![Expr::var("p")]));
    }

    #[test]
    fn chained_comparison() {
        let f = parse_formula("0 <= x <= 1").unwrap();
        assert!(matches!(f, Formula::And(_, _)));
    }

    #[test]
    fn missing_brace_reports_position() {
        let err = parse_program("function f(x: real): (real) { return x;").unwrap_err();
        assert!(err.message.contains("`}`"), "{err}");
        assert_eq!(err.span.line, 1);
    }

    #[test]
    fn result_named_result_is_canonical() {
        let p = parse_program("method m(x: int) returns (result: int) { return x; }").unwrap();
        assert_eq!(p.decls[0].result_name, None);
        let q = parse_program("function f(x: int): (r: int) { return x; }").unwrap();
        assert_eq!(q.decls[0].result_name.as_deref(), Some("r"));
    }
}
