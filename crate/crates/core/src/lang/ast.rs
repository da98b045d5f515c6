//! Abstract syntax for the restricted verification-aware language.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Source position. Spans never participate in structural equality, so an
/// AST that was printed and re-parsed compares equal to the original.
#[derive(Clone, Copy, Debug, Default, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseType {
    Bool,
    Int,
    Real,
    String,
}

impl BaseType {
    pub fn keyword(self) -> &'static str {
        match self {
            BaseType::Bool => "bool",
            BaseType::Int => "int",
            BaseType::Real => "real",
            BaseType::String => "string",
        }
    }

    pub fn from_keyword(s: &str) -> Option<BaseType> {
        Some(match s {
            "bool" => BaseType::Bool,
            "int" => BaseType::Int,
            "real" => BaseType::Real,
            "string" => BaseType::String,
            _ => return None,
        })
    }
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Literals keep their source text so that printing is lossless.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Bool(bool),
    /// Decimal digits, no sign.
    Int(String),
    /// `digits.digits`, no sign, no exponent.
    Real(String),
    Str(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Lit(Literal),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// `site` is filled in by elaboration for calls to guarded models; it
    /// identifies the program location and therefore the parameter vector.
    Call { name: String, args: Vec<Expr>, site: Option<u32> },
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }

    pub fn at(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn var(name: &str) -> Self {
        Expr::new(ExprKind::Var(name.to_string()))
    }

    pub fn int(v: i64) -> Self {
        if v < 0 {
            Expr::neg(Expr::new(ExprKind::Lit(Literal::Int(v.unsigned_abs().to_string()))))
        } else {
            Expr::new(ExprKind::Lit(Literal::Int(v.to_string())))
        }
    }

    /// A real literal for a finite `f64`; negative values become a negation.
    pub fn real(v: f64) -> Self {
        let lit = Expr::new(ExprKind::Lit(Literal::Real(real_text(v.abs()))));
        if v.is_sign_negative() && v != 0.0 {
            Expr::neg(lit)
        } else {
            lit
        }
    }

    pub fn real_text(text: &str) -> Self {
        Expr::new(ExprKind::Lit(Literal::Real(text.to_string())))
    }

    pub fn bool(b: bool) -> Self {
        Expr::new(ExprKind::Lit(Literal::Bool(b)))
    }

    pub fn string(s: &str) -> Self {
        Expr::new(ExprKind::Lit(Literal::Str(s.to_string())))
    }

    pub fn neg(e: Expr) -> Self {
        Expr::new(ExprKind::Neg(Box::new(e)))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::new(ExprKind::Bin(op, Box::new(a), Box::new(b)))
    }

    pub fn call(name: &str, args: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Call { name: name.to_string(), args, site: None })
    }

    /// Visit this expression and all sub-expressions, pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Lit(_) | ExprKind::Var(_) => {}
            ExprKind::Neg(e) => e.walk(f),
            ExprKind::Bin(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            ExprKind::Call { args, .. } => {
                for a in args {
                    a.walk(f);
                }
            }
        }
    }
}

/// Decimal text for a finite non-negative `f64` that parses back to the same
/// value and always contains a decimal point.
pub fn real_text(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl RelOp {
    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "==",
            RelOp::Ne => "!=",
            RelOp::Lt => "<",
            RelOp::Gt => ">",
            RelOp::Le => "<=",
            RelOp::Ge => ">=",
        }
    }

    pub fn negate(self) -> RelOp {
        match self {
            RelOp::Eq => RelOp::Ne,
            RelOp::Ne => RelOp::Eq,
            RelOp::Lt => RelOp::Ge,
            RelOp::Gt => RelOp::Le,
            RelOp::Le => RelOp::Gt,
            RelOp::Ge => RelOp::Lt,
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, RelOp::Eq | RelOp::Ne)
    }
}

pub type Binder = (String, BaseType);

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    Const(bool),
    Rel(RelOp, Expr, Expr),
    /// A bool-valued call used as an atom.
    Pred(String, Vec<Expr>),
    /// A bool-typed variable used as an atom.
    BoolVar(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Forall(Vec<Binder>, Box<Formula>),
    Exists(Vec<Binder>, Box<Formula>),
}

impl Formula {
    pub fn rel(op: RelOp, a: Expr, b: Expr) -> Self {
        Formula::Rel(op, a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn forall(binders: Vec<Binder>, body: Formula) -> Self {
        if binders.is_empty() {
            body
        } else {
            Formula::Forall(binders, Box::new(body))
        }
    }

    /// Conjunction of a list; `true` when empty.
    pub fn conj(fs: impl IntoIterator<Item = Formula>) -> Self {
        let mut it = fs.into_iter();
        match it.next() {
            None => Formula::Const(true),
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// `a ==> b` with trivial cases folded away.
    pub fn implies_simpl(a: Formula, b: Formula) -> Self {
        match (&a, &b) {
            (Formula::Const(true), _) => b,
            (_, Formula::Const(true)) => Formula::Const(true),
            (Formula::Const(false), _) => Formula::Const(true),
            _ => Formula::implies(a, b),
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Const(_) | Formula::Rel(..) | Formula::Pred(..) | Formula::BoolVar(_) => true,
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            Formula::Forall(..) | Formula::Exists(..) => false,
        }
    }

    /// Visit every expression occurring in atoms (not under binders'
    /// distinction; bound variables are visited too).
    pub fn walk_exprs<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        match self {
            Formula::Const(_) | Formula::BoolVar(_) => {}
            Formula::Rel(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Formula::Pred(_, args) => {
                for a in args {
                    a.walk(f);
                }
            }
            Formula::Not(g) => g.walk_exprs(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.walk_exprs(f);
                b.walk_exprs(f);
            }
            Formula::Forall(_, g) | Formula::Exists(_, g) => g.walk_exprs(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    VarDecl { name: String, ty: BaseType, init: Expr },
    Assign { name: String, value: Expr },
    /// A call evaluated for its effect; the expression is always a call.
    Call(Expr),
    If { cond: Formula, then_branch: Vec<Stmt>, else_branch: Option<Vec<Stmt>> },
    While { cond: Formula, invariants: Vec<Formula>, decreases: Option<Expr>, body: Vec<Stmt> },
    /// Ghost assertion: checked statically, not evaluated at run time.
    Assert(Formula),
    Return(Expr),
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, span: Span::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DeclKind {
    Function,
    Method,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: BaseType,
}

impl Param {
    pub fn new(name: &str, ty: BaseType) -> Self {
        Param { name: name.to_string(), ty }
    }
}

/// Name of the implicit result variable in postconditions.
pub const RESULT: &str = "result";

#[derive(Clone, Debug, PartialEq)]
pub struct Decl {
    pub kind: DeclKind,
    pub name: String,
    pub params: Vec<Param>,
    /// Explicit name of the returned value (`returns (r: real)`); `None`
    /// means the canonical [`RESULT`].
    pub result_name: Option<String>,
    pub ret: BaseType,
    pub requires: Vec<Formula>,
    pub ensures: Vec<Formula>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

impl Decl {
    pub fn result_var(&self) -> &str {
        self.result_name.as_deref().unwrap_or(RESULT)
    }

    pub fn precondition(&self) -> Formula {
        Formula::conj(self.requires.iter().cloned())
    }

    pub fn postcondition(&self) -> Formula {
        Formula::conj(self.ensures.iter().cloned())
    }

    pub fn param_types(&self) -> Vec<BaseType> {
        self.params.iter().map(|p| p.ty).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Program {
    pub decls: Vec<Decl>,
}

/// Name of the preferred entry point.
pub const ENTRY: &str = "agent";

impl Program {
    /// The declaration named `agent`, otherwise the last declaration.
    pub fn entry(&self) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == ENTRY).or_else(|| self.decls.last())
    }

    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }
}

/// Visit every statement in a block, recursively, pre-order.
pub fn walk_stmts<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in stmts {
        f(s);
        match &s.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                walk_stmts(then_branch, f);
                if let Some(e) = else_branch {
                    walk_stmts(e, f);
                }
            }
            StmtKind::While { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}

/// Visit every expression evaluated by a block (conditions and ghost
/// formulas included), pre-order in source order.
pub fn walk_block_exprs<'a>(stmts: &'a [Stmt], f: &mut impl FnMut(&'a Expr)) {
    for s in stmts {
        match &s.kind {
            StmtKind::VarDecl { init: e, .. }
            | StmtKind::Assign { value: e, .. }
            | StmtKind::Call(e)
            | StmtKind::Return(e) => e.walk(f),
            StmtKind::If { cond, then_branch, else_branch } => {
                cond.walk_exprs(f);
                walk_block_exprs(then_branch, f);
                if let Some(e) = else_branch {
                    walk_block_exprs(e, f);
                }
            }
            StmtKind::While { cond, invariants, decreases, body } => {
                cond.walk_exprs(f);
                for i in invariants {
                    i.walk_exprs(f);
                }
                if let Some(d) = decreases {
                    d.walk(f);
                }
                walk_block_exprs(body, f);
            }
            StmtKind::Assert(g) => g.walk_exprs(f),
        }
    }
}
