//! Library functions, contracts and axioms for constrained symbolic
//! regression.

use crate::lang::ast::{BaseType, Param};
use crate::lang::parser::parse_type_signature;
use crate::lang::sig::{FnKind, FnSig, SignatureTable};
use crate::lang::{parse_formula, Formula};
use crate::logic::Axiom;
use crate::runtime::error::RuntimeFault;
use crate::runtime::gm::{mlp_dim, GmRegistry, DEFAULT_HIDDEN};
use crate::runtime::library::Library;
use crate::runtime::value::Value;
use crate::scalar::Scalar;

/// `(name, signature, requires, ensures, doc)`; contracts mention the
/// result as `result`.
const SPECS: &[(&str, &str, &[&str], &[&str], &str)] = &[
    ("abs", "(x: real) -> real", &[], &["result >= 0.0", "result == x || result == -x"], "Absolute value."),
    (
        "max",
        "(x: real, y: real) -> real",
        &[],
        &["x <= result && y <= result", "result == x || result == y"],
        "Larger of two reals.",
    ),
    (
        "min",
        "(x: real, y: real) -> real",
        &[],
        &["x >= result && y >= result", "result == x || result == y"],
        "Smaller of two reals.",
    ),
    ("sin", "(x: real) -> real", &[], &["-1.0 <= result && result <= 1.0", "x == 0.0 ==> result == 0.0"], "Sine (radians)."),
    ("cos", "(x: real) -> real", &[], &["-1.0 <= result && result <= 1.0", "x == 0.0 ==> result == 1.0"], "Cosine (radians)."),
    (
        "pi",
        "(x: real) -> real",
        &["x >= 0.0"],
        &["3.14159265358979 * x <= result", "result <= 3.141592653589793 * x"],
        "pi(x) = π·x for x ≥ 0.",
    ),
    (
        "pow",
        "(x: real, d: real) -> real",
        &["x >= 0.0", "x != 0.0 || d >= 0.0"],
        &[
            "result >= 0.0",
            "x > 0.0 ==> result > 0.0",
            "d == 0.0 ==> result == 1.0",
            "x >= 1.0 && d >= 0.0 ==> result >= 1.0",
            "x >= 1.0 && d <= 0.0 ==> result <= 1.0",
            "x <= 1.0 && d >= 0.0 ==> result <= 1.0",
            "x <= 1.0 && d <= 0.0 ==> result >= 1.0",
        ],
        "pow(x, d) = x^d for x ≥ 0.",
    ),
    ("sqrt", "(x: real) -> real", &["x >= 0.0"], &["result >= 0.0", "result * result == x"], "Square root."),
    (
        "exp",
        "(x: real) -> real",
        &[],
        &[
            "result >= 0.0",
            "x <= 0.0 ==> result <= 1.0",
            "x >= 0.0 ==> result >= 1.0",
            "x == 1.0 ==> 2.71 <= result && result <= 2.72",
            "result >= 1.0 + x",
        ],
        "Natural exponential.",
    ),
    (
        "log",
        "(x: real) -> real",
        &["x > 0.0"],
        &["x >= 1.0 ==> result >= 0.0", "x <= 1.0 ==> result <= 0.0", "x == 1.0 ==> result == 0.0"],
        "Natural logarithm.",
    ),
];

const AXIOMS: &[(&str, &str)] = &[
    (
        "interval-multiplication",
        "forall x: real, y: real, xl: real, xu: real, yl: real, yu: real :: \
         xl <= x && x <= xu && yl <= y && y <= yu ==> \
         min(min(xl * yl, xl * yu), min(xu * yl, xu * yu)) <= x * y && \
         x * y <= max(max(xl * yl, xl * yu), max(xu * yl, xu * yu))",
    ),
    (
        "pow-antitone-below-one",
        "forall x: real, d1: real, d2: real :: 0.0 <= x && x <= 1.0 && d1 <= d2 ==> pow(x, d1) >= pow(x, d2)",
    ),
    ("pow-monotone-above-one", "forall x: real, d1: real, d2: real :: x >= 1.0 && d1 <= d2 ==> pow(x, d1) <= pow(x, d2)"),
    ("exp-as-pow", "forall x: real :: exp(x) == pow(exp(1.0), x)"),
    ("log-inverts-exp", "forall x: real :: x > 0.0 ==> (forall r: real :: r == log(x) <==> exp(r) == x)"),
    ("sqrt-as-pow", "forall x: real :: x >= 0.0 ==> sqrt(x) == pow(x, 0.5)"),
];

fn parse_all(fs: &[&str]) -> Formula {
    Formula::conj(fs.iter().map(|f| parse_formula(f).expect("library contract parses")))
}

/// Signatures and contracts of the deterministic functions plus the three
/// small networks.
pub fn signatures() -> SignatureTable {
    let mut t = SignatureTable::new();
    for (name, ty, req, ens, doc) in SPECS {
        let (params, ret) = parse_type_signature(ty).expect("library signature parses");
        let sig = FnSig::new(name, params, ret, FnKind::NonParametric).with_doc(doc);
        t.insert(sig.with_contract(parse_all(req), parse_all(ens)));
    }
    for k in 1..=3usize {
        let params = (1..=k).map(|i| Param::new(&format!("x{i}"), BaseType::Real)).collect();
        let name = format!("neural{k}");
        t.insert(
            FnSig::new(&name, params, BaseType::Real, FnKind::Parametric { dim: mlp_dim(k, DEFAULT_HIDDEN) })
                .with_doc(&format!("Small parametric network ℝ^{k} → ℝ; call only through a guarded model.")),
        );
    }
    t
}

/// The axiom set assumed during verification (in addition to the contract
/// axioms derived from [`signatures`]).
pub fn axioms() -> Vec<Axiom> {
    AXIOMS
        .iter()
        .map(|(n, f)| Axiom::new(n, parse_formula(f).expect("axiom parses")))
        .collect()
}

fn real<S: Scalar>(a: &[Value<S>], i: usize) -> Result<S, RuntimeFault> {
    a.get(i).ok_or_else(|| RuntimeFault::TypeMismatch("missing argument".into()))?.as_real()
}

fn native_pow<S: Scalar>(a: &[Value<S>]) -> Result<Value<S>, RuntimeFault> {
    let (x, d) = (real(a, 0)?, real(a, 1)?);
    // These two cases are stated as axioms (`sqrt-as-pow`, `exp-as-pow`),
    // so they must hold exactly in floating point as well.
    if d == S::lit(0.5) {
        return Value::real(x.sqrt());
    }
    if x == S::one().exp() {
        return Value::real(d.exp());
    }
    if d == S::zero() {
        return Value::real(S::one());
    }
    if x == S::zero() {
        return Value::real(S::zero());
    }
    Value::real(x.powf(d))
}

/// Native implementations over any scalar type.
pub fn library<S: Scalar>() -> Library<S> {
    Library::new(signatures())
        .with_native("abs", |a: &[Value<S>]| Value::real(real(a, 0)?.abs()))
        .with_native("max", |a: &[Value<S>]| {
            let (x, y) = (real(a, 0)?, real(a, 1)?);
            Value::real(if x >= y { x } else { y })
        })
        .with_native("min", |a: &[Value<S>]| {
            let (x, y) = (real(a, 0)?, real(a, 1)?);
            Value::real(if x <= y { x } else { y })
        })
        .with_native("sin", |a: &[Value<S>]| Value::real(real(a, 0)?.sin()))
        .with_native("cos", |a: &[Value<S>]| Value::real(real(a, 0)?.cos()))
        .with_native("pi", |a: &[Value<S>]| Value::real(S::lit(std::f64::consts::PI) * real(a, 0)?))
        .with_native("pow", native_pow)
        .with_native("sqrt", |a: &[Value<S>]| Value::real(real(a, 0)?.sqrt()))
        .with_native("exp", |a: &[Value<S>]| Value::real(real(a, 0)?.exp()))
        .with_native("log", |a: &[Value<S>]| Value::real(real(a, 0)?.ln()))
}

/// Models callable through guarded wrappers: `neural1..3`.
pub fn models() -> GmRegistry {
    GmRegistry::with_neural()
}

/// Human-readable listing for planners.
pub fn documentation() -> String {
    let mut out = String::new();
    for s in signatures().iter() {
        let params: Vec<String> = s.params.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect();
        out.push_str(&format!("{}({}) -> {}", s.name, params.join(", "), s.ret));
        if s.requires != Formula::Const(true) {
            out.push_str(&format!("\n  requires {}", crate::lang::print_formula(&s.requires)));
        }
        if s.ensures != Formula::Const(true) {
            out.push_str(&format!("\n  ensures {}", crate::lang::print_formula(&s.ensures)));
        }
        if !s.doc.is_empty() {
            out.push_str(&format!("\n  // {}", s.doc));
        }
        out.push('\n');
    }
    out
}
