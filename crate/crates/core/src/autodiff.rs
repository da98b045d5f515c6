//! Reverse-mode automatic differentiation over a thread-local tape.
//!
//! [`Var`] is a `Copy` pair of (value, tape index). Constants carry no tape
//! entry. Every arithmetic operation on tracked values appends a node holding
//! the local partial derivatives with respect to at most two parents, and
//! [`Tape::gradient`] performs the reverse sweep.
//!
//! The tape is per thread: gradients must be computed on the thread that built
//! the expression. Start a fresh recording with [`Tape::reset`].

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    parents: [(u32, f64); 2],
}

thread_local! {
    static TAPE: RefCell<Vec<Node>> = const { RefCell::new(Vec::new()) };
}

/// Handle on the calling thread's tape.
pub struct Tape;

impl Tape {
    /// Discard every recorded node. Existing tracked `Var`s become invalid.
    pub fn reset() {
        TAPE.with(|t| t.borrow_mut().clear());
    }

    /// Number of recorded nodes.
    pub fn len() -> usize {
        TAPE.with(|t| t.borrow().len())
    }

    /// A new independent variable.
    pub fn leaf(value: f64) -> Var {
        let idx = push([(NONE, 0.0), (NONE, 0.0)]);
        Var { val: value, idx }
    }

    /// Gradient of `output` with respect to `wrt`.
    pub fn gradient(output: Var, wrt: &[Var]) -> Vec<f64> {
        if output.idx == NONE {
            return vec![0.0; wrt.len()];
        }
        TAPE.with(|t| {
            let tape = t.borrow();
            let n = output.idx as usize + 1;
            let mut adj = vec![0.0f64; n];
            adj[n - 1] = 1.0;
            for i in (0..n).rev() {
                let a = adj[i];
                if a == 0.0 {
                    continue;
                }
                for &(p, d) in &tape[i].parents {
                    if p != NONE {
                        adj[p as usize] += a * d;
                    }
                }
            }
            wrt.iter()
                .map(|v| if v.idx == NONE || v.idx as usize >= n { 0.0 } else { adj[v.idx as usize] })
                .collect()
        })
    }
}

fn push(parents: [(u32, f64); 2]) -> u32 {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let idx = t.len();
        assert!(idx < NONE as usize, "autodiff tape overflow");
        t.push(Node { parents });
        idx as u32
    })
}

/// A scalar that records its computation history on the thread-local tape.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    val: f64,
    idx: u32,
}

impl Var {
    pub fn constant(val: f64) -> Self {
        Var { val, idx: NONE }
    }

    pub fn val(&self) -> f64 {
        self.val
    }

    pub fn is_tracked(&self) -> bool {
        self.idx != NONE
    }

    fn unary(self, val: f64, d: f64) -> Var {
        if self.idx == NONE {
            return Var::constant(val);
        }
        Var { val, idx: push([(self.idx, d), (NONE, 0.0)]) }
    }

    fn binary(self, other: Var, val: f64, da: f64, db: f64) -> Var {
        if self.idx == NONE && other.idx == NONE {
            return Var::constant(val);
        }
        Var { val, idx: push([(self.idx, da), (other.idx, db)]) }
    }
}

impl Default for Var {
    fn default() -> Self {
        Var::constant(0.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.val, f)
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.val == other.val
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.val.partial_cmp(&other.val)
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, o: Var) -> Var {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, o: Var) -> Var {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, o: Var) -> Var {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, o: Var) -> Var {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl Rem for Var {
    type Output = Var;
    fn rem(self, o: Var) -> Var {
        // d/da (a % b) = 1, d/db = -trunc(a / b)
        self.binary(o, self.val % o.val, 1.0, -(self.val / o.val).trunc())
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        self.unary(-self.val, -1.0)
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for Var {
            fn $m(&mut self, o: Var) {
                *self = *self $op o;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);
assign_op!(RemAssign, rem_assign, %);

impl Zero for Var {
    fn zero() -> Self {
        Var::constant(0.0)
    }
    fn is_zero(&self) -> bool {
        self.val == 0.0
    }
}

impl One for Var {
    fn one() -> Self {
        Var::constant(1.0)
    }
}

impl Num for Var {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Var::constant)
    }
}

impl ToPrimitive for Var {
    fn to_i64(&self) -> Option<i64> {
        self.val.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.val.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.val)
    }
}

impl NumCast for Var {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        n.to_f64().map(Var::constant)
    }
}

impl FromPrimitive for Var {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Var::constant(n as f64))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Var::constant(n as f64))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Var::constant(n))
    }
}

impl Float for Var {
    fn nan() -> Self {
        Var::constant(f64::NAN)
    }
    fn infinity() -> Self {
        Var::constant(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Var::constant(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Var::constant(-0.0)
    }
    fn min_value() -> Self {
        Var::constant(f64::MIN)
    }
    fn min_positive_value() -> Self {
        Var::constant(f64::MIN_POSITIVE)
    }
    fn max_value() -> Self {
        Var::constant(f64::MAX)
    }
    fn epsilon() -> Self {
        Var::constant(f64::EPSILON)
    }
    fn is_nan(self) -> bool {
        self.val.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.val.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.val.is_finite()
    }
    fn is_normal(self) -> bool {
        self.val.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.val.classify()
    }
    // Piecewise-constant functions have zero derivative almost everywhere.
    fn floor(self) -> Self {
        self.unary(self.val.floor(), 0.0)
    }
    fn ceil(self) -> Self {
        self.unary(self.val.ceil(), 0.0)
    }
    fn round(self) -> Self {
        self.unary(self.val.round(), 0.0)
    }
    fn trunc(self) -> Self {
        self.unary(self.val.trunc(), 0.0)
    }
    fn fract(self) -> Self {
        self.unary(self.val.fract(), 1.0)
    }
    fn abs(self) -> Self {
        let d = if self.val < 0.0 { -1.0 } else { 1.0 };
        self.unary(self.val.abs(), d)
    }
    fn signum(self) -> Self {
        self.unary(self.val.signum(), 0.0)
    }
    fn is_sign_positive(self) -> bool {
        self.val.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.val.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Var::one() / self
    }
    fn powi(self, n: i32) -> Self {
        let v = self.val.powi(n);
        self.unary(v, n as f64 * self.val.powi(n - 1))
    }
    fn powf(self, e: Self) -> Self {
        let v = self.val.powf(e.val);
        let da = if e.val == 0.0 { 0.0 } else { e.val * self.val.powf(e.val - 1.0) };
        let db = if self.val > 0.0 { v * self.val.ln() } else { 0.0 };
        self.binary(e, v, da, db)
    }
    fn sqrt(self) -> Self {
        let v = self.val.sqrt();
        self.unary(v, 0.5 / v)
    }
    fn exp(self) -> Self {
        let v = self.val.exp();
        self.unary(v, v)
    }
    fn exp2(self) -> Self {
        let v = self.val.exp2();
        self.unary(v, v * std::f64::consts::LN_2)
    }
    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        self.unary(self.val.log2(), 1.0 / (self.val * std::f64::consts::LN_2))
    }
    fn log10(self) -> Self {
        self.unary(self.val.log10(), 1.0 / (self.val * std::f64::consts::LN_10))
    }
    fn max(self, o: Self) -> Self {
        if self.val >= o.val || o.val.is_nan() {
            self
        } else {
            o
        }
    }
    fn min(self, o: Self) -> Self {
        if self.val <= o.val || o.val.is_nan() {
            self
        } else {
            o
        }
    }
    #[allow(deprecated)]
    fn abs_sub(self, o: Self) -> Self {
        if self.val <= o.val {
            Var::zero()
        } else {
            self - o
        }
    }
    fn cbrt(self) -> Self {
        let v = self.val.cbrt();
        self.unary(v, 1.0 / (3.0 * v * v))
    }
    fn hypot(self, o: Self) -> Self {
        (self * self + o * o).sqrt()
    }
    fn sin(self) -> Self {
        self.unary(self.val.sin(), self.val.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.val.cos(), -self.val.sin())
    }
    fn tan(self) -> Self {
        let c = self.val.cos();
        self.unary(self.val.tan(), 1.0 / (c * c))
    }
    fn asin(self) -> Self {
        self.unary(self.val.asin(), 1.0 / (1.0 - self.val * self.val).sqrt())
    }
    fn acos(self) -> Self {
        self.unary(self.val.acos(), -1.0 / (1.0 - self.val * self.val).sqrt())
    }
    fn atan(self) -> Self {
        self.unary(self.val.atan(), 1.0 / (1.0 + self.val * self.val))
    }
    fn atan2(self, o: Self) -> Self {
        let r2 = self.val * self.val + o.val * o.val;
        self.binary(o, self.val.atan2(o.val), o.val / r2, -self.val / r2)
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        self.unary(self.val.exp_m1(), self.val.exp())
    }
    fn ln_1p(self) -> Self {
        self.unary(self.val.ln_1p(), 1.0 / (1.0 + self.val))
    }
    fn sinh(self) -> Self {
        self.unary(self.val.sinh(), self.val.cosh())
    }
    fn cosh(self) -> Self {
        self.unary(self.val.cosh(), self.val.sinh())
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn asinh(self) -> Self {
        self.unary(self.val.asinh(), 1.0 / (self.val * self.val + 1.0).sqrt())
    }
    fn acosh(self) -> Self {
        self.unary(self.val.acosh(), 1.0 / (self.val * self.val - 1.0).sqrt())
    }
    fn atanh(self) -> Self {
        self.unary(self.val.atanh(), 1.0 / (1.0 - self.val * self.val))
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.val.integer_decode()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn elementary_derivatives_match_finite_differences() {
        type F = fn(Var) -> Var;
        type G = fn(f64) -> f64;
        let cases: Vec<(F, G, f64)> = vec![
            (|v| v.sin() * v.cos(), |x| x.sin() * x.cos(), 0.7),
            (|v| v.exp() / (v + Var::one()), |x| x.exp() / (x + 1.0), 0.3),
            (|v| v.ln().tanh(), |x| x.ln().tanh(), 1.7),
            (|v| v.sqrt() - v * v, |x| x.sqrt() - x * x, 2.2),
            (|v| v.powf(Var::constant(0.8)), |x| x.powf(0.8), 1.3),
            (|v| Var::constant(2.0).powf(v), |x| 2f64.powf(x), 0.4),
            (|v| v.powi(3) - v.abs(), |x| x.powi(3) - x.abs(), -0.9),
        ];
        for (f, g, x) in cases {
            Tape::reset();
            let v = Tape::leaf(x);
            let y = f(v);
            assert!((y.val() - g(x)).abs() < 1e-12);
            let grad = Tape::gradient(y, &[v])[0];
            assert!((grad - fd(g, x)).abs() < 1e-6, "grad {grad} vs fd {}", fd(g, x));
        }
    }

    #[test]
    fn constants_are_not_recorded() {
        Tape::reset();
        let a = Var::constant(2.0) * Var::constant(3.0);
        assert!(!a.is_tracked());
        assert_eq!(Tape::len(), 0);
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        Tape::reset();
        let x = Tape::leaf(3.0);
        let y = Tape::leaf(2.0);
        let z = x * y + x * x; // dz/dx = y + 2x = 8, dz/dy = x = 3
        let g = Tape::gradient(z, &[x, y]);
        assert_eq!(g, vec![8.0, 3.0]);
    }
}
