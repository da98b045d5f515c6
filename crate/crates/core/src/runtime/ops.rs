//! Primitive operations on runtime values, shared by the interpreter and the
//! concrete formula evaluator.

use super::error::RuntimeFault;
use super::value::Value;
use crate::lang::ast::{BinOp, Literal, RelOp};
use crate::scalar::Scalar;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::cmp::Ordering;

pub fn literal<S: Scalar>(l: &Literal) -> Result<Value<S>, RuntimeFault> {
    Ok(match l {
        Literal::Bool(b) => Value::Bool(*b),
        Literal::Int(s) => Value::Int(s.parse::<BigInt>().map_err(|e| RuntimeFault::TypeMismatch(e.to_string()))?),
        Literal::Real(s) => {
            let v: f64 = s.parse().map_err(|_| RuntimeFault::TypeMismatch(format!("bad real literal `{s}`")))?;
            Value::real(S::lit(v))?
        }
        Literal::Str(s) => Value::Str(s.clone()),
    })
}

pub fn neg<S: Scalar>(v: Value<S>) -> Result<Value<S>, RuntimeFault> {
    match v {
        Value::Int(i) => Ok(Value::Int(-i)),
        Value::Real(r) => Value::real(-r),
        other => Err(RuntimeFault::TypeMismatch(format!("cannot negate {}", other.base_type()))),
    }
}

/// Euclidean division and modulus-free integer arithmetic; real arithmetic
/// must stay finite.
pub fn binary<S: Scalar>(op: BinOp, a: Value<S>, b: Value<S>) -> Result<Value<S>, RuntimeFault> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(Value::Int(match op {
            BinOp::Add => x + y,
            BinOp::Sub => x - y,
            BinOp::Mul => x * y,
            BinOp::Div => {
                if y.is_zero() {
                    return Err(RuntimeFault::DivisionByZero);
                }
                euclid_div(&x, &y)
            }
        })),
        (a, b) => {
            let x = a.as_real()?;
            let y = b.as_real()?;
            let r = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y.is_zero() {
                        return Err(RuntimeFault::DivisionByZero);
                    }
                    x / y
                }
            };
            Value::real(r)
        }
    }
}

/// Quotient rounded so that the remainder is non-negative (SMT-LIB `div`).
pub fn euclid_div(x: &BigInt, y: &BigInt) -> BigInt {
    let q = x / y;
    let r = x - &q * y;
    if r.is_negative() {
        if y.is_positive() {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

pub fn compare<S: Scalar>(op: RelOp, a: &Value<S>, b: &Value<S>) -> Result<bool, RuntimeFault> {
    let ord: Option<Ordering> = match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => {
            if op.is_ordering() {
                return Err(RuntimeFault::TypeMismatch("ordering on bool".into()));
            }
            Some(x.cmp(y))
        }
        (Value::Str(x), Value::Str(y)) => {
            if op.is_ordering() {
                return Err(RuntimeFault::TypeMismatch("ordering on string".into()));
            }
            Some(x.cmp(y))
        }
        (x, y) => {
            let (p, q) = (x.as_real()?, y.as_real()?);
            p.partial_cmp(&q)
        }
    };
    let Some(ord) = ord else {
        return Err(RuntimeFault::NonFinite("comparison with NaN".into()));
    };
    Ok(match op {
        RelOp::Eq => ord == Ordering::Equal,
        RelOp::Ne => ord != Ordering::Equal,
        RelOp::Lt => ord == Ordering::Less,
        RelOp::Gt => ord == Ordering::Greater,
        RelOp::Le => ord != Ordering::Greater,
        RelOp::Ge => ord != Ordering::Less,
    })
}
