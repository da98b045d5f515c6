use crate::lang::ast::{real_text, BaseType, Expr, Literal};
use crate::scalar::Scalar;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

use super::error::RuntimeFault;

/// A runtime value. Reals are finite scalars; integers are unbounded.
#[derive(Clone, Debug, PartialEq)]
pub enum Value<S> {
    Bool(bool),
    Int(BigInt),
    Real(S),
    Str(String),
}

/// Variable bindings.
pub type Valuation<S> = BTreeMap<String, Value<S>>;

impl<S: Scalar> Value<S> {
    pub fn real(v: S) -> Result<Self, RuntimeFault> {
        if v.is_finite() {
            Ok(Value::Real(v))
        } else {
            Err(RuntimeFault::NonFinite(format!("{v}")))
        }
    }

    pub fn int(v: i64) -> Self {
        Value::Int(BigInt::from(v))
    }

    pub fn base_type(&self) -> BaseType {
        match self {
            Value::Bool(_) => BaseType::Bool,
            Value::Int(_) => BaseType::Int,
            Value::Real(_) => BaseType::Real,
            Value::Str(_) => BaseType::String,
        }
    }

    pub fn as_real(&self) -> Result<S, RuntimeFault> {
        match self {
            Value::Real(v) => Ok(*v),
            Value::Int(i) => Ok(S::lit(i.to_f64().unwrap_or(f64::NAN))),
            other => Err(RuntimeFault::TypeMismatch(format!("expected a real, found {}", other.base_type()))),
        }
    }

    pub fn as_bool(&self) -> Result<bool, RuntimeFault> {
        match self {
            Value::Bool(b) => Ok(*b),
            other => Err(RuntimeFault::TypeMismatch(format!("expected a bool, found {}", other.base_type()))),
        }
    }

    /// Convert to another scalar type (values only; tape history is dropped).
    pub fn cast<T: Scalar>(&self) -> Value<T> {
        match self {
            Value::Bool(b) => Value::Bool(*b),
            Value::Int(i) => Value::Int(i.clone()),
            Value::Real(r) => Value::Real(T::lit(r.value())),
            Value::Str(s) => Value::Str(s.clone()),
        }
    }

    /// Literal expression denoting this value.
    pub fn to_expr(&self) -> Expr {
        match self {
            Value::Bool(b) => Expr::bool(*b),
            Value::Int(i) => {
                let lit = Expr::new(crate::lang::ExprKind::Lit(Literal::Int(i.abs().to_string())));
                if i.is_negative() {
                    Expr::neg(lit)
                } else {
                    lit
                }
            }
            Value::Real(r) => Expr::real(r.value()),
            Value::Str(s) => Expr::string(s),
        }
    }

    /// Default value of a type, used to seed sampling.
    pub fn zero_of(t: BaseType) -> Self {
        match t {
            BaseType::Bool => Value::Bool(false),
            BaseType::Int => Value::Int(BigInt::zero()),
            BaseType::Real => Value::Real(S::zero()),
            BaseType::String => Value::Str(String::new()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Int(i) => match i.to_i64() {
                Some(v) => serde_json::Value::from(v),
                None => serde_json::Value::String(i.to_string()),
            },
            Value::Real(r) => serde_json::Number::from_f64(r.value())
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Str(s) => serde_json::Value::String(s.clone()),
        }
    }

    /// Read a value of the given type from JSON.
    pub fn from_json(v: &serde_json::Value, t: BaseType) -> Option<Self> {
        Some(match t {
            BaseType::Bool => Value::Bool(v.as_bool()?),
            BaseType::Int => match v {
                serde_json::Value::Number(n) => Value::Int(BigInt::from(n.as_i64()?)),
                serde_json::Value::String(s) => Value::Int(s.parse().ok()?),
                _ => return None,
            },
            BaseType::Real => {
                let f = v.as_f64()?;
                if !f.is_finite() {
                    return None;
                }
                Value::Real(S::lit(f))
            }
            BaseType::String => Value::Str(v.as_str()?.to_string()),
        })
    }
}

impl<S: Scalar> fmt::Display for Value<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => {
                let v = r.value();
                if v < 0.0 {
                    write!(f, "-{}", real_text(-v))
                } else {
                    write!(f, "{}", real_text(v))
                }
            }
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// Serializable snapshot of a real-valued binding, for traces and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: serde_json::Value,
}

/// Values of a valuation as JSON, in name order.
pub fn valuation_json<S: Scalar>(v: &Valuation<S>) -> serde_json::Value {
    serde_json::Value::Object(v.iter().map(|(k, x)| (k.clone(), x.to_json())).collect())
}
