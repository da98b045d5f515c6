//! Scalar abstraction shared by the interpreter, the generative models and
//! the optimiser.
//!
//! Everything numeric in the runtime is generic over [`Scalar`], which is
//! `num_traits::Float` plus a few conveniences. `f32` and `f64` implement it
//! directly; [`crate::autodiff::Var`] implements it with a reverse-mode tape so
//! that running a program over `Var` yields exact gradients with respect to
//! the generative-model parameters.

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};

pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lift an `f64` constant into the scalar type.
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::nan)
    }

    /// Lossy projection to `f64` (the value component for tape scalars).
    fn value(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{}

/// Numerically stable logistic function.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lit_and_value_round_trip() {
        assert_eq!(<f64 as Scalar>::lit(1.25).value(), 1.25);
        assert_eq!(<f32 as Scalar>::lit(0.5).value(), 0.5);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for &x in &[-30.0, -2.0, 0.0, 0.3, 5.0, 40.0] {
            let a: f64 = sigmoid(x);
            let b: f64 = sigmoid(-x);
            assert!((a + b - 1.0).abs() < 1e-12);
        }
        assert_eq!(sigmoid(0.0f64), 0.5);
    }
}
