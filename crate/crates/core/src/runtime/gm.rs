//! Generative models: the unconstrained samplers wrapped by guarded calls.

use super::error::RuntimeFault;
use super::rng::Rng;
use super::value::Value;
use crate::lang::ast::BaseType;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Input/output types of a model and its number of trainable parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GmSignature {
    pub inputs: Vec<BaseType>,
    pub output: BaseType,
    pub param_dim: usize,
}

pub trait GenerativeModel<S: Scalar>: Send + Sync {
    fn signature(&self) -> GmSignature;

    /// Draw one proposal for the given input.
    fn propose(&self, input: &[Value<S>], rng: &mut Rng) -> Result<Value<S>, RuntimeFault>;

    /// Noise-free prediction, when the model has one.
    fn mean(&self, _input: &[Value<S>]) -> Option<Result<Value<S>, RuntimeFault>> {
        None
    }
}

/// One-hidden-layer tanh network with Gaussian output noise:
/// `y = w2 · tanh(W1 x + b1) + b2 + exp(log σ) · ε`, `ε ~ N(0, 1)`.
///
/// Parameter layout: `W1` (row-major, hidden × inputs), `b1`, `w2`, `b2`,
/// `log σ`.
#[derive(Clone, Debug)]
pub struct MlpGm<S> {
    pub inputs: usize,
    pub hidden: usize,
    pub theta: Vec<S>,
}

pub const DEFAULT_HIDDEN: usize = 8;
pub const DEFAULT_LOG_SIGMA: f64 = -2.302_585_092_994_046; // ln 0.1

pub fn mlp_dim(inputs: usize, hidden: usize) -> usize {
    hidden * inputs + 2 * hidden + 2
}

impl<S: Scalar> MlpGm<S> {
    pub fn new(inputs: usize, hidden: usize, theta: Vec<S>) -> Result<Self, RuntimeFault> {
        if theta.len() != mlp_dim(inputs, hidden) {
            return Err(RuntimeFault::Model(format!(
                "expected {} parameters, got {}",
                mlp_dim(inputs, hidden),
                theta.len()
            )));
        }
        Ok(MlpGm { inputs, hidden, theta })
    }

    fn forward(&self, input: &[Value<S>]) -> Result<S, RuntimeFault> {
        if input.len() != self.inputs {
            return Err(RuntimeFault::Model(format!("expected {} inputs, got {}", self.inputs, input.len())));
        }
        let xs = input.iter().map(|v| v.as_real()).collect::<Result<Vec<S>, _>>()?;
        let (n, h) = (self.inputs, self.hidden);
        let w1 = &self.theta[..h * n];
        let b1 = &self.theta[h * n..h * n + h];
        let w2 = &self.theta[h * n + h..h * n + 2 * h];
        let b2 = self.theta[h * n + 2 * h];
        let mut out = b2;
        for j in 0..h {
            let mut a = b1[j];
            for i in 0..n {
                a = a + w1[j * n + i] * xs[i];
            }
            out = out + w2[j] * a.tanh();
        }
        Ok(out)
    }

    pub fn log_sigma(&self) -> S {
        *self.theta.last().unwrap()
    }
}

impl<S: Scalar> GenerativeModel<S> for MlpGm<S> {
    fn signature(&self) -> GmSignature {
        GmSignature { inputs: vec![BaseType::Real; self.inputs], output: BaseType::Real, param_dim: self.theta.len() }
    }

    fn propose(&self, input: &[Value<S>], rng: &mut Rng) -> Result<Value<S>, RuntimeFault> {
        let m = self.forward(input)?;
        let eps = S::lit(rng.normal());
        Value::real(m + self.log_sigma().exp() * eps)
    }

    fn mean(&self, input: &[Value<S>]) -> Option<Result<Value<S>, RuntimeFault>> {
        Some(self.forward(input).and_then(Value::real))
    }
}

/// Kinds of models a registry can build.
#[derive(Clone, Debug, PartialEq)]
pub enum GmKind {
    Mlp { inputs: usize, hidden: usize },
    /// Remote model reached over HTTP; not trainable here.
    Http { endpoint: String, inputs: Vec<BaseType>, output: BaseType, timeout_ms: u64 },
}

/// Named model constructors.
#[derive(Clone, Debug, Default)]
pub struct GmRegistry {
    kinds: BTreeMap<String, GmKind>,
}

impl GmRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `neural1`, `neural2`, `neural3` networks taking 1–3 real inputs.
    pub fn with_neural() -> Self {
        let mut r = GmRegistry::new();
        for k in 1..=3 {
            r.register(&format!("neural{k}"), GmKind::Mlp { inputs: k, hidden: DEFAULT_HIDDEN });
        }
        r
    }

    pub fn register(&mut self, id: &str, kind: GmKind) {
        self.kinds.insert(id.to_string(), kind);
    }

    pub fn get(&self, id: &str) -> Option<&GmKind> {
        self.kinds.get(id)
    }

    pub fn signatures(&self) -> BTreeMap<String, GmSignature> {
        self.kinds.iter().map(|(k, v)| (k.clone(), kind_signature(v))).collect()
    }

    pub fn param_dim(&self, id: &str) -> usize {
        self.kinds.get(id).map(|k| kind_signature(k).param_dim).unwrap_or(0)
    }

    /// Initial parameters: small uniform hidden-layer weights, a zero
    /// output layer, `log σ = ln 0.1`.
    ///
    /// Starting from a zero output keeps the first Adam steps from moving
    /// the output by the sum of every weight's step, which otherwise makes
    /// short tuning runs oscillate.
    pub fn initial_params(&self, id: &str, rng: &mut Rng) -> Vec<f64> {
        let dim = self.param_dim(id);
        if dim == 0 {
            return Vec::new();
        }
        let mut t: Vec<f64> = (0..dim).map(|_| rng.uniform(-0.1, 0.1)).collect();
        if let Some(GmKind::Mlp { hidden, .. }) = self.kinds.get(id) {
            t[dim - 2 - hidden..dim - 1].fill(0.0);
        }
        t[dim - 1] = DEFAULT_LOG_SIGMA;
        t
    }

    /// Random parameters for fuzzing: weights in `[-2, 2]`, `σ ∈ [0.01, 1]`.
    pub fn random_params(&self, id: &str, rng: &mut Rng) -> Vec<f64> {
        let dim = self.param_dim(id);
        if dim == 0 {
            return Vec::new();
        }
        let mut t: Vec<f64> = (0..dim).map(|_| rng.uniform(-2.0, 2.0)).collect();
        t[dim - 1] = rng.uniform(0.01f64.ln(), 0.0);
        t
    }

    pub fn instantiate<S: Scalar>(&self, id: &str, theta: &[S]) -> Result<Box<dyn GenerativeModel<S>>, RuntimeFault> {
        match self.kinds.get(id) {
            Some(GmKind::Mlp { inputs, hidden }) => Ok(Box::new(MlpGm::new(*inputs, *hidden, theta.to_vec())?)),
            #[cfg(feature = "http")]
            Some(GmKind::Http { endpoint, inputs, output, timeout_ms }) => Ok(Box::new(super::http::HttpGm::new(
                endpoint,
                inputs.clone(),
                *output,
                std::time::Duration::from_millis(*timeout_ms),
            ))),
            #[cfg(not(feature = "http"))]
            Some(GmKind::Http { .. }) => Err(RuntimeFault::Model("built without HTTP support".into())),
            None => Err(RuntimeFault::Model(format!("unknown generative model `{id}`"))),
        }
    }
}

fn kind_signature(k: &GmKind) -> GmSignature {
    match k {
        GmKind::Mlp { inputs, hidden } => GmSignature {
            inputs: vec![BaseType::Real; *inputs],
            output: BaseType::Real,
            param_dim: mlp_dim(*inputs, *hidden),
        },
        GmKind::Http { inputs, output, .. } => GmSignature { inputs: inputs.clone(), output: *output, param_dim: 0 },
    }
}

/// Deterministic test models.
pub mod zoo {
    use super::*;

    /// Always proposes the same value.
    pub struct Constant<S> {
        pub inputs: Vec<BaseType>,
        pub value: Value<S>,
    }

    impl<S: Scalar> GenerativeModel<S> for Constant<S> {
        fn signature(&self) -> GmSignature {
            GmSignature { inputs: self.inputs.clone(), output: self.value.base_type(), param_dim: 0 }
        }
        fn propose(&self, _: &[Value<S>], _: &mut Rng) -> Result<Value<S>, RuntimeFault> {
            Ok(self.value.clone())
        }
    }

    /// Proposes a value computed from the input.
    pub struct FromInput<S> {
        pub inputs: Vec<BaseType>,
        pub output: BaseType,
        pub f: fn(&[Value<S>]) -> Value<S>,
    }

    impl<S: Scalar> GenerativeModel<S> for FromInput<S> {
        fn signature(&self) -> GmSignature {
            GmSignature { inputs: self.inputs.clone(), output: self.output, param_dim: 0 }
        }
        fn propose(&self, input: &[Value<S>], _: &mut Rng) -> Result<Value<S>, RuntimeFault> {
            Ok((self.f)(input))
        }
    }

    /// Cycles through a fixed list of proposals, one per call.
    pub struct Sequence<S> {
        pub inputs: Vec<BaseType>,
        pub values: Vec<Value<S>>,
        next: std::sync::atomic::AtomicUsize,
    }

    impl<S> Sequence<S> {
        pub fn new(inputs: Vec<BaseType>, values: Vec<Value<S>>) -> Self {
            assert!(!values.is_empty());
            Sequence { inputs, values, next: std::sync::atomic::AtomicUsize::new(0) }
        }
    }

    impl<S: Scalar> GenerativeModel<S> for Sequence<S> {
        fn signature(&self) -> GmSignature {
            GmSignature { inputs: self.inputs.clone(), output: self.values[0].base_type(), param_dim: 0 }
        }
        fn propose(&self, _: &[Value<S>], _: &mut Rng) -> Result<Value<S>, RuntimeFault> {
            let i = self.next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(self.values[i % self.values.len()].clone())
        }
    }

    /// Uniform real proposals in `[lo, hi)`.
    pub struct UniformReal {
        pub inputs: Vec<BaseType>,
        pub lo: f64,
        pub hi: f64,
    }

    impl<S: Scalar> GenerativeModel<S> for UniformReal {
        fn signature(&self) -> GmSignature {
            GmSignature { inputs: self.inputs.clone(), output: BaseType::Real, param_dim: 0 }
        }
        fn propose(&self, _: &[Value<S>], rng: &mut Rng) -> Result<Value<S>, RuntimeFault> {
            Value::real(S::lit(rng.uniform(self.lo, self.hi)))
        }
    }

    /// Always fails, as an unreachable remote model would.
    pub struct Failing {
        pub inputs: Vec<BaseType>,
        pub output: BaseType,
    }

    impl<S: Scalar> GenerativeModel<S> for Failing {
        fn signature(&self) -> GmSignature {
            GmSignature { inputs: self.inputs.clone(), output: self.output, param_dim: 0 }
        }
        fn propose(&self, _: &[Value<S>], _: &mut Rng) -> Result<Value<S>, RuntimeFault> {
            Err(RuntimeFault::Model("model unavailable".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mlp_dimension_and_mean() {
        let reg = GmRegistry::with_neural();
        assert_eq!(reg.param_dim("neural2"), 8 * 2 + 16 + 2);
        let mut theta = vec![0.0f64; reg.param_dim("neural1")];
        let n = theta.len();
        theta[n - 2] = 1.25; // output bias
        let gm = reg.instantiate::<f64>("neural1", &theta).unwrap();
        let m = gm.mean(&[Value::Real(3.0)]).unwrap().unwrap();
        assert_eq!(m, Value::Real(1.25));
    }

    #[test]
    fn initial_params_are_small() {
        let reg = GmRegistry::with_neural();
        let t = reg.initial_params("neural2", &mut Rng::new(3));
        assert!(t[..t.len() - 1].iter().all(|v| v.abs() <= 0.1));
        assert!(t[..3 * DEFAULT_HIDDEN].iter().all(|&v| v != 0.0 && v.abs() <= 0.1));
        // Output layer w2, b2 starts at zero, so the initial mean is 0.
        assert!(t[t.len() - 2 - DEFAULT_HIDDEN..t.len() - 1].iter().all(|&v| v == 0.0));
        assert_eq!(*t.last().unwrap(), DEFAULT_LOG_SIGMA);
        let gm = reg.instantiate::<f64>("neural2", &t).unwrap();
        assert_eq!(gm.mean(&[Value::Real(1.0), Value::Real(2.0)]).unwrap().unwrap(), Value::Real(0.0));
    }
}
