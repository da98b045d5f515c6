//! Remote generative model: `POST {"prompt": string}` → `{"output": string}`.

use super::error::RuntimeFault;
use super::gm::{GenerativeModel, GmSignature};
use super::rng::Rng;
use super::value::Value;
use crate::lang::ast::BaseType;
use crate::scalar::Scalar;
use num_bigint::BigInt;
use std::time::Duration;

/// Longest string accepted from a remote model; longer outputs are cut.
pub const DEFAULT_MAX_OUTPUT_LEN: usize = 4096;

pub struct HttpGm {
    pub endpoint: String,
    pub inputs: Vec<BaseType>,
    pub output: BaseType,
    pub max_output_len: usize,
    agent: ureq::Agent,
}

impl HttpGm {
    pub fn new(endpoint: &str, inputs: Vec<BaseType>, output: BaseType, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpGm { endpoint: endpoint.to_string(), inputs, output, max_output_len: DEFAULT_MAX_OUTPUT_LEN, agent }
    }
}

/// Render a model input as the prompt string.
pub fn prompt_text<S: Scalar>(input: &[Value<S>]) -> String {
    match input {
        [Value::Str(s)] => s.clone(),
        [v] => v.to_string(),
        vs => serde_json::Value::Array(vs.iter().map(Value::to_json).collect()).to_string(),
    }
}

/// Interpret a model's output string at the given type.
pub fn parse_output<S: Scalar>(text: &str, ty: BaseType, max_len: usize) -> Result<Value<S>, RuntimeFault> {
    let bad = || RuntimeFault::Model(format!("cannot read {ty} from model output {text:?}"));
    match ty {
        BaseType::String => Ok(Value::Str(text.chars().take(max_len).collect())),
        BaseType::Real => Value::real(S::lit(text.trim().parse::<f64>().map_err(|_| bad())?)),
        BaseType::Int => Ok(Value::Int(text.trim().parse::<BigInt>().map_err(|_| bad())?)),
        BaseType::Bool => match text.trim() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(bad()),
        },
    }
}

impl<S: Scalar> GenerativeModel<S> for HttpGm {
    fn signature(&self) -> GmSignature {
        GmSignature { inputs: self.inputs.clone(), output: self.output, param_dim: 0 }
    }

    fn propose(&self, input: &[Value<S>], _rng: &mut Rng) -> Result<Value<S>, RuntimeFault> {
        let body = serde_json::json!({ "prompt": prompt_text(input) });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| RuntimeFault::Model(format!("request to {} failed: {e}", self.endpoint)))?;
        let v: serde_json::Value =
            resp.body_mut().read_json().map_err(|e| RuntimeFault::Model(format!("malformed response: {e}")))?;
        let out = v
            .get("output")
            .and_then(|o| o.as_str())
            .ok_or_else(|| RuntimeFault::Model("response lacks a string `output` field".into()))?;
        parse_output(out, self.output, self.max_output_len)
    }
}
