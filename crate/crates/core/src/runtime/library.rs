//! Executable library: signatures plus native implementations.

use super::error::RuntimeFault;
use super::value::{Valuation, Value};
use crate::lang::sig::SignatureTable;
use crate::scalar::Scalar;
use std::collections::BTreeMap;

pub type NativeFn<S> = fn(&[Value<S>]) -> Result<Value<S>, RuntimeFault>;

/// Signatures (with contracts) and native implementations of the
/// deterministic library functions available to programs.
#[derive(Clone)]
pub struct Library<S> {
    pub sigs: SignatureTable,
    natives: BTreeMap<String, NativeFn<S>>,
}

impl<S> std::fmt::Debug for Library<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Library").field("functions", &self.natives.keys().collect::<Vec<_>>()).finish()
    }
}

impl<S: Scalar> Library<S> {
    pub fn new(sigs: SignatureTable) -> Self {
        Library { sigs, natives: BTreeMap::new() }
    }

    pub fn with_native(mut self, name: &str, f: NativeFn<S>) -> Self {
        self.natives.insert(name.to_string(), f);
        self
    }

    pub fn has_native(&self, name: &str) -> bool {
        self.natives.contains_key(name)
    }

    /// Call a library function after checking its precondition.
    pub fn call(&self, name: &str, args: &[Value<S>]) -> Result<Value<S>, RuntimeFault> {
        let f = self.natives.get(name).ok_or_else(|| RuntimeFault::UnknownFunction(name.to_string()))?;
        if let Some(sig) = self.sigs.get(name) {
            if sig.requires != crate::lang::Formula::Const(true) {
                let mut env: Valuation<S> = Valuation::new();
                for (p, a) in sig.params.iter().zip(args) {
                    env.insert(p.name.clone(), a.clone());
                }
                let ok = crate::logic::eval::eval_qf(&sig.requires, &env, self)
                    .map_err(|_| RuntimeFault::PreconditionViolated(name.to_string()))?;
                if !ok {
                    return Err(RuntimeFault::PreconditionViolated(name.to_string()));
                }
            }
        }
        f(args)
    }
}
