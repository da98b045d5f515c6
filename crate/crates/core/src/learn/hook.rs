//! Per-sample rewards for external fine-tuning, serialised as NDJSON.

use super::loss::reward;
use super::tune::{bind_models, Params, Problem, SiteInfo};
use super::LearnError;
use crate::runtime::interp::{contract_check, Agent, RunOptions};
use crate::runtime::rng::Rng;
use crate::runtime::value::Valuation;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RewardRecord {
    pub call_site: String,
    pub prompt: serde_json::Value,
    pub sample: serde_json::Value,
    pub reward: f64,
}

/// One record per proposal drawn while running the agent over the data.
/// A proposal is "final" when it is the value the agent returned.
pub fn reward_records(
    p: &Problem,
    sites: &[SiteInfo],
    params: &Params,
    lambda: f64,
    seed: u64,
) -> Result<Vec<RewardRecord>, LearnError> {
    let mut agent = Agent::new(p.program, p.lib, p.fggms)
        .map_err(|e| LearnError::Type(e[0].to_string()))?
        .with_options(RunOptions { k: p.k, ..RunOptions::default() });
    if let Some(ctx) = p.solver {
        agent = agent.with_solver(ctx);
    }
    let models = bind_models(sites, p.registry, params)?;
    let c: f64 = p.data.iter().map(|e| e.target * e.target).sum();
    if p.data.is_empty() || c == 0.0 {
        return Err(LearnError::DegenerateDataset);
    }
    let root = Rng::new(seed);
    let mut out = Vec::new();
    for (i, ex) in p.data.iter().enumerate() {
        let (y, calls) = agent.run_args(&models, &ex.args, &mut root.derive("point", i as u64))?;
        let loss = (y.as_real()? - ex.target).powi(2) / c;
        for rec in calls {
            let def = &agent.fggms[&rec.fggm].def;
            let env: Valuation<f64> = def.params.iter().map(|q| q.name.clone()).zip(rec.args.iter().cloned()).collect();
            let prompt = serde_json::Value::Array(rec.prompt.iter().map(|v| v.to_json()).collect());
            for s in &rec.samples {
                let ok = contract_check(def, &env, s, p.lib, p.solver);
                out.push(RewardRecord {
                    call_site: rec.site.clone(),
                    prompt: prompt.clone(),
                    sample: s.to_json(),
                    reward: reward(loss, *s == y, ok, lambda),
                });
            }
        }
    }
    Ok(out)
}

pub fn write_ndjson<W: Write>(mut w: W, records: &[RewardRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
