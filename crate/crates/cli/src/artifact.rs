//! On-disk layout of a run: the returned agent, its parameters and the logs
//! that led to it.

use crate::error::{CliError, CliResult, ExitContext};
use gsynth_core::lang::{parse_fggms, parse_program, FggmDef, Program};
use gsynth_core::learn::{Params, SiteInfo};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const AGENT: &str = "agent.gs";
pub const FGGMS: &str = "fggms.fggm";
pub const PARAMS: &str = "params.json";
pub const POOL: &str = "pool.json";
pub const ITERATIONS: &str = "iterations.jsonl";
pub const FEEDBACK: &str = "feedback.jsonl";
pub const TUNING: &str = "tuning.json";
pub const EVAL: &str = "eval.json";
pub const SEEDS: &str = "seeds.json";
pub const TASK: &str = "task.json";

/// Tuned parameters of every guarded call site.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub sites: Vec<SiteInfo>,
    pub theta: Params,
}

/// Summary of one pool member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoolEntry {
    pub index: usize,
    pub iteration: usize,
    pub attempt: usize,
    pub planner: String,
    pub train_loss: f64,
    pub returned: bool,
    pub source: String,
}

/// An agent read back from an artifact directory.
#[derive(Clone, Debug)]
pub struct StoredAgent {
    pub source: String,
    pub program: Program,
    pub fggms: Vec<FggmDef>,
    /// `None` when the directory has no parameter file.
    pub params: Option<ParamsFile>,
}

fn malformed(dir: &Path, what: impl std::fmt::Display) -> CliError {
    CliError::msg(2, format!("malformed artifact {}: {what}", dir.display()))
}

pub fn load(dir: &Path) -> CliResult<StoredAgent> {
    let read = |name: &str| std::fs::read_to_string(dir.join(name));
    let source = read(AGENT).map_err(|e| malformed(dir, format!("{AGENT}: {e}")))?;
    let program = parse_program(&source).map_err(|e| malformed(dir, format!("{AGENT}: {e}")))?;
    let fggms = match read(FGGMS) {
        Ok(t) => parse_fggms(&t).map_err(|e| malformed(dir, format!("{FGGMS}: {e}")))?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => vec![],
        Err(e) => return Err(malformed(dir, format!("{FGGMS}: {e}"))),
    };
    let params = match read(PARAMS) {
        Ok(t) => Some(serde_json::from_str(&t).map_err(|e| malformed(dir, format!("{PARAMS}: {e}")))?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(malformed(dir, format!("{PARAMS}: {e}"))),
    };
    Ok(StoredAgent { source, program, fggms, params })
}

pub fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    std::fs::write(dir.join(name), contents).env_err(format!("cannot write {}", dir.join(name).display()))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).env_err("cannot serialise output")?;
    write(dir, name, &(text + "\n"))
}

pub fn write_jsonl<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> CliResult<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).env_err("cannot serialise output")?);
        out.push('\n');
    }
    write(dir, name, &out)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).env_err(format!("cannot create output directory {}", dir.display()))
}
