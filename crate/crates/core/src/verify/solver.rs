//! External SMT solver driven through a subprocess.

use crate::logic::smt::VAR_PREFIX;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Solver executable; must accept an SMT-LIB script on stdin via `-in`.
    pub path: PathBuf,
    pub timeout_per_vc: Duration,
    /// Wall-clock budget for all obligations of one program.
    pub program_budget: Duration,
    pub random_seed: u32,
    pub logic: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            path: PathBuf::from("z3"),
            timeout_per_vc: Duration::from_secs(5),
            program_budget: Duration::from_secs(60),
            random_seed: 0,
            logic: "ALL".into(),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("solver executable `{0}` could not be started: {1}")]
    NotFound(String, String),
    #[error("solver crashed: {0}")]
    Crashed(String),
}

/// Verdict on a validity query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "camelCase")]
pub enum Discharge {
    Valid,
    Unknown { reason: String },
    Countermodel { assignments: BTreeMap<String, String> },
}

impl Discharge {
    pub fn is_valid(&self) -> bool {
        matches!(self, Discharge::Valid)
    }
}

/// Raw solver response.
#[derive(Clone, Debug, PartialEq)]
pub enum SatResult {
    Sat(String),
    Unsat,
    Unknown(String),
}

/// Run a script and return the first verdict, killing the solver when the
/// timeout expires.
pub fn run_script(cfg: &SolverConfig, script: &str, timeout: Duration) -> Result<SatResult, SolverError> {
    let mut child = Command::new(&cfg.path)
        .arg("-in")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SolverError::NotFound(cfg.path.display().to_string(), e.to_string()))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let script = script.to_string();
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(script.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let deadline = Instant::now() + timeout + Duration::from_millis(500);
    let mut killed = false;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    killed = true;
                    break;
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(SolverError::Crashed(e.to_string())),
        }
    }
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    if killed {
        return Ok(SatResult::Unknown("timeout".into()));
    }
    let mut lines = out.lines().map(str::trim).filter(|l| !l.is_empty());
    let first = lines.next().unwrap_or("");
    let rest: Vec<&str> = lines.collect();
    match first {
        "unsat" => Ok(SatResult::Unsat),
        "sat" => Ok(SatResult::Sat(rest.join("\n"))),
        "unknown" | "timeout" => {
            let reason = rest
                .first()
                .and_then(|l| l.strip_prefix("(:reason-unknown \""))
                .map(|r| r.trim_end_matches("\")").to_string())
                .filter(|r| !r.is_empty())
                .unwrap_or_else(|| first.to_string());
            Ok(SatResult::Unknown(reason))
        }
        _ => {
            let mut err = String::new();
            if let Some(mut e) = child.stderr.take() {
                let _ = e.read_to_string(&mut err);
            }
            Err(SolverError::Crashed(format!("{} {}", out.trim(), err.trim()).trim().to_string()))
        }
    }
}

/// Extract constant assignments `(define-fun v.x () Sort value)` from a
/// model, keyed by the unmangled variable name.
pub fn parse_model(text: &str) -> BTreeMap<String, String> {
    let tokens = sexp_tokens(text);
    let mut out = BTreeMap::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "define-fun" && i + 3 < tokens.len() && tokens[i + 2] == "(" && tokens[i + 3] == ")" {
            let name = tokens[i + 1].clone();
            // skip sort (atom)
            let mut j = i + 5;
            let mut depth = 0i32;
            let mut val = Vec::new();
            while j < tokens.len() {
                let t = &tokens[j];
                if t == "(" {
                    depth += 1;
                } else if t == ")" {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                val.push(t.clone());
                j += 1;
            }
            if let Some(var) = name.strip_prefix(VAR_PREFIX) {
                out.insert(var.to_string(), join_sexp(&val));
            }
            i = j;
        }
        i += 1;
    }
    out
}

fn sexp_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    for c in text.chars() {
        if in_str {
            cur.push(c);
            if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            '"' => {
                cur.push(c);
                in_str = true;
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn join_sexp(toks: &[String]) -> String {
    let mut s = String::new();
    for (k, t) in toks.iter().enumerate() {
        if k > 0 && t != ")" && toks[k - 1] != "(" {
            s.push(' ');
        }
        s.push_str(t);
    }
    s
}

/// Numeric value of a model term such as `1.5`, `(- 2.0)` or `(/ 1.0 3.0)`.
pub fn model_number(text: &str) -> Option<f64> {
    let toks = sexp_tokens(text);
    fn term(t: &[String], i: &mut usize) -> Option<f64> {
        let tok = t.get(*i)?;
        if tok != "(" {
            *i += 1;
            return tok.parse().ok();
        }
        *i += 1;
        let op = t.get(*i)?.clone();
        *i += 1;
        let mut args = Vec::new();
        while t.get(*i)? != ")" {
            args.push(term(t, i)?);
        }
        *i += 1;
        match (op.as_str(), args.as_slice()) {
            ("-", [a]) => Some(-a),
            ("-", [a, b]) => Some(a - b),
            ("/", [a, b]) => Some(a / b),
            ("+", [a, b]) => Some(a + b),
            ("*", [a, b]) => Some(a * b),
            _ => None,
        }
    }
    let mut i = 0;
    term(&toks, &mut i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_extraction() {
        let m = "(\n  (define-fun v.x () Real\n    (- 1.5))\n  (define-fun f.abs ((x!0 Real)) Real 0.0)\n  (define-fun v.n () Int 3)\n)";
        let a = parse_model(m);
        assert_eq!(a.get("x").map(String::as_str), Some("(- 1.5)"));
        assert_eq!(a.get("n").map(String::as_str), Some("3"));
        assert!(!a.contains_key("abs"));
        assert_eq!(model_number("(- 1.5)"), Some(-1.5));
        assert_eq!(model_number("(/ 1.0 4.0)"), Some(0.25));
        assert_eq!(model_number("(- (/ 1.0 4.0))"), Some(-0.25));
    }

    #[test]
    fn missing_solver_is_reported() {
        let cfg = SolverConfig { path: PathBuf::from("/nonexistent/solver-binary"), ..Default::default() };
        let r = run_script(&cfg, "(check-sat)", Duration::from_secs(1));
        assert!(matches!(r, Err(SolverError::NotFound(..))));
    }
}
