//! Planner backends: proposers of guarded-model definitions and programs.

use super::feedback::{FailureCase, Feedback};
use super::templates::{default_variants, TemplateVariant, BOUNDED_PARAM};
use super::TaskInfo;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prompt template handed to external planners.
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/planner_prompt.txt");

#[derive(Clone, Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error("planner unreachable: {0}")]
    Transport(String),
    #[error("planner reply malformed: {0}")]
    Malformed(String),
    #[error("planner has no further proposals")]
    Exhausted,
}

/// One planner call's input.
#[derive(Clone, Copy, Debug)]
pub struct PlannerRequest<'a> {
    pub task: &'a TaskInfo,
    pub feedback: Option<&'a Feedback>,
    /// Errors of the previous attempt in the current search-verify call.
    pub prior_errors: &'a [String],
    /// Source of the current best agent, if any.
    pub previous_program: Option<&'a str>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub fggms: Vec<String>,
    pub program: String,
}

pub trait Planner: Send {
    fn name(&self) -> &str;

    fn propose(&mut self, req: &PlannerRequest) -> Result<Proposal, PlannerError>;

    /// Called with the errors of every failed attempt, including the last
    /// attempt of a search-verify call (which no later `propose` sees).
    fn report_failure(&mut self, _errors: &[String]) {}

    /// One-to-two sentence description and a suggested fix for a failed
    /// training example.
    fn explain(&mut self, _task: &TaskInfo, case: &FailureCase) -> (String, String) {
        templated_explanation(case)
    }
}

pub fn templated_explanation(case: &FailureCase) -> (String, String) {
    let description = match &case.output {
        Some(out) => format!(
            "The agent returned {out} on input {} where {} was expected ({}).",
            case.input, case.target, case.error
        ),
        None => format!("The agent failed on input {} ({}).", case.input, case.error),
    };
    let fix = "Try a template family whose shape follows the data near this input, or adjust the parameter brackets \
               within what the specification allows."
        .to_string();
    (description, fix)
}

/// Fill `{placeholder}`s of [`PROMPT_TEMPLATE`].
pub fn fill_prompt(req: &PlannerRequest) -> String {
    let none = "(none)".to_string();
    let feedback = req
        .feedback
        .map(|f| serde_json::to_string_pretty(f).unwrap_or_default())
        .unwrap_or_else(|| none.clone());
    let errors = if req.prior_errors.is_empty() { none.clone() } else { req.prior_errors.join("\n") };
    let score = req.feedback.map(|f| format!("previous training loss: {}", f.previous_score)).unwrap_or_else(|| none.clone());
    [
        ("{task_description}", req.task.description.clone()),
        ("{postcondition_description}", format!("For every x with {} the result must satisfy {}", req.task.phi, req.task.psi)),
        ("{library_functions}", req.task.library_doc.clone()),
        ("{axioms}", req.task.axioms.join("\n")),
        ("{fggm_format}", BOUNDED_PARAM.trim().to_string()),
        ("{agent_signature}", req.task.agent_signature.clone()),
        ("{task_specific_constraints}", String::new()),
        ("{previous_agent_code}", req.previous_program.map(str::to_string).unwrap_or_else(|| none.clone())),
        ("{prior_errors}", errors),
        ("{feedback}", feedback),
        ("{scoring_info}", score),
    ]
    .iter()
    .fold(PROMPT_TEMPLATE.to_string(), |acc, (k, v)| acc.replace(k, v))
}

/// Deterministic enumeration over a fixed list of template variants.
///
/// A variant is skipped when it belongs to the same family as a variant
/// the verifier refuted with a countermodel and all its brackets contain
/// the refuted ones: the countermodel then refutes it as well.
#[derive(Clone, Debug)]
pub struct ScriptedPlanner {
    variants: Vec<TemplateVariant>,
    cursor: usize,
    last: Option<usize>,
    refuted: Vec<usize>,
    /// Variants skipped so far, for logging.
    pub skipped: Vec<usize>,
}

impl Default for ScriptedPlanner {
    fn default() -> Self {
        Self::new(default_variants())
    }
}

impl ScriptedPlanner {
    pub fn new(variants: Vec<TemplateVariant>) -> Self {
        ScriptedPlanner { variants, cursor: 0, last: None, refuted: Vec::new(), skipped: Vec::new() }
    }

    pub fn variants(&self) -> &[TemplateVariant] {
        &self.variants
    }

    fn is_refuted(&self, i: usize) -> bool {
        self.refuted.iter().any(|&r| self.variants[i].contains(&self.variants[r]))
    }
}

impl Planner for ScriptedPlanner {
    fn name(&self) -> &str {
        "scripted"
    }

    fn propose(&mut self, _req: &PlannerRequest) -> Result<Proposal, PlannerError> {
        while self.cursor < self.variants.len() && self.is_refuted(self.cursor) {
            self.skipped.push(self.cursor);
            self.cursor += 1;
        }
        let i = self.cursor;
        let v = self.variants.get(i).ok_or(PlannerError::Exhausted)?;
        self.cursor += 1;
        self.last = Some(i);
        Ok(Proposal { fggms: vec![BOUNDED_PARAM.to_string()], program: v.render() })
    }

    fn report_failure(&mut self, errors: &[String]) {
        if let Some(i) = self.last.take() {
            if errors.iter().any(|e| e.contains("countermodel")) {
                self.refuted.push(i);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::templates::Family;

    fn info() -> TaskInfo {
        TaskInfo {
            id: "t".into(),
            description: "describe".into(),
            agent_signature: "function agent(x: real): (real)".into(),
            phi: "x >= 0.0".into(),
            psi: "result >= 0.0".into(),
            library_doc: "abs(x: real) -> real".into(),
            axioms: vec![],
        }
    }

    #[test]
    fn enumerates_in_order_then_exhausts() {
        let vs = vec![
            TemplateVariant::new(Family::Affine, &[("a", 0.0, 1.0), ("b", 0.0, 1.0)]),
            TemplateVariant::new(Family::ExpDecay, &[("a", 1.0, 2.0), ("k", 0.1, 1.0)]),
        ];
        let mut p = ScriptedPlanner::new(vs.clone());
        let t = info();
        let req = PlannerRequest { task: &t, feedback: None, prior_errors: &[], previous_program: None };
        assert_eq!(p.propose(&req).unwrap().program, vs[0].render());
        assert_eq!(p.propose(&req).unwrap().program, vs[1].render());
        assert_eq!(p.propose(&req), Err(PlannerError::Exhausted));
    }

    #[test]
    fn countermodel_skips_wider_variants_of_the_same_family() {
        let vs = vec![
            TemplateVariant::new(Family::Affine, &[("a", 0.5, 1.0), ("b", 0.25, 1.0)]),
            TemplateVariant::new(Family::Affine, &[("a", 0.0, 1.0), ("b", 0.0, 1.0)]),
            TemplateVariant::new(Family::Affine, &[("a", 0.6, 0.9), ("b", 0.3, 0.5)]),
        ];
        let t = info();
        let req = PlannerRequest { task: &t, feedback: None, prior_errors: &[], previous_program: None };
        let mut p = ScriptedPlanner::new(vs.clone());
        p.propose(&req).unwrap();
        p.report_failure(&["postcondition might not hold — countermodel: x = 0.5".into()]);
        assert_eq!(p.propose(&req).unwrap().program, vs[2].render());
        assert_eq!(p.skipped, vec![1]);

        // An inconclusive failure skips nothing.
        let mut p = ScriptedPlanner::new(vs.clone());
        p.propose(&req).unwrap();
        p.report_failure(&["postcondition might not hold — unproven (timeout)".into()]);
        assert_eq!(p.propose(&req).unwrap().program, vs[1].render());
    }

    #[test]
    fn prompt_has_no_unfilled_placeholders() {
        let t = info();
        let errs = vec!["e1".to_string()];
        let req = PlannerRequest { task: &t, feedback: None, prior_errors: &errs, previous_program: Some("prog") };
        let s = fill_prompt(&req);
        assert!(s.contains("describe") && s.contains("e1") && s.contains("prog"));
        let re_placeholder = s.split('{').skip(1).filter(|rest| {
            let name: String = rest.chars().take_while(|c| c.is_ascii_lowercase() || *c == '_').collect();
            !name.is_empty() && rest[name.len()..].starts_with('}')
        });
        assert_eq!(re_placeholder.count(), 0, "{s}");
    }
}
