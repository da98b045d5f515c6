//! Planner reached over HTTP.
//!
//! Proposal request: `POST {"taskInfo", "libraryDoc", "axioms", "feedback",
//! "priorErrors", "promptTemplate"}` → `{"fggms": [source, …], "program":
//! source}`. Failure explanations are requested from the same endpoint with
//! `{"explain": failure}` → `{"description", "suggestedFix"}`.

use super::feedback::FailureCase;
use super::planner::{fill_prompt, templated_explanation, Planner, PlannerError, PlannerRequest, Proposal};
use super::TaskInfo;
use serde::Deserialize;
use std::time::Duration;

pub struct HttpPlanner {
    pub endpoint: String,
    /// Remote explanations requested at most this many times; later
    /// failures get templated text.
    pub explain_limit: usize,
    explained: usize,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct ProposalReply {
    fggms: Vec<String>,
    program: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ExplainReply {
    description: String,
    suggested_fix: String,
}

impl HttpPlanner {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        HttpPlanner { endpoint: endpoint.to_string(), explain_limit: 20, explained: 0, agent }
    }

    fn post(&self, body: &serde_json::Value) -> Result<serde_json::Value, PlannerError> {
        let mut resp =
            self.agent.post(&self.endpoint).send_json(body).map_err(|e| PlannerError::Transport(format!("{}: {e}", self.endpoint)))?;
        resp.body_mut().read_json().map_err(|e| PlannerError::Malformed(e.to_string()))
    }
}

impl Planner for HttpPlanner {
    fn name(&self) -> &str {
        "external"
    }

    fn propose(&mut self, req: &PlannerRequest) -> Result<Proposal, PlannerError> {
        let body = serde_json::json!({
            "taskInfo": req.task,
            "libraryDoc": req.task.library_doc,
            "axioms": req.task.axioms,
            "feedback": req.feedback,
            "priorErrors": req.prior_errors,
            "promptTemplate": fill_prompt(req),
        });
        let v = self.post(&body)?;
        let r: ProposalReply = serde_json::from_value(v).map_err(|e| PlannerError::Malformed(e.to_string()))?;
        Ok(Proposal { fggms: r.fggms, program: r.program })
    }

    fn explain(&mut self, _task: &TaskInfo, case: &FailureCase) -> (String, String) {
        if self.explained >= self.explain_limit {
            return templated_explanation(case);
        }
        self.explained += 1;
        let reply = self
            .post(&serde_json::json!({ "explain": case }))
            .and_then(|v| serde_json::from_value::<ExplainReply>(v).map_err(|e| PlannerError::Malformed(e.to_string())));
        match reply {
            Ok(r) => (r.description, r.suggested_fix),
            Err(e) => {
                let (d, f) = templated_explanation(case);
                (format!("{d} (planner explanation unavailable: {e})"), f)
            }
        }
    }
}
