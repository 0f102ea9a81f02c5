//! Attributing a failed episode to one error type.

use serde::{Deserialize, Serialize};

use crate::backend::OraclePlanner;
use crate::engine::EngineConfig;
use crate::registry::{CallContext, ToolRegistry};
use crate::trace::{CallRecord, CallStatus, Episode, Outcome};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorLabel {
    Reasoning,
    ToolCallFormulation,
    ToolFailure,
    NoError,
}

impl ErrorLabel {
    pub const ALL: [ErrorLabel; 4] = [
        ErrorLabel::Reasoning,
        ErrorLabel::ToolCallFormulation,
        ErrorLabel::ToolFailure,
        ErrorLabel::NoError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorLabel::Reasoning => "Reasoning",
            ErrorLabel::ToolCallFormulation => "Tool call formulation",
            ErrorLabel::ToolFailure => "Tool failure",
            ErrorLabel::NoError => "No error",
        }
    }
}

/// Where the label was decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub episode: String,
    pub agent: String,
    pub step: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: ErrorLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
}

/// What a tool should have returned for the arguments it was given.
pub trait ToolGroundTruth {
    /// `None` when the call cannot be checked (agent tools, unknown tools).
    fn expected(&self, ep: &Episode, call: &CallRecord) -> Option<Result<Value, String>>;
}

/// Ground truth by re-running each call on a noise-free registry.
pub struct Rerun<'a> {
    pub registry: &'a ToolRegistry,
}

impl ToolGroundTruth for Rerun<'_> {
    fn expected(&self, ep: &Episode, call: &CallRecord) -> Option<Result<Value, String>> {
        if call.sub_episode.is_some() || self.registry.is_agent(&call.tool) {
            return None;
        }
        let tool = self.registry.get(&call.tool)?;
        let config = EngineConfig::default();
        let mut ctx = CallContext {
            registry: self.registry,
            backend: &OraclePlanner,
            config: &config,
            depth: 1,
            episode_id: &ep.id,
            call_index: call.call_index,
            sub_episodes: Vec::new(),
        };
        Some(tool.call(&call.args, &mut ctx).map_err(|e| e.to_string()))
    }
}

fn evidence(ep: &Episode, step: Option<usize>, message: impl Into<String>) -> Evidence {
    Evidence {
        episode: ep.id.clone(),
        agent: ep.agent.clone(),
        step,
        message: message.into(),
    }
}

fn first_formulation(ep: &Episode) -> Option<Evidence> {
    ep.walk().into_iter().find_map(|e| {
        e.calls
            .iter()
            .find(|c| c.status == CallStatus::Formulation)
            .map(|c| evidence(e, Some(c.step), format!("{}: {}", c.error_kind.as_deref().unwrap_or("?"), c.observation)))
    })
}

fn first_divergence(ep: &Episode, truth: &dyn ToolGroundTruth) -> Option<Evidence> {
    ep.walk().into_iter().find_map(|e| {
        e.calls.iter().find_map(|c| {
            let expected = truth.expected(e, c)?;
            let diverged = match (&c.status, &c.output, &expected) {
                (CallStatus::Ok, Some(got), Ok(want)) => got != want,
                (CallStatus::Ok, _, Err(_)) => true,
                (CallStatus::ToolError, _, Ok(_)) => true,
                _ => false,
            };
            diverged.then(|| evidence(e, Some(c.step), format!("{} output differs from the noise-free result", c.tool)))
        })
    })
}

/// Label one episode. Formulation errors anywhere in the tree win, then
/// divergent tool outputs, then reasoning.
pub fn classify_error(ep: &Episode, score: f64, truth: &dyn ToolGroundTruth) -> Classification {
    if score >= 1.0 {
        return Classification {
            label: ErrorLabel::NoError,
            evidence: None,
        };
    }
    if let Some(ev) = first_formulation(ep) {
        return Classification {
            label: ErrorLabel::ToolCallFormulation,
            evidence: Some(ev),
        };
    }
    if let Some(ev) = first_divergence(ep, truth) {
        return Classification {
            label: ErrorLabel::ToolFailure,
            evidence: Some(ev),
        };
    }
    let message = match ep.outcome {
        Outcome::Finished => format!("wrong final answer {:?}", ep.answer.as_deref().unwrap_or_default()),
        o => format!("{}: {}", o.as_str(), ep.error.as_deref().unwrap_or_default()),
    };
    Classification {
        label: ErrorLabel::Reasoning,
        evidence: Some(evidence(ep, ep.steps.len().checked_sub(1), message)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{StepKind, TraceStep};

    struct Fixed(Option<Result<Value, String>>);

    impl ToolGroundTruth for Fixed {
        fn expected(&self, _: &Episode, _: &CallRecord) -> Option<Result<Value, String>> {
            self.0.clone()
        }
    }

    fn record(status: CallStatus, output: Option<Value>) -> CallRecord {
        CallRecord {
            step: 1,
            call_index: 0,
            tool: "VQA".into(),
            status,
            error_kind: None,
            observation: "x".into(),
            sub_episode: None,
            args: vec![],
            output,
        }
    }

    fn episode(calls: Vec<CallRecord>) -> Episode {
        let mut ep = Episode::new("A", "e", "q");
        ep.steps.push(TraceStep::new(StepKind::Thought, "t"));
        ep.steps.push(TraceStep::new(StepKind::Act, "VQA('q', image)"));
        ep.calls = calls;
        ep.answer = Some("no".into());
        ep
    }

    #[test]
    fn precedence() {
        let yes = Some(Ok(Value::text("yes")));
        let ep = episode(vec![record(CallStatus::Ok, Some(Value::text("no")))]);
        assert_eq!(classify_error(&ep, 1.0, &Fixed(yes.clone())).label, ErrorLabel::NoError);
        assert_eq!(classify_error(&ep, 0.0, &Fixed(yes.clone())).label, ErrorLabel::ToolFailure);
        assert_eq!(classify_error(&ep, 0.0, &Fixed(Some(Ok(Value::text("no"))))).label, ErrorLabel::Reasoning);
        let mut f = record(CallStatus::Formulation, None);
        f.error_kind = Some("UnknownTool".into());
        let ep = episode(vec![f, record(CallStatus::Ok, Some(Value::text("no")))]);
        let c = classify_error(&ep, 0.0, &Fixed(yes));
        assert_eq!(c.label, ErrorLabel::ToolCallFormulation);
        assert_eq!(c.evidence.unwrap().step, Some(1));
    }

    #[test]
    fn sub_episode_root_cause() {
        let inner = episode(vec![record(CallStatus::Ok, Some(Value::text("no")))]);
        let mut outer = episode(vec![]);
        outer.agent = "Dispatcher".into();
        outer.sub_episodes.push(inner);
        let c = classify_error(&outer, 0.0, &Fixed(Some(Ok(Value::text("yes")))));
        assert_eq!(c.label, ErrorLabel::ToolFailure);
        assert_eq!(c.evidence.unwrap().agent, "A");
        let c = classify_error(&outer, 0.0, &Fixed(None));
        assert_eq!(c.label, ErrorLabel::Reasoning);
        assert_eq!(c.evidence.unwrap().agent, "Dispatcher");
    }
}
