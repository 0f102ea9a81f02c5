//! Episode records and the transcript format.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Thought,
    Act,
    Observe,
    Finish,
}

impl StepKind {
    pub fn prefix(self) -> &'static str {
        match self {
            StepKind::Thought => "[Thought]: ",
            StepKind::Act => "[Act]: ",
            StepKind::Observe => "[Observe]: ",
            StepKind::Finish => "[Finish]: ",
        }
    }

    /// Split a transcript line into kind and text.
    pub fn parse_line(line: &str) -> Option<(StepKind, &str)> {
        [StepKind::Thought, StepKind::Act, StepKind::Observe, StepKind::Finish]
            .into_iter()
            .find_map(|k| line.strip_prefix(k.prefix()).map(|rest| (k, rest)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: StepKind,
    pub text: String,
}

impl TraceStep {
    pub fn new(kind: StepKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("{}{}", self.kind.prefix(), self.text)
    }
}

/// `(Thought Act Observe)* (Thought? Finish)?`
pub fn is_well_formed(steps: &[TraceStep]) -> bool {
    use StepKind::*;
    let kinds: Vec<StepKind> = steps.iter().map(|s| s.kind).collect();
    let mut i = 0;
    while i + 2 < kinds.len() && kinds[i..i + 3] == [Thought, Act, Observe] {
        i += 3;
    }
    matches!(&kinds[i..], [] | [Finish] | [Thought, Finish])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Finished,
    StepBudgetExceeded,
    FatalError,
    /// The model produced neither an Act nor a Finish line.
    MalformedOutput,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Finished => "Finished",
            Outcome::StepBudgetExceeded => "StepBudgetExceeded",
            Outcome::FatalError => "FatalError",
            Outcome::MalformedOutput => "MalformedOutput",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallStatus {
    Ok,
    /// Rejected before execution (syntax, unknown tool/variable, arity, type).
    Formulation,
    /// The handler ran and raised.
    ToolError,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallRecord {
    /// Index of the Act step in `steps`.
    pub step: usize,
    pub call_index: u32,
    pub tool: String,
    pub status: CallStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    pub observation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_episode: Option<usize>,
    #[serde(skip)]
    pub args: Vec<Value>,
    #[serde(skip)]
    pub output: Option<Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub iterations: usize,
    pub backend_calls: usize,
    pub tool_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendExchange {
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Episode {
    pub agent: String,
    pub id: String,
    pub question: String,
    /// Pre-bound variable → image handle.
    pub inputs: IndexMap<String, String>,
    pub steps: Vec<TraceStep>,
    pub answer: Option<String>,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub calls: Vec<CallRecord>,
    /// Final store: name → value tag.
    #[serde(default)]
    pub variables: IndexMap<String, String>,
    #[serde(default)]
    pub sub_episodes: Vec<Episode>,
    pub timing: Timing,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backend_log: Vec<BackendExchange>,
}

impl Episode {
    pub fn new(agent: &str, id: &str, question: &str) -> Self {
        Self {
            agent: agent.to_string(),
            id: id.to_string(),
            question: question.to_string(),
            inputs: IndexMap::new(),
            steps: Vec::new(),
            answer: None,
            outcome: Outcome::Finished,
            error: None,
            calls: Vec::new(),
            variables: IndexMap::new(),
            sub_episodes: Vec::new(),
            timing: Timing::default(),
            backend_log: Vec::new(),
        }
    }

    /// Nesting depth (1 for an episode without sub-episodes).
    pub fn depth(&self) -> usize {
        1 + self.sub_episodes.iter().map(Episode::depth).max().unwrap_or(0)
    }

    /// Pre-order walk over this episode and all nested ones.
    pub fn walk(&self) -> Vec<&Episode> {
        let mut out = vec![self];
        for sub in &self.sub_episodes {
            out.extend(sub.walk());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("episode serializes")
    }

    /// Human-readable dump; `max_depth` limits how many levels are shown.
    pub fn render(&self, max_depth: Option<usize>) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0, max_depth.unwrap_or(usize::MAX));
        out
    }

    fn render_into(&self, out: &mut String, level: usize, max_depth: usize) {
        let pad = "  ".repeat(level);
        let emit = |out: &mut String, line: &str| {
            for (i, l) in line.split('\n').enumerate() {
                let _ = writeln!(out, "{pad}{}{l}", if i > 0 { "  " } else { "" });
            }
        };
        emit(out, &format!("=== {} ===", self.agent));
        emit(out, &format!("[Question]: {}", self.question));
        for (idx, step) in self.steps.iter().enumerate() {
            if step.kind == StepKind::Observe && level + 1 < max_depth {
                let sub = self
                    .calls
                    .iter()
                    .find(|c| c.step + 1 == idx)
                    .and_then(|c| c.sub_episode);
                if let Some(sub) = sub.and_then(|s| self.sub_episodes.get(s)) {
                    sub.render_into(out, level + 1, max_depth);
                }
            }
            emit(out, &step.line());
        }
        if self.outcome != Outcome::Finished {
            let line = match &self.error {
                Some(e) => format!("(episode ended: {}: {e})", self.outcome.as_str()),
                None => format!("(episode ended: {})", self.outcome.as_str()),
            };
            emit(out, &line);
        }
    }
}
