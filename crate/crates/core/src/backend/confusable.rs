//! An orchestrator that mixes up tool vocabularies under a long generic prompt.
//!
//! It behaves like [`OraclePlanner`] except that, for prompts of the target
//! agent, it sometimes opens with a plausible tool that is not registered.
//! Whether a question is confused depends only on its text.

use super::planner::{plan, render_step, PromptView, Step};
use super::{Backend, BackendError, Capabilities, OraclePlanner};
use crate::actlang::{render_call, Arg, ToolCall};
use crate::world::{parse_question, QuestionType};

pub const DEFAULT_CONFUSION_RATE: f64 = 0.4;

#[derive(Debug, Clone)]
pub struct ConfusableBackend {
    /// Agent whose prompts get confused.
    pub target: String,
    pub rate: f64,
}

impl Default for ConfusableBackend {
    fn default() -> Self {
        Self {
            target: crate::agents::NAIVE.to_string(),
            rate: DEFAULT_CONFUSION_RATE,
        }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// The unregistered tool a confused agent reaches for.
pub fn confused_tool(qtype: Option<QuestionType>) -> &'static str {
    match qtype {
        Some(QuestionType::Counting) => "FilterObjects",
        Some(QuestionType::LookTwice) => "CountObjects",
        Some(QuestionType::Spatial) => "LocateObject",
        Some(QuestionType::OcrReasoning) => "ReadText",
        Some(QuestionType::TwoImage) => "CompareImages",
        Some(QuestionType::SingleHop | QuestionType::TwoHop) => "SearchWeb",
        _ => "PointedObject",
    }
}

impl ConfusableBackend {
    pub fn new(rate: f64) -> Self {
        Self {
            rate,
            ..Self::default()
        }
    }

    pub fn confuses(&self, question: &str) -> bool {
        let u = (fnv1a(question.trim()) >> 11) as f64 / (1u64 << 53) as f64;
        u < self.rate
    }

    fn confused_step(view: &PromptView) -> String {
        let parsed = parse_question(&view.question);
        let tool = confused_tool(parsed.as_ref().map(|p| p.qtype()));
        let image = view.inputs.first().cloned().unwrap_or_else(|| "image".into());
        let query = match &parsed {
            Some(p) if !p.param("class").is_empty() => {
                format!("{} {}", p.param("color"), p.param("class")).trim().to_string()
            }
            _ => view.question.clone(),
        };
        let c = ToolCall {
            assign: Some("result".into()),
            tool: tool.to_string(),
            args: vec![Arg::Var(image), Arg::Str(query)],
        };
        format!("I will narrow the image down to what the question asks about.\n[Act]: {}", render_call(&c))
    }
}

impl Backend for ConfusableBackend {
    fn capabilities(&self) -> Capabilities {
        OraclePlanner.capabilities()
    }

    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        let view = PromptView::parse(prompt);
        if view.agent == self.target && view.observations.is_empty() && self.confuses(&view.question) {
            return Ok(Self::confused_step(&view));
        }
        Ok(render_step(&match plan(&view) {
            // a confused agent gives up with the error it saw
            Step::Finish(_, _) if view.observations.last().is_some_and(|o| o.starts_with("#ERROR#: Tool ")) => {
                let err = view.observations.last().unwrap().clone();
                Step::Finish("The tool I wanted does not exist.".into(), err)
            }
            step => step,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_over_distinct_questions() {
        let b = ConfusableBackend::default();
        let n = 4000;
        let hits = (0..n).filter(|i| b.confuses(&format!("question {i}?"))).count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.4).abs() < 0.03, "{p}");
        assert!(!ConfusableBackend::new(0.0).confuses("anything"));
        assert!(ConfusableBackend::new(1.0).confuses("anything"));
    }

    #[test]
    fn only_the_target_agent_is_confused() {
        let b = ConfusableBackend::new(1.0);
        let tail = "\n\nAvailable tools:\n- VQA(question: text, image: image) -> answer: a\n\nNow answer the following question.\n\n[Question]: how many red cars are there?\n[Inputs]: image\n[Thought]: ";
        let out = b.generate(&format!("You are NaiveGenericAgent, generic.{tail}")).unwrap();
        assert!(out.ends_with("[Act]: result = FilterObjects(image, 'red car')"), "{out}");
        let out = b.generate(&format!("You are ComplexCountingAgent.{tail}")).unwrap();
        assert!(!out.contains("FilterObjects"));
    }
}
