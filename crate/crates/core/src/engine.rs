//! The Thought/Act/Observe loop.

use std::time::Duration;

use thiserror::Error;

use crate::actlang::{parse_act_line, validate, CallError};
use crate::agents::AgentSpec;
use crate::backend::{complete, Backend, BackendError};
use crate::registry::{AllowedTools, CallContext, ToolLookup, ToolRegistry};
use crate::trace::{BackendExchange, CallRecord, CallStatus, Episode, Outcome, StepKind, TraceStep};
use crate::value::{render_observation, Value, VariableStore};

pub const DEFAULT_MAX_STEPS: usize = 10;
pub const DEFAULT_PROMPT_CHAR_BUDGET: usize = 32768;
pub const DEFAULT_MAX_DEPTH: usize = 3;

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(50),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub seed: u64,
    /// Agent nesting limit; the top-level episode is depth 1.
    pub max_depth: usize,
    pub retry: RetryPolicy,
    /// Record every prompt/completion pair in the episode.
    pub log_backend: bool,
    /// Overrides every agent's own step budget.
    pub max_steps: Option<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_depth: DEFAULT_MAX_DEPTH,
            retry: RetryPolicy::default(),
            log_backend: false,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("prompt of {len} chars exceeds the budget of {budget} even without examples")]
    PromptOverflow { len: usize, budget: usize },
    #[error("agent {agent} lists unregistered tool {tool}")]
    UnregisteredTool { agent: String, tool: String },
}

/// Last line of every prompt.
pub const THOUGHT_CUE: &str = "[Thought]: ";

fn question_block(question: &str, inputs: &[String]) -> String {
    format!("[Question]: {question}\n[Inputs]: {}\n", inputs.join(", "))
}

pub fn build_prompt(
    spec: &AgentSpec,
    tools: &dyn ToolLookup,
    question: &str,
    inputs: &[String],
    trace: &[TraceStep],
) -> Result<String, EngineError> {
    let mut head = String::new();
    head.push_str(spec.preamble.trim_end());
    head.push_str("\n\nAvailable tools:\n");
    for name in &spec.tools {
        let info = tools.lookup(name).ok_or_else(|| EngineError::UnregisteredTool {
            agent: spec.name.clone(),
            tool: name.clone(),
        })?;
        head.push_str(&info.prompt_line());
        head.push('\n');
    }
    let mut tail = String::from("\nNow answer the following question.\n\n");
    tail.push_str(&question_block(question, inputs));
    for step in trace {
        tail.push_str(&step.line());
        tail.push('\n');
    }
    tail.push_str(THOUGHT_CUE);

    let blocks: Vec<String> = spec
        .examples
        .iter()
        .map(|ex| {
            let mut b = question_block(&ex.question, &ex.inputs);
            for line in &ex.transcript {
                b.push_str(line);
                b.push('\n');
            }
            b
        })
        .collect();
    // evict oldest examples first
    for start in 0..=blocks.len() {
        let kept = &blocks[start..];
        let mut prompt = head.clone();
        if !kept.is_empty() {
            prompt.push_str("\nExamples:\n");
            for b in kept {
                prompt.push('\n');
                prompt.push_str(b);
            }
        }
        prompt.push_str(&tail);
        if prompt.chars().count() <= spec.prompt_char_budget {
            return Ok(prompt);
        }
        if start == blocks.len() {
            return Err(EngineError::PromptOverflow {
                len: prompt.chars().count(),
                budget: spec.prompt_char_budget,
            });
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Act(String),
    Finish(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelOutput {
    pub thought: Option<String>,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("model output has neither an Act nor a Finish line")]
pub struct MalformedOutput;

/// Extract the first Thought and the first Act or Finish after it. The
/// prompt ends with a Thought cue, so an untagged first line counts as the
/// thought. Anything after the action is dropped.
pub fn parse_model_output(raw: &str) -> Result<ModelOutput, MalformedOutput> {
    let lines: Vec<&str> = raw.lines().collect();
    let mut thought: Option<String> = None;
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        match StepKind::parse_line(line) {
            Some((StepKind::Thought, text)) if thought.is_none() => {
                thought = Some(text.trim().to_string());
            }
            Some((StepKind::Finish, text)) => {
                return Ok(ModelOutput {
                    thought,
                    action: Action::Finish(text.trim().to_string()),
                });
            }
            Some((StepKind::Act, text)) => {
                if thought.is_none() {
                    return Err(MalformedOutput);
                }
                // a triple-quoted argument may continue on later lines
                let mut act = text.to_string();
                while act.matches("'''").count() % 2 == 1 && i + 1 < lines.len() {
                    i += 1;
                    act.push('\n');
                    act.push_str(lines[i]);
                }
                return Ok(ModelOutput {
                    thought,
                    action: Action::Act(act.trim().to_string()),
                });
            }
            None if i == 0 && !line.trim().is_empty() => {
                thought = Some(line.trim().to_string());
            }
            _ => {}
        }
        i += 1;
    }
    Err(MalformedOutput)
}

pub struct Engine<'a> {
    pub registry: &'a ToolRegistry,
    pub backend: &'a dyn Backend,
    pub config: &'a EngineConfig,
}

impl Engine<'_> {
    fn query(&self, prompt: &str, episode: &mut Episode) -> Result<String, BackendError> {
        let mut attempt = 0;
        loop {
            episode.timing.backend_calls += 1;
            match complete(self.backend, prompt) {
                Err(BackendError::Unavailable(_)) if attempt + 1 < self.config.retry.attempts => {
                    std::thread::sleep(self.config.retry.base_delay * 2u32.pow(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    /// Run one question through `spec`. `depth` is 1 for top-level episodes.
    pub fn run(
        &self,
        spec: &AgentSpec,
        question: &str,
        inputs: &[(String, Value)],
        episode_id: &str,
        depth: usize,
    ) -> Episode {
        let mut ep = Episode::new(&spec.name, episode_id, question);
        let mut store = VariableStore::new();
        for (name, value) in inputs {
            ep.inputs.insert(name.clone(), value.render_inline());
            if let Err(e) = store.bind(name, value.clone()) {
                return fail(ep, Outcome::FatalError, e.to_string());
            }
        }
        let input_names: Vec<String> = inputs.iter().map(|(n, _)| n.clone()).collect();
        let allowed = AllowedTools {
            registry: self.registry,
            allowed: &spec.tools,
        };
        let max_steps = self.config.max_steps.unwrap_or(spec.max_steps).max(1);
        let mut call_index = 0u32;

        for _ in 0..max_steps {
            ep.timing.iterations += 1;
            let prompt = match build_prompt(spec, &allowed, question, &input_names, &ep.steps) {
                Ok(p) => p,
                Err(e) => return fail_with(ep, &store, Outcome::FatalError, e.to_string()),
            };
            let raw = match self.query(&prompt, &mut ep) {
                Ok(r) => r,
                Err(e) => return fail_with(ep, &store, Outcome::FatalError, e.to_string()),
            };
            if self.config.log_backend {
                ep.backend_log.push(BackendExchange {
                    prompt,
                    completion: raw.clone(),
                });
            }
            let out = match parse_model_output(&raw) {
                Ok(o) => o,
                Err(e) => return fail_with(ep, &store, Outcome::MalformedOutput, format!("{e}: {raw:?}")),
            };
            if let Some(t) = out.thought {
                ep.steps.push(TraceStep::new(StepKind::Thought, t));
            }
            let act = match out.action {
                Action::Finish(answer) => {
                    ep.steps.push(TraceStep::new(StepKind::Finish, answer.clone()));
                    ep.answer = Some(answer);
                    ep.outcome = Outcome::Finished;
                    snapshot(&mut ep, &store);
                    return ep;
                }
                Action::Act(a) => a,
            };
            ep.steps.push(TraceStep::new(StepKind::Act, act.clone()));
            let record = self.act(&act, &allowed, &mut store, &mut ep, call_index, depth);
            call_index += 1;
            ep.steps.push(TraceStep::new(StepKind::Observe, record.observation.clone()));
            ep.calls.push(record);
        }
        snapshot(&mut ep, &store);
        ep.outcome = Outcome::StepBudgetExceeded;
        ep.error = Some(format!("no Finish within {max_steps} steps"));
        ep
    }

    fn act(
        &self,
        line: &str,
        allowed: &AllowedTools<'_>,
        store: &mut VariableStore,
        ep: &mut Episode,
        call_index: u32,
        depth: usize,
    ) -> CallRecord {
        let mut record = CallRecord {
            step: ep.steps.len() - 1,
            call_index,
            tool: String::new(),
            status: CallStatus::Ok,
            error_kind: None,
            observation: String::new(),
            sub_episode: None,
            args: Vec::new(),
            output: None,
        };
        let formulation = |mut record: CallRecord, e: CallError| {
            record.status = CallStatus::Formulation;
            record.error_kind = Some(e.kind.as_str().to_string());
            record.observation = e.message;
            record
        };
        let call = match parse_act_line(line) {
            Ok(c) => c,
            Err(e) => return formulation(record, e),
        };
        record.tool = call.tool.clone();
        let validated = match validate(&call, allowed, store) {
            Ok(v) => v,
            Err(e) => return formulation(record, e),
        };
        record.args = validated.args.clone();
        let tool = self
            .registry
            .get(&call.tool)
            .expect("validated tools are registered");
        let mut ctx = CallContext {
            registry: self.registry,
            backend: self.backend,
            config: self.config,
            depth,
            episode_id: &ep.id,
            call_index,
            sub_episodes: Vec::new(),
        };
        let result = tool.call(&validated.args, &mut ctx);
        let subs = std::mem::take(&mut ctx.sub_episodes);
        ep.timing.tool_calls += 1;
        if !subs.is_empty() {
            record.sub_episode = Some(ep.sub_episodes.len());
            ep.sub_episodes.extend(subs);
        }
        match result {
            Ok(value) => {
                let name = match (&call.assign, value.is_heavy()) {
                    (Some(a), _) => Some(a.clone()),
                    (None, true) => Some(store.fresh_name(&call.tool)),
                    (None, false) => None,
                };
                if let Some(n) = &name {
                    store
                        .bind(n, value.clone())
                        .expect("validator checked the assignment target");
                }
                record.observation = render_observation(&value, &call.tool, name.as_deref());
                record.output = Some(value);
            }
            Err(e) => {
                record.status = CallStatus::ToolError;
                record.observation = format!("#ERROR#: {} failed: {e}", call.tool);
            }
        }
        record
    }
}

fn snapshot(ep: &mut Episode, store: &VariableStore) {
    ep.variables = store
        .iter()
        .map(|(k, v)| (k.to_string(), v.tag().as_str().to_string()))
        .collect();
}

fn fail_with(mut ep: Episode, store: &VariableStore, outcome: Outcome, error: String) -> Episode {
    snapshot(&mut ep, store);
    fail(ep, outcome, error)
}

fn fail(mut ep: Episode, outcome: Outcome, error: String) -> Episode {
    ep.outcome = outcome;
    ep.error = Some(error);
    ep.answer = None;
    ep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn over_generated_output_is_trimmed() {
        let raw = "[Thought]: I need to crop\n[Act]: crop = CropImage(image, [0,0,50,50])\n[Observe]: hallucinated\n[Finish]: no";
        let out = parse_model_output(raw).unwrap();
        assert_eq!(out.thought.as_deref(), Some("I need to crop"));
        assert_eq!(out.action, Action::Act("crop = CropImage(image, [0,0,50,50])".into()));
    }

    #[test]
    fn lone_finish_and_garbage() {
        let out = parse_model_output("[Finish]: 1990").unwrap();
        assert_eq!(out.thought, None);
        assert_eq!(out.action, Action::Finish("1990".into()));
        assert_eq!(parse_model_output("no tags at all"), Err(MalformedOutput));
        assert_eq!(parse_model_output(""), Err(MalformedOutput));
        assert_eq!(parse_model_output("[Act]: VQA('x', image)"), Err(MalformedOutput));
    }

    #[test]
    fn untagged_first_line_continues_the_cue() {
        let out = parse_model_output("I should look.\n[Act]: Caption(image)").unwrap();
        assert_eq!(out.thought.as_deref(), Some("I should look."));
        assert_eq!(out.action, Action::Act("Caption(image)".into()));
    }

    #[test]
    fn multiline_triple_quoted_act() {
        let raw = "[Thought]: t\n[Act]: VQA('''line one\nline two''', image)\n[Observe]: x";
        let out = parse_model_output(raw).unwrap();
        assert_eq!(out.action, Action::Act("VQA('''line one\nline two''', image)".into()));
    }
}
