//! Replay backend driven by a script file.
//!
//! ```json
//! {"mode": "strict-sequence",
//!  "steps": [{"match_substring": "You are X", "emit": "[Thought]: ...\n[Act]: ..."},
//!            {"match_pattern": "\\[Observe\\]: yes\\n\\[Thought\\]: $", "emit": "[Finish]: yes"}]}
//! ```
//!
//! `strict-sequence` consumes steps in order and fails if a step's predicate
//! does not match the prompt. `rule-table` answers every prompt with the
//! first step whose predicate matches. A step without a predicate always
//! matches.

use std::path::Path;
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, Capabilities};
use crate::engine::parse_model_output;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScriptMode {
    StrictSequence,
    RuleTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    match_substring: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    match_pattern: Option<String>,
    emit: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    mode: ScriptMode,
    steps: Vec<RawStep>,
}

#[derive(Debug, Clone)]
pub enum Predicate {
    Always,
    Substring(String),
    Pattern(Regex),
}

impl Predicate {
    pub fn matches(&self, prompt: &str) -> bool {
        match self {
            Predicate::Always => true,
            Predicate::Substring(s) => prompt.contains(s.as_str()),
            Predicate::Pattern(re) => re.is_match(prompt),
        }
    }

    fn describe(&self) -> String {
        match self {
            Predicate::Always => "anything".into(),
            Predicate::Substring(s) => s.clone(),
            Predicate::Pattern(re) => format!("/{}/", re.as_str()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub predicate: Predicate,
    pub emit: String,
}

#[derive(Debug, Clone)]
pub struct Script {
    pub mode: ScriptMode,
    pub steps: Vec<Rule>,
}

impl Script {
    pub fn parse(text: &str, origin: &str) -> Result<Script, BackendError> {
        let err = |message: String| BackendError::Parse {
            path: origin.to_string(),
            message,
        };
        let raw: RawScript = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let mut steps = Vec::with_capacity(raw.steps.len());
        for (i, s) in raw.steps.into_iter().enumerate() {
            let predicate = match (s.match_substring, s.match_pattern) {
                (Some(_), Some(_)) => {
                    return Err(err(format!("step {i}: give match_substring or match_pattern, not both")))
                }
                (Some(sub), None) => Predicate::Substring(sub),
                (None, Some(p)) => Predicate::Pattern(
                    Regex::new(&p).map_err(|e| err(format!("step {i}: bad pattern: {e}")))?,
                ),
                (None, None) => Predicate::Always,
            };
            if raw.mode == ScriptMode::StrictSequence && parse_model_output(&s.emit).is_err() {
                return Err(err(format!("step {i}: emit has no Act or Finish line")));
            }
            steps.push(Rule {
                predicate,
                emit: s.emit,
            });
        }
        Ok(Script {
            mode: raw.mode,
            steps,
        })
    }

    /// A strict sequence that ignores the prompt contents.
    pub fn sequence(emits: impl IntoIterator<Item = impl Into<String>>) -> Script {
        Script {
            mode: ScriptMode::StrictSequence,
            steps: emits
                .into_iter()
                .map(|e| Rule {
                    predicate: Predicate::Always,
                    emit: e.into(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let raw = RawScript {
            mode: self.mode,
            steps: self
                .steps
                .iter()
                .map(|r| {
                    let (match_substring, match_pattern) = match &r.predicate {
                        Predicate::Always => (None, None),
                        Predicate::Substring(s) => (Some(s.clone()), None),
                        Predicate::Pattern(p) => (None, Some(p.as_str().to_string())),
                    };
                    RawStep {
                        match_substring,
                        match_pattern,
                        emit: r.emit.clone(),
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("script serializes")
    }
}

pub fn load_script(path: &Path) -> Result<Script, BackendError> {
    let text = std::fs::read_to_string(path).map_err(|e| BackendError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Script::parse(&text, &path.display().to_string())
}

pub struct ScriptedBackend {
    script: Script,
    cursor: Mutex<usize>,
    caps: Capabilities,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            cursor: Mutex::new(0),
            caps: Capabilities::default(),
        }
    }

    pub fn with_capabilities(mut self, caps: Capabilities) -> Self {
        self.caps = Capabilities {
            supports_concurrent_calls: false,
            ..caps
        };
        self
    }

    /// Steps consumed so far (strict mode).
    pub fn position(&self) -> usize {
        *self.cursor.lock().unwrap()
    }

    pub fn reset(&self) {
        *self.cursor.lock().unwrap() = 0;
    }
}

impl Backend for ScriptedBackend {
    fn capabilities(&self) -> Capabilities {
        self.caps
    }

    fn generate(&self, prompt: &str) -> Result<String, BackendError> {
        match self.script.mode {
            ScriptMode::StrictSequence => {
                let mut cursor = self.cursor.lock().unwrap();
                let step = self
                    .script
                    .steps
                    .get(*cursor)
                    .ok_or(BackendError::ScriptExhausted(*cursor))?;
                if !step.predicate.matches(prompt) {
                    return Err(BackendError::ScriptMismatch {
                        step: *cursor,
                        expected: step.predicate.describe(),
                    });
                }
                *cursor += 1;
                Ok(step.emit.clone())
            }
            ScriptMode::RuleTable => self
                .script
                .steps
                .iter()
                .find(|r| r.predicate.matches(prompt))
                .map(|r| r.emit.clone())
                .ok_or(BackendError::ScriptMismatch {
                    step: 0,
                    expected: "any rule".into(),
                }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::complete;

    #[test]
    fn strict_sequence_runs_out() {
        let b = ScriptedBackend::new(Script::sequence(["[Finish]: a", "[Finish]: b"]));
        assert_eq!(complete(&b, "p").unwrap(), "[Finish]: a");
        assert_eq!(complete(&b, "p").unwrap(), "[Finish]: b");
        assert_eq!(complete(&b, "p"), Err(BackendError::ScriptExhausted(2)));
    }

    #[test]
    fn strict_predicate_mismatch() {
        let s = Script::parse(
            r#"{"mode": "strict-sequence", "steps": [{"match_substring": "You are A", "emit": "[Finish]: x"}]}"#,
            "t",
        )
        .unwrap();
        let b = ScriptedBackend::new(s);
        assert!(matches!(complete(&b, "You are B"), Err(BackendError::ScriptMismatch { step: 0, .. })));
        assert_eq!(complete(&b, "You are A").unwrap(), "[Finish]: x");
    }

    #[test]
    fn rule_table_first_match_wins() {
        let s = Script::parse(
            r#"{"mode": "rule-table", "steps": [
                {"match_pattern": "cat|dog", "emit": "first"},
                {"match_substring": "dog", "emit": "second"},
                {"emit": "fallback"}]}"#,
            "t",
        )
        .unwrap();
        let b = ScriptedBackend::new(s);
        for _ in 0..2 {
            assert_eq!(complete(&b, "a dog").unwrap(), "first");
            assert_eq!(complete(&b, "a bird").unwrap(), "fallback");
        }
    }

    #[test]
    fn parse_errors() {
        let bad = [
            r#"{"mode": "rule-table", "steps": [{"match_pattern": "(", "emit": "x"}]}"#,
            r#"{"mode": "sometimes", "steps": []}"#,
            r#"{"mode": "rule-table", "steps": [{"match_substring": "a", "match_pattern": "b", "emit": "x"}]}"#,
            r#"{"mode": "strict-sequence", "steps": [{"emit": "no tags"}]}"#,
            r#"{"mode": "rule-table", "steps": [{"mach_substring": "a", "emit": "x"}]}"#,
            "not json",
        ];
        for text in bad {
            assert!(matches!(Script::parse(text, "t"), Err(BackendError::Parse { .. })), "{text}");
        }
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"mode": "rule-table", "steps": [{"match_pattern": "a+", "emit": "x"}, {"emit": "y"}]}"#;
        let s = Script::parse(text, "t").unwrap();
        let again = Script::parse(&s.to_json(), "t").unwrap();
        assert_eq!(again.steps.len(), 2);
        assert_eq!(again.to_json(), s.to_json());
    }
}
