//! Orchestrator backends: the completion contract and its implementations.

mod confusable;
mod http;
mod planner;
mod scripted;

use thiserror::Error;

pub use confusable::ConfusableBackend;
pub use http::{HttpBackend, HttpConfig};
pub use planner::OraclePlanner;
pub use scripted::{load_script, Rule, Script, ScriptMode, ScriptedBackend};

pub const DEFAULT_MAX_INPUT_CHARS: usize = 32768;
pub const DEFAULT_MAX_OUTPUT_CHARS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub max_input_chars: usize,
    pub max_output_chars: usize,
    pub supports_concurrent_calls: bool,
}

impl Default for Capabilities {
    fn default() -> Self {
        Self {
            max_input_chars: DEFAULT_MAX_INPUT_CHARS,
            max_output_chars: DEFAULT_MAX_OUTPUT_CHARS,
            supports_concurrent_calls: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("prompt of {len} chars exceeds the backend limit of {max}")]
    PromptTooLong { len: usize, max: usize },
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("script exhausted after {0} steps")]
    ScriptExhausted(usize),
    #[error("script step {step} expects the prompt to match {expected:?}")]
    ScriptMismatch { step: usize, expected: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

pub trait Backend: Send + Sync {
    fn capabilities(&self) -> Capabilities;
    /// Raw completion; callers go through [`complete`].
    fn generate(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Budget-checked completion: over-long prompts fail before reaching the
/// backend, and completions are cut at the output limit.
pub fn complete(backend: &dyn Backend, prompt: &str) -> Result<String, BackendError> {
    let caps = backend.capabilities();
    let len = prompt.chars().count();
    if len > caps.max_input_chars {
        return Err(BackendError::PromptTooLong {
            len,
            max: caps.max_input_chars,
        });
    }
    let mut out = backend.generate(prompt)?;
    if let Some((idx, _)) = out.char_indices().nth(caps.max_output_chars) {
        out.truncate(idx);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo(usize);

    impl Backend for Echo {
        fn capabilities(&self) -> Capabilities {
            Capabilities {
                max_input_chars: 10,
                max_output_chars: self.0,
                supports_concurrent_calls: true,
            }
        }

        fn generate(&self, prompt: &str) -> Result<String, BackendError> {
            Ok(prompt.repeat(3))
        }
    }

    #[test]
    fn budget_checks() {
        assert_eq!(
            complete(&Echo(100), "01234567890"),
            Err(BackendError::PromptTooLong { len: 11, max: 10 })
        );
        assert_eq!(complete(&Echo(4), "abc").unwrap(), "abca");
        assert_eq!(complete(&Echo(100), "ab").unwrap(), "ababab");
    }
}
