//! Scoring, error attribution and suite runs.

mod classify;
mod harness;
mod metrics;
mod report;

use thiserror::Error;

pub use classify::{classify_error, Classification, ErrorLabel, Evidence, Rerun, ToolGroundTruth};
pub use harness::{item_inputs, resolve_agent, AgentSel, EpisodeRecord, EvalConfig, EvalRun, Harness};
pub use metrics::{
    aggregate, aggregate_values, exact_match, normalize, round1, score_item, vqa_accuracy, Matcher,
    Matchers, MetricResult,
};
pub use report::{AgentReport, ErrorCounts, Report, ReportFormat};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no soft matcher named {0:?} is registered")]
    NoMatcherRegistered(String),
    #[error("the suite has no items")]
    EmptySuite,
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("item {0} refers to a scene that is not loaded")]
    MissingScene(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentError),
}
