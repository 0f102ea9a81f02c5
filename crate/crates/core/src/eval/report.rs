//! Report tables in json, csv and markdown.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::classify::ErrorLabel;
use super::metrics::round1;
use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub reasoning: usize,
    pub formulation: usize,
    pub tool_failure: usize,
    pub none: usize,
}

impl ErrorCounts {
    pub fn add(&mut self, label: ErrorLabel) {
        match label {
            ErrorLabel::Reasoning => self.reasoning += 1,
            ErrorLabel::ToolCallFormulation => self.formulation += 1,
            ErrorLabel::ToolFailure => self.tool_failure += 1,
            ErrorLabel::NoError => self.none += 1,
        }
    }

    pub fn get(&self, label: ErrorLabel) -> usize {
        match label {
            ErrorLabel::Reasoning => self.reasoning,
            ErrorLabel::ToolCallFormulation => self.formulation,
            ErrorLabel::ToolFailure => self.tool_failure,
            ErrorLabel::NoError => self.none,
        }
    }

    pub fn total(&self) -> usize {
        self.reasoning + self.formulation + self.tool_failure + self.none
    }

    pub fn failed(&self) -> usize {
        self.total() - self.none
    }

    /// Percentage of all episodes per label.
    pub fn percentages(&self) -> [(ErrorLabel, f64); 4] {
        let n = self.total().max(1) as f64;
        ErrorLabel::ALL.map(|l| (l, 100.0 * self.get(l) as f64 / n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub name: String,
    pub per_dataset: IndexMap<String, f64>,
    pub overall: f64,
    pub errors: ErrorCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub agents: Vec<AgentReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" | "markdown-table" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl Report {
    pub fn datasets(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for a in &self.agents {
            for d in a.per_dataset.keys() {
                if !out.contains(d) {
                    out.push(d.clone());
                }
            }
        }
        out
    }

    pub fn agent(&self, name: &str) -> Option<&AgentReport> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => serde_json::to_string_pretty(self).expect("report serializes") + "\n",
            ReportFormat::Csv => self.csv(),
            ReportFormat::Markdown => self.markdown(),
        }
    }

    fn csv(&self) -> String {
        let mut out = String::from("dataset,agent,accuracy\n");
        for d in self.datasets() {
            for a in &self.agents {
                if let Some(v) = a.per_dataset.get(&d) {
                    let _ = writeln!(out, "{},{},{v:.1}", csv_field(&d), csv_field(&a.name));
                }
            }
        }
        out
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let names: Vec<&str> = self.agents.iter().map(|a| a.name.as_str()).collect();
        let _ = writeln!(out, "| Dataset | {} |", names.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(names.len()));
        for d in self.datasets() {
            let cells: Vec<String> = self
                .agents
                .iter()
                .map(|a| a.per_dataset.get(&d).map(|v| format!("{v:.1}")).unwrap_or_else(|| "-".into()))
                .collect();
            let _ = writeln!(out, "| {d} | {} |", cells.join(" | "));
        }
        let avg: Vec<String> = self.agents.iter().map(|a| format!("{:.1}", a.overall)).collect();
        let _ = writeln!(out, "| Average | {} |", avg.join(" | "));
        out.push('\n');
        let _ = writeln!(out, "| Error type | {} |", names.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(names.len()));
        for (i, label) in ErrorLabel::ALL.iter().enumerate() {
            let cells: Vec<String> = self
                .agents
                .iter()
                .map(|a| format!("{:.1}%", round1(a.errors.percentages()[i].1)))
                .collect();
            let _ = writeln!(out, "| {} | {} |", label.as_str(), cells.join(" | "));
        }
        out
    }

    /// Difference of each agent against the first one, per dataset.
    pub fn diff_table(&self) -> String {
        let mut out = String::new();
        let Some(base) = self.agents.first() else { return out };
        let others = &self.agents[1..];
        let head: Vec<String> = others.iter().map(|a| format!("{} - {}", a.name, base.name)).collect();
        let _ = writeln!(out, "| Dataset | {} |", head.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(others.len()));
        let row = |out: &mut String, label: &str, f: &dyn Fn(&AgentReport) -> Option<f64>| {
            let b = f(base);
            let cells: Vec<String> = others
                .iter()
                .map(|a| match (f(a), b) {
                    (Some(x), Some(y)) => format!("{:+.1}", round1(x - y)),
                    _ => "-".into(),
                })
                .collect();
            let _ = writeln!(out, "| {label} | {} |", cells.join(" | "));
        };
        for d in self.datasets() {
            row(&mut out, &d, &|a| a.per_dataset.get(&d).copied());
        }
        row(&mut out, "Average", &|a| Some(a.overall));
        out
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<(), EvalError> {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::Io(format!("{}: {e}", dir.display())))?;
        for f in ReportFormat::ALL {
            let path = dir.join(format!("{stem}.{}", f.extension()));
            std::fs::write(&path, self.render(f)).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}
