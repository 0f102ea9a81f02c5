//! Running suites of items through agents, with per-episode dumps and resume.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classify::{classify_error, ErrorLabel, Evidence, Rerun};
use super::metrics::{aggregate, score_item, Matchers};
use super::report::{AgentReport, ErrorCounts, Report};
use super::EvalError;
use crate::agents::{AgentLibrary, AgentSpec, DISPATCHER, NAIVE};
use crate::backend::Backend;
use crate::engine::{Engine, EngineConfig};
use crate::registry::ToolRegistry;
use crate::tools::{builtin_registry, NoiseConfig, ToolConfig};
use crate::trace::Episode;
use crate::value::{ImageRef, Value};
use crate::world::{QaItem, QuestionType, World};

/// How one report column answers each item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentSel {
    /// One spec for every item.
    Spec(String),
    /// Each item goes to the specialist of its own type.
    Specialists,
}

/// Resolve a column name: `hammr`, `naive`, `specialists` or a spec name.
pub fn resolve_agent(name: &str, library: &AgentLibrary) -> Result<AgentSel, EvalError> {
    match name {
        "hammr" => Ok(AgentSel::Spec(DISPATCHER.into())),
        "naive" => Ok(AgentSel::Spec(NAIVE.into())),
        "specialists" => Ok(AgentSel::Specialists),
        n if n == NAIVE || library.get(n).is_some() => Ok(AgentSel::Spec(n.into())),
        n => Err(EvalError::UnknownAgent(n.into())),
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub suite: String,
    pub seed: u64,
    pub tools: ToolConfig,
    pub engine: EngineConfig,
    /// Worker threads; only used when the backend allows concurrent calls.
    pub parallel: usize,
    /// Where dumps and reports go; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub matchers: Matchers,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            suite: "suite".into(),
            seed: 0,
            tools: ToolConfig::default(),
            engine: EngineConfig::default(),
            parallel: 1,
            out_dir: None,
            matchers: Matchers::default(),
        }
    }
}

impl EvalConfig {
    pub fn with_noise(mut self, noise: NoiseConfig) -> Self {
        self.tools.noise = noise;
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub item_id: String,
    pub agent: String,
    pub dataset: String,
    pub qtype: QuestionType,
    pub question: String,
    pub gold: Vec<String>,
    pub answer: Option<String>,
    pub score: f64,
    pub label: ErrorLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
    pub episode: Episode,
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub records: Vec<EpisodeRecord>,
    pub report: Report,
    /// Records loaded from an earlier run instead of executed.
    pub resumed: usize,
}

impl EvalRun {
    pub fn records_of<'a>(&'a self, agent: &'a str) -> impl Iterator<Item = &'a EpisodeRecord> + 'a {
        self.records.iter().filter(move |r| r.agent == agent)
    }
}

pub struct Harness<'a> {
    pub world: Arc<World>,
    pub library: AgentLibrary,
    pub backend: &'a dyn Backend,
    pub config: EvalConfig,
    registry: ToolRegistry,
    reference: ToolRegistry,
    naive: AgentSpec,
}

/// Pre-bound image variables for an item.
pub fn item_inputs(world: &World, item: &QaItem) -> Result<Vec<(String, Value)>, EvalError> {
    let scenes = world
        .scenes_for(item)
        .ok_or_else(|| EvalError::MissingScene(item.id.clone()))?;
    let values = scenes.into_iter().map(|s| Value::Image(ImageRef::Scene(s)));
    Ok(if item.scenes.len() == 1 {
        values.map(|v| ("image".to_string(), v)).collect()
    } else {
        values.enumerate().map(|(i, v)| (format!("image{}", i + 1), v)).collect()
    })
}

fn io(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io(format!("{}: {e}", path.display()))
}

fn safe(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

impl<'a> Harness<'a> {
    pub fn new(world: Arc<World>, library: AgentLibrary, backend: &'a dyn Backend, mut config: EvalConfig) -> Result<Self, EvalError> {
        config.engine.seed = config.seed;
        let mut registry = builtin_registry(world.clone(), &config.tools);
        library.register_all(&mut registry)?;
        let clean = ToolConfig {
            noise: NoiseConfig::default(),
            ..config.tools.clone()
        };
        let reference = builtin_registry(world.clone(), &clean);
        let naive = library.naive();
        Ok(Self {
            world,
            library,
            backend,
            config,
            registry,
            reference,
            naive,
        })
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    fn spec_for(&self, sel: &AgentSel, item: &QaItem) -> Result<&AgentSpec, EvalError> {
        let name = match sel {
            AgentSel::Spec(n) => n.as_str(),
            AgentSel::Specialists => item.qtype.specialist(),
        };
        if name == NAIVE {
            return Ok(&self.naive);
        }
        self.library.get(name).ok_or_else(|| EvalError::UnknownAgent(name.into()))
    }

    /// Run and score one item.
    pub fn run_item(&self, column: &str, sel: &AgentSel, item: &QaItem) -> Result<EpisodeRecord, EvalError> {
        let spec = self.spec_for(sel, item)?;
        let inputs = item_inputs(&self.world, item)?;
        let engine = Engine {
            registry: &self.registry,
            backend: self.backend,
            config: &self.config.engine,
        };
        let episode = engine.run(spec, &item.question, &inputs, &item.id, 1);
        let score = score_item(item, episode.answer.as_deref(), &self.config.matchers)?;
        let c = classify_error(&episode, score, &Rerun { registry: &self.reference });
        Ok(EpisodeRecord {
            item_id: item.id.clone(),
            agent: column.to_string(),
            dataset: item.qtype.dataset().to_string(),
            qtype: item.qtype,
            question: item.question.clone(),
            gold: item.gold.clone(),
            answer: episode.answer.clone(),
            score,
            label: c.label,
            evidence: c.evidence,
            episode,
        })
    }

    fn dump_path(&self, column: &str, item: &QaItem) -> Option<PathBuf> {
        self.config
            .out_dir
            .as_ref()
            .map(|d| d.join("episodes").join(safe(column)).join(format!("{}.json", safe(&item.id))))
    }

    fn threads(&self) -> usize {
        if self.backend.capabilities().supports_concurrent_calls {
            self.config.parallel.max(1)
        } else {
            1
        }
    }

    /// Run every item through every column; reuses dumps already on disk.
    pub fn run(&self, columns: &[String]) -> Result<EvalRun, EvalError> {
        if self.world.items.is_empty() {
            return Err(EvalError::EmptySuite);
        }
        if columns.is_empty() {
            return Err(EvalError::UnknownAgent(String::new()));
        }
        let sels = columns
            .iter()
            .map(|c| resolve_agent(c, &self.library))
            .collect::<Result<Vec<_>, _>>()?;
        let jobs: Vec<(usize, &QaItem)> = (0..columns.len())
            .flat_map(|c| self.world.items.iter().map(move |i| (c, i)))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads())
            .build()
            .map_err(|e| EvalError::Io(e.to_string()))?;
        let results: Vec<Result<(EpisodeRecord, bool), EvalError>> = pool.install(|| {
            jobs.par_iter()
                .map(|(c, item)| self.job(&columns[*c], &sels[*c], item))
                .collect()
        });
        let mut records = Vec::with_capacity(results.len());
        let mut resumed = 0;
        for r in results {
            let (rec, was_resumed) = r?;
            resumed += was_resumed as usize;
            records.push(rec);
        }
        let report = self.report(columns, &records);
        if let Some(dir) = &self.config.out_dir {
            report.write(dir, "report")?;
        }
        Ok(EvalRun { records, report, resumed })
    }

    fn job(&self, column: &str, sel: &AgentSel, item: &QaItem) -> Result<(EpisodeRecord, bool), EvalError> {
        let path = self.dump_path(column, item);
        if let Some(p) = &path {
            if let Ok(text) = std::fs::read_to_string(p) {
                if let Ok(rec) = serde_json::from_str::<EpisodeRecord>(&text) {
                    return Ok((rec, true));
                }
            }
        }
        let rec = self.run_item(column, sel, item)?;
        if let Some(p) = &path {
            std::fs::create_dir_all(p.parent().unwrap()).map_err(|e| io(p, e))?;
            let text = serde_json::to_string_pretty(&rec).expect("record serializes") + "\n";
            std::fs::write(p, text).map_err(|e| io(p, e))?;
        }
        Ok((rec, false))
    }

    fn report(&self, columns: &[String], records: &[EpisodeRecord]) -> Report {
        let agents = columns
            .iter()
            .map(|col| {
                let mut scores: IndexMap<String, Vec<f64>> = IndexMap::new();
                for t in QuestionType::ALL {
                    if self.world.items.iter().any(|i| i.qtype == t) {
                        scores.insert(t.dataset().to_string(), Vec::new());
                    }
                }
                let mut errors = ErrorCounts::default();
                for r in records.iter().filter(|r| &r.agent == col) {
                    scores.entry(r.dataset.clone()).or_default().push(r.score);
                    errors.add(r.label);
                }
                let m = aggregate(&scores);
                AgentReport {
                    name: col.clone(),
                    per_dataset: m.per_dataset,
                    overall: m.overall,
                    errors,
                }
            })
            .collect();
        Report {
            suite: self.config.suite.clone(),
            seed: self.config.seed,
            agents,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::OraclePlanner;
    use crate::world::{generate_suite, SuiteConfig};

    fn world(per_type: usize) -> Arc<World> {
        Arc::new(
            generate_suite(&SuiteConfig {
                seed: 3,
                per_type,
                ..SuiteConfig::default()
            })
            .unwrap(),
        )
    }

    #[test]
    fn specialists_and_hammr_are_perfect_without_noise() {
        let h = Harness::new(world(4), AgentLibrary::shipped(), &OraclePlanner, EvalConfig::default()).unwrap();
        let run = h.run(&["specialists".into(), "hammr".into(), "naive".into()]).unwrap();
        for r in &run.records {
            assert_eq!(r.score, 1.0, "{} {} {:?} gold {:?}\n{}", r.agent, r.item_id, r.answer, r.gold, r.episode.render(None));
        }
        assert_eq!(run.report.agents[0].overall, 100.0);
    }

    #[test]
    fn empty_suite_and_unknown_agent() {
        let h = Harness::new(Arc::new(World::default()), AgentLibrary::shipped(), &OraclePlanner, EvalConfig::default()).unwrap();
        assert_eq!(h.run(&["hammr".into()]).unwrap_err(), EvalError::EmptySuite);
        let lib = AgentLibrary::shipped();
        assert!(matches!(resolve_agent("nobody", &lib), Err(EvalError::UnknownAgent(_))));
        assert_eq!(resolve_agent("OCRReasoningAgent", &lib).unwrap(), AgentSel::Spec("OCRReasoningAgent".into()));
    }

    #[test]
    fn resume_skips_finished_dumps() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = EvalConfig {
            out_dir: Some(dir.path().to_path_buf()),
            ..EvalConfig::default()
        };
        let w = world(1);
        let h = Harness::new(w.clone(), AgentLibrary::shipped(), &OraclePlanner, cfg.clone()).unwrap();
        let first = h.run(&["hammr".into()]).unwrap();
        assert_eq!(first.resumed, 0);
        let second = Harness::new(w, AgentLibrary::shipped(), &OraclePlanner, cfg).unwrap().run(&["hammr".into()]).unwrap();
        assert_eq!(second.resumed, 8);
        assert_eq!(first.report, second.report);
    }
}
