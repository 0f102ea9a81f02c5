//! Answer scoring and per-dataset aggregation.

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::world::{Metric, QaItem};

/// Lowercase, strip ASCII punctuation, collapse whitespace, drop a leading article.
pub fn normalize(s: &str) -> String {
    let lowered: String = s
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    let mut words: Vec<&str> = lowered.split_whitespace().collect();
    if words.len() > 1 && matches!(words[0], "a" | "an" | "the") {
        words.remove(0);
    }
    words.join(" ")
}

pub fn exact_match(pred: &str, gold: &str) -> f64 {
    if normalize(pred) == normalize(gold) {
        1.0
    } else {
        0.0
    }
}

/// `min(matching refs / 3, 1)`.
pub fn vqa_accuracy(pred: &str, refs: &[String]) -> f64 {
    let p = normalize(pred);
    let hits = refs.iter().filter(|r| normalize(r) == p).count().min(3);
    hits as f64 / 3.0
}

pub type Matcher = Arc<dyn Fn(&str, &str) -> f64 + Send + Sync>;

/// Named soft matchers; `exact_match` is always present unless removed.
#[derive(Clone)]
pub struct Matchers {
    map: HashMap<String, Matcher>,
    pub active: String,
}

impl Default for Matchers {
    fn default() -> Self {
        let mut map: HashMap<String, Matcher> = HashMap::new();
        map.insert("exact_match".into(), Arc::new(exact_match));
        Self {
            map,
            active: "exact_match".into(),
        }
    }
}

impl std::fmt::Debug for Matchers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut names: Vec<_> = self.map.keys().collect();
        names.sort();
        f.debug_struct("Matchers").field("names", &names).field("active", &self.active).finish()
    }
}

impl Matchers {
    /// A registry with no matchers at all.
    pub fn empty() -> Self {
        Self {
            map: HashMap::new(),
            active: "exact_match".into(),
        }
    }

    pub fn register(&mut self, name: &str, m: impl Fn(&str, &str) -> f64 + Send + Sync + 'static) {
        self.map.insert(name.to_string(), Arc::new(m));
    }

    pub fn with_active(mut self, name: &str) -> Self {
        self.active = name.to_string();
        self
    }

    pub fn soft_match(&self, pred: &str, gold: &str) -> Result<f64, EvalError> {
        let m = self
            .map
            .get(&self.active)
            .ok_or_else(|| EvalError::NoMatcherRegistered(self.active.clone()))?;
        Ok(m(pred, gold).clamp(0.0, 1.0))
    }
}

/// Score an answer with the item's metric; a missing answer scores 0.
pub fn score_item(item: &QaItem, answer: Option<&str>, matchers: &Matchers) -> Result<f64, EvalError> {
    let Some(pred) = answer else { return Ok(0.0) };
    Ok(match item.metric {
        Metric::ExactMatch => exact_match(pred, item.primary_gold()),
        Metric::VqaAccuracy => vqa_accuracy(pred, &item.gold),
        Metric::SoftMatch => matchers.soft_match(pred, item.primary_gold())?,
    })
}

/// One decimal, half rounded up; tolerant of binary representation error.
pub fn round1(x: f64) -> f64 {
    ((x * 10.0) + 0.5 + 1e-9).floor() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub per_item: Vec<f64>,
    /// Dataset → accuracy in percent, one decimal.
    pub per_dataset: IndexMap<String, f64>,
    pub overall: f64,
    /// Mean of the unrounded per-dataset accuracies.
    pub overall_exact: f64,
}

/// Per-dataset percentages and their unweighted mean.
pub fn aggregate(per_dataset_scores: &IndexMap<String, Vec<f64>>) -> MetricResult {
    let mut per_dataset = IndexMap::new();
    let mut exact = Vec::new();
    let mut per_item = Vec::new();
    for (name, scores) in per_dataset_scores {
        let acc = if scores.is_empty() {
            0.0
        } else {
            100.0 * scores.iter().sum::<f64>() / scores.len() as f64
        };
        exact.push(acc);
        per_dataset.insert(name.clone(), round1(acc));
        per_item.extend(scores.iter().copied());
    }
    let overall_exact = aggregate_values(&exact);
    MetricResult {
        per_item,
        per_dataset,
        overall: round1(overall_exact),
        overall_exact,
    }
}

/// Unweighted mean of already-computed per-dataset percentages.
pub fn aggregate_values(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
