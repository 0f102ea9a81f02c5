//! The synthetic world standing in for real VQA datasets: scenes, a
//! knowledge base, question generators for the eight question types and
//! brute-force ground-truth solvers.

mod kb;
mod manifest;
mod oracle;
mod questions;
mod scene;
mod solver;
pub mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kb::{best_fact, fact_keywords, normalize_entity_name, Entity, EntityKind, KnowledgeBase};
pub use manifest::{generate_suite, SuiteConfig, World};
pub use oracle::oracle_answer;
pub use questions::{
    classify_question, generate_question, parse_question, ItemMetadata, ParsedQuestion, QaItem,
    QuestionConfig, Template, ANSWER_SLOT, TEMPLATES, ocr_class, template_decomposition,
};
pub use scene::{
    generate_scene, pointed_at, random_text, Canvas, Point, Scene, SceneConfig, SceneObject,
    DEFAULT_CONFIDENCE, DEFAULT_HEIGHT, DEFAULT_WIDTH,
};
pub use solver::answer_visual_question;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("infeasible scene config: {0}")]
    InfeasibleConfig(String),
    #[error("crop does not intersect the image")]
    EmptyCrop,
    #[error("scene does not support question type {0}")]
    UnsupportedType(QuestionType),
    #[error("{0}")]
    Io(String),
    #[error("malformed world file {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    LocalPointing,
    LookTwice,
    SingleHop,
    TwoHop,
    TwoImage,
    Spatial,
    Counting,
    OcrReasoning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ExactMatch,
    VqaAccuracy,
    SoftMatch,
}

impl QuestionType {
    pub const ALL: [QuestionType; 8] = [
        QuestionType::LocalPointing,
        QuestionType::LookTwice,
        QuestionType::SingleHop,
        QuestionType::TwoHop,
        QuestionType::TwoImage,
        QuestionType::Spatial,
        QuestionType::Counting,
        QuestionType::OcrReasoning,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::LocalPointing => "local_pointing",
            QuestionType::LookTwice => "look_twice",
            QuestionType::SingleHop => "single_hop",
            QuestionType::TwoHop => "two_hop",
            QuestionType::TwoImage => "two_image",
            QuestionType::Spatial => "spatial",
            QuestionType::Counting => "counting",
            QuestionType::OcrReasoning => "ocr_reasoning",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Row label in result tables.
    pub fn dataset(self) -> &'static str {
        match self {
            QuestionType::LocalPointing => "PointQA local",
            QuestionType::LookTwice => "PointQA look twice",
            QuestionType::SingleHop => "EncVQA single hop",
            QuestionType::TwoHop => "EncVQA two hop",
            QuestionType::TwoImage => "NLVR2",
            QuestionType::Spatial => "GQA",
            QuestionType::Counting => "TallyQA",
            QuestionType::OcrReasoning => "TextVQA",
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            QuestionType::SingleHop | QuestionType::TwoHop => Metric::SoftMatch,
            QuestionType::OcrReasoning => Metric::VqaAccuracy,
            _ => Metric::ExactMatch,
        }
    }

    /// Name of the specialist agent for this type.
    pub fn specialist(self) -> &'static str {
        match self {
            QuestionType::LocalPointing => "PointQALocalAgent",
            QuestionType::LookTwice => "PointQALookTwiceAgent",
            QuestionType::SingleHop => "SingleHopEncyclopedicAgent",
            QuestionType::TwoHop => "TwoHopEncyclopedicAgent",
            QuestionType::TwoImage => "TwoImageVQAAgent",
            QuestionType::Spatial => "SpatialReasoningAgent",
            QuestionType::Counting => "ComplexCountingAgent",
            QuestionType::OcrReasoning => "OCRReasoningAgent",
        }
    }

    pub fn image_count(self) -> usize {
        if self == QuestionType::TwoImage {
            2
        } else {
            1
        }
    }
}

impl std::fmt::Display for QuestionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
