//! The twelve builtin tools, as oracles over the synthetic world.

mod geometry;
mod knowledge;
mod live;
mod vision;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::registry::{CallContext, Mode, Param, Signature, Tool, ToolError, ToolInfo, ToolRegistry};
use crate::value::{ImageRef, Value, ValueTag};
use crate::world::{Scene, World};

pub use geometry::{bounding_box_overlap, spatial_selection};
pub use knowledge::{answer_with_context_oracle, decompose_oracle, google_lens};
pub use live::HttpVqa;
pub use vision::{caption, detect_object, object_in_image, ocr, perturb_answer, vqa};

pub const BUILTIN_TOOLS: [&str; 12] = [
    "GoogleLens",
    "DetectObject",
    "ObjectInImage",
    "OCR",
    "Caption",
    "VQA",
    "CropImage",
    "SpatialSelection",
    "BoundingBoxOverlap",
    "WikipediaArticle",
    "AnswerWithContext",
    "DecomposeQuestion",
];

/// Per-tool probability of a seeded wrong output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub vqa: f64,
    pub caption: f64,
    pub ocr: f64,
    pub object_in_image: f64,
    /// Per detected object: drop or jitter its box.
    pub detect_object: f64,
}

impl NoiseConfig {
    pub fn uniform(p: f64) -> Self {
        Self {
            vqa: p,
            caption: p,
            ocr: p,
            object_in_image: p,
            detect_object: p,
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextMode {
    #[default]
    Oracle,
    /// Delegate to the orchestrator backend with a dedicated prompt.
    LlmBacked,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub noise: NoiseConfig,
    pub answer_with_context: TextMode,
    pub decompose_question: TextMode,
    /// Serve VQA from a live endpoint instead of the scene oracle.
    pub vqa_http: Option<crate::backend::HttpConfig>,
    /// Backbone label per tool name, overriding the tool-table default.
    pub backbones: std::collections::BTreeMap<String, String>,
}

type Handler = dyn Fn(&[Value], &mut CallContext<'_>) -> Result<Value, ToolError> + Send + Sync;

/// A tool backed by a closure.
pub struct FnTool {
    info: ToolInfo,
    f: Box<Handler>,
}

impl FnTool {
    pub fn new(
        info: ToolInfo,
        f: impl Fn(&[Value], &mut CallContext<'_>) -> Result<Value, ToolError> + Send + Sync + 'static,
    ) -> Self {
        Self { info, f: Box::new(f) }
    }
}

impl Tool for FnTool {
    fn info(&self) -> &ToolInfo {
        &self.info
    }

    fn call(&self, args: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, ToolError> {
        (self.f)(args, ctx)
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn info(
    name: &str,
    description: &str,
    inputs: &str,
    returns: &str,
    backbone: &str,
    mode: Mode,
    params: Vec<Param>,
    tag: ValueTag,
) -> ToolInfo {
    ToolInfo {
        name: name.into(),
        description: description.into(),
        inputs: inputs.into(),
        returns: returns.into(),
        backbone: backbone.into(),
        mode,
        signature: Signature::new(params, tag),
    }
}

pub(crate) fn scene_of(img: &ImageRef) -> Result<&Scene, ToolError> {
    img.scene()
        .ok_or_else(|| ToolError::new("this tool needs a synthetic scene, got an external image"))
}

/// The images in an image argument, and whether it was a list.
pub(crate) fn images(v: &Value) -> Result<(Vec<&ImageRef>, bool), ToolError> {
    match v {
        Value::Image(i) => Ok((vec![i], false)),
        Value::ImageList(l) => Ok((l.iter().collect(), true)),
        other => Err(ToolError::new(format!("expected an image, got {}", other.tag()))),
    }
}

pub(crate) fn single_image(v: &Value) -> Result<&ImageRef, ToolError> {
    match images(v)? {
        (imgs, false) => Ok(imgs[0]),
        _ => Err(ToolError::new("expects a single image, got an image list")),
    }
}

pub(crate) fn text_arg(v: &Value) -> Result<&str, ToolError> {
    match v {
        Value::Text(s) | Value::Entity(s) => Ok(s),
        Value::Number(_) => Err(ToolError::new("expected text, got a number")),
        other => Err(ToolError::new(format!("expected text, got {}", other.tag()))),
    }
}

/// Text for a list input, a single value otherwise.
pub(crate) fn texts(items: Vec<String>, list: bool) -> Value {
    if list {
        Value::TextList(items)
    } else {
        Value::Text(items.into_iter().next().unwrap_or_default())
    }
}

/// All builtin tools over `world`.
pub fn builtin_tools(world: Arc<World>, config: &ToolConfig) -> Vec<Arc<dyn Tool>> {
    let n = config.noise;
    let mut tools: Vec<Arc<dyn Tool>> = vec![
        Arc::new(knowledge::google_lens_tool(world.clone())),
        Arc::new(vision::detect_object_tool(n.detect_object)),
        Arc::new(vision::object_in_image_tool(n.object_in_image)),
        Arc::new(vision::ocr_tool(n.ocr)),
        Arc::new(vision::caption_tool(n.caption)),
    ];
    tools.push(match &config.vqa_http {
        Some(http) => Arc::new(HttpVqa::new(http.clone())),
        None => Arc::new(vision::vqa_tool(n.vqa)),
    });
    tools.extend([
        Arc::new(vision::crop_image_tool()) as Arc<dyn Tool>,
        Arc::new(geometry::spatial_selection_tool()),
        Arc::new(geometry::bounding_box_overlap_tool()),
        Arc::new(knowledge::wikipedia_article_tool(world.clone())),
        Arc::new(knowledge::answer_with_context_tool(world.clone(), config.answer_with_context)),
        Arc::new(knowledge::decompose_question_tool(world, config.decompose_question)),
    ]);
    if config.backbones.is_empty() {
        return tools;
    }
    tools
        .into_iter()
        .map(|t| match config.backbones.get(&t.info().name) {
            Some(b) => Arc::new(Rebadged {
                info: ToolInfo {
                    backbone: b.clone(),
                    ..t.info().clone()
                },
                inner: t,
            }) as Arc<dyn Tool>,
            None => t,
        })
        .collect()
}

struct Rebadged {
    info: ToolInfo,
    inner: Arc<dyn Tool>,
}

impl Tool for Rebadged {
    fn info(&self) -> &ToolInfo {
        &self.info
    }

    fn call(&self, args: &[Value], ctx: &mut CallContext<'_>) -> Result<Value, ToolError> {
        self.inner.call(args, ctx)
    }
}

pub fn builtin_registry(world: Arc<World>, config: &ToolConfig) -> ToolRegistry {
    let mut reg = ToolRegistry::new();
    for t in builtin_tools(world, config) {
        reg.register(t).expect("builtin names are distinct");
    }
    reg
}
