//! Multimodal values, box geometry and the per-episode variable store.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::Scene;

/// Detections below this confidence render with a `(low confidence)` suffix.
pub const LOW_CONFIDENCE: f64 = 0.5;

/// Axis-aligned integer-pixel box `[left, top, width, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Box2D {
    pub left: i64,
    pub top: i64,
    pub width: i64,
    pub height: i64,
}

impl Box2D {
    pub fn new(left: i64, top: i64, width: i64, height: i64) -> Self {
        debug_assert!(width >= 0 && height >= 0, "negative box extent");
        Self {
            left,
            top,
            width: width.max(0),
            height: height.max(0),
        }
    }

    pub fn right(&self) -> i64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> i64 {
        self.top + self.height
    }

    pub fn area(&self) -> i64 {
        self.width * self.height
    }

    /// Center in doubled pixel units, so comparisons stay exact.
    pub fn center2(&self) -> (i64, i64) {
        (2 * self.left + self.width, 2 * self.top + self.height)
    }

    pub fn center(&self) -> (f64, f64) {
        let (x, y) = self.center2();
        (x as f64 / 2.0, y as f64 / 2.0)
    }

    /// Intersection, or `None` when the overlap has zero area.
    pub fn intersect(&self, other: &Box2D) -> Option<Box2D> {
        let left = self.left.max(other.left);
        let top = self.top.max(other.top);
        let right = self.right().min(other.right());
        let bottom = self.bottom().min(other.bottom());
        if right > left && bottom > top {
            Some(Box2D::new(left, top, right - left, bottom - top))
        } else {
            None
        }
    }

    pub fn intersection_area(&self, other: &Box2D) -> i64 {
        self.intersect(other).map_or(0, |b| b.area())
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Box2D {
        Box2D::new(self.left + dx, self.top + dy, self.width, self.height)
    }

    pub fn contains_point(&self, x: i64, y: i64) -> bool {
        x >= self.left && x < self.right() && y >= self.top && y < self.bottom()
    }
}

impl fmt::Display for Box2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "left:{}/top:{}/width:{}/height:{}",
            self.left, self.top, self.width, self.height
        )
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &Box2D, b: &Box2D) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: Box2D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl ScoredBox {
    pub fn plain(bbox: Box2D) -> Self {
        Self {
            bbox,
            confidence: None,
        }
    }
}

/// Boxes, optionally tagged with the class they were detected as.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxList {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub boxes: Vec<ScoredBox>,
}

impl BoxList {
    pub fn unlabeled(boxes: impl IntoIterator<Item = Box2D>) -> Self {
        Self {
            label: None,
            boxes: boxes.into_iter().map(ScoredBox::plain).collect(),
        }
    }

    pub fn iter_boxes(&self) -> impl Iterator<Item = &Box2D> {
        self.boxes.iter().map(|b| &b.bbox)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub entity_id: String,
    pub title: String,
    pub text: String,
}

/// Handle to an image: a synthetic scene or an opaque token for live backends.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageRef {
    Scene(Arc<Scene>),
    External(String),
}

impl ImageRef {
    pub fn scene(&self) -> Option<&Scene> {
        match self {
            ImageRef::Scene(s) => Some(s),
            ImageRef::External(_) => None,
        }
    }

    /// Short stable identifier used in dumps.
    pub fn handle(&self) -> String {
        match self {
            ImageRef::Scene(s) => format!("scene:{}", s.id),
            ImageRef::External(t) => format!("external:{t}"),
        }
    }
}

impl From<Scene> for ImageRef {
    fn from(scene: Scene) -> Self {
        ImageRef::Scene(Arc::new(scene))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueTag {
    ImageRef,
    ImageList,
    Text,
    Box,
    BoxList,
    ScoreList,
    Entity,
    Article,
    Number,
    Boolean,
    TextList,
}

impl ValueTag {
    pub fn is_heavy(self) -> bool {
        matches!(self, ValueTag::ImageRef | ValueTag::ImageList | ValueTag::Article)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ValueTag::ImageRef => "image",
            ValueTag::ImageList => "image list",
            ValueTag::Text => "text",
            ValueTag::Box => "box",
            ValueTag::BoxList => "boxes",
            ValueTag::ScoreList => "scores",
            ValueTag::Entity => "entity",
            ValueTag::Article => "article",
            ValueTag::Number => "number",
            ValueTag::Boolean => "yes/no",
            ValueTag::TextList => "text list",
        }
    }
}

impl fmt::Display for ValueTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Image(ImageRef),
    ImageList(Vec<ImageRef>),
    Text(String),
    Box(Box2D),
    BoxList(BoxList),
    ScoreList(Vec<f64>),
    Entity(String),
    Article(Article),
    Number(f64),
    Boolean(bool),
    TextList(Vec<String>),
}

impl Value {
    pub fn tag(&self) -> ValueTag {
        match self {
            Value::Image(_) => ValueTag::ImageRef,
            Value::ImageList(_) => ValueTag::ImageList,
            Value::Text(_) => ValueTag::Text,
            Value::Box(_) => ValueTag::Box,
            Value::BoxList(_) => ValueTag::BoxList,
            Value::ScoreList(_) => ValueTag::ScoreList,
            Value::Entity(_) => ValueTag::Entity,
            Value::Article(_) => ValueTag::Article,
            Value::Number(_) => ValueTag::Number,
            Value::Boolean(_) => ValueTag::Boolean,
            Value::TextList(_) => ValueTag::TextList,
        }
    }

    pub fn is_heavy(&self) -> bool {
        self.tag().is_heavy()
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    /// Text-like payload (text, entity name, or the article body).
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) | Value::Entity(s) => Some(s),
            Value::Article(a) => Some(&a.text),
            _ => None,
        }
    }

    /// Inline rendering of a light value.
    pub fn render_inline(&self) -> String {
        match self {
            Value::Text(s) | Value::Entity(s) => s.clone(),
            Value::Box(b) => b.to_string(),
            Value::BoxList(list) => render_box_list(list),
            Value::ScoreList(scores) => scores
                .iter()
                .map(|s| format!("{s:.3}"))
                .collect::<Vec<_>>()
                .join(", "),
            Value::Number(n) => format_number(*n),
            Value::Boolean(b) => yes_no(*b).to_string(),
            Value::TextList(items) => format!("[{}].", items.join(", ")),
            Value::Image(img) => img.handle(),
            Value::ImageList(imgs) => imgs
                .iter()
                .map(ImageRef::handle)
                .collect::<Vec<_>>()
                .join(", "),
            Value::Article(a) => a.title.clone(),
        }
    }
}

pub fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

fn render_box_list(list: &BoxList) -> String {
    if list.is_empty() {
        return match &list.label {
            Some(label) => format!("no {label} found"),
            None => "no boxes".to_string(),
        };
    }
    list.boxes
        .iter()
        .map(|sb| {
            let mut s = match &list.label {
                Some(label) => format!("{label} at {}", sb.bbox),
                None => sb.bbox.to_string(),
            };
            if sb.confidence.is_some_and(|c| c < LOW_CONFIDENCE) {
                s.push_str(" (low confidence)");
            }
            s
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Observation text for a tool result.
///
/// Light values are inlined. Heavy values are referred to by the variable
/// they were stored in, which the caller must supply.
pub fn render_observation(result: &Value, tool: &str, assigned: Option<&str>) -> String {
    if !result.is_heavy() {
        return result.render_inline();
    }
    let name = assigned.unwrap_or_default();
    match result {
        Value::Article(_) => {
            format!("I have stored the output of {tool} in the following variables: {name}.")
        }
        _ => format!("Output of `{tool}` is stored in the variable: `{name}`"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("variable {0} is already defined")]
    DuplicateName(String),
    #[error("invalid variable name {0:?}")]
    InvalidName(String),
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Ordered, append-only name → value bindings for one episode.
#[derive(Debug, Clone, Default)]
pub struct VariableStore {
    bindings: IndexMap<String, Value>,
}

impl VariableStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, name: &str, value: Value) -> Result<(), StoreError> {
        if !is_valid_name(name) {
            return Err(StoreError::InvalidName(name.to_string()));
        }
        if self.bindings.contains_key(name) {
            return Err(StoreError::DuplicateName(name.to_string()));
        }
        self.bindings.insert(name.to_string(), value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Lowercased tool name, suffixed with the smallest free integer ≥ 2.
    pub fn fresh_name(&self, tool: &str) -> String {
        let base: String = tool
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
            .collect::<String>()
            .to_ascii_lowercase();
        let base = if is_valid_name(&base) {
            base
        } else {
            format!("v{base}")
        };
        if !self.contains(&base) {
            return base;
        }
        (2..)
            .map(|i| format!("{base}{i}"))
            .find(|n| !self.contains(n))
            .expect("unbounded suffix search")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img() -> Value {
        Value::Image(ImageRef::External("s0".into()))
    }

    #[test]
    fn box_serialization() {
        let b = Box2D::new(250, 161, 120, 161);
        assert_eq!(b.to_string(), "left:250/top:161/width:120/height:161");
    }

    #[test]
    fn bind_preserves_order_and_rejects_rebinding() {
        let mut store = VariableStore::new();
        store.bind("image", img()).unwrap();
        store.bind("crop", img()).unwrap();
        assert_eq!(store.names().collect::<Vec<_>>(), ["image", "crop"]);
        assert_eq!(
            store.bind("image", img()),
            Err(StoreError::DuplicateName("image".into()))
        );
        assert_eq!(
            store.bind("Crop", img()),
            Err(StoreError::InvalidName("Crop".into()))
        );
        assert!(store.bind("2x", img()).is_err());
    }

    #[test]
    fn fresh_name_suffixes() {
        let mut store = VariableStore::new();
        store.bind("image", img()).unwrap();
        assert_eq!(store.fresh_name("CropImage"), "cropimage");
        store.bind("cropimage", img()).unwrap();
        assert_eq!(store.fresh_name("CropImage"), "cropimage2");
        store.bind("cropimage2", img()).unwrap();
        assert_eq!(store.fresh_name("CropImage"), "cropimage3");
    }

    #[test]
    fn observation_strings() {
        assert_eq!(
            render_observation(&img(), "CropImage", Some("crop")),
            "Output of `CropImage` is stored in the variable: `crop`"
        );
        let article = Value::Article(Article {
            entity_id: "e".into(),
            title: "t".into(),
            text: "x".into(),
        });
        assert_eq!(
            render_observation(&article, "WikipediaArticle", Some("article")),
            "I have stored the output of WikipediaArticle in the following variables: article."
        );
        let dets = Value::BoxList(BoxList {
            label: Some("cathedral".into()),
            boxes: vec![ScoredBox {
                bbox: Box2D::new(250, 161, 120, 161),
                confidence: Some(0.3),
            }],
        });
        assert_eq!(
            render_observation(&dets, "DetectObject", None),
            "cathedral at left:250/top:161/width:120/height:161 (low confidence)"
        );
        let none = Value::BoxList(BoxList {
            label: Some("car".into()),
            boxes: vec![],
        });
        assert_eq!(render_observation(&none, "DetectObject", None), "no car found");
        assert_eq!(render_observation(&Value::Boolean(true), "ObjectInImage", None), "yes");
        assert_eq!(
            render_observation(&Value::ScoreList(vec![1.0, 0.142857]), "BoundingBoxOverlap", None),
            "1.000, 0.143"
        );
    }

    #[test]
    fn iou_examples() {
        let b = Box2D::new(3, 4, 10, 12);
        assert_eq!(iou(&b, &b), 1.0);
        assert_eq!(iou(&Box2D::new(0, 0, 10, 10), &Box2D::new(20, 20, 5, 5)), 0.0);
        let v = iou(&Box2D::new(0, 0, 50, 50), &Box2D::new(25, 25, 50, 50));
        assert!((v - 625.0 / 4375.0).abs() < 1e-12);
        let zero = Box2D::new(5, 5, 0, 0);
        assert_eq!(iou(&zero, &zero), 0.0);
    }
}
