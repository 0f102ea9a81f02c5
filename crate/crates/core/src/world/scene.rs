//! Synthetic scenes: the ground truth an image stands for.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kb::KnowledgeBase;
use super::vocab::{self, ATTRIBUTES, COLORS};
use super::{QuestionType, WorldError};
use crate::value::Box2D;

pub const DEFAULT_WIDTH: i64 = 640;
pub const DEFAULT_HEIGHT: i64 = 480;
pub const DEFAULT_CONFIDENCE: f64 = 0.9;

const GRID_COLS: i64 = 4;
const GRID_ROWS: i64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: i64,
    pub height: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub class: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synonyms: Vec<String>,
    #[serde(rename = "box")]
    pub bbox: Box2D,
    pub color: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_content: Option<String>,
    #[serde(default = "default_true")]
    pub legible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_true() -> bool {
    true
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE
}

impl SceneObject {
    pub fn new(id: u32, class: &str, color: &str, bbox: Box2D) -> Self {
        Self {
            id,
            class: class.to_string(),
            synonyms: vocab::class_info(class)
                .map(|c| c.synonyms.iter().map(|s| s.to_string()).collect())
                .unwrap_or_default(),
            bbox,
            color: color.to_string(),
            attributes: BTreeMap::new(),
            text_content: None,
            legible: true,
            entity_id: None,
            confidence: DEFAULT_CONFIDENCE,
        }
    }

    pub fn matches_class(&self, query: &str) -> bool {
        vocab::class_matches(&self.class, &self.synonyms, query)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub canvas: Canvas,
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub points: Vec<Point>,
    #[serde(default)]
    pub seed: u64,
}

impl Scene {
    pub fn empty(id: impl Into<String>, width: i64, height: i64) -> Self {
        Self {
            id: id.into(),
            canvas: Canvas { width, height },
            objects: Vec::new(),
            points: Vec::new(),
            seed: 0,
        }
    }

    pub fn bounds(&self) -> Box2D {
        Box2D::new(0, 0, self.canvas.width, self.canvas.height)
    }

    /// Clip to `region`, translating everything into the region's frame.
    pub fn crop(&self, region: &Box2D) -> Result<Scene, WorldError> {
        let clipped = region
            .intersect(&self.bounds())
            .ok_or(WorldError::EmptyCrop)?;
        let (dx, dy) = (-clipped.left, -clipped.top);
        let objects = self
            .objects
            .iter()
            .filter_map(|o| {
                o.bbox.intersect(&clipped).map(|b| SceneObject {
                    bbox: b.translate(dx, dy),
                    ..o.clone()
                })
            })
            .collect();
        let points = self
            .points
            .iter()
            .filter(|p| clipped.contains_point(p.x, p.y))
            .map(|p| Point {
                x: p.x + dx,
                y: p.y + dy,
            })
            .collect();
        Ok(Scene {
            id: format!(
                "{}/crop:{},{},{},{}",
                self.id, clipped.left, clipped.top, clipped.width, clipped.height
            ),
            canvas: Canvas {
                width: clipped.width,
                height: clipped.height,
            },
            objects,
            points,
            seed: self.seed,
        })
    }

    /// Same canvas, objects and points; ignores the id.
    pub fn same_content(&self, other: &Scene) -> bool {
        self.canvas == other.canvas && self.objects == other.objects && self.points == other.points
    }

    /// Smallest-area object containing the first point marker, if unique.
    pub fn pointed_object(&self) -> Option<&SceneObject> {
        let p = self.points.first()?;
        pointed_at(&self.objects, p)
    }

    pub fn objects_of<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a SceneObject> + 'a {
        self.objects.iter().filter(move |o| o.matches_class(class))
    }

    /// The largest visible object carrying an entity id.
    pub fn salient_entity(&self) -> Option<&SceneObject> {
        self.objects
            .iter()
            .filter(|o| o.entity_id.is_some())
            .fold(None, |best: Option<&SceneObject>, o| match best {
                Some(b) if b.bbox.area() >= o.bbox.area() => Some(b),
                _ => Some(o),
            })
    }
}

pub fn pointed_at<'a>(objects: &'a [SceneObject], p: &Point) -> Option<&'a SceneObject> {
    let mut containing: Vec<&SceneObject> = objects
        .iter()
        .filter(|o| o.bbox.contains_point(p.x, p.y))
        .collect();
    containing.sort_by_key(|o| o.bbox.area());
    match containing.as_slice() {
        [] => None,
        [only] => Some(only),
        [a, b, ..] if a.bbox.area() < b.bbox.area() => Some(a),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub width: i64,
    pub height: i64,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Filler class weights; empty means uniform over the filler vocabulary.
    pub class_weights: Vec<(String, f64)>,
    /// Probability that a filler object is a legible text-bearing object.
    pub text_density: f64,
    pub required: Vec<QuestionType>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            min_objects: 3,
            max_objects: 8,
            class_weights: Vec::new(),
            text_density: 0.1,
            required: Vec::new(),
        }
    }
}

impl SceneConfig {
    pub fn for_type(qtype: QuestionType) -> Self {
        Self {
            required: vec![qtype],
            ..Self::default()
        }
    }
}

const SIGN_TEXTS: &[&str] = &[
    "main street",
    "exit 12",
    "stop",
    "parking only",
    "bakery",
    "one way",
    "city hall",
    "north gate",
    "slow down",
    "bus stop",
    "museum entrance",
    "no entry",
];
const PLATE_STATES: &[&str] = &["new york", "ohio", "texas", "oregon", "maine", "nevada"];
const BOTTLE_BRANDS: &[&str] = &[
    "aqua pura",
    "sunny cola",
    "green leaf",
    "river spring",
    "blue peak",
    "golden malt",
];
const STORE_NAMES: &[&str] = &[
    "fresh market",
    "corner books",
    "city pharmacy",
    "lucky noodles",
    "ace hardware",
    "moon cafe",
];

/// Printed text for a text-bearing class.
pub fn random_text(class: &str, rng: &mut impl Rng) -> String {
    match class {
        "license plate" => {
            let digits: u32 = rng.gen_range(100..1000);
            let letters: String = (0..3)
                .map(|_| (b'a' + rng.gen_range(0..26u8)) as char)
                .collect();
            format!("{digits}-{letters} {}", PLATE_STATES.choose(rng).unwrap())
        }
        "sign" => SIGN_TEXTS.choose(rng).unwrap().to_string(),
        "bottle" => BOTTLE_BRANDS.choose(rng).unwrap().to_string(),
        "jersey" => rng.gen_range(1..100u32).to_string(),
        "storefront" => STORE_NAMES.choose(rng).unwrap().to_string(),
        _ => String::new(),
    }
}

struct Layout {
    cells: Vec<(i64, i64)>,
    cell_w: i64,
    cell_h: i64,
}

impl Layout {
    fn new(width: i64, height: i64, rng: &mut impl Rng) -> Self {
        let mut cells: Vec<(i64, i64)> = (0..GRID_ROWS)
            .flat_map(|r| (0..GRID_COLS).map(move |c| (c, r)))
            .collect();
        cells.shuffle(rng);
        Self {
            cells,
            cell_w: width / GRID_COLS,
            cell_h: height / GRID_ROWS,
        }
    }

    fn take(&mut self) -> Option<(i64, i64)> {
        self.cells.pop()
    }

    /// Two adjacent free cells, removed from the pool.
    fn take_pair(&mut self) -> Option<((i64, i64), (i64, i64))> {
        for i in 0..self.cells.len() {
            let a = self.cells[i];
            for j in 0..self.cells.len() {
                let b = self.cells[j];
                let adjacent = (a.1 == b.1 && b.0 == a.0 + 1) || (a.0 == b.0 && b.1 == a.1 + 1);
                if i != j && adjacent {
                    let (hi, lo) = if i > j { (i, j) } else { (j, i) };
                    self.cells.remove(hi);
                    self.cells.remove(lo);
                    return Some((a, b));
                }
            }
        }
        None
    }

    fn region(&self, cell: (i64, i64)) -> Box2D {
        Box2D::new(cell.0 * self.cell_w, cell.1 * self.cell_h, self.cell_w, self.cell_h)
    }

    fn box_in(&self, region: &Box2D, rng: &mut impl Rng, min: i64) -> Box2D {
        let w = rng.gen_range(min.min(region.width)..=region.width - 4);
        let h = rng.gen_range(min.min(region.height)..=region.height - 4);
        let left = region.left + rng.gen_range(0..=region.width - w);
        let top = region.top + rng.gen_range(0..=region.height - h);
        Box2D::new(left, top, w, h)
    }
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    layout: Layout,
    objects: Vec<SceneObject>,
    points: Vec<Point>,
    reserved: Vec<String>,
    kb: &'a KnowledgeBase,
}

impl Builder<'_> {
    fn color(&mut self) -> String {
        COLORS.choose(&mut self.rng).unwrap().to_string()
    }

    fn add(&mut self, class: &str, color: &str, bbox: Box2D) -> &mut SceneObject {
        let id = self.objects.len() as u32;
        let mut obj = SceneObject::new(id, class, color, bbox);
        for (key, values) in ATTRIBUTES {
            obj.attributes
                .insert(key.to_string(), values.choose(&mut self.rng).unwrap().to_string());
        }
        self.objects.push(obj);
        self.objects.last_mut().unwrap()
    }

    fn add_in_cell(&mut self, class: &str, color: &str) -> Result<usize, WorldError> {
        let cell = self.layout.take().ok_or_else(|| infeasible("scene grid is full"))?;
        let region = self.layout.region(cell);
        let bbox = self.layout.box_in(&region, &mut self.rng, 48);
        self.add(class, color, bbox);
        Ok(self.objects.len() - 1)
    }

    fn unreserved_filler(&mut self) -> Option<String> {
        let pool: Vec<&str> = vocab::filler_classes()
            .into_iter()
            .filter(|c| !self.reserved.iter().any(|r| r == c))
            .collect();
        pool.choose(&mut self.rng).map(|s| s.to_string())
    }

    fn reserve(&mut self, class: &str) {
        self.reserved.push(class.to_string());
    }

    fn point_into(&mut self, idx: usize) {
        let b = self.objects[idx].bbox;
        let x = b.left + self.rng.gen_range(b.width / 4..=(3 * b.width / 4).max(b.width / 4));
        let y = b.top + self.rng.gen_range(b.height / 4..=(3 * b.height / 4).max(b.height / 4));
        self.points.push(Point { x, y });
    }

    fn recipe(&mut self, qtype: QuestionType) -> Result<(), WorldError> {
        match qtype {
            QuestionType::LocalPointing => {
                if !self.points.is_empty() {
                    return Ok(());
                }
                let class = self.unreserved_filler().ok_or_else(|| infeasible("no classes"))?;
                self.reserve(&class);
                let color = self.color();
                let idx = self.add_in_cell(&class, &color)?;
                self.point_into(idx);
            }
            QuestionType::LookTwice => {
                let class = match self.points.first().and_then(|p| pointed_at(&self.objects, p)) {
                    Some(o) => o.class.clone(),
                    None => {
                        let class =
                            self.unreserved_filler().ok_or_else(|| infeasible("no classes"))?;
                        self.reserve(&class);
                        let color = self.color();
                        let idx = self.add_in_cell(&class, &color)?;
                        self.point_into(idx);
                        class
                    }
                };
                let extra = self.rng.gen_range(0..=3);
                for _ in 0..extra {
                    let color = self.color();
                    self.add_in_cell(&class, &color)?;
                }
            }
            QuestionType::SingleHop | QuestionType::TwoHop => {
                if self.objects.iter().any(|o| o.entity_id.is_some()) {
                    return Ok(());
                }
                let landmarks = self.kb.landmarks();
                let entity = landmarks
                    .choose(&mut self.rng)
                    .ok_or_else(|| infeasible("knowledge base has no landmarks"))?;
                let (id, kind) = (entity.id.clone(), entity.kind.clone());
                let cell = self.layout.take().ok_or_else(|| infeasible("scene grid is full"))?;
                let region = self.layout.region(cell);
                let bbox = self.layout.box_in(&region, &mut self.rng, 100);
                let color = self.color();
                self.add(&kind, &color, bbox).entity_id = Some(id);
            }
            QuestionType::TwoImage => {
                if self.objects.is_empty() {
                    let class = self.unreserved_filler().ok_or_else(|| infeasible("no classes"))?;
                    let color = self.color();
                    self.add_in_cell(&class, &color)?;
                }
            }
            QuestionType::Spatial => {
                let a = self.unreserved_filler().ok_or_else(|| infeasible("no classes"))?;
                self.reserve(&a);
                let b = self.unreserved_filler().ok_or_else(|| infeasible("no classes"))?;
                self.reserve(&b);
                self.reserve("sign");
                let (ca, cb) = self
                    .layout
                    .take_pair()
                    .ok_or_else(|| infeasible("no adjacent cells for a spatial pair"))?;
                let (ra, rb) = (self.layout.region(ca), self.layout.region(cb));
                let (ba, bb) = if self.rng.gen_bool(0.5) {
                    (
                        self.layout.box_in(&ra, &mut self.rng, 48),
                        self.layout.box_in(&rb, &mut self.rng, 48),
                    )
                } else {
                    overlapping_pair(&ra, &rb, &mut self.rng)
                };
                let (col_a, col_b) = (self.color(), self.color());
                self.add(&a, &col_a, ba);
                self.add(&b, &col_b, bb);
                let n_signs = self.rng.gen_range(2..=3);
                let mut texts: Vec<&str> = SIGN_TEXTS.to_vec();
                texts.shuffle(&mut self.rng);
                for text in texts.into_iter().take(n_signs) {
                    let color = self.color();
                    let idx = self.add_in_cell("sign", &color)?;
                    self.objects[idx].text_content = Some(text.to_string());
                }
            }
            QuestionType::Counting => {
                let class = self.unreserved_filler().ok_or_else(|| infeasible("no classes"))?;
                self.reserve(&class);
                let palette: Vec<String> = COLORS
                    .choose_multiple(&mut self.rng, 3)
                    .map(|s| s.to_string())
                    .collect();
                let n = self.rng.gen_range(1..=5);
                for _ in 0..n {
                    let color = palette.choose(&mut self.rng).unwrap().clone();
                    self.add_in_cell(&class, &color)?;
                }
            }
            QuestionType::OcrReasoning => {
                let pool: Vec<&str> = vocab::text_classes()
                    .into_iter()
                    .filter(|c| !self.reserved.iter().any(|r| r == c))
                    .collect();
                let class = pool
                    .choose(&mut self.rng)
                    .ok_or_else(|| infeasible("no text classes left"))?
                    .to_string();
                self.reserve(&class);
                let decoys = self.rng.gen_range(0..=2);
                let color = self.color();
                let idx = self.add_in_cell(&class, &color)?;
                let text = random_text(&class, &mut self.rng);
                self.objects[idx].text_content = Some(text.clone());
                for _ in 0..decoys {
                    let color = self.color();
                    let idx = self.add_in_cell(&class, &color)?;
                    let mut decoy = random_text(&class, &mut self.rng);
                    if decoy == text {
                        decoy.push('x');
                    }
                    self.objects[idx].text_content = Some(decoy);
                    self.objects[idx].legible = false;
                }
            }
        }
        Ok(())
    }
}

fn overlapping_pair(ra: &Box2D, rb: &Box2D, rng: &mut impl Rng) -> (Box2D, Box2D) {
    let horizontal = ra.top == rb.top;
    let w = rng.gen_range(90..=140);
    let h = rng.gen_range(90..=140);
    let overlap = rng.gen_range(20..=60);
    if horizontal {
        let la = ra.right() - w + overlap / 2;
        let ta = ra.top + rng.gen_range(0..=ra.height - h);
        let lb = la + w - overlap;
        let tb = rb.top + rng.gen_range(0..=rb.height - h);
        (Box2D::new(la, ta, w, h), Box2D::new(lb, tb, w, h))
    } else {
        let la = ra.left + rng.gen_range(0..=ra.width - w);
        let ta = ra.bottom() - h + overlap / 2;
        let lb = rb.left + rng.gen_range(0..=rb.width - w);
        let tb = ta + h - overlap;
        (Box2D::new(la, ta, w, h), Box2D::new(lb, tb, w, h))
    }
}

fn infeasible(msg: &str) -> WorldError {
    WorldError::InfeasibleConfig(msg.to_string())
}

/// Deterministic scene generation from a seed.
pub fn generate_scene(
    seed: u64,
    config: &SceneConfig,
    kb: &KnowledgeBase,
) -> Result<Scene, WorldError> {
    if config.min_objects > config.max_objects {
        return Err(infeasible("min_objects exceeds max_objects"));
    }
    if config.max_objects == 0 && !config.required.is_empty() {
        return Err(infeasible("question types require objects but max_objects is 0"));
    }
    if config.max_objects > (GRID_COLS * GRID_ROWS) as usize {
        return Err(infeasible("at most 12 objects fit the placement grid"));
    }
    if config.width < GRID_COLS * 60 || config.height < GRID_ROWS * 60 {
        return Err(infeasible("canvas too small for the placement grid"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = Layout::new(config.width, config.height, &mut rng);
    let mut b = Builder {
        rng,
        layout,
        objects: Vec::new(),
        points: Vec::new(),
        reserved: Vec::new(),
        kb,
    };
    for qtype in &config.required {
        b.recipe(*qtype)?;
    }
    if b.objects.len() > config.max_objects {
        return Err(infeasible("required inventory exceeds max_objects"));
    }
    let target = b
        .rng
        .gen_range(config.min_objects..=config.max_objects)
        .max(b.objects.len());
    let weighted: Vec<(String, f64)> = if config.class_weights.is_empty() {
        vocab::filler_classes()
            .into_iter()
            .map(|c| (c.to_string(), 1.0))
            .collect()
    } else {
        config.class_weights.clone()
    };
    let weighted: Vec<(String, f64)> = weighted
        .into_iter()
        .filter(|(c, w)| *w > 0.0 && !b.reserved.contains(c))
        .collect();
    let text_pool: Vec<&str> = vocab::text_classes()
        .into_iter()
        .filter(|c| !b.reserved.iter().any(|r| r == c))
        .collect();
    while b.objects.len() < target {
        let use_text = !text_pool.is_empty() && b.rng.gen_bool(config.text_density.clamp(0.0, 1.0));
        let class = if use_text {
            text_pool.choose(&mut b.rng).unwrap().to_string()
        } else {
            match weighted.choose_weighted(&mut b.rng, |(_, w)| *w) {
                Ok((c, _)) => c.clone(),
                Err(_) => break,
            }
        };
        let color = b.color();
        let idx = b.add_in_cell(&class, &color)?;
        if use_text {
            let text = random_text(&class, &mut b.rng);
            b.objects[idx].text_content = Some(text);
        }
    }
    Ok(Scene {
        id: format!("scene-{seed:016x}"),
        canvas: Canvas {
            width: config.width,
            height: config.height,
        },
        objects: b.objects,
        points: b.points,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb() -> KnowledgeBase {
        KnowledgeBase::generate(7)
    }

    #[test]
    fn generation_is_deterministic() {
        let kb = kb();
        for qtype in QuestionType::ALL {
            let cfg = SceneConfig::for_type(qtype);
            let a = generate_scene(42, &cfg, &kb).unwrap();
            let b = generate_scene(42, &cfg, &kb).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_objects_with_counting_is_infeasible() {
        let cfg = SceneConfig {
            min_objects: 0,
            max_objects: 0,
            required: vec![QuestionType::Counting],
            ..SceneConfig::default()
        };
        assert!(matches!(
            generate_scene(1, &cfg, &kb()),
            Err(WorldError::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn objects_inside_canvas_and_disjoint_outside_spatial_pairs() {
        let kb = kb();
        for seed in 0..200 {
            for qtype in QuestionType::ALL {
                let s = generate_scene(seed, &SceneConfig::for_type(qtype), &kb).unwrap();
                let ids: std::collections::BTreeSet<_> = s.objects.iter().map(|o| o.id).collect();
                assert_eq!(ids.len(), s.objects.len());
                for o in &s.objects {
                    assert_eq!(o.bbox.intersect(&s.bounds()), Some(o.bbox));
                }
                if !s.points.is_empty() {
                    assert!(s.pointed_object().is_some());
                }
            }
        }
    }

    #[test]
    fn crop_clips_and_translates() {
        let mut s = Scene::empty("t", 640, 480);
        s.objects.push(SceneObject::new(0, "cup", "red", Box2D::new(30, 30, 40, 40)));
        s.points.push(Point { x: 35, y: 40 });
        let c = s.crop(&Box2D::new(0, 0, 50, 50)).unwrap();
        assert_eq!(c.objects[0].bbox, Box2D::new(30, 30, 20, 20));
        assert_eq!(c.points, vec![Point { x: 35, y: 40 }]);
        let full = s.crop(&s.bounds()).unwrap();
        assert!(full.same_content(&s));
        assert_eq!(
            s.crop(&Box2D::new(700, 500, 10, 10)),
            Err(WorldError::EmptyCrop)
        );
    }

    #[test]
    fn class_distribution_follows_weights() {
        // Chi-square goodness of fit over 1000 scenes.
        let kb = kb();
        let weights = [("car", 4.0), ("dog", 2.0), ("cup", 1.0), ("tree", 1.0)];
        let cfg = SceneConfig {
            class_weights: weights.iter().map(|(c, w)| (c.to_string(), *w)).collect(),
            text_density: 0.0,
            ..SceneConfig::default()
        };
        let mut counts = BTreeMap::new();
        let mut total = 0.0;
        for seed in 0..1000 {
            for o in generate_scene(seed, &cfg, &kb).unwrap().objects {
                *counts.entry(o.class).or_insert(0.0) += 1.0;
                total += 1.0;
            }
        }
        let wsum: f64 = weights.iter().map(|(_, w)| w).sum();
        let chi2: f64 = weights
            .iter()
            .map(|(c, w)| {
                let expected = total * w / wsum;
                let observed = counts.get(*c).copied().unwrap_or(0.0);
                (observed - expected).powi(2) / expected
            })
            .sum();
        // 3 degrees of freedom; 0.999 quantile is 16.27.
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }
}
