//! Question templates for the eight question types.
//!
//! A template is a lowercase sentence with `{placeholder}` slots. The same
//! table drives generation (filling slots from a scene) and parsing (turning
//! a question back into its template and slot values), so routing and
//! planning can recover the structure of any generated question.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::kb::KnowledgeBase;
use super::oracle::oracle_answer;
use super::scene::{Point, Scene};
use super::vocab::{self, COLORS};
use super::{Metric, QuestionType, WorldError};

/// Slot in the second sub-question of a two-hop decomposition.
pub const ANSWER_SLOT: &str = "{answer1}";

#[derive(Debug, PartialEq, Eq)]
pub struct Template {
    pub id: &'static str,
    pub qtype: QuestionType,
    pub text: &'static str,
}

const fn t(id: &'static str, qtype: QuestionType, text: &'static str) -> Template {
    Template { id, qtype, text }
}

use QuestionType as Q;

pub const TEMPLATES: &[Template] = &[
    t("lp_color", Q::LocalPointing, "what color is this?"),
    t("lp_class", Q::LocalPointing, "what is this?"),
    t("lp_material", Q::LocalPointing, "what is this made of?"),
    t("lp_size", Q::LocalPointing, "what size is this?"),
    t("lp_is_color", Q::LocalPointing, "is this {color}?"),
    t("lt_count", Q::LookTwice, "how many of these are in the image?"),
    t("lt_count_see", Q::LookTwice, "how many of these can you see?"),
    t("lt_more", Q::LookTwice, "is there more than one of these?"),
    t("lt_count_color", Q::LookTwice, "how many of these are {color}?"),
    t("lt_other", Q::LookTwice, "are there other objects like this in the image?"),
    t("sh_built", Q::SingleHop, "in what year was this {kind} built?"),
    t("sh_designer", Q::SingleHop, "who designed this {kind}?"),
    t("sh_location", Q::SingleHop, "in which city is this {kind} located?"),
    t("sh_dedicated", Q::SingleHop, "when was this {kind} dedicated?"),
    t("sh_height", Q::SingleHop, "how tall is this {kind}?"),
    t("th_designer_born", Q::TwoHop, "in what year was the designer of this {kind} born?"),
    t("th_designer_nationality", Q::TwoHop, "what is the nationality of the architect of this {kind}?"),
    t("th_designer_birthplace", Q::TwoHop, "in what city was the designer of this {kind} born?"),
    t("th_city_population", Q::TwoHop, "what is the population of the city where this {kind} is located?"),
    t("th_city_country", Q::TwoHop, "in which country is the city where this {kind} is located?"),
    t("th_city_founded", Q::TwoHop, "in what year was the city where this {kind} is located founded?"),
    t("ti_one_other", Q::TwoImage, "one image contains {art} {color} {class} and the other contains {art2} {color2} {class2}."),
    t("ti_both", Q::TwoImage, "both images contain {art} {color} {class}."),
    t("ti_neither", Q::TwoImage, "neither image contains {art} {color} {class}."),
    t("ti_exactly_one", Q::TwoImage, "exactly one image contains {art} {color} {class}."),
    t("ti_at_least_one", Q::TwoImage, "at least one image contains {art} {color} {class}."),
    t("sp_left", Q::Spatial, "is the {class} to the left of the {class2}?"),
    t("sp_right", Q::Spatial, "is the {class} to the right of the {class2}?"),
    t("sp_above", Q::Spatial, "is the {class} above the {class2}?"),
    t("sp_below", Q::Spatial, "is the {class} below the {class2}?"),
    t("sp_overlap", Q::Spatial, "does the {class} overlap the {class2}?"),
    t("sp_sign", Q::Spatial, "what is written on the {rel} sign?"),
    t("cc_color", Q::Counting, "how many {color} {plural} are there?"),
    t("cc_are_color", Q::Counting, "how many {plural} are {color}?"),
    t("cc_not_color", Q::Counting, "how many {plural} are not {color}?"),
    t("cc_all", Q::Counting, "how many {plural} are there?"),
    t("cc_or", Q::Counting, "how many {color} or {color2} {plural} are in the image?"),
    t("ocr_plate", Q::OcrReasoning, "what is the license plate?"),
    t("ocr_sign", Q::OcrReasoning, "what does the sign say?"),
    t("ocr_bottle", Q::OcrReasoning, "what is written on the bottle?"),
    t("ocr_jersey", Q::OcrReasoning, "what number is on the jersey?"),
    t("ocr_store", Q::OcrReasoning, "what is the name of this store?"),
];

/// (template id, first sub-question template, second sub-question, link fact, final fact)
const TWO_HOP: &[(&str, &str, &str, &str, &str)] = &[
    ("th_designer_born", "sh_designer", "in what year was {answer1} born?", "designer", "birth_year"),
    ("th_designer_nationality", "sh_designer", "what is the nationality of {answer1}?", "designer", "nationality"),
    ("th_designer_birthplace", "sh_designer", "in what city was {answer1} born?", "designer", "birthplace"),
    ("th_city_population", "sh_location", "what is the population of {answer1}?", "location", "population"),
    ("th_city_country", "sh_location", "in which country is {answer1}?", "location", "country"),
    ("th_city_founded", "sh_location", "in what year was {answer1} founded?", "location", "founded"),
];

/// Link and target fact keys of a two-hop template.
pub(crate) fn two_hop_chain(template: &str) -> Option<(&'static str, &'static str)> {
    TWO_HOP
        .iter()
        .find(|(id, ..)| *id == template)
        .map(|(_, _, _, link, fact)| (*link, *fact))
}

pub(crate) fn single_hop_fact(template: &str) -> Option<&'static str> {
    Some(match template {
        "sh_built" => "year_built",
        "sh_designer" => "designer",
        "sh_location" => "location",
        "sh_dedicated" => "dedicated",
        "sh_height" => "height",
        _ => return None,
    })
}

/// Object class carrying the text for an OCR template.
pub fn ocr_class(template: &str) -> Option<&'static str> {
    Some(match template {
        "ocr_plate" => "license plate",
        "ocr_sign" => "sign",
        "ocr_bottle" => "bottle",
        "ocr_jersey" => "jersey",
        "ocr_store" => "storefront",
        _ => return None,
    })
}

pub fn template(id: &str) -> Option<&'static Template> {
    TEMPLATES.iter().find(|t| t.id == id)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemMetadata {
    pub template: String,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub qtype: QuestionType,
    pub question: String,
    /// Scene references (manifest-relative paths).
    pub scenes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Point>,
    /// One answer, or the reference list for VQA accuracy.
    pub gold: Vec<String>,
    pub metric: Metric,
    pub metadata: ItemMetadata,
}

impl QaItem {
    pub fn primary_gold(&self) -> &str {
        self.gold.first().map(String::as_str).unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct QuestionConfig {
    /// How many of the 10 VQA-accuracy references repeat the gold answer.
    pub reference_repeats: usize,
}

impl Default for QuestionConfig {
    fn default() -> Self {
        Self { reference_repeats: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedQuestion {
    pub template: &'static Template,
    pub params: BTreeMap<String, String>,
}

impl ParsedQuestion {
    pub fn qtype(&self) -> QuestionType {
        self.template.qtype
    }

    pub fn param(&self, key: &str) -> &str {
        self.params.get(key).map(String::as_str).unwrap_or_default()
    }
}

fn alternation<'a>(words: impl IntoIterator<Item = &'a str>) -> String {
    let mut words: Vec<&str> = words.into_iter().collect();
    words.sort_by_key(|w| std::cmp::Reverse(w.len()));
    words.iter().map(|w| regex::escape(w)).collect::<Vec<_>>().join("|")
}

fn slot_pattern(slot: &str) -> String {
    let classes = || vocab::CLASSES.iter().map(|c| c.name);
    let body = match slot {
        "color" | "color2" => alternation(COLORS.iter().copied()),
        "class" | "class2" => alternation(classes()),
        "kind" => alternation(vocab::landmark_classes()),
        "plural" => alternation(vocab::CLASSES.iter().map(|c| c.plural)),
        "rel" => "leftmost|rightmost|topmost|bottommost".to_string(),
        "art" | "art2" => "an?".to_string(),
        other => panic!("unknown template slot {other}"),
    };
    format!("(?P<{slot}>{body})")
}

fn compiled() -> &'static [(Regex, &'static Template)] {
    static CELL: OnceLock<Vec<(Regex, &'static Template)>> = OnceLock::new();
    CELL.get_or_init(|| {
        let slot = Regex::new(r"\{([a-z0-9]+)\}").unwrap();
        TEMPLATES
            .iter()
            .map(|t| {
                let mut pattern = String::from("^");
                let mut last = 0;
                for m in slot.captures_iter(t.text) {
                    let whole = m.get(0).unwrap();
                    pattern.push_str(&regex::escape(&t.text[last..whole.start()]));
                    pattern.push_str(&slot_pattern(&m[1]));
                    last = whole.end();
                }
                pattern.push_str(&regex::escape(&t.text[last..]));
                pattern.push('$');
                (Regex::new(&pattern).unwrap(), t)
            })
            .collect()
    })
}

/// Recover the template and slot values of a generated question.
pub fn parse_question(question: &str) -> Option<ParsedQuestion> {
    let q = question.trim().to_lowercase();
    for (re, template) in compiled() {
        if let Some(caps) = re.captures(&q) {
            let mut params = BTreeMap::new();
            for name in re.capture_names().flatten() {
                let Some(m) = caps.name(name) else { continue };
                match name {
                    "art" | "art2" => {}
                    "plural" => {
                        let class = vocab::canonical_class(m.as_str())?;
                        params.insert("class".to_string(), class.to_string());
                    }
                    _ => {
                        params.insert(name.to_string(), m.as_str().to_string());
                    }
                }
            }
            return Some(ParsedQuestion { template, params });
        }
    }
    None
}

pub fn classify_question(question: &str) -> Option<QuestionType> {
    parse_question(question).map(|p| p.qtype())
}

pub(crate) fn fill(template: &Template, params: &BTreeMap<String, String>) -> String {
    let slot = Regex::new(r"\{([a-z0-9]+)\}").unwrap();
    slot.replace_all(template.text, |caps: &regex::Captures<'_>| {
        let key = &caps[1];
        let get = |k: &str| params.get(k).cloned().unwrap_or_default();
        match key {
            "art" => vocab::article_for(&get("color")).to_string(),
            "art2" => vocab::article_for(&get("color2")).to_string(),
            "plural" => vocab::plural(&get("class")),
            other => get(other),
        }
    })
    .into_owned()
}

/// Decomposition of a question text, if it is a generated two-hop question.
pub fn template_decomposition(question: &str) -> Option<(String, String)> {
    decompose(&parse_question(question)?)
}

/// The two sub-questions of a two-hop question (second carries [`ANSWER_SLOT`]).
pub(crate) fn decompose(parsed: &ParsedQuestion) -> Option<(String, String)> {
    let (_, first, second, ..) = TWO_HOP.iter().find(|(id, ..)| *id == parsed.template.id)?;
    let q1 = fill(template(first)?, &parsed.params);
    Some((q1, second.to_string()))
}

fn other_color(color: &str, rng: &mut impl Rng) -> String {
    COLORS
        .iter()
        .filter(|c| **c != color)
        .collect::<Vec<_>>()
        .choose(rng)
        .map(|c| c.to_string())
        .unwrap()
}

fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Classes with exactly one instance.
fn singletons(scene: &Scene) -> Vec<&str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &scene.objects {
        *counts.entry(o.class.as_str()).or_default() += 1;
    }
    scene
        .objects
        .iter()
        .map(|o| o.class.as_str())
        .filter(|c| {
            counts[c] == 1
                && vocab::class_info(c).is_some_and(|i| !i.text_bearing && !i.landmark)
        })
        .collect()
}

fn phrase_for(scenes: &[&Scene], rng: &mut impl Rng) -> (String, String) {
    let present: Vec<(&str, &str)> = scenes
        .iter()
        .flat_map(|s| s.objects.iter())
        .filter(|o| vocab::class_info(&o.class).is_some_and(|i| !i.landmark))
        .map(|o| (o.color.as_str(), o.class.as_str()))
        .collect();
    if !present.is_empty() && rng.gen_bool(0.6) {
        let (c, k) = present.choose(rng).unwrap();
        (c.to_string(), k.to_string())
    } else {
        let classes = vocab::filler_classes();
        (
            COLORS.choose(rng).unwrap().to_string(),
            classes.choose(rng).unwrap().to_string(),
        )
    }
}

/// Slot values for `template` on these scenes, or `None` if inapplicable.
fn instantiate(
    template: &Template,
    scenes: &[&Scene],
    kb: &KnowledgeBase,
    rng: &mut impl Rng,
) -> Option<BTreeMap<String, String>> {
    let scene = scenes.first()?;
    match template.qtype {
        Q::LocalPointing => {
            let obj = scene.pointed_object()?;
            match template.id {
                "lp_is_color" => {
                    let color = if rng.gen_bool(0.5) {
                        obj.color.clone()
                    } else {
                        other_color(&obj.color, rng)
                    };
                    Some(params(&[("color", &color)]))
                }
                _ => Some(BTreeMap::new()),
            }
        }
        Q::LookTwice => {
            let obj = scene.pointed_object()?;
            match template.id {
                "lt_count_color" => {
                    let colors: Vec<&str> =
                        scene.objects_of(&obj.class).map(|o| o.color.as_str()).collect();
                    let color = if rng.gen_bool(0.7) {
                        colors.choose(rng)?.to_string()
                    } else {
                        COLORS.choose(rng)?.to_string()
                    };
                    Some(params(&[("color", &color)]))
                }
                _ => Some(BTreeMap::new()),
            }
        }
        Q::SingleHop | Q::TwoHop => {
            let obj = scene.salient_entity()?;
            let entity = kb.get(obj.entity_id.as_deref()?)?;
            if template.qtype == Q::TwoHop {
                let (link, fact) = two_hop_chain(template.id)?;
                let target = kb.get(entity.links.get(link)?)?;
                target.facts.get(fact)?;
            } else {
                entity.facts.get(single_hop_fact(template.id)?)?;
            }
            Some(params(&[("kind", &obj.class)]))
        }
        Q::TwoImage => {
            if scenes.len() != 2 {
                return None;
            }
            let (color, class) = phrase_for(scenes, rng);
            let mut p = params(&[("color", &color), ("class", &class)]);
            if template.id == "ti_one_other" {
                let (color2, class2) = phrase_for(scenes, rng);
                if (color2.as_str(), class2.as_str()) == (color.as_str(), class.as_str()) {
                    return None;
                }
                p.insert("color2".into(), color2);
                p.insert("class2".into(), class2);
            }
            Some(p)
        }
        Q::Spatial => {
            if template.id == "sp_sign" {
                let signs: Vec<_> = scene
                    .objects_of("sign")
                    .filter(|o| o.legible && o.text_content.is_some())
                    .collect();
                if signs.len() < 2 {
                    return None;
                }
                let rel = *["leftmost", "rightmost", "topmost", "bottommost"].choose(rng)?;
                let key = |o: &&super::SceneObject| {
                    let (x, y) = o.bbox.center2();
                    match rel {
                        "leftmost" | "rightmost" => x,
                        _ => y,
                    }
                };
                let mut keys: Vec<i64> = signs.iter().map(key).collect();
                keys.sort_unstable();
                let unique = match rel {
                    "leftmost" | "topmost" => keys[0] != keys[1],
                    _ => keys[keys.len() - 1] != keys[keys.len() - 2],
                };
                return unique.then(|| params(&[("rel", rel)]));
            }
            let singles = singletons(scene);
            if singles.len() < 2 {
                return None;
            }
            let mut pair: Vec<&str> = singles.choose_multiple(rng, 2).copied().collect();
            pair.shuffle(rng);
            let a = scene.objects_of(pair[0]).next()?;
            let b = scene.objects_of(pair[1]).next()?;
            let (ax, ay) = a.bbox.center2();
            let (bx, by) = b.bbox.center2();
            let clear = match template.id {
                "sp_left" | "sp_right" => (ax - bx).abs() >= 20,
                "sp_above" | "sp_below" => (ay - by).abs() >= 20,
                _ => true,
            };
            clear.then(|| params(&[("class", pair[0]), ("class2", pair[1])]))
        }
        Q::Counting => {
            let mut classes: Vec<&str> = scene
                .objects
                .iter()
                .map(|o| o.class.as_str())
                .filter(|c| vocab::class_info(c).is_some_and(|i| !i.landmark && !i.text_bearing))
                .collect();
            classes.dedup();
            // prefer the most frequent class
            let class = *classes
                .iter()
                .max_by_key(|c| (scene.objects_of(c).count(), std::cmp::Reverse(**c)))?;
            let colors: Vec<&str> = scene.objects_of(class).map(|o| o.color.as_str()).collect();
            let pick = |rng: &mut dyn rand::RngCore| -> String {
                if rng.gen_bool(0.7) {
                    colors.choose(rng).unwrap().to_string()
                } else {
                    COLORS.choose(rng).unwrap().to_string()
                }
            };
            let color = pick(rng);
            let mut p = params(&[("class", class), ("color", &color)]);
            match template.id {
                "cc_all" => {
                    p.remove("color");
                }
                "cc_or" => {
                    let mut color2 = pick(rng);
                    if color2 == color {
                        color2 = other_color(&color, rng);
                    }
                    p.insert("color2".into(), color2);
                }
                _ => {}
            }
            Some(p)
        }
        Q::OcrReasoning => {
            let class = ocr_class(template.id)?;
            let legible = scene
                .objects_of(class)
                .filter(|o| o.legible && o.text_content.is_some())
                .count();
            (legible == 1).then(BTreeMap::new)
        }
    }
}

fn references(gold: &str, repeats: usize, rng: &mut impl Rng) -> Vec<String> {
    let repeats = repeats.clamp(3, 10);
    let mut refs = vec![gold.to_string(); repeats];
    while refs.len() < 10 {
        let mut d: String = gold.to_string();
        if d.len() > 1 && rng.gen_bool(0.5) {
            d.pop();
        } else {
            d.push_str(" sign");
        }
        refs.push(d);
    }
    refs.shuffle(rng);
    refs
}

/// Build a question of `qtype` over `scenes`; the gold answer comes from
/// [`oracle_answer`].
pub fn generate_question(
    id: &str,
    scenes: &[&Scene],
    scene_refs: &[String],
    qtype: QuestionType,
    seed: u64,
    kb: &KnowledgeBase,
    config: &QuestionConfig,
) -> Result<QaItem, WorldError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if scenes.len() != qtype.image_count() {
        return Err(WorldError::UnsupportedType(qtype));
    }
    let mut candidates: Vec<&Template> = TEMPLATES.iter().filter(|t| t.qtype == qtype).collect();
    candidates.shuffle(&mut rng);
    for template in candidates {
        let Some(params) = instantiate(template, scenes, kb, &mut rng) else {
            continue;
        };
        let question = fill(template, &params);
        let parsed = ParsedQuestion { template, params };
        let mut item = QaItem {
            id: id.to_string(),
            qtype,
            question,
            scenes: scene_refs.to_vec(),
            point: scenes[0].points.first().copied(),
            gold: Vec::new(),
            metric: qtype.metric(),
            metadata: ItemMetadata {
                template: template.id.to_string(),
                decomposition: decompose(&parsed),
                params: parsed.params,
            },
        };
        let gold = oracle_answer(&item, scenes, kb);
        item.gold = match item.metric {
            Metric::VqaAccuracy => references(&gold, config.reference_repeats, &mut rng),
            _ => vec![gold],
        };
        if item.metric == Metric::VqaAccuracy {
            // keep the true answer first for display
            let pos = item.gold.iter().position(|g| *g == oracle_answer(&item, scenes, kb));
            if let Some(pos) = pos {
                item.gold.swap(0, pos);
            }
        }
        return Ok(item);
    }
    Err(WorldError::UnsupportedType(qtype))
}
