//! Image tools: detection, OCR, captioning, VQA and cropping.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{images, info, scene_of, single_image, text_arg, texts, FnTool};
use crate::registry::{param, Mode, ParamType as P, ToolError};
use crate::value::{yes_no, Box2D, BoxList, ImageRef, ScoredBox, Value, ValueTag};
use crate::world::vocab::{self, COLORS, ILLEGIBLE};
use crate::world::{answer_visual_question, Scene, SceneObject};

const VISION_BACKBONE: &str = "BLIP-2/PaLI-X";

/// Split an optional leading color off a class query ("red car").
fn split_query(query: &str) -> (Option<&str>, &str) {
    let query = query.trim();
    match query.split_once(' ') {
        Some((first, rest)) if vocab::is_color(first) && vocab::canonical_class(query).is_none() => {
            (Some(first), rest.trim())
        }
        _ => (None, query),
    }
}

fn query_matches(o: &SceneObject, query: &str) -> bool {
    let (color, class) = split_query(query);
    o.matches_class(class) && color.is_none_or(|c| o.color == c)
}

/// Boxes of matching objects, by confidence descending (stable).
pub fn detect_object(scene: &Scene, class: &str) -> BoxList {
    let mut boxes: Vec<ScoredBox> = scene
        .objects
        .iter()
        .filter(|o| query_matches(o, class))
        .map(|o| ScoredBox {
            bbox: o.bbox,
            confidence: Some(o.confidence),
        })
        .collect();
    boxes.sort_by(|a, b| b.confidence.partial_cmp(&a.confidence).unwrap());
    BoxList {
        label: Some(class.trim().to_string()),
        boxes,
    }
}

pub fn object_in_image(scene: &Scene, class: &str) -> bool {
    scene.objects.iter().any(|o| query_matches(o, class))
}

/// Legible text in reading order (top to bottom, then left to right).
pub fn ocr(scene: &Scene) -> String {
    let mut objs: Vec<&SceneObject> = scene
        .objects
        .iter()
        .filter(|o| o.text_content.is_some())
        .collect();
    objs.sort_by_key(|o| (o.bbox.top, o.bbox.left));
    let text: Vec<&str> = objs
        .iter()
        .filter(|o| o.legible)
        .filter_map(|o| o.text_content.as_deref())
        .filter(|t| !t.is_empty())
        .collect();
    if text.is_empty() && objs.iter().any(|o| !o.legible) {
        return ILLEGIBLE.to_string();
    }
    text.join(" ")
}

fn phrase(o: &SceneObject) -> String {
    format!("{} {} {}", vocab::article_for(&o.color), o.color, o.class)
}

fn relation(a: &Box2D, b: &Box2D) -> &'static str {
    let ((ax, ay), (bx, by)) = (a.center2(), b.center2());
    let (dx, dy) = (bx - ax, by - ay);
    if dx.abs() >= dy.abs() {
        if dx >= 0 {
            "to the left of"
        } else {
            "to the right of"
        }
    } else if dy >= 0 {
        "above"
    } else {
        "below"
    }
}

/// Template caption over the two most salient objects.
pub fn caption(scene: &Scene) -> String {
    let mut objs: Vec<&SceneObject> = scene.objects.iter().collect();
    objs.sort_by_key(|o| std::cmp::Reverse(o.bbox.area()));
    let Some(first) = objs.first() else {
        return "an empty scene .".to_string();
    };
    if let Some(second) = objs.iter().find(|o| o.class != first.class) {
        return format!(
            "{} {} {} .",
            phrase(first),
            relation(&first.bbox, &second.bbox),
            phrase(second)
        );
    }
    match objs.len() {
        1 => format!("{} .", phrase(first)),
        n => format!("{n} {} .", vocab::plural(&first.class)),
    }
}

fn other<'a>(pool: &[&'a str], not: &str, rng: &mut impl Rng) -> &'a str {
    let choices: Vec<&&str> = pool.iter().filter(|c| **c != not).collect();
    choices.choose(rng).map(|c| **c).unwrap_or("unknown")
}

/// A seeded answer guaranteed to differ from `answer`.
pub fn perturb_answer(answer: &str, rng: &mut impl Rng) -> String {
    if let Ok(n) = answer.parse::<i64>() {
        return if n > 0 && rng.gen_bool(0.5) { n - 1 } else { n + 1 }.to_string();
    }
    match answer {
        "yes" => return "no".into(),
        "no" => return "yes".into(),
        "true" => return "false".into(),
        "false" => return "true".into(),
        _ => {}
    }
    if vocab::is_color(answer) {
        return other(COLORS, answer, rng).to_string();
    }
    let classes: Vec<&str> = vocab::CLASSES.iter().map(|c| c.name).collect();
    other(&classes, answer, rng).to_string()
}

fn perturb_text(text: &str, rng: &mut impl Rng) -> String {
    let chars: Vec<char> = text.chars().collect();
    let slots: Vec<usize> = (0..chars.len())
        .filter(|&i| chars[i].is_ascii_alphanumeric())
        .collect();
    let Some(&i) = slots.choose(rng) else {
        return ILLEGIBLE.to_string();
    };
    let mut out = chars;
    out[i] = match out[i] {
        '9' => '0',
        'z' => 'a',
        c if c.is_ascii_digit() || c.is_ascii_lowercase() => (c as u8 + 1) as char,
        _ => 'x',
    };
    out.into_iter().collect()
}

fn jitter(b: &Box2D, canvas: &Box2D, rng: &mut impl Rng) -> Option<Box2D> {
    let mut shift = || rng.gen_range(8..=24) * if rng.gen_bool(0.5) { 1 } else { -1 };
    let (dx, dy) = (shift(), shift());
    let moved = b.translate(dx, dy).intersect(canvas)?;
    (moved != *b).then_some(moved)
}

pub(crate) fn detect_object_tool(noise: f64) -> FnTool {
    FnTool::new(
        info(
            "DetectObject",
            "Detects all instances of a class in the image and returns their boxes.",
            "image + class name",
            "boxes",
            "OwlViTv2",
            Mode::Oracle,
            vec![param("image", P::Image), param("class", P::Text)],
            ValueTag::BoxList,
        ),
        move |args, ctx| {
            let scene = scene_of(single_image(&args[0])?)?;
            let class = text_arg(&args[1])?;
            if class.trim().is_empty() {
                return Err(ToolError::new("class name is empty"));
            }
            let mut list = detect_object(scene, class);
            if noise > 0.0 {
                let mut rng = ctx.rng();
                let canvas = scene.bounds();
                let mut kept = Vec::with_capacity(list.boxes.len());
                for sb in list.boxes {
                    if !rng.gen_bool(noise.min(1.0)) {
                        kept.push(sb);
                        continue;
                    }
                    let moved = if rng.gen_bool(0.5) { jitter(&sb.bbox, &canvas, &mut rng) } else { None };
                    if let Some(bbox) = moved {
                        kept.push(ScoredBox { bbox, ..sb });
                    }
                }
                list.boxes = kept;
            }
            Ok(Value::BoxList(list))
        },
    )
}

/// Maps `f` over an image or image list, flipping outputs with probability `noise`.
fn map_images(
    v: &Value,
    noise: f64,
    ctx: &crate::registry::CallContext<'_>,
    f: impl Fn(&Scene) -> String,
    corrupt: impl Fn(&Scene, &str, &mut rand_chacha::ChaCha8Rng) -> String,
) -> Result<Value, ToolError> {
    let (imgs, list) = images(v)?;
    let mut rng = ctx.rng();
    let mut out = Vec::with_capacity(imgs.len());
    for img in imgs {
        let scene = scene_of(img)?;
        let truth = f(scene);
        if noise > 0.0 && rng.gen_bool(noise.min(1.0)) {
            out.push(corrupt(scene, &truth, &mut rng));
        } else {
            out.push(truth);
        }
    }
    Ok(texts(out, list))
}

pub(crate) fn object_in_image_tool(noise: f64) -> FnTool {
    FnTool::new(
        info(
            "ObjectInImage",
            "Answers yes or no: is an object of the class present in the image?",
            "image + class name",
            "yes/no",
            VISION_BACKBONE,
            Mode::Oracle,
            vec![param("class", P::Text), param("image", P::Image)],
            ValueTag::Boolean,
        ),
        move |args, ctx| {
            let class = text_arg(&args[0])?.to_string();
            let out = if let Value::ImageList(_) = &args[1] {
                map_images(
                    &args[1],
                    noise,
                    ctx,
                    |s| yes_no(object_in_image(s, &class)).to_string(),
                    |_, t, r| perturb_answer(t, r),
                )?
            } else {
                let scene = scene_of(single_image(&args[1])?)?;
                let mut b = object_in_image(scene, &class);
                if noise > 0.0 && ctx.rng().gen_bool(noise.min(1.0)) {
                    b = !b;
                }
                Value::Boolean(b)
            };
            Ok(out)
        },
    )
}

pub(crate) fn ocr_tool(noise: f64) -> FnTool {
    FnTool::new(
        info(
            "OCR",
            "Reads the text visible in the image.",
            "image",
            "recognized text",
            VISION_BACKBONE,
            Mode::Oracle,
            vec![param("image", P::Image)],
            ValueTag::Text,
        ),
        move |args, ctx| map_images(&args[0], noise, ctx, ocr, |_, t, r| perturb_text(t, r)),
    )
}

pub(crate) fn caption_tool(noise: f64) -> FnTool {
    FnTool::new(
        info(
            "Caption",
            "Describes the image in one sentence.",
            "image",
            "caption",
            VISION_BACKBONE,
            Mode::Oracle,
            vec![param("image", P::Image)],
            ValueTag::Text,
        ),
        move |args, ctx| {
            map_images(&args[0], noise, ctx, caption, |scene, _, r| {
                // the largest object always leads the caption
                let mut s = scene.clone();
                let classes: Vec<&str> = vocab::CLASSES.iter().map(|c| c.name).collect();
                match s.objects.iter_mut().max_by_key(|o| o.bbox.area()) {
                    Some(o) => o.class = other(&classes, &o.class, r).to_string(),
                    None => return format!("a {} {} .", COLORS.choose(r).unwrap(), classes.choose(r).unwrap()),
                }
                caption(&s)
            })
        },
    )
}

/// Oracle VQA answer for one scene.
pub fn vqa(scene: &Scene, question: &str) -> String {
    answer_visual_question(scene, question).unwrap_or_else(|| "unknown".to_string())
}

pub(crate) fn vqa_tool(noise: f64) -> FnTool {
    FnTool::new(
        info(
            "VQA",
            "Answers a question about the image.",
            "image + question",
            "answer",
            VISION_BACKBONE,
            Mode::Oracle,
            vec![param("question", P::Text), param("image", P::Image)],
            ValueTag::Text,
        ),
        move |args, ctx| {
            let q = text_arg(&args[0])?.to_string();
            map_images(&args[1], noise, ctx, |s| vqa(s, &q), |_, t, r| perturb_answer(t, r))
        },
    )
}

pub(crate) fn crop_image_tool() -> FnTool {
    FnTool::new(
        info(
            "CropImage",
            "Crops the image to a box; a list of boxes gives a list of crops.",
            "image + box",
            "image",
            "PIL",
            Mode::Oracle,
            vec![param("image", P::Image), param("box", P::BoxOrBoxes)],
            ValueTag::ImageRef,
        ),
        |args, _| {
            let scene = scene_of(single_image(&args[0])?)?;
            let crop = |b: &Box2D| {
                scene
                    .crop(b)
                    .map(|s| ImageRef::Scene(Arc::new(s)))
                    .map_err(|e| ToolError::new(e.to_string()))
            };
            match &args[1] {
                Value::Box(b) => Ok(Value::Image(crop(b)?)),
                Value::BoxList(list) if list.is_empty() => Err(ToolError::new("no boxes to crop")),
                Value::BoxList(list) => Ok(Value::ImageList(
                    list.iter_boxes().map(crop).collect::<Result<_, _>>()?,
                )),
                other => Err(ToolError::new(format!("expected a box, got {}", other.tag()))),
            }
        },
    )
}
