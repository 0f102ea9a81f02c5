//! Box selection and overlap scoring.

use super::{info, text_arg, FnTool};
use crate::registry::{param, Mode, ParamType as P, ToolError};
use crate::value::{iou, Box2D, Value, ValueTag};
use crate::world::vocab::SPATIAL_RELATIONS;

fn boxes_of(v: &Value) -> Result<Vec<Box2D>, ToolError> {
    match v {
        Value::Box(b) => Ok(vec![*b]),
        Value::BoxList(l) => Ok(l.iter_boxes().copied().collect()),
        other => Err(ToolError::new(format!("expected boxes, got {}", other.tag()))),
    }
}

/// Pick one box by relation; ties go to the lowest index.
pub fn spatial_selection(boxes: &[Box2D], relation: &str) -> Result<Box2D, ToolError> {
    if boxes.is_empty() {
        return Err(ToolError::new("the box list is empty"));
    }
    let relation = relation.trim().to_lowercase();
    let key: fn(&Box2D) -> i64 = match relation.as_str() {
        "leftmost" | "rightmost" => |b| b.center2().0,
        "topmost" | "bottommost" => |b| b.center2().1,
        "largest" | "smallest" => |b| b.area(),
        _ => {
            return Err(ToolError::new(format!(
                "unknown relation {relation:?}; expected one of {}",
                SPATIAL_RELATIONS.join(", ")
            )))
        }
    };
    let want_min = matches!(relation.as_str(), "leftmost" | "topmost" | "smallest");
    let mut best = boxes[0];
    for b in &boxes[1..] {
        let better = if want_min { key(b) < key(&best) } else { key(b) > key(&best) };
        if better {
            best = *b;
        }
    }
    Ok(best)
}

pub fn bounding_box_overlap(anchor: &Box2D, boxes: &[Box2D]) -> Vec<f64> {
    boxes.iter().map(|b| iou(anchor, b)).collect()
}

pub(crate) fn spatial_selection_tool() -> FnTool {
    FnTool::new(
        info(
            "SpatialSelection",
            "Selects the leftmost, rightmost, topmost, bottommost, largest or smallest box.",
            "boxes + relation",
            "box",
            "NumPy",
            Mode::Oracle,
            vec![param("boxes", P::Boxes), param("relation", P::Text)],
            ValueTag::Box,
        ),
        |args, _| Ok(Value::Box(spatial_selection(&boxes_of(&args[0])?, text_arg(&args[1])?)?)),
    )
}

pub(crate) fn bounding_box_overlap_tool() -> FnTool {
    FnTool::new(
        info(
            "BoundingBoxOverlap",
            "Scores the overlap (IoU) of an anchor box with each box in a list.",
            "anchor box + n boxes",
            "n IoU scores",
            "NumPy",
            Mode::Oracle,
            vec![param("anchor", P::Box), param("boxes", P::Boxes)],
            ValueTag::ScoreList,
        ),
        |args, _| {
            let Value::Box(anchor) = &args[0] else {
                return Err(ToolError::new("the anchor must be a single box"));
            };
            Ok(Value::ScoreList(bounding_box_overlap(anchor, &boxes_of(&args[1])?)))
        },
    )
}
