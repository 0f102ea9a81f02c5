//! Boxes, crops and the two geometry tools.
//!
//! cargo run --example geometry

use std::path::Path;

use hammr::tools::{bounding_box_overlap, detect_object, spatial_selection};
use hammr::value::{iou, Box2D};
use hammr::world::Scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Box2D::new(0, 0, 50, 50);
    let b = Box2D::new(25, 25, 50, 50);
    println!("iou({a}, {b}) = {:.6}", iou(&a, &b));

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/fixtures/scenes");
    let scene: Scene = serde_json::from_str(&std::fs::read_to_string(dir.join("four_cars.json"))?)?;
    let cars = detect_object(&scene, "car");
    let boxes: Vec<Box2D> = cars.iter_boxes().copied().collect();
    println!("detected {} cars", boxes.len());
    for rel in ["leftmost", "rightmost", "largest", "smallest"] {
        println!("{rel:>9}: {}", spatial_selection(&boxes, rel)?);
    }
    let scores = bounding_box_overlap(&boxes[0], &boxes);
    println!("overlap with the first car: {scores:.3?}");

    let left_half = scene.crop(&Box2D::new(0, 0, 320, 480))?;
    println!("left half keeps {} of {} cars:", left_half.objects.len(), scene.objects.len());
    for o in &left_half.objects {
        println!("  {} {} at {}", o.color, o.class, o.bbox);
    }
    Ok(())
}
