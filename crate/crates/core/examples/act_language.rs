//! Parse, validate and render Act lines without running anything.
//!
//! cargo run --example act_language

use std::sync::Arc;

use hammr::actlang::{parse_act_line, render_call, validate};
use hammr::tools::{builtin_registry, ToolConfig};
use hammr::value::{ImageRef, Value, VariableStore};
use hammr::world::{Scene, World};

fn main() {
    let registry = builtin_registry(Arc::new(World::default()), &ToolConfig::default());
    let mut store = VariableStore::new();
    store.bind("image", Value::Image(ImageRef::from(Scene::empty("s", 640, 480)))).unwrap();

    let lines = [
        "crop=CropImage( image ,[0, 0, 50, 50] )",
        "VQA('When was this cathedral dedicated to st. dominic de guzman?', image)",
        "FilterObjects(image, 'car', 'color', 'yellow')",
        "OCR(crops)",
        "VQA(image)",
        "DetectObject('car', image)",
        "VQA('unterminated, image)",
        "AnswerWithContext('''what's on the sign?''', image)",
    ];
    for line in lines {
        print!("{line}\n  -> ");
        match parse_act_line(line) {
            Err(e) => println!("{:?}: {}", e.kind, e.message),
            Ok(call) => match validate(&call, &registry, &store) {
                Ok(v) => println!("ok: {} ({} args)", render_call(&v.call), v.args.len()),
                Err(e) => println!("{:?}: {}", e.kind, e.message),
            },
        }
    }
}
