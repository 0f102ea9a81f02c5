//! Define a new agent in JSON, register it as a tool and run it.
//!
//! cargo run --example custom_agent

use std::path::Path;
use std::sync::Arc;

use hammr::agents::{register_agent_as_tool, AgentSpec};
use hammr::backend::OraclePlanner;
use hammr::engine::{Engine, EngineConfig};
use hammr::tools::{builtin_registry, ToolConfig};
use hammr::value::{ImageRef, Value};
use hammr::world::{Scene, World};

const SPEC: &str = r#"{
  "name": "CarCounterAgent",
  "preamble": "You are CarCounterAgent. You count vehicles that match a description.\nWork step by step: a [Thought]: line, then an [Act]: line calling one tool, or a [Finish]: line with a number.",
  "tools": ["DetectObject", "CropImage", "ObjectInImage"],
  "examples": [{
    "question": "how many red cars are there?",
    "transcript": [
      "[Thought]: I find the cars.",
      "[Act]: boxes = DetectObject(image, 'car')",
      "[Observe]: car at left:0/top:0/width:10/height:10",
      "[Thought]: I crop them.",
      "[Act]: crops = CropImage(image, boxes)",
      "[Observe]: Output of `CropImage` is stored in the variable: `crops`",
      "[Thought]: I check the color.",
      "[Act]: ObjectInImage('red car', crops)",
      "[Observe]: [yes].",
      "[Finish]: 1"
    ]
  }],
  "max_steps": 6
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = AgentSpec::parse(SPEC, "inline")?;
    let mut registry = builtin_registry(Arc::new(World::default()), &ToolConfig::default());
    register_agent_as_tool(spec.clone(), &mut registry)?;
    println!("{}\n", registry.get("CarCounterAgent").unwrap().info().prompt_line());

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/fixtures/scenes");
    let scene: Scene = serde_json::from_str(&std::fs::read_to_string(dir.join("four_cars.json"))?)?;
    let config = EngineConfig::default();
    let engine = Engine { registry: &registry, backend: &OraclePlanner, config: &config };
    let ep = engine.run(&spec, "how many yellow cars are there?", &[("image".into(), Value::Image(ImageRef::from(scene)))], "custom", 1);
    print!("{}", ep.render(None));

    let bad = SPEC.replace("\"ObjectInImage\"]", "\"ObjectInImage\", \"FilterObjects\"]");
    match AgentSpec::parse(&bad, "inline").and_then(|s| s.check_tools(&registry)) {
        Ok(()) => println!("\nunexpectedly accepted"),
        Err(e) => println!("\nrejected: {e}"),
    }
    Ok(())
}
