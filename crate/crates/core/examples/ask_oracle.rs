//! Ask the full hierarchy a question about one of the fixture scenes.
//!
//! cargo run --example ask_oracle -- "how many yellow cars are there?"
//!
//! The large yellow car overlaps every other box, so each crop contains a yellow car.

use std::path::Path;
use std::sync::Arc;

use hammr::agents::{AgentLibrary, DISPATCHER};
use hammr::backend::OraclePlanner;
use hammr::engine::{Engine, EngineConfig};
use hammr::tools::{builtin_registry, ToolConfig};
use hammr::value::{ImageRef, Value};
use hammr::world::{KnowledgeBase, Scene, World};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let question = std::env::args().nth(1).unwrap_or_else(|| "how many yellow cars are there?".into());
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/fixtures/scenes");
    let file = if question.contains("cathedral") { "cathedral.json" } else { "four_cars.json" };
    let scene: Scene = serde_json::from_str(&std::fs::read_to_string(dir.join(file))?)?;

    let library = AgentLibrary::shipped();
    let world = Arc::new(World { kb: KnowledgeBase::generate(0), ..World::default() });
    let mut registry = builtin_registry(world, &ToolConfig::default());
    library.register_all(&mut registry)?;

    let config = EngineConfig::default();
    let engine = Engine { registry: &registry, backend: &OraclePlanner, config: &config };
    let ep = engine.run(library.get(DISPATCHER).unwrap(), &question, &[("image".into(), Value::Image(ImageRef::from(scene)))], "ask", 1);
    print!("{}", ep.render(None));
    Ok(())
}
