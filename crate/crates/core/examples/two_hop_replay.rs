//! Replays a scripted two-hop episode: dispatcher, two-hop agent, single-hop agent.
//!
//! cargo run --example two_hop_replay

use std::path::Path;
use std::sync::Arc;

use hammr::agents::{AgentLibrary, DISPATCHER};
use hammr::backend::{load_script, ScriptedBackend};
use hammr::engine::{Engine, EngineConfig};
use hammr::tools::{builtin_registry, ToolConfig};
use hammr::value::{ImageRef, Value};
use hammr::world::{KnowledgeBase, Scene, World};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/fixtures");
    let scene: Scene = serde_json::from_str(&std::fs::read_to_string(dir.join("scenes/cathedral.json"))?)?;
    let backend = ScriptedBackend::new(load_script(&dir.join("fig1_two_hop.json"))?);

    let library = AgentLibrary::shipped();
    let world = Arc::new(World { kb: KnowledgeBase::generate(0), ..World::default() });
    let mut registry = builtin_registry(world, &ToolConfig::default());
    library.register_all(&mut registry)?;

    let config = EngineConfig::default();
    let engine = Engine { registry: &registry, backend: &backend, config: &config };
    let ep = engine.run(
        library.get(DISPATCHER).unwrap(),
        "in which country is the city where this cathedral is located?",
        &[("image".into(), Value::Image(ImageRef::from(scene)))],
        "fig1",
        1,
    );
    print!("{}", ep.render(None));
    println!("\ndepth {}, {} backend steps consumed", ep.depth(), backend.position());
    Ok(())
}
