//! Accuracy of the hierarchy as tool noise grows.
//!
//! cargo run --release --example noise_sweep

use std::sync::Arc;

use hammr::agents::AgentLibrary;
use hammr::backend::OraclePlanner;
use hammr::eval::{ErrorLabel, EvalConfig, Harness};
use hammr::tools::NoiseConfig;
use hammr::world::{generate_suite, SuiteConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = Arc::new(generate_suite(&SuiteConfig { seed: 5, per_type: 25, ..SuiteConfig::default() })?);
    println!("noise  accuracy  tool-failure%");
    for step in 0..=5 {
        let p = step as f64 / 10.0;
        let config = EvalConfig { seed: 3, parallel: 4, ..EvalConfig::default() }.with_noise(NoiseConfig::uniform(p));
        let run = Harness::new(world.clone(), AgentLibrary::shipped(), &OraclePlanner, config)?.run(&["hammr".to_string()])?;
        let agent = &run.report.agents[0];
        let tool = agent.errors.percentages().iter().find(|(l, _)| *l == ErrorLabel::ToolFailure).unwrap().1;
        println!("{p:>5.1}  {:>8.1}  {tool:>13.1}", agent.overall);
    }
    Ok(())
}
