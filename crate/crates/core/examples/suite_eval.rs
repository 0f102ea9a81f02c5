//! Generate a small synthetic suite and compare specialists, the naive agent and the hierarchy.
//!
//! cargo run --release --example suite_eval -- 20

use std::sync::Arc;

use hammr::agents::AgentLibrary;
use hammr::backend::OraclePlanner;
use hammr::eval::{EvalConfig, Harness, ReportFormat};
use hammr::tools::NoiseConfig;
use hammr::world::{generate_suite, SuiteConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let per_type: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let world = Arc::new(generate_suite(&SuiteConfig { seed: 0, per_type, ..SuiteConfig::default() })?);
    let config = EvalConfig { seed: 1, parallel: 4, ..EvalConfig::default() }.with_noise(NoiseConfig::uniform(0.2));
    let harness = Harness::new(world, AgentLibrary::shipped(), &OraclePlanner, config)?;
    let columns = ["specialists", "naive", "hammr"].map(String::from);
    let run = harness.run(&columns)?;
    print!("{}", run.report.render(ReportFormat::Markdown));
    Ok(())
}
