//! A backend that sometimes makes the naive agent call tools that do not exist.
//!
//! cargo run --release --example confusion

use std::sync::Arc;

use hammr::agents::AgentLibrary;
use hammr::backend::ConfusableBackend;
use hammr::eval::{EvalConfig, Harness, ReportFormat};
use hammr::world::{generate_suite, SuiteConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = Arc::new(generate_suite(&SuiteConfig { seed: 9, per_type: 10, ..SuiteConfig::default() })?);
    let backend = ConfusableBackend::new(0.5);
    let harness = Harness::new(world, AgentLibrary::shipped(), &backend, EvalConfig::default())?;
    let run = harness.run(&["naive".to_string(), "hammr".to_string()])?;
    print!("{}", run.report.render(ReportFormat::Markdown));
    println!();
    print!("{}", run.report.diff_table());

    if let Some(r) = run.records_of("naive").find(|r| r.score < 1.0) {
        println!("\nFirst naive failure ({:?}):\n", r.label);
        print!("{}", r.episode.render(None));
    }
    Ok(())
}
