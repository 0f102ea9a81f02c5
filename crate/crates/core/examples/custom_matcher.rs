//! Plug in a lenient matcher for the knowledge-question datasets.
//!
//! cargo run --example custom_matcher

use hammr::eval::{exact_match, normalize, Matchers};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut matchers = Matchers::default();
    matchers.register("token_prefix", |pred, gold| {
        let (p, g) = (normalize(pred), normalize(gold));
        let pw: Vec<&str> = p.split(' ').collect();
        let gw: Vec<&str> = g.split(' ').collect();
        let ok = pw.len() == gw.len() && pw.iter().zip(&gw).all(|(a, b)| b.starts_with(a));
        if ok { 1.0 } else { 0.0 }
    });
    let matchers = matchers.with_active("token_prefix");
    for (pred, gold) in [("sept 8 1739", "September 8, 1739"), ("Bayombong", "bayombong"), ("1740", "1739")] {
        println!(
            "{pred:>12} vs {gold:<18} exact {}  soft {}",
            exact_match(pred, gold),
            matchers.soft_match(pred, gold)?
        );
    }
    Ok(())
}
