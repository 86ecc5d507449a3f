//! Rank the 32 built-in domains for a single gloss.
//!
//! Runs against the in-process mock backend, so no model server is needed:
//!
//! ```text
//! cargo run --example label_gloss -- "a piece of music written for an orchestra"
//! ```

use glossdom::dataset::GlossRecord;
use glossdom::engine::{classify, EngineConfig};
use glossdom::labelspace::babeldomains;
use glossdom::scorer::MockScorer;

fn main() -> glossdom::Result<()> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "a piece of music written for a large orchestra".into());
    let gloss = GlossRecord::new("cli", text);
    let labels = babeldomains();
    let cfg = EngineConfig::default().with_threshold(Some(0.035));

    let ranked = classify(&gloss, &labels, &cfg, &MockScorer::new())?;
    for entry in ranked.entries.iter().take(5) {
        println!("{:<45} {:.4}", entry.label, entry.p);
    }
    if ranked.abstained {
        println!("(top probability below 0.035, abstaining)");
    }
    Ok(())
}
