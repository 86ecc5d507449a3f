//! Composite labels are split into descriptors ("Health and medicine" into
//! "health" and "medicine"); each descriptor is queried once and a label keeps
//! its best descriptor score. Compare the two modes on one gloss.

use glossdom::dataset::GlossRecord;
use glossdom::engine::{classify, Classifier, EngineConfig};
use glossdom::labelspace::{DomainLabel, LabelSpace};
use glossdom::scorer::MockScorer;

fn main() -> glossdom::Result<()> {
    let labels = LabelSpace::new(
        "clinic",
        vec![
            DomainLabel::auto("Health and medicine")?,
            DomainLabel::auto("Business, economics, and finance")?,
            // hand-picked descriptors instead of the derived ones
            DomainLabel::with_descriptors("Law and crime", ["law", "court", "crime"].map(String::from).to_vec())?,
        ],
        false,
    )?;
    for label in labels.labels() {
        println!("{:<35} -> {:?}", label.name, label.descriptors);
    }

    let gloss = GlossRecord::new("g1", "a court ruling on the price of medicine");
    let backend = MockScorer::new();
    for use_descriptors in [false, true] {
        let cfg = EngineConfig::default().with_descriptors(use_descriptors);
        let probes = Classifier::new(&labels, cfg.clone())?.queries_per_gloss();
        let ranked = classify(&gloss, &labels, &cfg, &backend)?;
        println!("\ndescriptors={use_descriptors} ({probes} queries per gloss)");
        for e in &ranked.entries {
            println!("  {:<35} {:.4}", e.label, e.p);
        }
    }
    Ok(())
}
