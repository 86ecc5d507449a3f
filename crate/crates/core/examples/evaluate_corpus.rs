//! Classify a gold corpus, save the predictions as a JSONL dump, reload the
//! dump and print the evaluation report.
//!
//! The dump format is the same one external classifiers write, so a dump
//! produced elsewhere can be scored with the same two calls at the end.

use glossdom::dataset::{load_corpus, CorpusFormat};
use glossdom::engine::dump::{load_predictions, save_predictions};
use glossdom::engine::{classify_batch, BatchOptions, EngineConfig};
use glossdom::eval::evaluate;
use glossdom::labelspace::babeldomains;
use glossdom::scorer::MockScorer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = load_corpus(
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_glosses.tsv"),
        CorpusFormat::Tsv,
    )?;
    let labels = babeldomains();
    let cfg = EngineConfig::default().with_descriptors(true).with_threshold(Some(0.035));

    let batch = classify_batch(&corpus, &labels, &cfg, &MockScorer::new(), BatchOptions::default())?;
    let dir = tempfile::tempdir()?;
    let dump = dir.path().join("predictions.jsonl");
    save_predictions(&dump, &batch.predictions, &serde_json::to_value(&cfg)?)?;

    let reloaded = load_predictions(&dump)?;
    let report = evaluate(&reloaded, &corpus, &labels)?;
    print!("{}", report.to_text());
    Ok(())
}
