//! Precision/recall trade-off as the abstention threshold rises. Predictions
//! are computed once without a threshold and re-gated per point.

use glossdom::dataset::{load_corpus, CorpusFormat};
use glossdom::engine::{classify_batch, BatchOptions, EngineConfig};
use glossdom::eval::{sweep_csv, threshold_grid, threshold_sweep};
use glossdom::labelspace::babeldomains;
use glossdom::scorer::MockScorer;

fn main() -> glossdom::Result<()> {
    let corpus = load_corpus(
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_glosses.tsv"),
        CorpusFormat::Tsv,
    )?;
    let labels = babeldomains();
    // a low temperature sharpens the distribution so the curve has some range
    let cfg = EngineConfig::default().with_descriptors(true).with_temperature(0.1);
    let preds = classify_batch(&corpus, &labels, &cfg, &MockScorer::new(), BatchOptions::default())?
        .predictions;

    let points = threshold_sweep(&preds, &corpus, &labels, &threshold_grid(0.1, 0.9))?;
    print!("{}", sweep_csv(&points));
    Ok(())
}
