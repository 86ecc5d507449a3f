//! Label an unlabelled pool into a silver file, stop part way, resume, and
//! export a seeded train/dev split for training a student classifier.

use glossdom::annotate::{annotate_pool, export_training_set, read_silver, AnnotateOptions, Split};
use glossdom::dataset::{load_corpus, CorpusFormat};
use glossdom::engine::EngineConfig;
use glossdom::labelspace::babeldomains;
use glossdom::scorer::MockScorer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pool = load_corpus(
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_pool.tsv"),
        CorpusFormat::Tsv,
    )?;
    let labels = babeldomains();
    let cfg = EngineConfig::default().with_descriptors(true).with_threshold(Some(0.035));
    let backend = MockScorer::new();
    let dir = tempfile::tempdir()?;
    let silver = dir.path().join("silver.jsonl");

    let first = AnnotateOptions { limit: Some(10), ..Default::default() };
    let s = annotate_pool(&pool, &labels, &cfg, &backend, &silver, first)?;
    println!("first pass: processed {}, written {}, remaining {}", s.processed, s.written, s.remaining);

    let rest = AnnotateOptions { resume: true, ..Default::default() };
    let s = annotate_pool(&pool, &labels, &cfg, &backend, &silver, rest)?;
    println!(
        "resumed:    skipped {}, processed {}, written {}, abstained {}",
        s.resumed, s.processed, s.written, s.abstained
    );

    let records = read_silver(&silver)?;
    let out = dir.path().join("student");
    let summary = export_training_set(&records, &labels, Split::new(0.8, 0.2)?, 13, &out)?;
    println!("export:     {} train, {} dev, {} labels", summary.n_train, summary.n_dev, summary.labels.len());
    let first_line = std::fs::read_to_string(out.join("train.jsonl"))?;
    println!("            {}", first_line.lines().next().unwrap_or(""));
    Ok(())
}
