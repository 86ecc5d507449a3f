//! Score the sample corpus once per built-in entailment pattern and print a
//! comparison table, best F1 at a fixed threshold first.

use glossdom::dataset::{load_corpus, CorpusFormat};
use glossdom::engine::{BatchOptions, EngineConfig};
use glossdom::eval::{run_comparison, ComparisonRow, ComparisonRun};
use glossdom::labelspace::babeldomains;
use glossdom::patterns::{PatternFormulation, PatternRegistry};
use glossdom::scorer::MockScorer;

const THRESHOLD: f64 = 0.04;

fn main() -> glossdom::Result<()> {
    let corpus = load_corpus(
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_glosses.tsv"),
        CorpusFormat::Tsv,
    )?;
    let labels = babeldomains();
    let registry = PatternRegistry::builtin();
    let backend = MockScorer::new();

    let runs: Vec<ComparisonRun> = registry
        .by_formulation(PatternFormulation::Nli)
        .map(|p| ComparisonRun {
            name: p.id.clone(),
            config: EngineConfig::default().with_pattern(&p.id).with_descriptors(true),
            backend: &backend,
        })
        .collect();
    let opts = BatchOptions { workers: 4, ..Default::default() };
    let mut rows = run_comparison(&corpus, &labels, &runs, &registry, opts, &[THRESHOLD]);
    rows.sort_by(|a, b| {
        let f1 = |r: &ComparisonRow| r.sweep.first().map_or(0.0, |p| p.f1);
        f1(b).total_cmp(&f1(a))
    });

    println!("{:<28} {:>6} {:>6} {:>8}", "pattern", "top-1", "top-5", "f1@0.04");
    for row in &rows {
        match &row.metrics {
            Some(m) => println!(
                "{:<28} {:>6.3} {:>6.3} {:>8.3}",
                row.name, m.top_k[&1], m.top_k[&5], row.sweep[0].f1
            ),
            None => println!("{:<28} failed: {}", row.name, row.error.as_deref().unwrap_or("")),
        }
    }
    Ok(())
}
