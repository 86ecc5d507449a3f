//! Free-form topic words from the mask-filling formulation.
//!
//! Real tokenizers return subword pieces, casing variants and punctuation;
//! `clean_mask_predictions` strips markers, drops the noise and re-ranks.

use glossdom::dataset::GlossRecord;
use glossdom::engine::{clean_mask_predictions, predict_open_topics};
use glossdom::scorer::{MaskPrediction, MockScorer};

fn main() -> glossdom::Result<()> {
    let gloss = GlossRecord::new(
        "g",
        "football match played on a field; the football team scored a goal in the match",
    );
    for t in predict_open_topics(&gloss, 5, &MockScorer::new(), true)? {
        println!("{:>2}. {:<10} {:.3}", t.rank, t.token, t.score);
    }

    // what a byte-level BPE model typically sends back
    let raw = ["Ġfootball", "ĠFootball", ".", "Ġsoccer", "</s>", "Ġsports"];
    let raw: Vec<MaskPrediction> = raw
        .iter()
        .enumerate()
        .map(|(i, t)| MaskPrediction { token: t.to_string(), score: 0.3 - 0.05 * i as f64, rank: i + 1 })
        .collect();
    println!("\nraw:     {:?}", raw.iter().map(|p| p.token.as_str()).collect::<Vec<_>>());
    let cleaned = clean_mask_predictions(raw);
    println!("cleaned: {:?}", cleaned.iter().map(|p| (p.rank, p.token.as_str())).collect::<Vec<_>>());
    Ok(())
}
