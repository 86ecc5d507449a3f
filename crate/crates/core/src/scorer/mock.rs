//! Deterministic lexical-overlap backend.
//!
//! Closed form, so tests can recompute every number independently:
//!
//! * Text is lower-cased and split on non-alphanumeric characters; tokens in
//!   [`MOCK_STOPWORDS`] are dropped. What remains, as a set, are the
//!   content words.
//! * `overlap = |premise ∩ hypothesis| / max(1, |hypothesis|)`.
//! * Entailment: `entailment = 0.05 + 0.9 * overlap`; the remainder
//!   `1 - entailment` is split 2:1 between neutral and contradiction.
//! * Next sentence: `is_next = overlap` (first as premise, second as hypothesis).
//! * Fill-mask: the mask placeholder and scaffold tokens (words immediately
//!   followed by `:`, such as `Context:`) are removed; the remaining content
//!   tokens are ranked by frequency, then alphabetically, with score
//!   `count / total content tokens`.
//!
//! All scores are reported as normalized probabilities.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    check_mask_request, BackendDescriptor, BackendKind, Formulation, MaskPrediction, NliScores,
    NspScore, Scored, Scorer, ScorerError, SentencePair,
};

pub const MOCK_STOPWORDS: &[&str] = &[
    "a", "about", "all", "an", "and", "any", "are", "as", "at", "be", "been", "being", "but", "by",
    "for", "from", "has", "have", "in", "into", "is", "it", "its", "no", "not", "of", "on", "or",
    "so", "such", "than", "that", "the", "their", "these", "this", "those", "to", "was", "were",
    "where", "which", "who", "whom", "whose", "with",
];

/// Entailment probability for a hypothesis sharing nothing with the premise.
pub const MOCK_NLI_FLOOR: f64 = 0.05;

/// Largest `k` the mock accepts for fill-mask requests.
pub const MOCK_VOCAB_BUDGET: usize = 30_522;

fn is_stopword(token: &str) -> bool {
    MOCK_STOPWORDS.binary_search(&token).is_ok()
}

/// Lower-cased alphanumeric tokens, each with the character following it.
fn tokens_with_follower(text: &str) -> Vec<(String, Option<char>)> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push((std::mem::take(&mut current), Some(c)));
        }
    }
    if !current.is_empty() {
        out.push((current, None));
    }
    out
}

/// Content-word set of a text under the mock's tokenization.
pub fn mock_content_words(text: &str) -> BTreeSet<String> {
    tokens_with_follower(text)
        .into_iter()
        .map(|(t, _)| t)
        .filter(|t| !is_stopword(t))
        .collect()
}

fn overlap(premise: &str, hypothesis: &str) -> f64 {
    let p = mock_content_words(premise);
    let h = mock_content_words(hypothesis);
    let shared = h.intersection(&p).count();
    shared as f64 / h.len().max(1) as f64
}

#[derive(Debug, Clone)]
pub struct MockScorer {
    model_name: String,
}

impl Default for MockScorer {
    fn default() -> Self {
        Self::new()
    }
}

impl MockScorer {
    pub fn new() -> Self {
        Self {
            model_name: "mock-overlap".to_string(),
        }
    }

    pub fn named(model_name: impl Into<String>) -> Self {
        Self {
            model_name: model_name.into(),
        }
    }

    pub fn nli(premise: &str, hypothesis: &str) -> NliScores {
        let entailment = MOCK_NLI_FLOOR + 0.9 * overlap(premise, hypothesis);
        let rest = 1.0 - entailment;
        NliScores {
            entailment,
            neutral: rest * 2.0 / 3.0,
            contradiction: rest / 3.0,
        }
    }

    pub fn nsp(first: &str, second: &str) -> NspScore {
        NspScore {
            is_next: overlap(first, second),
        }
    }

    fn mask_candidates(sequence: &str) -> Vec<MaskPrediction> {
        let cleaned = sequence.replace(crate::patterns::MASK, " ");
        let mut freq: BTreeMap<String, usize> = BTreeMap::new();
        let mut total = 0usize;
        for (token, follower) in tokens_with_follower(&cleaned) {
            if follower == Some(':') || is_stopword(&token) {
                continue;
            }
            *freq.entry(token).or_insert(0) += 1;
            total += 1;
        }
        let mut ranked: Vec<(String, usize)> = freq.into_iter().collect();
        // BTreeMap order is alphabetical; a stable sort keeps it within ties.
        ranked.sort_by_key(|&(_, count)| std::cmp::Reverse(count));
        ranked
            .into_iter()
            .enumerate()
            .map(|(i, (token, count))| MaskPrediction {
                token,
                score: count as f64 / total as f64,
                rank: i + 1,
            })
            .collect()
    }
}

impl Scorer for MockScorer {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: BackendKind::Mock,
            supported_formulations: [Formulation::Mlm, Formulation::Nsp, Formulation::Nli]
                .into_iter()
                .collect(),
            model_name: self.model_name.clone(),
        }
    }

    fn score_nli(&self, batch: &[SentencePair]) -> Result<Scored<NliScores>, ScorerError> {
        if batch.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        Ok(Scored {
            normalized: true,
            results: batch.iter().map(|p| Self::nli(&p.first, &p.second)).collect(),
        })
    }

    fn score_nsp(&self, batch: &[SentencePair]) -> Result<Scored<NspScore>, ScorerError> {
        if batch.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        Ok(Scored {
            normalized: true,
            results: batch.iter().map(|p| Self::nsp(&p.first, &p.second)).collect(),
        })
    }

    fn fill_mask(&self, sequence: &str, k: usize) -> Result<Scored<MaskPrediction>, ScorerError> {
        check_mask_request(sequence, k)?;
        if k > MOCK_VOCAB_BUDGET {
            return Err(ScorerError::Backend {
                status: None,
                message: format!("top_k {k} exceeds vocabulary budget {MOCK_VOCAB_BUDGET}"),
            });
        }
        let mut results = Self::mask_candidates(sequence);
        results.truncate(k);
        Ok(Scored {
            normalized: true,
            results,
        })
    }
}
