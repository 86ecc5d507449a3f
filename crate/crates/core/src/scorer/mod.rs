//! Scoring backends.
//!
//! A [`Scorer`] answers three kinds of queries: entailment probabilities for
//! premise/hypothesis pairs, next-sentence probabilities for sentence pairs,
//! and top-k fillings for a single masked sequence. Two implementations
//! ship with the crate: [`RemoteScorer`] speaks the JSON wire protocol in
//! [`wire`], and [`MockScorer`] is a closed-form lexical-overlap oracle used
//! for hermetic tests. [`CountingScorer`] wraps any backend and tallies
//! queries.

mod counting;
mod mock;
mod remote;
pub mod wire;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::patterns::PatternFormulation as Formulation;
pub use counting::{CountingScorer, QueryCounts};
pub use mock::{mock_content_words, MockScorer, MOCK_NLI_FLOOR, MOCK_STOPWORDS, MOCK_VOCAB_BUDGET};
pub use remote::{RemoteConfig, RemoteScorer, ENV_BACKEND_TIMEOUT_MS, ENV_BACKEND_URL};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("backend unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed backend response: {message}; payload: {excerpt}")]
    Protocol { message: String, excerpt: String },
    #[error("backend error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Backend { status: Option<u16>, message: String },
    #[error("backend `{model}` does not support the {formulation} formulation")]
    Unsupported {
        model: String,
        formulation: Formulation,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid scorer input: {0}")]
    InvalidInput(String),
}

impl ScorerError {
    /// True for failures on the backend side (as opposed to bad requests
    /// built by the caller).
    pub fn is_backend_failure(&self) -> bool {
        matches!(
            self,
            ScorerError::Transport { .. } | ScorerError::Protocol { .. } | ScorerError::Backend { .. }
        )
    }

    pub(crate) fn protocol(message: impl Into<String>, payload: &str) -> Self {
        ScorerError::Protocol {
            message: message.into(),
            excerpt: excerpt(payload),
        }
    }
}

pub(crate) fn excerpt(payload: &str) -> String {
    const MAX: usize = 200;
    if payload.chars().count() <= MAX {
        payload.to_string()
    } else {
        let cut: String = payload.chars().take(MAX).collect();
        format!("{cut}...")
    }
}

/// One (first, second) input: premise/hypothesis for entailment, or a
/// sentence and its candidate continuation for next-sentence scoring.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentencePair {
    pub first: String,
    pub second: String,
}

impl SentencePair {
    pub fn new(first: impl Into<String>, second: impl Into<String>) -> Self {
        Self {
            first: first.into(),
            second: second.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliScores {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl NliScores {
    /// Checks the probability-simplex invariant for normalized outputs.
    pub fn is_distribution(&self) -> bool {
        let parts = [self.entailment, self.neutral, self.contradiction];
        parts.iter().all(|p| (0.0..=1.0).contains(p))
            && (parts.iter().sum::<f64>() - 1.0).abs() <= 1e-6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NspScore {
    pub is_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPrediction {
    pub token: String,
    pub score: f64,
    pub rank: usize,
}

/// Backend results plus whether scores are probabilities (`normalized`) or
/// raw logits / log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored<T> {
    pub normalized: bool,
    pub results: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Mock,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Remote => "remote",
            BackendKind::Mock => "mock",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub supported_formulations: BTreeSet<Formulation>,
    pub model_name: String,
}

impl BackendDescriptor {
    pub fn supports(&self, formulation: Formulation) -> bool {
        self.supported_formulations.contains(&formulation)
    }
}

pub trait Scorer: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    /// How many requests may usefully be in flight at once.
    fn max_in_flight(&self) -> usize {
        1
    }

    fn score_nli(&self, batch: &[SentencePair]) -> Result<Scored<NliScores>, ScorerError>;

    fn score_nsp(&self, batch: &[SentencePair]) -> Result<Scored<NspScore>, ScorerError>;

    /// Top-`k` fillings for the single `[MASK]` placeholder in `sequence`,
    /// rank-ordered.
    fn fill_mask(&self, sequence: &str, k: usize) -> Result<Scored<MaskPrediction>, ScorerError>;

    fn ensure_supports(&self, formulation: Formulation) -> Result<(), ScorerError> {
        let d = self.descriptor();
        if d.supports(formulation) {
            Ok(())
        } else {
            Err(ScorerError::Unsupported {
                model: d.model_name,
                formulation,
            })
        }
    }
}

/// Validates a fill-mask request before it reaches a backend.
pub fn check_mask_request(sequence: &str, k: usize) -> Result<(), ScorerError> {
    if k == 0 {
        return Err(ScorerError::InvalidInput("k must be at least 1".into()));
    }
    let masks = sequence.matches(crate::patterns::MASK).count();
    if masks != 1 {
        return Err(ScorerError::InvalidInput(format!(
            "sequence must contain exactly one {} placeholder, found {masks}",
            crate::patterns::MASK
        )));
    }
    Ok(())
}

/// Checks rank contiguity and non-increasing scores.
pub fn check_ranking(predictions: &[MaskPrediction]) -> bool {
    predictions
        .iter()
        .enumerate()
        .all(|(i, p)| p.rank == i + 1)
        && predictions.windows(2).all(|w| w[0].score >= w[1].score)
}

macro_rules! forward_scorer {
    ($($ty:ty),*) => {$(
        impl<S: Scorer + ?Sized> Scorer for $ty {
            fn descriptor(&self) -> BackendDescriptor {
                (**self).descriptor()
            }
            fn max_in_flight(&self) -> usize {
                (**self).max_in_flight()
            }
            fn score_nli(&self, batch: &[SentencePair]) -> Result<Scored<NliScores>, ScorerError> {
                (**self).score_nli(batch)
            }
            fn score_nsp(&self, batch: &[SentencePair]) -> Result<Scored<NspScore>, ScorerError> {
                (**self).score_nsp(batch)
            }
            fn fill_mask(&self, sequence: &str, k: usize) -> Result<Scored<MaskPrediction>, ScorerError> {
                (**self).fill_mask(sequence, k)
            }
        }
    )*};
}

forward_scorer!(&S, Box<S>, Arc<S>);
