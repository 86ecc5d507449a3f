use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use super::{
    BackendDescriptor, MaskPrediction, NliScores, NspScore, Scored, Scorer, ScorerError,
    SentencePair,
};

/// Wraps a backend and counts scored inputs per formulation.
#[derive(Debug)]
pub struct CountingScorer<S> {
    inner: S,
    nli: AtomicU64,
    nsp: AtomicU64,
    mlm: AtomicU64,
    requests: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QueryCounts {
    pub nli: u64,
    pub nsp: u64,
    pub mlm: u64,
    pub requests: u64,
}

impl QueryCounts {
    /// Scored sequences across all formulations.
    pub fn total(&self) -> u64 {
        self.nli + self.nsp + self.mlm
    }
}

impl<S: Scorer> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            nli: AtomicU64::new(0),
            nsp: AtomicU64::new(0),
            mlm: AtomicU64::new(0),
            requests: AtomicU64::new(0),
        }
    }

    pub fn counts(&self) -> QueryCounts {
        QueryCounts {
            nli: self.nli.load(Ordering::Relaxed),
            nsp: self.nsp.load(Ordering::Relaxed),
            mlm: self.mlm.load(Ordering::Relaxed),
            requests: self.requests.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        for c in [&self.nli, &self.nsp, &self.mlm, &self.requests] {
            c.store(0, Ordering::Relaxed);
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: Scorer> Scorer for CountingScorer<S> {
    fn descriptor(&self) -> BackendDescriptor {
        self.inner.descriptor()
    }

    fn max_in_flight(&self) -> usize {
        self.inner.max_in_flight()
    }

    fn score_nli(&self, batch: &[SentencePair]) -> Result<Scored<NliScores>, ScorerError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        self.nli.fetch_add(batch.len() as u64, Ordering::Relaxed);
        self.inner.score_nli(batch)
    }

    fn score_nsp(&self, batch: &[SentencePair]) -> Result<Scored<NspScore>, ScorerError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        self.nsp.fetch_add(batch.len() as u64, Ordering::Relaxed);
        self.inner.score_nsp(batch)
    }

    fn fill_mask(&self, sequence: &str, k: usize) -> Result<Scored<MaskPrediction>, ScorerError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        self.mlm.fetch_add(1, Ordering::Relaxed);
        self.inner.fill_mask(sequence, k)
    }
}
