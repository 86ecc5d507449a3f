//! Zero-shot classification of glosses over a label space.
//!
//! For every gloss the engine renders one query per label (or per descriptor
//! when descriptors are enabled), scores them with a [`Scorer`], keeps the
//! positive-class score (entailment for nli, is-next for nsp), max-maps
//! descriptor scores back onto their labels, and turns the per-label scores
//! into a distribution with a temperature softmax. Predictions whose top
//! probability falls under the configured threshold are flagged as
//! abstained but keep their full ranking.
//!
//! Softmax recipe, relied on for bit-exact reproducibility:
//! `m = max(s)`, `e_i = exp((s_i - m) / T)`, `Z = e_1 + ... + e_n` summed in
//! label order, `p_i = e_i / Z`. Exactly equal probabilities keep label-space
//! declaration order.

pub mod dump;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Corpus, GlossRecord};
use crate::labelspace::{map_descriptor_scores, LabelSpace, LabelSpaceError};
use crate::patterns::{
    render, PatternError, PatternFormulation, PatternRegistry, PatternTemplate,
    DEFAULT_MLM_PATTERN, DEFAULT_PATTERN,
};
use crate::scorer::{MaskPrediction, Scorer, ScorerError, SentencePair};

/// Number of mask fillings requested when scoring label tokens at the mask.
pub const MLM_CONSTRAINED_TOP_K: usize = 1000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    LabelSpace(#[from] LabelSpaceError),
    #[error("pattern `{pattern}` is a {pattern_formulation} pattern but the engine runs {engine}")]
    FormulationMismatch {
        pattern: String,
        pattern_formulation: PatternFormulation,
        engine: EngineFormulation,
    },
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error("mlm-constrained scoring needs single-token labels, `{0}` has several tokens")]
    MultiTokenLabel(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("gloss `{gloss_id}`: {source}")]
    Backend {
        gloss_id: String,
        #[source]
        source: ScorerError,
    },
}

impl EngineError {
    pub fn is_backend_failure(&self) -> bool {
        matches!(self, EngineError::Backend { source, .. } if source.is_backend_failure())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineFormulation {
    Nli,
    Nsp,
    MlmConstrained,
}

impl EngineFormulation {
    pub fn pattern_formulation(self) -> PatternFormulation {
        match self {
            EngineFormulation::Nli => PatternFormulation::Nli,
            EngineFormulation::Nsp => PatternFormulation::Nsp,
            EngineFormulation::MlmConstrained => PatternFormulation::Mlm,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EngineFormulation::Nli => "nli",
            EngineFormulation::Nsp => "nsp",
            EngineFormulation::MlmConstrained => "mlm-constrained",
        }
    }
}

impl fmt::Display for EngineFormulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngineFormulation {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nli" => Ok(Self::Nli),
            "nsp" => Ok(Self::Nsp),
            "mlm-constrained" | "mlm" => Ok(Self::MlmConstrained),
            other => Err(EngineError::Config(format!(
                "unknown formulation `{other}` (expected nli, nsp or mlm-constrained)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub formulation: EngineFormulation,
    pub pattern_id: String,
    pub use_descriptors: bool,
    pub threshold: Option<f64>,
    pub softmax_temperature: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            formulation: EngineFormulation::Nli,
            pattern_id: DEFAULT_PATTERN.to_string(),
            use_descriptors: false,
            threshold: None,
            softmax_temperature: 1.0,
        }
    }
}

impl EngineConfig {
    pub fn with_pattern(mut self, pattern_id: impl Into<String>) -> Self {
        self.pattern_id = pattern_id.into();
        self
    }

    pub fn with_descriptors(mut self, on: bool) -> Self {
        self.use_descriptors = on;
        self
    }

    pub fn with_threshold(mut self, threshold: Option<f64>) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_formulation(mut self, formulation: EngineFormulation) -> Self {
        self.formulation = formulation;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.softmax_temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.softmax_temperature.is_finite() && self.softmax_temperature > 0.0) {
            return Err(EngineError::Config(format!(
                "softmax temperature must be positive, got {}",
                self.softmax_temperature
            )));
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(EngineError::Config(format!(
                    "threshold must lie in [0, 1], got {t}"
                )));
            }
        }
        Ok(())
    }

    /// Short stable hash of this configuration, the label space and the
    /// backend model, used to tag silver data.
    pub fn fingerprint(&self, labels: &LabelSpace, model: &str) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            config: &'a EngineConfig,
            labels: crate::labelspace::LabelFile,
            model: &'a str,
        }
        let key = Key {
            config: self,
            labels: labels.to_file(),
            model,
        };
        let bytes = serde_json::to_vec(&key).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProb {
    pub label: String,
    pub p: f64,
}

/// Per-label scores before normalization, and whether the backend reported
/// them as probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub normalized: bool,
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabels {
    pub gloss_id: String,
    /// Descending by probability.
    pub entries: Vec<LabelProb>,
    pub abstained: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawScores>,
}

impl ScoredLabels {
    pub fn top(&self) -> Option<&LabelProb> {
        self.entries.first()
    }

    pub fn top_label(&self) -> Option<&str> {
        self.top().map(|e| e.label.as_str())
    }

    pub fn top_probability(&self) -> f64 {
        self.top().map_or(0.0, |e| e.p)
    }

    /// 1-based rank of `label`, if listed.
    pub fn rank_of(&self, label: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.label == label).map(|i| i + 1)
    }

    pub fn probability(&self, label: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.p)
    }

    /// Copy gated at `threshold` (strictly below abstains).
    pub fn regated(&self, threshold: Option<f64>) -> Self {
        let mut out = self.clone();
        out.abstained = threshold.is_some_and(|t| self.top_probability() < t);
        out
    }
}

/// Temperature softmax, following the recipe in the module docs.
pub fn softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| ((s - max) / temperature).exp())
        .collect();
    let mut z = 0.0;
    for e in &exps {
        z += e;
    }
    exps.into_iter().map(|e| e / z).collect()
}

/// Normalizes per-label scores (in label order) into a ranked
/// [`ScoredLabels`].
pub fn rank_scores(
    gloss_id: &str,
    labels: &[&str],
    scores: &[f64],
    temperature: f64,
    threshold: Option<f64>,
    normalized: bool,
) -> ScoredLabels {
    assert_eq!(labels.len(), scores.len(), "one score per label");
    let probs = softmax(scores, temperature);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let entries: Vec<LabelProb> = order
        .into_iter()
        .map(|i| LabelProb {
            label: labels[i].to_string(),
            p: probs[i],
        })
        .collect();
    let top = entries.first().map_or(0.0, |e| e.p);
    ScoredLabels {
        gloss_id: gloss_id.to_string(),
        abstained: threshold.is_some_and(|t| top < t),
        entries,
        raw: Some(RawScores {
            normalized,
            scores: labels
                .iter()
                .map(|l| l.to_string())
                .zip(scores.iter().copied())
                .collect(),
        }),
    }
}

/// A configured classifier: label space, resolved pattern and the query
/// strings ("probes") sent per gloss.
#[derive(Debug, Clone)]
pub struct Classifier<'a> {
    labels: &'a LabelSpace,
    cfg: EngineConfig,
    pattern: PatternTemplate,
    probes: Vec<String>,
}

impl<'a> Classifier<'a> {
    /// Resolves `cfg.pattern_id` against the built-in registry.
    pub fn new(labels: &'a LabelSpace, cfg: EngineConfig) -> Result<Self, EngineError> {
        Self::with_registry(labels, cfg, &PatternRegistry::builtin())
    }

    pub fn with_registry(
        labels: &'a LabelSpace,
        cfg: EngineConfig,
        registry: &PatternRegistry,
    ) -> Result<Self, EngineError> {
        let pattern = registry.get(&cfg.pattern_id)?.clone();
        Self::with_pattern(labels, cfg, pattern)
    }

    pub fn with_pattern(
        labels: &'a LabelSpace,
        cfg: EngineConfig,
        pattern: PatternTemplate,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        pattern.validate()?;
        if pattern.formulation != cfg.formulation.pattern_formulation() {
            return Err(EngineError::FormulationMismatch {
                pattern: pattern.id.clone(),
                pattern_formulation: pattern.formulation,
                engine: cfg.formulation,
            });
        }
        if labels.is_empty() {
            return Err(EngineError::Config("empty label space".into()));
        }
        let probes: Vec<String> = if cfg.use_descriptors {
            labels
                .unique_descriptors()
                .into_iter()
                .map(str::to_string)
                .collect()
        } else {
            labels.names().map(str::to_string).collect()
        };
        if cfg.formulation == EngineFormulation::MlmConstrained {
            if let Some(p) = probes.iter().find(|p| p.split_whitespace().count() != 1) {
                return Err(EngineError::MultiTokenLabel(p.clone()));
            }
        }
        Ok(Self {
            labels,
            cfg,
            pattern,
            probes,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn pattern(&self) -> &PatternTemplate {
        &self.pattern
    }

    pub fn labels(&self) -> &LabelSpace {
        self.labels
    }

    /// Label or descriptor strings queried for every gloss, in query order.
    pub fn probes(&self) -> &[String] {
        &self.probes
    }

    /// Backend inputs scored per gloss.
    pub fn queries_per_gloss(&self) -> usize {
        match self.cfg.formulation {
            EngineFormulation::MlmConstrained => 1,
            _ => self.probes.len(),
        }
    }

    pub fn classify<S: Scorer + ?Sized>(
        &self,
        gloss: &GlossRecord,
        backend: &S,
    ) -> Result<ScoredLabels, EngineError> {
        let backend_err = |source| EngineError::Backend {
            gloss_id: gloss.id.clone(),
            source,
        };
        backend
            .ensure_supports(self.pattern.formulation)
            .map_err(backend_err)?;

        let (probe_scores, normalized) = match self.cfg.formulation {
            EngineFormulation::Nli | EngineFormulation::Nsp => {
                let pairs = self
                    .probes
                    .iter()
                    .map(|probe| {
                        let q = render(&self.pattern, &gloss.gloss, Some(probe))?;
                        Ok(SentencePair {
                            first: q.first,
                            second: q.second.unwrap_or_default(),
                        })
                    })
                    .collect::<Result<Vec<_>, PatternError>>()?;
                if self.cfg.formulation == EngineFormulation::Nli {
                    let scored = backend.score_nli(&pairs).map_err(backend_err)?;
                    check_len(scored.results.len(), pairs.len()).map_err(backend_err)?;
                    let s = scored.results.iter().map(|r| r.entailment).collect();
                    (s, scored.normalized)
                } else {
                    let scored = backend.score_nsp(&pairs).map_err(backend_err)?;
                    check_len(scored.results.len(), pairs.len()).map_err(backend_err)?;
                    let s = scored.results.iter().map(|r| r.is_next).collect();
                    (s, scored.normalized)
                }
            }
            EngineFormulation::MlmConstrained => {
                let q = render(&self.pattern, &gloss.gloss, None)?;
                let scored = backend
                    .fill_mask(&q.first, MLM_CONSTRAINED_TOP_K)
                    .map_err(backend_err)?;
                let s = constrained_scores(&self.probes, &scored.results, scored.normalized);
                (s, scored.normalized)
            }
        };

        let label_scores: Vec<f64> = if self.cfg.use_descriptors {
            let by_probe: HashMap<String, f64> = self
                .probes
                .iter()
                .cloned()
                .zip(probe_scores.iter().copied())
                .collect();
            self.labels
                .labels()
                .iter()
                .map(|l| map_descriptor_scores(&by_probe, l))
                .collect::<Result<_, _>>()?
        } else {
            probe_scores
        };

        let names: Vec<&str> = self.labels.names().collect();
        Ok(rank_scores(
            &gloss.id,
            &names,
            &label_scores,
            self.cfg.softmax_temperature,
            self.cfg.threshold,
            normalized,
        ))
    }
}

fn check_len(got: usize, expected: usize) -> Result<(), ScorerError> {
    if got == expected {
        Ok(())
    } else {
        Err(ScorerError::Protocol {
            message: format!("expected {expected} result(s), got {got}"),
            excerpt: String::new(),
        })
    }
}

/// Strips tokenizer word-boundary markers from a predicted token.
fn strip_subword(token: &str) -> &str {
    let t = token.trim();
    let t = t.strip_prefix('Ġ').unwrap_or(t);
    let t = t.strip_prefix('▁').unwrap_or(t);
    t.strip_prefix("##").unwrap_or(t).trim()
}

/// Score of each probe at the mask: the best prediction matching it
/// case-insensitively, or a floor when the probe is not among the returned
/// predictions (0 for probabilities, the lowest returned score otherwise).
fn constrained_scores(probes: &[String], predictions: &[MaskPrediction], normalized: bool) -> Vec<f64> {
    let floor = if normalized {
        0.0
    } else {
        predictions.last().map_or(0.0, |p| p.score)
    };
    let mut best: HashMap<String, f64> = HashMap::new();
    for p in predictions {
        let key = strip_subword(&p.token).to_lowercase();
        let slot = best.entry(key).or_insert(f64::NEG_INFINITY);
        if p.score > *slot {
            *slot = p.score;
        }
    }
    probes
        .iter()
        .map(|probe| best.get(&probe.to_lowercase()).copied().unwrap_or(floor))
        .collect()
}

/// Classifies one gloss with a pattern from the built-in registry.
pub fn classify<S: Scorer + ?Sized>(
    gloss: &GlossRecord,
    labels: &LabelSpace,
    cfg: &EngineConfig,
    backend: &S,
) -> Result<ScoredLabels, EngineError> {
    Classifier::new(labels, cfg.clone())?.classify(gloss, backend)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnError {
    #[default]
    FailFast,
    SkipAndLog,
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub on_error: OnError,
    /// Glosses classified concurrently; capped by the backend's in-flight limit.
    pub workers: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            on_error: OnError::FailFast,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRecord {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    /// In corpus order.
    pub predictions: Vec<ScoredLabels>,
    pub skipped: Vec<SkippedRecord>,
}

impl Classifier<'_> {
    /// Classifies each record, up to `workers` at a time (capped by the
    /// backend's in-flight limit). Slot `i` belongs to `records[i]`. With
    /// `stop_on_error`, records not yet started when a failure occurs are
    /// left as `None`; every record before the first failure is always
    /// attempted.
    pub fn classify_each<S: Scorer + ?Sized>(
        &self,
        records: &[GlossRecord],
        backend: &S,
        workers: usize,
        stop_on_error: bool,
    ) -> Vec<Option<Result<ScoredLabels, EngineError>>> {
        let workers = workers.min(backend.max_in_flight()).max(1).min(records.len().max(1));
        if workers == 1 {
            let mut out: Vec<Option<_>> = Vec::with_capacity(records.len());
            for record in records {
                let r = self.classify(record, backend);
                let stop = r.is_err() && stop_on_error;
                out.push(Some(r));
                if stop {
                    break;
                }
            }
            out.resize_with(records.len(), || None);
            return out;
        }
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let slots: Mutex<Vec<Option<Result<ScoredLabels, EngineError>>>> =
            Mutex::new((0..records.len()).map(|_| None).collect());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failed.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(record) = records.get(i) else { break };
                    let r = self.classify(record, backend);
                    if r.is_err() && stop_on_error {
                        failed.store(true, Ordering::SeqCst);
                    }
                    slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r);
                });
            }
        });
        slots.into_inner().unwrap_or_else(|e| e.into_inner())
    }

    /// Classifies `records` in order. With several workers, glosses are
    /// scored concurrently but results are returned in input order.
    pub fn classify_records<S: Scorer + ?Sized>(
        &self,
        records: &[GlossRecord],
        backend: &S,
        opts: BatchOptions,
    ) -> Result<BatchOutput, EngineError> {
        let results = self.classify_each(
            records,
            backend,
            opts.workers,
            opts.on_error == OnError::FailFast,
        );
        let mut output = BatchOutput::default();
        for (record, result) in records.iter().zip(results) {
            match result.expect("slots before the first failure are filled") {
                Ok(p) => output.predictions.push(p),
                Err(e) if opts.on_error == OnError::SkipAndLog => {
                    warn!("skipping `{}`: {e}", record.id);
                    output.skipped.push(SkippedRecord {
                        id: record.id.clone(),
                        error: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        Ok(output)
    }
}

pub fn classify_batch<S: Scorer + ?Sized>(
    corpus: &Corpus,
    labels: &LabelSpace,
    cfg: &EngineConfig,
    backend: &S,
    opts: BatchOptions,
) -> Result<BatchOutput, EngineError> {
    Classifier::new(labels, cfg.clone())?.classify_records(&corpus.records, backend, opts)
}

const SEQUENCE_ARTIFACTS: &[&str] = &[
    "eos", "</s>", "<s>", "<eos>", "<pad>", "<unk>", "[sep]", "[cls]", "[pad]", "[unk]",
    "<|endoftext|>",
];

/// Removes sub-word markers, end-of-sequence and punctuation-only tokens,
/// and case-insensitive duplicates (first occurrence wins), then re-ranks.
pub fn clean_mask_predictions(predictions: Vec<MaskPrediction>) -> Vec<MaskPrediction> {
    let mut seen = std::collections::HashSet::new();
    predictions
        .into_iter()
        .filter_map(|p| {
            let token = strip_subword(&p.token).to_string();
            let folded = token.to_lowercase();
            if token.is_empty()
                || SEQUENCE_ARTIFACTS.contains(&folded.as_str())
                || !token.chars().any(char::is_alphanumeric)
                || !seen.insert(folded)
            {
                return None;
            }
            Some(MaskPrediction { token, ..p })
        })
        .enumerate()
        .map(|(i, p)| MaskPrediction { rank: i + 1, ..p })
        .collect()
}

/// Free-form topic guesses: fills the mask of the built-in prompt
/// `Context: [context] Topic: [MASK]`.
pub fn predict_open_topics<S: Scorer + ?Sized>(
    gloss: &GlossRecord,
    k: usize,
    backend: &S,
    cleanup: bool,
) -> Result<Vec<MaskPrediction>, EngineError> {
    let registry = PatternRegistry::builtin();
    let pattern = registry.get(DEFAULT_MLM_PATTERN)?;
    predict_open_topics_with(pattern, gloss, k, backend, cleanup)
}

pub fn predict_open_topics_with<S: Scorer + ?Sized>(
    pattern: &PatternTemplate,
    gloss: &GlossRecord,
    k: usize,
    backend: &S,
    cleanup: bool,
) -> Result<Vec<MaskPrediction>, EngineError> {
    if k == 0 {
        return Err(EngineError::InvalidK);
    }
    let query = render(pattern, &gloss.gloss, None)?;
    let scored = backend
        .fill_mask(&query.first, k)
        .map_err(|source| EngineError::Backend {
            gloss_id: gloss.id.clone(),
            source,
        })?;
    Ok(if cleanup {
        clean_mask_predictions(scored.results)
    } else {
        scored.results
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelspace::DomainLabel;
    use crate::scorer::{CountingScorer, MockScorer};
    use proptest::prelude::*;

    fn hospital() -> GlossRecord {
        GlossRecord::new("bn:hospital", "a health facility where patients receive treatment")
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, 2.0, 3.0], 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p[2] > p[1] && p[1] > p[0]);
        assert_eq!(softmax(&[0.3], 1.0), vec![1.0]);
    }

    #[test]
    fn single_label_space() {
        let labels = LabelSpace::from_names("one", &["Medicine"]).unwrap();
        let cfg = EngineConfig::default().with_threshold(Some(1.0));
        let out = classify(&hospital(), &labels, &cfg, &MockScorer::new()).unwrap();
        assert_eq!(out.entries.len(), 1);
        assert_eq!(out.entries[0].p, 1.0);
        assert!(!out.abstained);
    }

    #[test]
    fn overlap_wins_and_ties_keep_declaration_order() {
        let labels =
            LabelSpace::from_names("four", &["biology", "business", "medicine", "culture"]).unwrap();
        let gloss = GlossRecord::new("g", "the practice of medicine in a clinic");
        let out = classify(&gloss, &labels, &EngineConfig::default(), &MockScorer::new()).unwrap();
        assert_eq!(out.top_label(), Some("medicine"));
        let rest: Vec<_> = out.entries[1..].iter().map(|e| e.label.as_str()).collect();
        assert_eq!(rest, vec!["biology", "business", "culture"]);
        assert_eq!(out.entries[1].p, out.entries[3].p);
        assert!(out.raw.as_ref().unwrap().normalized);
    }

    #[test]
    fn threshold_abstains_but_keeps_ranking() {
        let labels = LabelSpace::from_names("x", &["A", "B", "C", "D"]).unwrap();
        let cfg = EngineConfig::default().with_threshold(Some(0.5));
        let out = classify(&hospital(), &labels, &cfg, &MockScorer::new()).unwrap();
        assert!(out.abstained);
        assert_eq!(out.entries.len(), 4);
    }

    #[test]
    fn descriptors_max_map() {
        let labels = LabelSpace::from_names(
            "x",
            &["Health and medicine", "Business, economics, and finance", "Music"],
        )
        .unwrap();
        let cfg = EngineConfig::default().with_descriptors(true);
        let mock = CountingScorer::new(MockScorer::new());
        let out = classify(&hospital(), &labels, &cfg, &mock).unwrap();
        assert_eq!(out.top_label(), Some("Health and medicine"));
        assert_eq!(mock.counts().nli, 6);

        let plain = CountingScorer::new(MockScorer::new());
        classify(&hospital(), &labels, &EngineConfig::default(), &plain).unwrap();
        assert_eq!(plain.counts().nli, 3);
    }

    #[test]
    fn formulation_checks() {
        let labels = LabelSpace::from_names("x", &["A"]).unwrap();
        let cfg = EngineConfig::default().with_formulation(EngineFormulation::Nsp);
        assert!(matches!(
            Classifier::new(&labels, cfg),
            Err(EngineError::FormulationMismatch { .. })
        ));
        let cfg = EngineConfig::default().with_temperature(0.0);
        assert!(matches!(Classifier::new(&labels, cfg), Err(EngineError::Config(_))));
        let cfg = EngineConfig::default().with_pattern("missing");
        assert!(matches!(Classifier::new(&labels, cfg), Err(EngineError::Pattern(_))));
    }

    #[test]
    fn nsp_formulation() {
        let labels = LabelSpace::from_names("x", &["Music", "Sport"]).unwrap();
        let cfg = EngineConfig::default()
            .with_formulation(EngineFormulation::Nsp)
            .with_pattern("nsp-domain-or-topic");
        let gloss = GlossRecord::new("g", "a sport played with a ball");
        let out = classify(&gloss, &labels, &cfg, &MockScorer::new()).unwrap();
        assert_eq!(out.top_label(), Some("Sport"));
        // second sentence content words: {domain, topic, sport}
        let expected = softmax(&[0.0, 1.0 / 3.0], 1.0);
        assert_eq!(out.entries[0].p, expected[1]);
    }

    #[test]
    fn mlm_constrained() {
        let labels = LabelSpace::from_names("x", &["Music", "Football", "Biology"]).unwrap();
        let cfg = EngineConfig::default()
            .with_formulation(EngineFormulation::MlmConstrained)
            .with_pattern(DEFAULT_MLM_PATTERN);
        let gloss = GlossRecord::new("g", "football football is a game; biology");
        let counting = CountingScorer::new(MockScorer::new());
        let out = classify(&gloss, &labels, &cfg, &counting).unwrap();
        assert_eq!(out.top_label(), Some("Football"));
        assert_eq!(counting.counts().mlm, 1);
        let raw = &out.raw.unwrap().scores;
        assert_eq!(raw["Football"], 2.0 / 4.0);
        assert_eq!(raw["Biology"], 1.0 / 4.0);
        assert_eq!(raw["Music"], 0.0);

        let multi = LabelSpace::from_names("x", &["Video games"]).unwrap();
        assert!(matches!(
            Classifier::new(&multi, cfg),
            Err(EngineError::MultiTokenLabel(_))
        ));
    }

    #[test]
    fn backend_errors_carry_gloss_id() {
        struct NliOnly;
        impl Scorer for NliOnly {
            fn descriptor(&self) -> crate::scorer::BackendDescriptor {
                let mut d = MockScorer::new().descriptor();
                d.supported_formulations = [PatternFormulation::Nli].into_iter().collect();
                d
            }
            fn score_nli(&self, _: &[SentencePair]) -> Result<crate::scorer::Scored<crate::scorer::NliScores>, ScorerError> {
                Err(ScorerError::Transport { attempts: 4, message: "refused".into() })
            }
            fn score_nsp(&self, _: &[SentencePair]) -> Result<crate::scorer::Scored<crate::scorer::NspScore>, ScorerError> {
                unreachable!()
            }
            fn fill_mask(&self, _: &str, _: usize) -> Result<crate::scorer::Scored<MaskPrediction>, ScorerError> {
                unreachable!()
            }
        }
        let labels = LabelSpace::from_names("x", &["A"]).unwrap();
        let err = classify(&hospital(), &labels, &EngineConfig::default(), &NliOnly).unwrap_err();
        assert!(err.is_backend_failure());
        assert!(err.to_string().contains("bn:hospital"));
        assert!(err.to_string().contains("4 attempt"));

        let cfg = EngineConfig::default()
            .with_formulation(EngineFormulation::Nsp)
            .with_pattern("nsp-domain-or-topic");
        let err = classify(&hospital(), &labels, &cfg, &NliOnly).unwrap_err();
        assert!(!err.is_backend_failure());
    }

    #[test]
    fn batch_matches_single_and_skips() {
        let labels = LabelSpace::from_names("x", &["Music", "Sport", "Law"]).unwrap();
        let corpus = Corpus::from_records(
            "c",
            vec![
                GlossRecord::new("1", "music for a sport"),
                GlossRecord::new("2", "the law of the land"),
                GlossRecord::new("3", "a tune"),
            ],
        )
        .unwrap();
        let cfg = EngineConfig::default();
        let mock = MockScorer::new();
        let batch = classify_batch(&corpus, &labels, &cfg, &mock, BatchOptions::default()).unwrap();
        let single: Vec<_> = corpus
            .iter()
            .map(|r| classify(r, &labels, &cfg, &mock).unwrap())
            .collect();
        assert_eq!(batch.predictions, single);

        let empty = Corpus::default();
        let out = classify_batch(&empty, &labels, &cfg, &mock, BatchOptions::default()).unwrap();
        assert!(out.predictions.is_empty());
    }

    #[test]
    fn open_topics() {
        let gloss = GlossRecord::new("g", "red card in football");
        let out = predict_open_topics(&gloss, 3, &MockScorer::new(), false).unwrap();
        let expected: std::collections::BTreeSet<_> = ["red", "card", "football"].into_iter().collect();
        assert!(out.iter().all(|p| expected.contains(p.token.as_str())));
        assert_eq!(out.len(), 3);
        assert!(matches!(
            predict_open_topics(&gloss, 0, &MockScorer::new(), false),
            Err(EngineError::InvalidK)
        ));
    }

    #[test]
    fn cleanup_rules() {
        let raw = ["ĠBiology", "EOS", "biology", "evolution", ".", "▁life", "</s>"];
        let preds: Vec<_> = raw
            .iter()
            .enumerate()
            .map(|(i, t)| MaskPrediction {
                token: t.to_string(),
                score: 1.0 - i as f64 * 0.1,
                rank: i + 1,
            })
            .collect();
        let cleaned = clean_mask_predictions(preds);
        let tokens: Vec<_> = cleaned.iter().map(|p| p.token.as_str()).collect();
        assert_eq!(tokens, vec!["Biology", "evolution", "life"]);
        assert_eq!(cleaned.iter().map(|p| p.rank).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn fingerprint_tracks_config() {
        let labels = LabelSpace::from_names("x", &["A", "B"]).unwrap();
        let a = EngineConfig::default();
        let b = EngineConfig::default().with_descriptors(true);
        assert_eq!(a.fingerprint(&labels, "m"), a.fingerprint(&labels, "m"));
        assert_ne!(a.fingerprint(&labels, "m"), b.fingerprint(&labels, "m"));
        assert_ne!(a.fingerprint(&labels, "m"), a.fingerprint(&labels, "n"));
        assert_eq!(a.fingerprint(&labels, "m").len(), 16);
    }

    #[test]
    fn single_descriptor_spaces_are_identical_on_and_off() {
        let labels = LabelSpace::new(
            "x",
            ["Music", "Sport", "Law"]
                .iter()
                .map(|n| DomainLabel::auto(n).unwrap())
                .collect(),
            false,
        )
        .unwrap();
        let g = GlossRecord::new("g", "law and sport");
        let off = classify(&g, &labels, &EngineConfig::default(), &MockScorer::new()).unwrap();
        let on = classify(&g, &labels, &EngineConfig::default().with_descriptors(true), &MockScorer::new()).unwrap();
        assert_eq!(serde_json::to_string(&off).unwrap(), serde_json::to_string(&on).unwrap());
    }

    proptest! {
        #[test]
        fn shift_invariance(scores in proptest::collection::vec(-5.0f64..5.0, 1..10), shift in -3.0f64..3.0, scale in 0.1f64..4.0) {
            let names: Vec<String> = (0..scores.len()).map(|i| format!("L{i}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let base = rank_scores("g", &refs, &scores, 1.0, None, false);
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let moved = rank_scores("g", &refs, &shifted, 1.0, None, false);
            for (a, b) in base.entries.iter().zip(&moved.entries) {
                prop_assert!((a.p - b.p).abs() < 1e-9);
            }
            let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
            let stretched = rank_scores("g", &refs, &scaled, 1.0, None, false);
            prop_assert_eq!(base.top_label(), stretched.top_label());
        }

        #[test]
        fn distribution_and_gate_hold_for_random_glosses(
            words in proptest::collection::vec(0usize..VOCAB.len(), 1..12),
            spaces in proptest::collection::vec(proptest::collection::btree_set(0usize..VOCAB.len(), 2..5), 1..6),
            extra in 0usize..VOCAB.len(),
            threshold in 0.0f64..=1.0,
        ) {
            let gloss = GlossRecord::new("g", words.iter().map(|&i| VOCAB[i]).collect::<Vec<_>>().join(" "));
            let build = |sets: &[std::collections::BTreeSet<usize>]| {
                let labels = sets
                    .iter()
                    .enumerate()
                    .map(|(i, set)| {
                        let d = set.iter().map(|&w| VOCAB[w].to_string()).collect();
                        DomainLabel::with_descriptors(&format!("L{i}"), d).unwrap()
                    })
                    .collect();
                LabelSpace::new("p", labels, true).unwrap()
            };
            let labels = build(&spaces);
            let cfg = EngineConfig::default().with_descriptors(true).with_threshold(Some(threshold));
            let out = classify(&gloss, &labels, &cfg, &MockScorer::new()).unwrap();
            let sum: f64 = out.entries.iter().map(|e| e.p).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(out.entries.windows(2).all(|w| w[0].p >= w[1].p));
            prop_assert_eq!(out.abstained, out.top_probability() < threshold);

            // one more descriptor can only raise that label's best score
            let mut grown = spaces.clone();
            grown[0].insert(extra);
            let after = classify(&gloss, &build(&grown), &cfg, &MockScorer::new()).unwrap();
            let raw = |s: &ScoredLabels| s.raw.as_ref().unwrap().scores["L0"];
            prop_assert!(raw(&after) >= raw(&out));
        }
    }

    const VOCAB: [&str; 8] = ["law", "sport", "music", "river", "stone", "health", "court", "goal"];
}
