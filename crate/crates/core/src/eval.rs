//! Metrics over ranked predictions: top-k accuracy, micro precision/recall/F1
//! under abstention, row-normalized confusion matrix, threshold sweeps and
//! multi-configuration comparisons.
//!
//! The evaluated population is every gold-labelled record of the corpus. A
//! record without a prediction counts as abstained. Abstained predictions
//! still take part in top-k accuracy (which ignores thresholds) but count
//! against recall and not against precision:
//! `precision = hits / predicted`, `recall = hits / gold_total`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::dataset::Corpus;
use crate::engine::{BatchOptions, Classifier, EngineConfig, ScoredLabels};
use crate::labelspace::LabelSpace;
use crate::patterns::PatternRegistry;
use crate::scorer::Scorer;

/// Default accuracy cut-offs reported alongside the full curve.
pub const REPORT_KS: [usize; 3] = [1, 3, 5];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("record `{id}` has gold label `{label}` outside the label space")]
    UnknownGoldLabel { id: String, label: String },
    #[error("prediction for `{id}` names label `{label}` outside the label space")]
    UnknownPredictedLabel { id: String, label: String },
    #[error("prediction for `{0}` has no gold-labelled record")]
    NoGold(String),
    #[error("duplicate prediction for `{0}`")]
    DuplicatePrediction(String),
    #[error("k = {k} outside 1..={labels}")]
    InvalidK { k: usize, labels: usize },
    #[error("threshold {0} is not a number")]
    InvalidThreshold(f64),
}

/// Predictions matched to their gold label indices, in corpus order.
struct Aligned<'a> {
    /// (gold label index, prediction if any)
    rows: Vec<(usize, Option<&'a ScoredLabels>)>,
}

fn align<'a>(
    predictions: &'a [ScoredLabels],
    golds: &Corpus,
    labels: &LabelSpace,
) -> Result<Aligned<'a>, EvalError> {
    let mut by_id: HashMap<&str, &ScoredLabels> = HashMap::with_capacity(predictions.len());
    for p in predictions {
        for e in &p.entries {
            if labels.index_of(&e.label).is_none() {
                return Err(EvalError::UnknownPredictedLabel {
                    id: p.gloss_id.clone(),
                    label: e.label.clone(),
                });
            }
        }
        if by_id.insert(p.gloss_id.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.gloss_id.clone()));
        }
    }
    let mut rows = Vec::new();
    for record in golds {
        let pred = by_id.remove(record.id.as_str());
        let Some(gold) = &record.gold_label else {
            if pred.is_some() {
                return Err(EvalError::NoGold(record.id.clone()));
            }
            continue;
        };
        let gold = labels
            .index_of(gold)
            .ok_or_else(|| EvalError::UnknownGoldLabel {
                id: record.id.clone(),
                label: gold.clone(),
            })?;
        rows.push((gold, pred));
    }
    if let Some(p) = predictions.iter().find(|p| by_id.contains_key(p.gloss_id.as_str())) {
        return Err(EvalError::NoGold(p.gloss_id.clone()));
    }
    Ok(Aligned { rows })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall, computed from counts so that
/// P = R gives F1 = P exactly.
fn f1_from_counts(hits: usize, predicted: usize, gold_total: usize) -> f64 {
    ratio(2 * hits, predicted + gold_total)
}

/// Accuracy at every cut-off `1..=labels.len()`; entry `k - 1` is top-k.
fn topk_curve(aligned: &Aligned<'_>, labels: &LabelSpace) -> Vec<f64> {
    let n_labels = labels.len();
    let mut hits_at_rank = vec![0usize; n_labels];
    for (gold, pred) in &aligned.rows {
        let gold_name = &labels.labels()[*gold].name;
        if let Some(rank) = pred.and_then(|p| p.rank_of(gold_name)) {
            hits_at_rank[rank - 1] += 1;
        }
    }
    let total = aligned.rows.len();
    let mut cumulative = 0;
    hits_at_rank
        .into_iter()
        .map(|h| {
            cumulative += h;
            ratio(cumulative, total)
        })
        .collect()
}

/// Fraction of gold-labelled records whose gold label is among the `k`
/// most probable entries, for each requested `k`.
pub fn topk_accuracy(
    predictions: &[ScoredLabels],
    golds: &Corpus,
    labels: &LabelSpace,
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>, EvalError> {
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > labels.len()) {
        return Err(EvalError::InvalidK {
            k,
            labels: labels.len(),
        });
    }
    let curve = topk_curve(&align(predictions, golds, labels)?, labels);
    Ok(ks.iter().map(|&k| (k, curve[k - 1])).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub hits: usize,
    /// Non-abstained predictions.
    pub predicted: usize,
    pub gold_total: usize,
    /// False when nothing was predicted; precision is then reported as 0.
    pub precision_defined: bool,
}

impl Prf {
    fn from_counts(hits: usize, predicted: usize, gold_total: usize) -> Self {
        let precision = ratio(hits, predicted);
        let recall = ratio(hits, gold_total);
        Self {
            precision,
            recall,
            f1: f1_from_counts(hits, predicted, gold_total),
            hits,
            predicted,
            gold_total,
            precision_defined: predicted > 0,
        }
    }
}

fn prf_at(aligned: &Aligned<'_>, labels: &LabelSpace, threshold: Option<f64>) -> Prf {
    let mut hits = 0;
    let mut predicted = 0;
    for (gold, pred) in &aligned.rows {
        let Some(pred) = pred else { continue };
        let abstained = match threshold {
            Some(t) => pred.top_probability() < t,
            None => pred.abstained,
        };
        if abstained {
            continue;
        }
        predicted += 1;
        if pred.top_label() == Some(labels.labels()[*gold].name.as_str()) {
            hits += 1;
        }
    }
    Prf::from_counts(hits, predicted, aligned.rows.len())
}

/// Micro-averaged precision, recall and F1, honouring each prediction's
/// abstention flag.
pub fn micro_prf(
    predictions: &[ScoredLabels],
    golds: &Corpus,
    labels: &LabelSpace,
) -> Result<Prf, EvalError> {
    Ok(prf_at(&align(predictions, golds, labels)?, labels, None))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    /// `counts[gold][predicted]`, abstentions excluded.
    pub counts: Vec<Vec<usize>>,
    /// Each row with support divided by its support; empty rows stay zero.
    pub rates: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn support(&self, row: usize) -> usize {
        self.counts[row].iter().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }
}

fn confusion(aligned: &Aligned<'_>, labels: &LabelSpace) -> ConfusionMatrix {
    let n = labels.len();
    let mut counts = vec![vec![0usize; n]; n];
    for (gold, pred) in &aligned.rows {
        let Some(pred) = pred.filter(|p| !p.abstained) else {
            continue;
        };
        if let Some(col) = pred.top_label().and_then(|l| labels.index_of(l)) {
            counts[*gold][col] += 1;
        }
    }
    let rates = counts
        .iter()
        .map(|row| {
            let support: usize = row.iter().sum();
            row.iter().map(|&c| ratio(c, support)).collect()
        })
        .collect();
    ConfusionMatrix {
        labels: labels.names().map(str::to_string).collect(),
        counts,
        rates,
    }
}

pub fn confusion_matrix(
    predictions: &[ScoredLabels],
    golds: &Corpus,
    labels: &LabelSpace,
) -> Result<ConfusionMatrix, EvalError> {
    Ok(confusion(&align(predictions, golds, labels)?, labels))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_abstained: usize,
}

/// Re-gates the stored rankings at each threshold (sorted ascending,
/// duplicates dropped) and recomputes micro metrics; the backend is not
/// queried again.
pub fn threshold_sweep(
    predictions: &[ScoredLabels],
    golds: &Corpus,
    labels: &LabelSpace,
    thresholds: &[f64],
) -> Result<Vec<SweepPoint>, EvalError> {
    if let Some(&t) = thresholds.iter().find(|t| t.is_nan()) {
        return Err(EvalError::InvalidThreshold(t));
    }
    let aligned = align(predictions, golds, labels)?;
    let mut ts = thresholds.to_vec();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    Ok(ts
        .into_iter()
        .map(|t| {
            let prf = prf_at(&aligned, labels, Some(t));
            SweepPoint {
                threshold: t,
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
                n_abstained: prf.gold_total - prf.predicted,
            }
        })
        .collect())
}

/// `0, step, 2*step, ...` up to and including `max` (within rounding).
pub fn threshold_grid(step: f64, max: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|i| (i as f64 * step * 1e6).round() / 1e6).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelStats {
    pub label: String,
    pub support: usize,
    pub hits: usize,
    pub hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub top_k: BTreeMap<usize, f64>,
    /// Accuracy at k = 1..=|labels|.
    pub top_k_curve: Vec<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub hits: usize,
    pub n_evaluated: usize,
    pub n_abstained: usize,
    /// Gold-labelled records without any prediction (counted as abstained).
    pub n_missing: usize,
    pub confusion: ConfusionMatrix,
    pub per_label: Vec<LabelStats>,
}

pub fn evaluate(
    predictions: &[ScoredLabels],
    golds: &Corpus,
    labels: &LabelSpace,
) -> Result<EvalReport, EvalError> {
    let aligned = align(predictions, golds, labels)?;
    let curve = topk_curve(&aligned, labels);
    let prf = prf_at(&aligned, labels, None);
    let confusion = confusion(&aligned, labels);
    let n_missing = aligned.rows.iter().filter(|(_, p)| p.is_none()).count();

    let mut support = vec![0usize; labels.len()];
    for (gold, _) in &aligned.rows {
        support[*gold] += 1;
    }
    let per_label = labels
        .names()
        .enumerate()
        .map(|(i, name)| LabelStats {
            label: name.to_string(),
            support: support[i],
            hits: confusion.counts[i][i],
            hit_rate: ratio(confusion.counts[i][i], support[i]),
        })
        .collect();

    Ok(EvalReport {
        top_k: REPORT_KS
            .iter()
            .filter(|&&k| k <= labels.len())
            .map(|&k| (k, curve[k - 1]))
            .collect(),
        top_k_curve: curve,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        precision_defined: prf.precision_defined,
        hits: prf.hits,
        n_evaluated: prf.gold_total,
        n_abstained: prf.gold_total - prf.predicted,
        n_missing,
        confusion,
        per_label,
    })
}

impl EvalReport {
    /// Restricts the headline accuracies to `ks` (each within 1..=|labels|).
    pub fn with_ks(mut self, ks: &[usize]) -> Result<Self, EvalError> {
        let n = self.top_k_curve.len();
        if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
            return Err(EvalError::InvalidK { k, labels: n });
        }
        self.top_k = ks.iter().map(|&k| (k, self.top_k_curve[k - 1])).collect();
        Ok(self)
    }

    /// Aligned plain-text summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, acc) in &self.top_k {
            let _ = writeln!(out, "top-{k:<2} accuracy  {:.4}", acc);
        }
        let _ = writeln!(out, "precision        {:.4}{}", self.precision,
            if self.precision_defined { "" } else { "  (undefined: no predictions)" });
        let _ = writeln!(out, "recall           {:.4}", self.recall);
        let _ = writeln!(out, "f1               {:.4}", self.f1);
        let _ = writeln!(out, "evaluated        {}", self.n_evaluated);
        let _ = writeln!(out, "abstained        {}", self.n_abstained);
        if self.n_missing > 0 {
            let _ = writeln!(out, "missing          {}", self.n_missing);
        }
        let width = self.per_label.iter().map(|l| l.label.chars().count()).max().unwrap_or(5).max(5);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>6}", "label", "support", "hit");
        for l in self.per_label.iter().filter(|l| l.support > 0) {
            let _ = writeln!(out, "{:<width$}  {:>7}  {:>6.4}", l.label, l.support, l.hit_rate);
        }
        out
    }
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("threshold,precision,recall,f1\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.threshold, p.precision, p.recall, p.f1);
    }
    out
}

pub fn topk_csv(curve: &[f64]) -> String {
    let mut out = String::from("k,accuracy\n");
    for (i, acc) in curve.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, acc);
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Row-normalized rates, gold labels down, predictions across.
pub fn confusion_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::from("gold");
    for l in &matrix.labels {
        out.push(',');
        out.push_str(&csv_field(l));
    }
    out.push('\n');
    for (label, row) in matrix.labels.iter().zip(&matrix.rates) {
        out.push_str(&csv_field(label));
        for r in row {
            let _ = write!(out, ",{r}");
        }
        out.push('\n');
    }
    out
}

/// One configuration in a comparison run.
pub struct ComparisonRun<'a> {
    pub name: String,
    pub config: EngineConfig,
    pub backend: &'a dyn Scorer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonMetrics {
    pub top_k: BTreeMap<usize, f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_evaluated: usize,
    pub n_abstained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub config: EngineConfig,
    pub model: String,
    pub metrics: Option<ComparisonMetrics>,
    /// Threshold sweep over this run's predictions; empty if none requested.
    pub sweep: Vec<SweepPoint>,
    pub error: Option<String>,
    #[serde(skip)]
    pub backend_failure: bool,
}

/// Classifies and evaluates `corpus` once per run, in the given order, and
/// sweeps each run's predictions over `thresholds`. A failing run is
/// recorded in its row and the remaining runs proceed.
pub fn run_comparison(
    corpus: &Corpus,
    labels: &LabelSpace,
    runs: &[ComparisonRun<'_>],
    registry: &PatternRegistry,
    opts: BatchOptions,
    thresholds: &[f64],
) -> Vec<ComparisonRow> {
    runs.iter()
        .map(|run| {
            let outcome = Classifier::with_registry(labels, run.config.clone(), registry)
                .and_then(|c| c.classify_records(&corpus.records, run.backend, opts))
                .map_err(|e| (e.is_backend_failure(), e.to_string()))
                .and_then(|out| {
                    let report = evaluate(&out.predictions, corpus, labels);
                    let sweep = threshold_sweep(&out.predictions, corpus, labels, thresholds);
                    report
                        .and_then(|r| Ok((r, sweep?)))
                        .map_err(|e| (false, e.to_string()))
                });
            let mut row = ComparisonRow {
                name: run.name.clone(),
                config: run.config.clone(),
                model: run.backend.descriptor().model_name,
                metrics: None,
                sweep: Vec::new(),
                error: None,
                backend_failure: false,
            };
            match outcome {
                Ok((r, sweep)) => {
                    row.metrics = Some(ComparisonMetrics {
                        top_k: r.top_k,
                        precision: r.precision,
                        recall: r.recall,
                        f1: r.f1,
                        n_evaluated: r.n_evaluated,
                        n_abstained: r.n_abstained,
                    });
                    row.sweep = sweep;
                }
                Err((backend, e)) => {
                    row.error = Some(e);
                    row.backend_failure = backend;
                }
            }
            row
        })
        .collect()
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let ks: Vec<usize> = rows
        .iter()
        .filter_map(|r| r.metrics.as_ref())
        .flat_map(|m| m.top_k.keys().copied())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = String::from("name,pattern,formulation,descriptors,threshold");
    for k in &ks {
        let _ = write!(out, ",top{k}");
    }
    out.push_str(",precision,recall,f1,error\n");
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.name),
            csv_field(&r.config.pattern_id),
            r.config.formulation,
            r.config.use_descriptors,
            r.config.threshold.map(|t| t.to_string()).unwrap_or_default()
        );
        match &r.metrics {
            Some(m) => {
                for k in &ks {
                    let v = m.top_k.get(k).map(|v| v.to_string()).unwrap_or_default();
                    let _ = write!(out, ",{v}");
                }
                let _ = writeln!(out, ",{},{},{},", m.precision, m.recall, m.f1);
            }
            None => {
                out.push_str(&",".repeat(ks.len() + 3));
                let _ = writeln!(out, ",{}", csv_field(r.error.as_deref().unwrap_or("")));
            }
        }
    }
    out
}
