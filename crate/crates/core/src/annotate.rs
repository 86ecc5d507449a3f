//! Resumable silver annotation of an unlabelled gloss pool, and export of the
//! silver data as a training set.
//!
//! Progress lives in two append-only files: the silver JSONL and, next to
//! it, a ledger of completed ids (one per line, abstentions included). A
//! batch is committed by appending its silver lines first and its ids
//! second. On resume, ledger lines without a trailing newline are dropped,
//! and silver lines whose id is missing from the ledger are cut, so a crash
//! at any point loses at most the batch in flight.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Corpus;
use crate::engine::{Classifier, EngineConfig, EngineError};
use crate::labelspace::LabelSpace;
use crate::scorer::Scorer;

pub const LEDGER_SUFFIX: &str = ".done";
pub const TRAIN_FILE: &str = "train.jsonl";
pub const DEV_FILE: &str = "dev.jsonl";
pub const LABELS_FILE: &str = "labels.txt";

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("checkpoint lists `{0}`, which is not in the pool")]
    LedgerMismatch(String),
    #[error("existing silver data was produced by teacher {found}, current teacher is {expected}")]
    TeacherMismatch { expected: String, found: String },
    #[error("annotation stopped after {committed} committed record(s): {source}")]
    Interrupted {
        committed: usize,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("silver set is empty")]
    EmptySilver,
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("silver record `{id}` has label `{label}` outside the label space")]
    UnknownLabel { id: String, label: String },
}

impl AnnotateError {
    pub fn is_backend_failure(&self) -> bool {
        match self {
            AnnotateError::Interrupted { source, .. } | AnnotateError::Engine(source) => {
                source.is_backend_failure()
            }
            _ => false,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AnnotateError + '_ {
    move |source| AnnotateError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilverRecord {
    pub id: String,
    pub gloss: String,
    pub silver_label: String,
    pub confidence: f64,
    pub teacher_config: String,
}

#[derive(Debug, Clone, Copy)]
pub struct AnnotateOptions {
    /// Continue from an existing checkpoint instead of starting over.
    pub resume: bool,
    /// Stop after this many newly processed glosses.
    pub limit: Option<usize>,
    /// Glosses per committed batch.
    pub batch_size: usize,
    pub workers: usize,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        Self {
            resume: false,
            limit: None,
            batch_size: 16,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationSummary {
    pub teacher_config: String,
    /// Glosses classified in this run.
    pub processed: usize,
    pub written: usize,
    pub abstained: usize,
    /// Glosses already completed by an earlier run.
    pub resumed: usize,
    pub remaining: usize,
    /// Backend inputs scored in this run.
    pub queries: u64,
}

pub fn ledger_path(silver: &Path) -> PathBuf {
    let mut name = silver.as_os_str().to_owned();
    name.push(LEDGER_SUFFIX);
    PathBuf::from(name)
}

/// Complete lines of `path` (missing file reads as empty) and the byte
/// length they cover.
fn complete_lines(path: &Path) -> Result<(Vec<String>, u64), AnnotateError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(io_err(path)(e)),
    };
    let end = text.rfind('\n').map_or(0, |i| i + 1);
    let lines = text[..end].lines().map(str::to_string).collect();
    Ok((lines, end as u64))
}

fn write_atomically(path: &Path, contents: &str) -> Result<(), AnnotateError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Restores a consistent checkpoint and returns the completed ids.
fn recover(
    silver: &Path,
    ledger: &Path,
    pool: &Corpus,
    fingerprint: &str,
) -> Result<HashSet<String>, AnnotateError> {
    let (ids, ledger_len) = complete_lines(ledger)?;
    let pool_ids: HashSet<&str> = pool.iter().map(|r| r.id.as_str()).collect();
    let mut completed = HashSet::with_capacity(ids.len());
    for id in ids {
        if !pool_ids.contains(id.as_str()) {
            return Err(AnnotateError::LedgerMismatch(id));
        }
        completed.insert(id);
    }
    if ledger.exists() {
        let f = OpenOptions::new().write(true).open(ledger).map_err(io_err(ledger))?;
        f.set_len(ledger_len).map_err(io_err(ledger))?;
    }

    let (lines, _) = complete_lines(silver)?;
    let mut kept = String::new();
    for (i, line) in lines.iter().enumerate() {
        let Ok(record) = serde_json::from_str::<SilverRecord>(line) else {
            return Err(AnnotateError::Malformed {
                path: silver.to_path_buf(),
                line: i + 1,
                message: "not a silver record".into(),
            });
        };
        if record.teacher_config != fingerprint {
            return Err(AnnotateError::TeacherMismatch {
                expected: fingerprint.to_string(),
                found: record.teacher_config,
            });
        }
        if completed.contains(&record.id) {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    write_atomically(silver, &kept)?;
    Ok(completed)
}

fn append(path: &Path, contents: &str) -> Result<(), AnnotateError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    f.write_all(contents.as_bytes()).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))
}

/// Labels every pending gloss of `pool` and appends one [`SilverRecord`] per
/// non-abstained gloss to `silver`, committing batch by batch in pool order.
///
/// On a backend failure, everything classified before the failing gloss is
/// committed and [`AnnotateError::Interrupted`] is returned; rerunning with
/// `resume` continues from there.
pub fn annotate_pool<S: Scorer + ?Sized>(
    pool: &Corpus,
    labels: &LabelSpace,
    cfg: &EngineConfig,
    backend: &S,
    silver: &Path,
    opts: AnnotateOptions,
) -> Result<AnnotationSummary, AnnotateError> {
    let classifier = Classifier::new(labels, cfg.clone())?;
    let fingerprint = cfg.fingerprint(labels, &backend.descriptor().model_name);
    let ledger = ledger_path(silver);

    let completed = if opts.resume {
        recover(silver, &ledger, pool, &fingerprint)?
    } else {
        File::create(silver).map_err(io_err(silver))?;
        File::create(&ledger).map_err(io_err(&ledger))?;
        HashSet::new()
    };

    let pending: Vec<_> = pool
        .iter()
        .filter(|r| !completed.contains(&r.id))
        .cloned()
        .collect();
    let todo = &pending[..opts.limit.unwrap_or(usize::MAX).min(pending.len())];
    let mut summary = AnnotationSummary {
        teacher_config: fingerprint.clone(),
        processed: 0,
        written: 0,
        abstained: 0,
        resumed: completed.len(),
        remaining: pending.len(),
        queries: 0,
    };
    info!(
        "annotating {} of {} pending gloss(es), {} already done",
        todo.len(),
        pending.len(),
        completed.len()
    );

    for batch in todo.chunks(opts.batch_size.max(1)) {
        let results = classifier.classify_each(batch, backend, opts.workers, true);
        let mut silver_lines = String::new();
        let mut ledger_lines = String::new();
        let mut failure = None;
        for (record, result) in batch.iter().zip(results) {
            let scored = match result {
                Some(Ok(s)) => s,
                Some(Err(e)) => {
                    failure = Some(e);
                    break;
                }
                None => break,
            };
            summary.processed += 1;
            summary.remaining -= 1;
            summary.queries += classifier.queries_per_gloss() as u64;
            ledger_lines.push_str(&record.id);
            ledger_lines.push('\n');
            if scored.abstained {
                summary.abstained += 1;
                continue;
            }
            let top = scored.top().expect("label space is non-empty");
            let line = SilverRecord {
                id: record.id.clone(),
                gloss: record.gloss.clone(),
                silver_label: top.label.clone(),
                confidence: top.p,
                teacher_config: fingerprint.clone(),
            };
            silver_lines.push_str(&serde_json::to_string(&line).expect("record serializes"));
            silver_lines.push('\n');
            summary.written += 1;
        }
        append(silver, &silver_lines)?;
        append(&ledger, &ledger_lines)?;
        if let Some(source) = failure {
            return Err(AnnotateError::Interrupted {
                committed: summary.resumed + summary.processed,
                source,
            });
        }
    }
    Ok(summary)
}

pub fn read_silver(path: &Path) -> Result<Vec<SilverRecord>, AnnotateError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| AnnotateError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Training example consumed by the student trainer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub train: f64,
    pub dev: f64,
}

impl Split {
    pub fn new(train: f64, dev: f64) -> Result<Self, AnnotateError> {
        if !(train > 0.0 && dev > 0.0 && train + dev <= 1.0 + 1e-12) {
            return Err(AnnotateError::InvalidSplit(format!(
                "fractions must be positive and sum to at most 1, got ({train}, {dev})"
            )));
        }
        Ok(Self { train, dev })
    }
}

impl Default for Split {
    fn default() -> Self {
        Self { train: 0.9, dev: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportSummary {
    pub n_train: usize,
    pub n_dev: usize,
    /// Labels present in the silver data, in label-space order.
    pub labels: Vec<String>,
    pub seed: u64,
}

/// Shuffles `silver` with a seeded generator and writes `train.jsonl`,
/// `dev.jsonl` (`{"text", "label"}` per line) and `labels.txt` into `out_dir`.
pub fn export_training_set(
    silver: &[SilverRecord],
    labels: &LabelSpace,
    split: Split,
    seed: u64,
    out_dir: &Path,
) -> Result<ExportSummary, AnnotateError> {
    if silver.is_empty() {
        return Err(AnnotateError::EmptySilver);
    }
    let mut present = vec![false; labels.len()];
    for r in silver {
        let i = labels
            .index_of(&r.silver_label)
            .ok_or_else(|| AnnotateError::UnknownLabel {
                id: r.id.clone(),
                label: r.silver_label.clone(),
            })?;
        present[i] = true;
    }

    let n = silver.len();
    let n_train = ((split.train * n as f64).round() as usize).min(n);
    let n_dev = ((split.dev * n as f64).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let write_split = |name: &str, idx: &[usize]| -> Result<(), AnnotateError> {
        let path = out_dir.join(name);
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        for &i in idx {
            let ex = TrainingExample {
                text: silver[i].gloss.clone(),
                label: silver[i].silver_label.clone(),
            };
            serde_json::to_writer(&mut w, &ex).map_err(|e| io_err(&path)(e.into()))?;
            w.write_all(b"\n").map_err(io_err(&path))?;
        }
        w.flush().map_err(io_err(&path))
    };
    write_split(TRAIN_FILE, &order[..n_train])?;
    write_split(DEV_FILE, &order[n_train..n_train + n_dev])?;

    let vocab: Vec<String> = labels
        .names()
        .zip(&present)
        .filter(|(_, &p)| p)
        .map(|(l, _)| l.to_string())
        .collect();
    let labels_path = out_dir.join(LABELS_FILE);
    let mut text = vocab.join("\n");
    text.push('\n');
    fs::write(&labels_path, text).map_err(io_err(&labels_path))?;

    Ok(ExportSummary {
        n_train,
        n_dev,
        labels: vocab,
        seed,
    })
}
