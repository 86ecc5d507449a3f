//! Gloss corpora: loading, writing and gold-label statistics.
//!
//! Two interchange formats are supported:
//!
//! * TSV with the exact header `id<TAB>gloss<TAB>label`. The label column may
//!   be empty. Glosses containing tabs or newlines cannot be written as TSV.
//! * JSONL, one object per line with keys `id`, `gloss` and an optional
//!   `label` (string or `null`). An optional `lemmas` array is kept for display.

use std::collections::HashSet;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labelspace::LabelSpace;

pub const TSV_HEADER: &str = "id\tgloss\tlabel";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: field `{field}`: {message}")]
    Malformed {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("record `{id}` has gold label `{label}` which is not in the label space")]
    UnknownLabel { id: String, label: String },
    #[error("record `{id}`: gloss cannot be written as TSV (contains tab or newline)")]
    NotTsvSafe { id: String },
    #[error("unknown corpus format `{0}` (expected tsv or jsonl)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses the format from a file extension; anything but `.jsonl`/`.json`
    /// is treated as TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Tsv,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(CorpusFormat::Tsv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

/// One sense definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlossRecord {
    pub id: String,
    pub gloss: String,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lemmas: Vec<String>,
}

impl GlossRecord {
    pub fn new(id: impl Into<String>, gloss: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            gloss: gloss.into(),
            gold_label: None,
            lemmas: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.gold_label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub records: Vec<GlossRecord>,
}

impl Corpus {
    /// Builds a corpus from in-memory records, enforcing the same invariants
    /// as the file loaders (non-empty glosses, unique ids).
    pub fn from_records(
        name: impl Into<String>,
        records: Vec<GlossRecord>,
    ) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, record) in records.iter().enumerate() {
            validate_record(record, i + 1)?;
            if !seen.insert(record.id.as_str()) {
                return Err(DatasetError::DuplicateId(record.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, GlossRecord> {
        self.records.iter()
    }

    pub fn get(&self, id: &str) -> Option<&GlossRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Checks that every present gold label belongs to `labels`.
    pub fn check_labels(&self, labels: &LabelSpace) -> Result<(), DatasetError> {
        for record in &self.records {
            if let Some(label) = &record.gold_label {
                if labels.index_of(label).is_none() {
                    return Err(DatasetError::UnknownLabel {
                        id: record.id.clone(),
                        label: label.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a GlossRecord;
    type IntoIter = std::slice::Iter<'a, GlossRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

fn validate_record(record: &GlossRecord, line: usize) -> Result<(), DatasetError> {
    if record.id.trim().is_empty() {
        return Err(DatasetError::Malformed {
            line,
            field: "id",
            message: "empty id".into(),
        });
    }
    if record.gloss.trim().is_empty() {
        return Err(DatasetError::Malformed {
            line,
            field: "gloss",
            message: "empty gloss".into(),
        });
    }
    Ok(())
}

fn corpus_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string()
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus, DatasetError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text, format, corpus_name(path))
}

/// Parses corpus text already in memory.
pub fn parse_corpus(
    text: &str,
    format: CorpusFormat,
    name: impl Into<String>,
) -> Result<Corpus, DatasetError> {
    let records = match format {
        CorpusFormat::Tsv => parse_tsv(text)?,
        CorpusFormat::Jsonl => parse_jsonl(text)?,
    };
    let mut seen = HashSet::with_capacity(records.len());
    for record in &records {
        if !seen.insert(record.id.as_str()) {
            return Err(DatasetError::DuplicateId(record.id.clone()));
        }
    }
    Ok(Corpus {
        name: name.into(),
        records,
    })
}

fn parse_tsv(text: &str) -> Result<Vec<GlossRecord>, DatasetError> {
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Ok(Vec::new());
    };
    let header = header.trim_start_matches('\u{feff}').trim_end_matches('\r');
    if header != TSV_HEADER {
        return Err(DatasetError::Malformed {
            line: 1,
            field: "header",
            message: format!("expected `id<TAB>gloss<TAB>label`, found `{header}`"),
        });
    }

    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(DatasetError::Malformed {
                line: line_no,
                field: if fields.len() < 2 { "gloss" } else { "label" },
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let label = fields
            .get(2)
            .map(|l| l.trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string);
        let record = GlossRecord {
            id: fields[0].trim().to_string(),
            gloss: fields[1].trim().to_string(),
            gold_label: label,
            lemmas: Vec::new(),
        };
        validate_record(&record, line_no)?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Deserialize)]
struct JsonlRow {
    id: Option<serde_json::Value>,
    gloss: Option<serde_json::Value>,
    #[serde(default)]
    label: Option<serde_json::Value>,
    #[serde(default)]
    lemmas: Option<Vec<String>>,
}

fn json_string(
    value: Option<serde_json::Value>,
    line: usize,
    field: &'static str,
) -> Result<String, DatasetError> {
    match value {
        Some(serde_json::Value::String(s)) => Ok(s),
        Some(other) => Err(DatasetError::Malformed {
            line,
            field,
            message: format!("expected string, found {other}"),
        }),
        None => Err(DatasetError::Malformed {
            line,
            field,
            message: "missing key".into(),
        }),
    }
}

fn parse_jsonl(text: &str) -> Result<Vec<GlossRecord>, DatasetError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
            line: line_no,
            field: "json",
            message: e.to_string(),
        })?;
        let id = json_string(row.id, line_no, "id")?;
        let gloss = json_string(row.gloss, line_no, "gloss")?;
        let gold_label = match row.label {
            None | Some(serde_json::Value::Null) => None,
            Some(serde_json::Value::String(s)) if s.trim().is_empty() => None,
            Some(serde_json::Value::String(s)) => Some(s),
            Some(other) => {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    field: "label",
                    message: format!("expected string or null, found {other}"),
                })
            }
        };
        let record = GlossRecord {
            id,
            gloss,
            gold_label,
            lemmas: row.lemmas.unwrap_or_default(),
        };
        validate_record(&record, line_no)?;
        records.push(record);
    }
    Ok(records)
}

pub fn write_corpus(
    corpus: &Corpus,
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let io_err = |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    write_corpus_to(corpus, &mut out, format).map_err(|e| match e {
        WriteError::Dataset(d) => d,
        WriteError::Io(source) => io_err(source),
    })?;
    out.flush().map_err(io_err)
}

enum WriteError {
    Dataset(DatasetError),
    Io(io::Error),
}

impl From<io::Error> for WriteError {
    fn from(e: io::Error) -> Self {
        WriteError::Io(e)
    }
}

fn write_corpus_to<W: Write>(
    corpus: &Corpus,
    out: &mut W,
    format: CorpusFormat,
) -> Result<(), WriteError> {
    match format {
        CorpusFormat::Tsv => {
            writeln!(out, "{TSV_HEADER}")?;
            for r in &corpus.records {
                let unsafe_char = |s: &str| s.contains(['\t', '\n', '\r']);
                if unsafe_char(&r.gloss)
                    || unsafe_char(&r.id)
                    || r.gold_label.as_deref().is_some_and(unsafe_char)
                {
                    return Err(WriteError::Dataset(DatasetError::NotTsvSafe {
                        id: r.id.clone(),
                    }));
                }
                writeln!(
                    out,
                    "{}\t{}\t{}",
                    r.id,
                    r.gloss,
                    r.gold_label.as_deref().unwrap_or("")
                )?;
            }
        }
        CorpusFormat::Jsonl => {
            for r in &corpus.records {
                let line = serde_json::to_string(r).map_err(io::Error::other)?;
                writeln!(out, "{line}")?;
            }
        }
    }
    Ok(())
}

/// Gold-label counts in label-space declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub counts: Vec<(String, usize)>,
    pub total: usize,
}

impl LabelDistribution {
    pub fn get(&self, label: &str) -> usize {
        self.counts
            .iter()
            .find(|(name, _)| name == label)
            .map_or(0, |(_, c)| *c)
    }
}

pub fn label_distribution(
    corpus: &Corpus,
    labels: &LabelSpace,
) -> Result<LabelDistribution, DatasetError> {
    let mut counts = vec![0usize; labels.len()];
    for record in &corpus.records {
        if let Some(label) = &record.gold_label {
            let idx = labels
                .index_of(label)
                .ok_or_else(|| DatasetError::UnknownLabel {
                    id: record.id.clone(),
                    label: label.clone(),
                })?;
            counts[idx] += 1;
        }
    }
    let total = counts.iter().sum();
    Ok(LabelDistribution {
        counts: labels
            .names()
            .map(str::to_string)
            .zip(counts)
            .collect(),
        total,
    })
}
