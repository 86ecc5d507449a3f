//! Prediction dumps: one JSON object per gloss,
//! `{"id", "top": [{"label", "p"}], "abstained", "config"}`.
//!
//! Dumps written by other tools (for example a fine-tuned classifier) are
//! read with the same schema and evaluated unchanged.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LabelProb, ScoredLabels};

#[derive(Debug, Error)]
pub enum DumpError {
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub top: Vec<LabelProb>,
    pub abstained: bool,
    #[serde(default)]
    pub config: serde_json::Value,
}

impl PredictionRecord {
    pub fn from_scored(scored: &ScoredLabels, config: serde_json::Value) -> Self {
        Self {
            id: scored.gloss_id.clone(),
            top: scored.entries.clone(),
            abstained: scored.abstained,
            config,
        }
    }

    /// Entries are re-sorted descending (stable) in case the producer did not.
    pub fn into_scored(self) -> ScoredLabels {
        let mut entries = self.top;
        entries.sort_by(|a, b| b.p.total_cmp(&a.p));
        ScoredLabels {
            gloss_id: self.id,
            entries,
            abstained: self.abstained,
            raw: None,
        }
    }
}

pub fn write_predictions<W: Write, C: Serialize>(
    mut out: W,
    predictions: &[ScoredLabels],
    config: &C,
) -> io::Result<()> {
    let config = serde_json::to_value(config).map_err(io::Error::other)?;
    for p in predictions {
        let record = PredictionRecord::from_scored(p, config.clone());
        serde_json::to_writer(&mut out, &record).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_predictions<C: Serialize>(
    path: impl AsRef<Path>,
    predictions: &[ScoredLabels],
    config: &C,
) -> Result<(), DumpError> {
    let path = path.as_ref();
    let io_err = |source| DumpError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_predictions(BufWriter::new(file), predictions, config).map_err(io_err)
}

pub fn parse_predictions<R: BufRead>(reader: R, path: &Path) -> Result<Vec<PredictionRecord>, DumpError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DumpError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| DumpError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if record.top.is_empty() {
            return Err(DumpError::Malformed {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("`{}` has an empty `top` list", record.id),
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<ScoredLabels>, DumpError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DumpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_predictions(BufReader::new(file), path)?
        .into_iter()
        .map(PredictionRecord::into_scored)
        .collect())
}
