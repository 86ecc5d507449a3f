//! Zero-shot domain labelling of dictionary glosses with pretrained
//! language-model scoring backends.
//!
//! A gloss is scored against every label of a [`labelspace::LabelSpace`]
//! through a prompt pattern ([`patterns`]) and a [`scorer::Scorer`]; the
//! [`engine`] turns the scores into a ranked distribution, [`eval`] measures
//! predictions against gold labels and [`annotate`] produces resumable silver
//! training data.

pub mod annotate;
pub mod cli;
pub mod dataset;
pub mod engine;
pub mod eval;
pub mod labelspace;
pub mod patterns;
pub mod scorer;

use thiserror::Error;

/// Any failure surfaced by the library, tagged with the process exit code
/// the command-line tool uses for it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    LabelSpace(#[from] labelspace::LabelSpaceError),
    #[error(transparent)]
    Pattern(#[from] patterns::PatternError),
    #[error(transparent)]
    Scorer(#[from] scorer::ScorerError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Dump(#[from] engine::dump::DumpError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Annotate(#[from] annotate::AnnotateError),
    #[error("{0}")]
    Config(String),
    #[error("every run failed")]
    RunsFailed { backend: bool },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

impl Error {
    pub fn is_backend_failure(&self) -> bool {
        match self {
            Error::Scorer(e) => e.is_backend_failure(),
            Error::Engine(e) => e.is_backend_failure(),
            Error::Annotate(e) => e.is_backend_failure(),
            Error::RunsFailed { backend } => *backend,
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_backend_failure() {
            EXIT_BACKEND
        } else {
            EXIT_CONFIG
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
