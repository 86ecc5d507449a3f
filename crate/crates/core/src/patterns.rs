//! Textual patterns that turn a gloss (and a candidate label) into scorer
//! inputs for each formulation.
//!
//! * `nli` / `nsp`: the gloss is the first sentence verbatim; the template,
//!   which must contain `[label]` exactly once, becomes the second sentence.
//! * `mlm`: the template must contain `[context]` and `[MASK]` exactly once;
//!   the gloss replaces `[context]` and the mask stays symbolic for the
//!   backend to substitute its own mask token.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONTEXT: &str = "[context]";
pub const LABEL: &str = "[label]";
pub const MASK: &str = "[MASK]";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("pattern `{id}`: placeholder {placeholder} must appear exactly once (found {found})")]
    Placeholder {
        id: String,
        placeholder: &'static str,
        found: usize,
    },
    #[error("pattern `{id}`: placeholder {placeholder} is not allowed in a {formulation} template")]
    Forbidden {
        id: String,
        placeholder: &'static str,
        formulation: PatternFormulation,
    },
    #[error("pattern `{0}`: a label is required for nli/nsp rendering")]
    MissingLabel(String),
    #[error("pattern `{0}`: mlm patterns take no label")]
    UnexpectedLabel(String),
    #[error("empty gloss")]
    EmptyGloss,
    #[error("pattern `{0}`: gloss contains the mask placeholder")]
    MaskInGloss(String),
    #[error("unknown pattern `{id}`; known patterns: {known}")]
    Unknown { id: String, known: String },
    #[error("duplicate pattern id `{0}`")]
    Duplicate(String),
    #[error("cannot read pattern file {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("unknown formulation `{0}`")]
    UnknownFormulation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum PatternFormulation {
    Mlm,
    Nsp,
    Nli,
}

impl PatternFormulation {
    pub fn as_str(self) -> &'static str {
        match self {
            PatternFormulation::Mlm => "mlm",
            PatternFormulation::Nsp => "nsp",
            PatternFormulation::Nli => "nli",
        }
    }
}

impl fmt::Display for PatternFormulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternFormulation {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlm" => Ok(Self::Mlm),
            "nsp" => Ok(Self::Nsp),
            "nli" => Ok(Self::Nli),
            other => Err(PatternError::UnknownFormulation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternTemplate {
    pub id: String,
    pub formulation: PatternFormulation,
    pub template: String,
    /// Substitute labels as written instead of lower-casing them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub preserve_label_case: bool,
}

fn count(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

impl PatternTemplate {
    pub fn new(
        id: impl Into<String>,
        formulation: PatternFormulation,
        template: impl Into<String>,
    ) -> Result<Self, PatternError> {
        let pattern = Self {
            id: id.into(),
            formulation,
            template: template.into(),
            preserve_label_case: false,
        };
        pattern.validate()?;
        Ok(pattern)
    }

    pub fn preserving_case(mut self) -> Self {
        self.preserve_label_case = true;
        self
    }

    pub fn validate(&self) -> Result<(), PatternError> {
        let exactly_once = |placeholder: &'static str| {
            let found = count(&self.template, placeholder);
            if found == 1 {
                Ok(())
            } else {
                Err(PatternError::Placeholder {
                    id: self.id.clone(),
                    placeholder,
                    found,
                })
            }
        };
        let absent = |placeholder: &'static str| {
            if count(&self.template, placeholder) == 0 {
                Ok(())
            } else {
                Err(PatternError::Forbidden {
                    id: self.id.clone(),
                    placeholder,
                    formulation: self.formulation,
                })
            }
        };
        match self.formulation {
            PatternFormulation::Mlm => {
                exactly_once(CONTEXT)?;
                exactly_once(MASK)?;
                absent(LABEL)
            }
            PatternFormulation::Nsp | PatternFormulation::Nli => {
                exactly_once(LABEL)?;
                absent(CONTEXT)?;
                absent(MASK)
            }
        }
    }

    /// The text substituted for `[label]`.
    pub fn label_text(&self, label: &str) -> String {
        if self.preserve_label_case {
            label.to_string()
        } else {
            label.to_lowercase()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedQuery {
    pub formulation: PatternFormulation,
    pub first: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Replaces the single occurrence of `placeholder` without rescanning the
/// inserted text.
fn substitute(template: &str, placeholder: &str, value: &str) -> String {
    match template.split_once(placeholder) {
        Some((head, tail)) => {
            let mut out = String::with_capacity(head.len() + value.len() + tail.len());
            out.push_str(head);
            out.push_str(value);
            out.push_str(tail);
            out
        }
        None => template.to_string(),
    }
}

pub fn render(
    template: &PatternTemplate,
    gloss: &str,
    label: Option<&str>,
) -> Result<RenderedQuery, PatternError> {
    template.validate()?;
    if gloss.trim().is_empty() {
        return Err(PatternError::EmptyGloss);
    }
    match template.formulation {
        PatternFormulation::Mlm => {
            if label.is_some() {
                return Err(PatternError::UnexpectedLabel(template.id.clone()));
            }
            if gloss.contains(MASK) {
                return Err(PatternError::MaskInGloss(template.id.clone()));
            }
            Ok(RenderedQuery {
                formulation: PatternFormulation::Mlm,
                first: substitute(&template.template, CONTEXT, gloss),
                second: None,
                label: None,
            })
        }
        formulation => {
            let label = label.ok_or_else(|| PatternError::MissingLabel(template.id.clone()))?;
            Ok(RenderedQuery {
                formulation,
                first: gloss.to_string(),
                second: Some(substitute(
                    &template.template,
                    LABEL,
                    &template.label_text(label),
                )),
                label: Some(label.to_string()),
            })
        }
    }
}

const NLI_PATTERNS: [(&str, &str); 9] = [
    ("topic", "Topic: [label]"),
    ("domain", "Domain: [label]"),
    ("theme", "Theme: [label]"),
    ("subject", "Subject: [label]"),
    ("is-about", "Is about [label]"),
    ("topic-or-domain", "Topic or domain about [label]"),
    ("topic-of-sentence", "The topic of the sentence is about [label]"),
    ("domain-of-sentence", "The domain of the sentence is about [label]"),
    (
        "topic-or-domain-of-sentence",
        "The topic or domain of the sentence is about [label]",
    ),
];

pub const DEFAULT_PATTERN: &str = "domain-of-sentence";
pub const DEFAULT_MLM_PATTERN: &str = "context-topic";

/// Built-in patterns: nine entailment hypotheses, one next-sentence
/// pattern and the mask-filling prompt.
pub fn builtin_registry() -> Vec<PatternTemplate> {
    let mut patterns: Vec<PatternTemplate> = NLI_PATTERNS
        .iter()
        .map(|(id, t)| PatternTemplate::new(*id, PatternFormulation::Nli, *t).unwrap())
        .collect();
    patterns.push(
        PatternTemplate::new(
            "nsp-domain-or-topic",
            PatternFormulation::Nsp,
            "Domain or topic about [label]",
        )
        .unwrap(),
    );
    patterns.push(
        PatternTemplate::new(
            DEFAULT_MLM_PATTERN,
            PatternFormulation::Mlm,
            "Context: [context] Topic: [MASK]",
        )
        .unwrap(),
    );
    patterns
}

/// Lookup table over built-in and user-supplied patterns, in insertion order.
#[derive(Debug, Clone)]
pub struct PatternRegistry {
    patterns: Vec<PatternTemplate>,
}

impl Default for PatternRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PatternRegistry {
    pub fn builtin() -> Self {
        Self {
            patterns: builtin_registry(),
        }
    }

    pub fn empty() -> Self {
        Self {
            patterns: Vec::new(),
        }
    }

    pub fn add(&mut self, pattern: PatternTemplate) -> Result<(), PatternError> {
        pattern.validate()?;
        if self.patterns.iter().any(|p| p.id == pattern.id) {
            return Err(PatternError::Duplicate(pattern.id));
        }
        self.patterns.push(pattern);
        Ok(())
    }

    pub fn extend_from_file(&mut self, path: impl AsRef<Path>) -> Result<(), PatternError> {
        for pattern in load_patterns(path)? {
            self.add(pattern)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&PatternTemplate, PatternError> {
        self.patterns
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| PatternError::Unknown {
                id: id.to_string(),
                known: self.ids().collect::<Vec<_>>().join(", "),
            })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.patterns.iter().map(|p| p.id.as_str())
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PatternTemplate> {
        self.patterns.iter()
    }

    pub fn by_formulation(
        &self,
        formulation: PatternFormulation,
    ) -> impl Iterator<Item = &PatternTemplate> {
        self.patterns
            .iter()
            .filter(move |p| p.formulation == formulation)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// Reads a JSON list of `{"id", "formulation", "template"}` objects.
pub fn load_patterns(path: impl AsRef<Path>) -> Result<Vec<PatternTemplate>, PatternError> {
    let path = path.as_ref();
    let file_err = |message: String| PatternError::File {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
    let patterns: Vec<PatternTemplate> =
        serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
    for p in &patterns {
        p.validate()?;
    }
    Ok(patterns)
}
