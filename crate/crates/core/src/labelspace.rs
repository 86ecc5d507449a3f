//! Candidate domain labels and their descriptor decompositions.
//!
//! A composed label such as `Art, architecture and archaeology` is queried
//! through its single-domain components (`Art`, `Architecture`,
//! `Archaeology`); the label's score is the maximum over its descriptors.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabelSpaceError {
    #[error("cannot read label file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("label file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("label file declares no labels")]
    Empty,
    #[error("empty label name")]
    EmptyName,
    #[error("label `{0}` has no descriptors after decomposition")]
    NoDescriptors(String),
    #[error("label `{label}`: invalid descriptor `{descriptor}`: {reason}")]
    BadDescriptor {
        label: String,
        descriptor: String,
        reason: &'static str,
    },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("descriptor `{descriptor}` is shared by `{first}` and `{second}`; set allow_shared_descriptors to permit this")]
    SharedDescriptor {
        descriptor: String,
        first: String,
        second: String,
    },
    #[error("label `{label}`: no score for descriptor `{descriptor}`")]
    MissingScore { label: String, descriptor: String },
    #[error("label `{label}`: descriptor `{descriptor}` has non-finite score")]
    NonFiniteScore { label: String, descriptor: String },
}

fn is_and(token: &str) -> bool {
    token.eq_ignore_ascii_case("and")
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Splits a composed label into descriptors.
///
/// Components are separated by `,` and by the standalone word `and`; each
/// component is trimmed and capitalized, empty components are dropped. A name
/// without any separator is returned unchanged as its only descriptor.
pub fn decompose_label(name: &str) -> Result<Vec<String>, LabelSpaceError> {
    let trimmed = name.trim();
    if trimmed.is_empty() {
        return Err(LabelSpaceError::EmptyName);
    }
    let has_separator = trimmed.contains(',') || trimmed.split_whitespace().any(is_and);
    if !has_separator {
        return Ok(vec![trimmed.to_string()]);
    }

    let mut out = Vec::new();
    for part in trimmed.split(',') {
        let mut group: Vec<&str> = Vec::new();
        let tokens = part.split_whitespace().map(Some).chain(std::iter::once(None));
        for token in tokens {
            match token {
                Some(t) if !is_and(t) => group.push(t),
                _ => {
                    if !group.is_empty() {
                        out.push(capitalize(&group.join(" ")));
                        group.clear();
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(LabelSpaceError::NoDescriptors(trimmed.to_string()));
    }
    Ok(out)
}

/// Label score from descriptor scores: the maximum over the label's descriptors.
///
/// Scores may be probabilities or raw logits; only finiteness is checked.
pub fn map_descriptor_scores(
    per_descriptor: &HashMap<String, f64>,
    label: &DomainLabel,
) -> Result<f64, LabelSpaceError> {
    let mut best = f64::NEG_INFINITY;
    for descriptor in &label.descriptors {
        let score = *per_descriptor
            .get(descriptor)
            .ok_or_else(|| LabelSpaceError::MissingScore {
                label: label.name.clone(),
                descriptor: descriptor.clone(),
            })?;
        if !score.is_finite() {
            return Err(LabelSpaceError::NonFiniteScore {
                label: label.name.clone(),
                descriptor: descriptor.clone(),
            });
        }
        if score > best {
            best = score;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainLabel {
    pub name: String,
    pub descriptors: Vec<String>,
}

impl DomainLabel {
    /// Label with automatically decomposed descriptors.
    pub fn auto(name: &str) -> Result<Self, LabelSpaceError> {
        let descriptors = decompose_label(name)?;
        Self::with_descriptors(name, descriptors)
    }

    /// Label with explicit descriptors.
    ///
    /// A label with a single descriptor must use its own name as that
    /// descriptor, so that descriptor and plain runs query the same text.
    pub fn with_descriptors(
        name: &str,
        descriptors: Vec<String>,
    ) -> Result<Self, LabelSpaceError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(LabelSpaceError::EmptyName);
        }
        if descriptors.is_empty() {
            return Err(LabelSpaceError::NoDescriptors(name.to_string()));
        }
        let mut seen = HashSet::new();
        for d in &descriptors {
            let bad = |reason| LabelSpaceError::BadDescriptor {
                label: name.to_string(),
                descriptor: d.clone(),
                reason,
            };
            if d.trim().is_empty() {
                return Err(bad("empty descriptor"));
            }
            if d.trim() != d {
                return Err(bad("surrounding whitespace"));
            }
            if !seen.insert(d.as_str()) {
                return Err(bad("repeated within the label"));
            }
        }
        if descriptors.len() == 1 && descriptors[0] != name {
            return Err(LabelSpaceError::BadDescriptor {
                label: name.to_string(),
                descriptor: descriptors[0].clone(),
                reason: "a single descriptor must equal the label name",
            });
        }
        Ok(Self {
            name: name.to_string(),
            descriptors,
        })
    }

    pub fn is_composite(&self) -> bool {
        self.descriptors.len() > 1
    }
}

/// Ordered set of candidate labels. Declaration order is the tie-break order
/// everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelSpace {
    pub name: String,
    labels: Vec<DomainLabel>,
    allow_shared_descriptors: bool,
}

impl LabelSpace {
    pub fn new(
        name: impl Into<String>,
        labels: Vec<DomainLabel>,
        allow_shared_descriptors: bool,
    ) -> Result<Self, LabelSpaceError> {
        if labels.is_empty() {
            return Err(LabelSpaceError::Empty);
        }
        let mut names = HashSet::new();
        let mut owners: HashMap<String, &str> = HashMap::new();
        for label in &labels {
            if !names.insert(label.name.as_str()) {
                return Err(LabelSpaceError::DuplicateLabel(label.name.clone()));
            }
            if allow_shared_descriptors {
                continue;
            }
            for d in &label.descriptors {
                if let Some(first) = owners.insert(d.to_lowercase(), &label.name) {
                    return Err(LabelSpaceError::SharedDescriptor {
                        descriptor: d.clone(),
                        first: first.to_string(),
                        second: label.name.clone(),
                    });
                }
            }
        }
        Ok(Self {
            name: name.into(),
            labels,
            allow_shared_descriptors,
        })
    }

    /// Builds a space of auto-decomposed labels.
    pub fn from_names<S: AsRef<str>>(
        name: impl Into<String>,
        names: &[S],
    ) -> Result<Self, LabelSpaceError> {
        let labels = names
            .iter()
            .map(|n| DomainLabel::auto(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, labels, false)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[DomainLabel] {
        &self.labels
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(|l| l.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn allows_shared_descriptors(&self) -> bool {
        self.allow_shared_descriptors
    }

    /// Total number of descriptors, i.e. queries per gloss in descriptor mode.
    pub fn descriptor_count(&self) -> usize {
        self.labels.iter().map(|l| l.descriptors.len()).sum()
    }

    /// Distinct descriptors in first-occurrence order.
    pub fn unique_descriptors(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.labels
            .iter()
            .flat_map(|l| l.descriptors.iter())
            .filter(|d| seen.insert(d.as_str()))
            .map(String::as_str)
            .collect()
    }

    pub fn to_file(&self) -> LabelFile {
        LabelFile {
            name: self.name.clone(),
            labels: self
                .labels
                .iter()
                .map(|l| LabelEntry {
                    name: l.name.clone(),
                    descriptors: Some(l.descriptors.clone()),
                })
                .collect(),
            allow_shared_descriptors: self.allow_shared_descriptors,
            note: None,
        }
    }
}

/// On-disk label list: `{"name": ..., "labels": [{"name": ..., "descriptors": [...]?}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelFile {
    pub name: String,
    pub labels: Vec<LabelEntry>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_shared_descriptors: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptors: Option<Vec<String>>,
}

impl TryFrom<LabelFile> for LabelSpace {
    type Error = LabelSpaceError;

    fn try_from(file: LabelFile) -> Result<Self, Self::Error> {
        if file.labels.is_empty() {
            return Err(LabelSpaceError::Empty);
        }
        let labels = file
            .labels
            .into_iter()
            .map(|entry| match entry.descriptors {
                Some(d) => DomainLabel::with_descriptors(&entry.name, d),
                None => DomainLabel::auto(&entry.name),
            })
            .collect::<Result<Vec<_>, _>>()?;
        LabelSpace::new(file.name, labels, file.allow_shared_descriptors)
    }
}

pub fn parse_labelspace(text: &str) -> Result<LabelSpace, LabelSpaceError> {
    if text.trim().is_empty() {
        return Err(LabelSpaceError::Empty);
    }
    let file: LabelFile = serde_json::from_str(text)?;
    file.try_into()
}

pub fn load_labelspace(path: impl AsRef<Path>) -> Result<LabelSpace, LabelSpaceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LabelSpaceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_labelspace(&text)
}

const BABELDOMAINS_JSON: &str = include_str!("../data/babeldomains.json");

/// The 32 BabelDomains labels shipped with the crate. Descriptor sets are
/// auto-derived.
pub fn babeldomains() -> LabelSpace {
    parse_labelspace(BABELDOMAINS_JSON).expect("bundled label file is valid")
}

/// Descriptor scores keyed by descriptor, for callers that collect scores
/// themselves before mapping.
pub fn descriptor_score_map<'a>(
    scores: impl IntoIterator<Item = (&'a str, f64)>,
) -> HashMap<String, f64> {
    scores
        .into_iter()
        .map(|(d, s)| (d.to_string(), s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decompose_examples() {
        assert_eq!(
            decompose_label("Art, architecture and archaeology").unwrap(),
            vec!["Art", "Architecture", "Archaeology"]
        );
        assert_eq!(decompose_label("Music").unwrap(), vec!["Music"]);
        assert_eq!(
            decompose_label("Heraldry, honors, and vexillology").unwrap(),
            vec!["Heraldry", "Honors", "Vexillology"]
        );
        assert_eq!(decompose_label("  music ").unwrap(), vec!["music"]);
        assert_eq!(decompose_label("Sandwich").unwrap(), vec!["Sandwich"]);
        assert_eq!(
            decompose_label("Health and medicine").unwrap(),
            vec!["Health", "Medicine"]
        );
    }

    /// Independent split: enumerate every separator position over the
    /// character stream instead of tokenising per comma group.
    fn oracle_split(name: &str) -> Vec<String> {
        let words: Vec<String> = name
            .replace(',', " , ")
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let mut out = Vec::new();
        let mut cur: Vec<String> = Vec::new();
        for w in words.iter().chain(std::iter::once(&",".to_string())) {
            if w == "," || w.to_lowercase() == "and" {
                if !cur.is_empty() {
                    let joined = cur.join(" ");
                    let mut c = joined.chars();
                    let first = c.next().unwrap().to_uppercase().to_string();
                    out.push(first + c.as_str());
                    cur.clear();
                }
            } else {
                cur.push(w.clone());
            }
        }
        out
    }

    #[test]
    fn decompose_matches_split_oracle() {
        let name = "A and B, C and D";
        assert_eq!(decompose_label(name).unwrap(), oracle_split(name));
        assert_eq!(decompose_label(name).unwrap(), vec!["A", "B", "C", "D"]);
    }

    #[test]
    fn decompose_errors() {
        assert!(matches!(decompose_label(""), Err(LabelSpaceError::EmptyName)));
        assert!(matches!(
            decompose_label(" , and ,"),
            Err(LabelSpaceError::NoDescriptors(_))
        ));
    }

    #[test]
    fn max_mapping() {
        let label = DomainLabel::auto("Art, architecture and archaeology").unwrap();
        let scores = descriptor_score_map([("Art", 0.2), ("Architecture", 0.7), ("Archaeology", 0.1)]);
        assert_eq!(map_descriptor_scores(&scores, &label).unwrap(), 0.7);

        let music = DomainLabel::auto("Music").unwrap();
        let scores = descriptor_score_map([("Music", 0.4)]);
        assert_eq!(map_descriptor_scores(&scores, &music).unwrap(), 0.4);

        let scores = descriptor_score_map([("Art", 0.2)]);
        let err = map_descriptor_scores(&scores, &label).unwrap_err();
        assert!(err.to_string().contains("Architecture"));
    }

    #[test]
    fn single_descriptor_must_be_name() {
        assert!(DomainLabel::with_descriptors("Media", vec!["Press".into()]).is_err());
        assert!(DomainLabel::with_descriptors("Media", vec!["Media".into()]).is_ok());
        assert!(DomainLabel::with_descriptors("Media", vec!["A".into(), "A".into()]).is_err());
        assert!(DomainLabel::with_descriptors("Media", vec![]).is_err());
    }

    #[test]
    fn space_invariants() {
        let err = LabelSpace::from_names("x", &["Music", "Music"]).unwrap_err();
        assert!(matches!(err, LabelSpaceError::DuplicateLabel(_)));

        let err = LabelSpace::from_names("x", &["Art and music", "Music"]).unwrap_err();
        assert!(matches!(err, LabelSpaceError::SharedDescriptor { .. }));

        let labels = vec![
            DomainLabel::auto("Art and music").unwrap(),
            DomainLabel::auto("Music").unwrap(),
        ];
        let space = LabelSpace::new("x", labels, true).unwrap();
        assert_eq!(space.descriptor_count(), 3);
        assert_eq!(space.unique_descriptors(), vec!["Art", "Music"]);
    }

    #[test]
    fn load_files() {
        let space = parse_labelspace(r#"{"name":"one","labels":[{"name":"Music"}]}"#).unwrap();
        assert_eq!(space.labels()[0].descriptors, vec!["Music"]);

        let space = parse_labelspace(
            r#"{"name":"o","labels":[{"name":"Media","descriptors":["Media","Press","Television"]},{"name":"Art and culture"}]}"#,
        )
        .unwrap();
        assert_eq!(space.labels()[0].descriptors, vec!["Media", "Press", "Television"]);
        assert_eq!(space.labels()[1].descriptors, vec!["Art", "Culture"]);

        assert!(matches!(parse_labelspace(""), Err(LabelSpaceError::Empty)));
        assert!(matches!(
            parse_labelspace(r#"{"name":"e","labels":[]}"#),
            Err(LabelSpaceError::Empty)
        ));
        assert!(matches!(
            parse_labelspace(r#"{"name":"d","labels":[{"name":"A"},{"name":"A"}]}"#),
            Err(LabelSpaceError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn override_round_trips_through_file() {
        let space = parse_labelspace(
            r#"{"name":"o","labels":[{"name":"Media","descriptors":["Media","Press","Television"]}]}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&space.to_file()).unwrap();
        assert_eq!(parse_labelspace(&text).unwrap(), space);
    }

    #[test]
    fn bundled_babeldomains() {
        let space = babeldomains();
        assert_eq!(space.len(), 32);
        let art = &space.labels()[space.index_of("Art, architecture, and archaeology").unwrap()];
        assert_eq!(art.descriptors, vec!["Art", "Architecture", "Archaeology"]);
        let music = &space.labels()[space.index_of("Music").unwrap()];
        assert_eq!(music.descriptors, vec!["Music"]);
    }

    proptest! {
        #[test]
        fn max_is_order_invariant(scores in proptest::collection::vec(0.0f64..=1.0, 1..6), seed in any::<u64>()) {
            let names: Vec<String> = (0..scores.len()).map(|i| format!("D{i}")).collect();
            let label = if names.len() == 1 {
                DomainLabel::with_descriptors("D0", names.clone()).unwrap()
            } else {
                DomainLabel::with_descriptors("L", names.clone()).unwrap()
            };
            let map: HashMap<String, f64> = names.iter().cloned().zip(scores.iter().copied()).collect();
            let got = map_descriptor_scores(&map, &label).unwrap();

            let mut scan = scores[0];
            for &s in &scores[1..] {
                if s > scan { scan = s; }
            }
            prop_assert_eq!(got, scan);

            let mut rotated = label.clone();
            let n = rotated.descriptors.len();
            rotated.descriptors.rotate_left((seed as usize) % n);
            prop_assert_eq!(map_descriptor_scores(&map, &rotated).unwrap(), got);
        }

        #[test]
        fn decompose_is_idempotent(parts in proptest::collection::vec("[A-Za-z]{1,8}", 1..5), commas in any::<u8>()) {
            let mut name = String::new();
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    name.push_str(if (commas >> i) & 1 == 1 { ", " } else { " and " });
                }
                name.push_str(p);
            }
            if let Ok(descriptors) = decompose_label(&name) {
                for d in &descriptors {
                    prop_assert_eq!(decompose_label(d).unwrap(), vec![d.clone()]);
                }
            }
        }
    }
}
