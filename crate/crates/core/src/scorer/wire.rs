//! JSON wire protocol for remote scoring backends.
//!
//! Request, `POST /v1/score`:
//!
//! ```json
//! {"task": "nli", "model": "roberta-large-mnli",
//!  "inputs": [{"first": "...", "second": "..."}], "top_k": null}
//! ```
//!
//! `mlm` inputs are `{"sequence": "..."}` and carry `top_k`. The response is
//! `{"normalized": bool, "results": [...]}` with one result per input, in
//! request order: `{"entailment", "neutral", "contradiction"}` for nli,
//! `{"is_next"}` for nsp, and a ranked list of `{"token", "score"}` for mlm.
//! A server exposing a two-class entailment head reports `neutral: 0`.
//!
//! [`handle_request`] implements the server side over any [`Scorer`], which
//! is enough to stand up a sidecar or a test double.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    check_ranking, Formulation, MaskPrediction, NliScores, NspScore, Scored, Scorer, ScorerError,
    SentencePair,
};

pub const SCORE_PATH: &str = "/v1/score";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Nli,
    Nsp,
    Mlm,
}

impl From<Formulation> for Task {
    fn from(f: Formulation) -> Self {
        match f {
            Formulation::Nli => Task::Nli,
            Formulation::Nsp => Task::Nsp,
            Formulation::Mlm => Task::Mlm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireInput {
    Pair { first: String, second: String },
    Sequence { sequence: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub task: Task,
    pub model: String,
    pub inputs: Vec<WireInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
}

impl ScoreRequest {
    pub fn pairs(task: Task, model: &str, batch: &[SentencePair]) -> Self {
        Self {
            task,
            model: model.to_string(),
            inputs: batch
                .iter()
                .map(|p| WireInput::Pair {
                    first: p.first.clone(),
                    second: p.second.clone(),
                })
                .collect(),
            top_k: None,
        }
    }

    pub fn mask(model: &str, sequence: &str, k: usize) -> Self {
        Self {
            task: Task::Mlm,
            model: model.to_string(),
            inputs: vec![WireInput::Sequence {
                sequence: sequence.to_string(),
            }],
            top_k: Some(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub normalized: bool,
    pub results: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireNli {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireNsp {
    pub is_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireToken {
    pub token: String,
    pub score: f64,
}

fn parse_envelope(body: &str, expected: usize) -> Result<ScoreResponse, ScorerError> {
    let response: ScoreResponse = serde_json::from_str(body)
        .map_err(|e| ScorerError::protocol(format!("invalid response JSON: {e}"), body))?;
    if response.results.len() != expected {
        return Err(ScorerError::protocol(
            format!(
                "expected {expected} result(s), got {}",
                response.results.len()
            ),
            body,
        ));
    }
    Ok(response)
}

fn typed<T: DeserializeOwned>(value: serde_json::Value, body: &str) -> Result<T, ScorerError> {
    serde_json::from_value(value)
        .map_err(|e| ScorerError::protocol(format!("unexpected result shape: {e}"), body))
}

fn finite(values: &[f64], body: &str) -> Result<(), ScorerError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ScorerError::protocol("non-finite score", body))
    }
}

pub fn parse_nli_response(body: &str, expected: usize) -> Result<Scored<NliScores>, ScorerError> {
    let response = parse_envelope(body, expected)?;
    let mut results = Vec::with_capacity(expected);
    for value in response.results {
        let r: WireNli = typed(value, body)?;
        finite(&[r.entailment, r.neutral, r.contradiction], body)?;
        let scores = NliScores {
            entailment: r.entailment,
            neutral: r.neutral,
            contradiction: r.contradiction,
        };
        if response.normalized && !scores.is_distribution() {
            return Err(ScorerError::protocol(
                "normalized entailment scores do not form a distribution",
                body,
            ));
        }
        results.push(scores);
    }
    Ok(Scored {
        normalized: response.normalized,
        results,
    })
}

pub fn parse_nsp_response(body: &str, expected: usize) -> Result<Scored<NspScore>, ScorerError> {
    let response = parse_envelope(body, expected)?;
    let mut results = Vec::with_capacity(expected);
    for value in response.results {
        let r: WireNsp = typed(value, body)?;
        finite(&[r.is_next], body)?;
        if response.normalized && !(0.0..=1.0).contains(&r.is_next) {
            return Err(ScorerError::protocol("is_next outside [0, 1]", body));
        }
        results.push(NspScore { is_next: r.is_next });
    }
    Ok(Scored {
        normalized: response.normalized,
        results,
    })
}

/// Parses a single-sequence mlm response into ranked predictions.
pub fn parse_mlm_response(body: &str, k: usize) -> Result<Scored<MaskPrediction>, ScorerError> {
    let mut response = parse_envelope(body, 1)?;
    let tokens: Vec<WireToken> = typed(response.results.remove(0), body)?;
    if tokens.len() > k {
        return Err(ScorerError::protocol(
            format!("asked for {k} predictions, got {}", tokens.len()),
            body,
        ));
    }
    let results: Vec<MaskPrediction> = tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| MaskPrediction {
            token: t.token,
            score: t.score,
            rank: i + 1,
        })
        .collect();
    finite(&results.iter().map(|p| p.score).collect::<Vec<_>>(), body)?;
    if !check_ranking(&results) {
        return Err(ScorerError::protocol(
            "mask predictions are not sorted by descending score",
            body,
        ));
    }
    Ok(Scored {
        normalized: response.normalized,
        results,
    })
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
}

fn error_response(status: u16, message: &str) -> (u16, String) {
    let body = serde_json::to_string(&ErrorBody { error: message }).unwrap_or_default();
    (status, body)
}

fn to_pairs(inputs: Vec<WireInput>) -> Option<Vec<SentencePair>> {
    inputs
        .into_iter()
        .map(|i| match i {
            WireInput::Pair { first, second } => Some(SentencePair { first, second }),
            WireInput::Sequence { .. } => None,
        })
        .collect()
}

fn scorer_failure(e: ScorerError) -> (u16, String) {
    let status = match e {
        ScorerError::InvalidInput(_) | ScorerError::EmptyBatch | ScorerError::Unsupported { .. } => 422,
        ScorerError::Backend { status: None, .. } => 422,
        ScorerError::Backend {
            status: Some(s), ..
        } => s,
        _ => 502,
    };
    let message = match &e {
        ScorerError::Backend { message, .. } => message.clone(),
        other => other.to_string(),
    };
    error_response(status, &message)
}

fn ok<T: Serialize>(normalized: bool, results: Vec<T>) -> (u16, String) {
    let response = ScoreResponse {
        normalized,
        results: results
            .into_iter()
            .map(|r| serde_json::to_value(r).expect("serializable result"))
            .collect(),
    };
    (200, serde_json::to_string(&response).expect("serializable response"))
}

/// Server side of the protocol: answers a raw request body with
/// `(http status, response body)`.
pub fn handle_request<S: Scorer + ?Sized>(scorer: &S, body: &str) -> (u16, String) {
    let request: ScoreRequest = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return error_response(400, &format!("invalid request: {e}")),
    };
    let formulation = match request.task {
        Task::Nli => Formulation::Nli,
        Task::Nsp => Formulation::Nsp,
        Task::Mlm => Formulation::Mlm,
    };
    if let Err(e) = scorer.ensure_supports(formulation) {
        return scorer_failure(e);
    }
    match request.task {
        Task::Nli | Task::Nsp => {
            let Some(pairs) = to_pairs(request.inputs) else {
                return error_response(400, "nli/nsp inputs must be {first, second} pairs");
            };
            if request.task == Task::Nli {
                match scorer.score_nli(&pairs) {
                    Ok(s) => ok(
                        s.normalized,
                        s.results
                            .into_iter()
                            .map(|r| WireNli {
                                entailment: r.entailment,
                                neutral: r.neutral,
                                contradiction: r.contradiction,
                            })
                            .collect(),
                    ),
                    Err(e) => scorer_failure(e),
                }
            } else {
                match scorer.score_nsp(&pairs) {
                    Ok(s) => ok(
                        s.normalized,
                        s.results
                            .into_iter()
                            .map(|r| WireNsp { is_next: r.is_next })
                            .collect(),
                    ),
                    Err(e) => scorer_failure(e),
                }
            }
        }
        Task::Mlm => {
            let Some(k) = request.top_k else {
                return error_response(400, "mlm requests need top_k");
            };
            let mut normalized = true;
            let mut results = Vec::with_capacity(request.inputs.len());
            for input in request.inputs {
                let WireInput::Sequence { sequence } = input else {
                    return error_response(400, "mlm inputs must be {sequence} objects");
                };
                match scorer.fill_mask(&sequence, k) {
                    Ok(s) => {
                        normalized &= s.normalized;
                        results.push(
                            s.results
                                .into_iter()
                                .map(|p| WireToken {
                                    token: p.token,
                                    score: p.score,
                                })
                                .collect::<Vec<_>>(),
                        );
                    }
                    Err(e) => return scorer_failure(e),
                }
            }
            ok(normalized, results)
        }
    }
}
