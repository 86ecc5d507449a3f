use std::collections::BTreeSet;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};

use super::wire::{self, ScoreRequest, Task};
use super::{
    check_mask_request, BackendDescriptor, BackendKind, Formulation, MaskPrediction, NliScores,
    NspScore, Scored, Scorer, ScorerError, SentencePair,
};

pub const ENV_BACKEND_URL: &str = "GLOSSDOM_BACKEND_URL";
pub const ENV_BACKEND_TIMEOUT_MS: &str = "GLOSSDOM_BACKEND_TIMEOUT_MS";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Server root, e.g. `http://127.0.0.1:8080`; the score path is appended.
    pub base_url: String,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_in_flight: usize,
    /// Inputs per HTTP request; larger batches are split and sent concurrently.
    pub max_batch_size: usize,
    pub supported: BTreeSet<Formulation>,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            initial_backoff: Duration::from_millis(250),
            max_in_flight: 4,
            max_batch_size: 64,
            supported: [Formulation::Mlm, Formulation::Nsp, Formulation::Nli]
                .into_iter()
                .collect(),
        }
    }

    /// Reads `GLOSSDOM_BACKEND_URL` and `GLOSSDOM_BACKEND_TIMEOUT_MS`.
    /// Returns `None` when no URL is set.
    pub fn from_env(model: impl Into<String>) -> Result<Option<Self>, ScorerError> {
        let Ok(url) = std::env::var(ENV_BACKEND_URL) else {
            return Ok(None);
        };
        let mut config = Self::new(url, model);
        if let Ok(ms) = std::env::var(ENV_BACKEND_TIMEOUT_MS) {
            let ms: u64 = ms.trim().parse().map_err(|_| {
                ScorerError::InvalidInput(format!("{ENV_BACKEND_TIMEOUT_MS}: not an integer: {ms}"))
            })?;
            config.timeout = Duration::from_millis(ms);
        }
        Ok(Some(config))
    }

    fn endpoint(&self) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), wire::SCORE_PATH)
    }
}

/// Counting semaphore bounding concurrent HTTP requests.
#[derive(Debug)]
struct InFlightGate {
    available: Mutex<usize>,
    released: Condvar,
}

struct Permit<'a>(&'a InFlightGate);

impl InFlightGate {
    fn new(capacity: usize) -> Self {
        Self {
            available: Mutex::new(capacity.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *available == 0 {
            available = self
                .released
                .wait(available)
                .unwrap_or_else(|e| e.into_inner());
        }
        *available -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut available = self.0.available.lock().unwrap_or_else(|e| e.into_inner());
        *available += 1;
        self.0.released.notify_one();
    }
}

/// HTTP client for the `/v1/score` protocol, with bounded retries,
/// exponential backoff and an in-flight request cap.
#[derive(Debug)]
pub struct RemoteScorer {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    gate: InFlightGate,
}

impl RemoteScorer {
    pub fn new(config: RemoteConfig) -> Result<Self, ScorerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ScorerError::InvalidInput(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            gate: InFlightGate::new(config.max_in_flight),
            client,
            config,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// Sends one request, retrying connection failures, timeouts, 429 and 5xx.
    fn post(&self, request: &ScoreRequest) -> Result<String, ScorerError> {
        let _permit = self.gate.acquire();
        let url = self.config.endpoint();
        let mut attempt: u32 = 0;
        loop {
            attempt += 1;
            let retryable: String = match self.client.post(&url).json(request).send() {
                Ok(response) => {
                    let status = response.status();
                    let body = response.text().map_err(|e| ScorerError::Transport {
                        attempts: attempt,
                        message: format!("reading response body: {e}"),
                    })?;
                    if status.is_success() {
                        return Ok(body);
                    }
                    let message = error_message(&body);
                    if !(status.is_server_error() || status.as_u16() == 429)
                        || attempt > self.config.max_retries
                    {
                        return Err(ScorerError::Backend {
                            status: Some(status.as_u16()),
                            message,
                        });
                    }
                    format!("HTTP {status}: {message}")
                }
                Err(e) => {
                    if attempt > self.config.max_retries {
                        return Err(ScorerError::Transport {
                            attempts: attempt,
                            message: e.to_string(),
                        });
                    }
                    e.to_string()
                }
            };
            let backoff = self.config.initial_backoff * 2u32.saturating_pow(attempt - 1);
            warn!("score request attempt {attempt} failed ({retryable}); retrying in {backoff:?}");
            thread::sleep(backoff);
        }
    }

    fn score_pairs<T: Send>(
        &self,
        formulation: Formulation,
        batch: &[SentencePair],
        parse: fn(&str, usize) -> Result<Scored<T>, ScorerError>,
    ) -> Result<Scored<T>, ScorerError> {
        self.ensure_supports(formulation)?;
        if batch.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        let task = Task::from(formulation);
        let chunks: Vec<&[SentencePair]> = batch.chunks(self.config.max_batch_size.max(1)).collect();
        debug!("{formulation}: {} inputs in {} request(s)", batch.len(), chunks.len());

        let run = |chunk: &[SentencePair]| -> Result<Scored<T>, ScorerError> {
            let request = ScoreRequest::pairs(task, &self.config.model, chunk);
            let body = self.post(&request)?;
            parse(&body, chunk.len())
        };
        let parts: Vec<Result<Scored<T>, ScorerError>> = if chunks.len() == 1 {
            vec![run(chunks[0])]
        } else {
            thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .iter()
                    .map(|chunk| scope.spawn(move || run(chunk)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("score worker panicked"))
                    .collect()
            })
        };

        let mut normalized = None;
        let mut results = Vec::with_capacity(batch.len());
        for part in parts {
            let part = part?;
            if *normalized.get_or_insert(part.normalized) != part.normalized {
                return Err(ScorerError::Protocol {
                    message: "responses disagree on `normalized` across one batch".into(),
                    excerpt: String::new(),
                });
            }
            results.extend(part.results);
        }
        Ok(Scored {
            normalized: normalized.unwrap_or(true),
            results,
        })
    }
}

fn error_message(body: &str) -> String {
    #[derive(serde::Deserialize)]
    struct ErrorBody {
        error: String,
    }
    serde_json::from_str::<ErrorBody>(body)
        .ok()
        .map(|b| b.error)
        .filter(|e| !e.is_empty())
        .unwrap_or_else(|| super::excerpt(body))
}

impl Scorer for RemoteScorer {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: BackendKind::Remote,
            supported_formulations: self.config.supported.clone(),
            model_name: self.config.model.clone(),
        }
    }

    fn max_in_flight(&self) -> usize {
        self.config.max_in_flight.max(1)
    }

    fn score_nli(&self, batch: &[SentencePair]) -> Result<Scored<NliScores>, ScorerError> {
        self.score_pairs(Formulation::Nli, batch, wire::parse_nli_response)
    }

    fn score_nsp(&self, batch: &[SentencePair]) -> Result<Scored<NspScore>, ScorerError> {
        self.score_pairs(Formulation::Nsp, batch, wire::parse_nsp_response)
    }

    fn fill_mask(&self, sequence: &str, k: usize) -> Result<Scored<MaskPrediction>, ScorerError> {
        self.ensure_supports(Formulation::Mlm)?;
        check_mask_request(sequence, k)?;
        let body = self.post(&ScoreRequest::mask(&self.config.model, sequence, k))?;
        wire::parse_mlm_response(&body, k)
    }
}
