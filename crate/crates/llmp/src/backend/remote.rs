//! Client for a remote completion service.
//!
//! Wire protocol: `POST {base}/v1/completions` with a JSON body
//! `{"prompt", "max_tokens", "temperature", "top_p", "stop", "echo",
//! "logprobs", "seed"}`, answered by `{"text", "tokens", "token_logprobs",
//! "top_logprobs"}`. Scoring works by echoing the full text and reading the
//! per-position top log-probabilities, which must cover the whole numeric
//! vocabulary; servers that cannot do that yield `UnsupportedScoring`.

use super::{mask_and_renormalize, BackendError, ModelBackend, SamplingParams, ScoredToken, TokenScores};
use crate::numcodec::NumericVocab;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

pub const ENV_URL: &str = "LLMP_BACKEND_URL";
pub const ENV_TOKEN: &str = "LLMP_BACKEND_TOKEN";

#[derive(Debug, Serialize)]
pub(crate) struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub stop: Vec<String>,
    pub echo: bool,
    pub logprobs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize, Serialize)]
pub(crate) struct CompletionResponse {
    pub text: String,
    #[serde(default)]
    pub tokens: Vec<String>,
    #[serde(default)]
    pub token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    pub top_logprobs: Vec<Option<BTreeMap<String, f64>>>,
}

/// Counting semaphore bounding concurrent in-flight requests.
struct InFlightCap {
    state: Mutex<usize>,
    cv: Condvar,
    cap: usize,
}

impl InFlightCap {
    fn new(cap: usize) -> Self {
        InFlightCap {
            state: Mutex::new(0),
            cv: Condvar::new(),
            cap: cap.max(1),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.state.lock().unwrap();
        while *n >= self.cap {
            n = self.cv.wait(n).unwrap();
        }
        *n += 1;
        InFlightGuard { cap: self }
    }
}

struct InFlightGuard<'a> {
    cap: &'a InFlightCap,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.cap.state.lock().unwrap();
        *n -= 1;
        self.cap.cv.notify_one();
    }
}

pub struct RemoteBackend {
    agent: ureq::Agent,
    base_url: String,
    auth: Option<(String, String)>,
    retries: u32,
    in_flight: InFlightCap,
}

impl RemoteBackend {
    pub fn new(base_url: &str) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build();
        RemoteBackend {
            agent: config.into(),
            base_url: base_url.trim_end_matches('/').to_string(),
            auth: None,
            retries: 3,
            in_flight: InFlightCap::new(10),
        }
    }

    /// Reads `LLMP_BACKEND_URL` and, when set, `LLMP_BACKEND_TOKEN`.
    pub fn from_env() -> Result<Self, BackendError> {
        let url = std::env::var(ENV_URL)
            .map_err(|_| BackendError::Unavailable(format!("{} is not set", ENV_URL)))?;
        let mut backend = RemoteBackend::new(&url);
        if let Ok(token) = std::env::var(ENV_TOKEN) {
            backend = backend.with_auth("Authorization", &format!("Bearer {}", token));
        }
        Ok(backend)
    }

    /// Sets the auth header; the header name is configurable because hosted
    /// services disagree on it.
    pub fn with_auth(mut self, header: &str, value: &str) -> Self {
        self.auth = Some((header.to_string(), value.to_string()));
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn with_in_flight_cap(mut self, cap: usize) -> Self {
        self.in_flight = InFlightCap::new(cap);
        self
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/completions", self.base_url)
    }

    /// Sends one request, retrying transient failures. A retried call
    /// produces exactly one response; failed attempts are discarded, never
    /// accumulated.
    fn send(&self, request: &CompletionRequest<'_>) -> Result<CompletionResponse, BackendError> {
        let _permit = self.in_flight.acquire();
        let mut last_err = BackendError::Unavailable("no attempts made".into());
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(50 << (attempt - 1).min(4)));
            }
            let mut req = self.agent.post(&self.endpoint());
            if let Some((name, value)) = &self.auth {
                req = req.header(name.as_str(), value.as_str());
            }
            match req.send_json(request) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (500..600).contains(&status) {
                        last_err =
                            BackendError::Unavailable(format!("server returned {}", status));
                        continue;
                    }
                    if status != 200 {
                        return Err(BackendError::Protocol(format!(
                            "server returned {}",
                            status
                        )));
                    }
                    return resp
                        .body_mut()
                        .read_json::<CompletionResponse>()
                        .map_err(|e| BackendError::Protocol(e.to_string()));
                }
                Err(ureq::Error::Timeout(_)) => {
                    last_err = BackendError::Timeout;
                }
                Err(e) => {
                    last_err = BackendError::Unavailable(e.to_string());
                }
            }
        }
        Err(last_err)
    }
}

impl ModelBackend for RemoteBackend {
    fn complete(
        &self,
        prompt: &str,
        params: &SamplingParams,
        seed: u64,
    ) -> Result<String, BackendError> {
        let request = CompletionRequest {
            prompt,
            max_tokens: params.max_tokens,
            temperature: params.temperature,
            top_p: params.top_p,
            stop: params.stop.iter().cloned().collect(),
            echo: false,
            logprobs: 0,
            seed: Some(seed),
        };
        Ok(self.send(&request)?.text)
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &[char],
        vocab: &NumericVocab,
    ) -> Result<TokenScores, BackendError> {
        let full_text: String = {
            let mut s = prompt.to_string();
            s.extend(continuation.iter());
            s
        };
        let top_k = vocab.tokens().len() + 8;
        let request = CompletionRequest {
            prompt: &full_text,
            max_tokens: 0,
            temperature: 1.0,
            top_p: 1.0,
            stop: Vec::new(),
            echo: true,
            logprobs: top_k,
            seed: None,
        };
        let resp = self.send(&request)?;

        if resp.tokens.len() < continuation.len() {
            return Err(BackendError::UnsupportedScoring);
        }
        let offset = resp.tokens.len() - continuation.len();
        let mut steps = Vec::with_capacity(continuation.len());
        for (i, &token) in continuation.iter().enumerate() {
            let echoed = &resp.tokens[offset + i];
            if echoed.chars().count() != 1 || echoed.chars().next() != Some(token) {
                // server tokenization does not split per character
                return Err(BackendError::UnsupportedScoring);
            }
            let top = resp
                .top_logprobs
                .get(offset + i)
                .and_then(|t| t.as_ref())
                .ok_or(BackendError::UnsupportedScoring)?;
            let mut raw: Vec<(char, f64)> = Vec::with_capacity(top.len());
            for (tok, lp) in top {
                if tok.chars().count() == 1 {
                    raw.push((tok.chars().next().unwrap(), lp.exp()));
                }
            }
            // A K-saturated report may have cut off vocabulary tokens, so
            // their probabilities are unknowable. A shorter report exhausts
            // the server's support and missing tokens are genuinely zero.
            if top.len() >= top_k {
                for &v in vocab.tokens() {
                    if !raw.iter().any(|(c, _)| *c == v) {
                        return Err(BackendError::UnsupportedScoring);
                    }
                }
            }
            let dist = mask_and_renormalize(&raw, vocab);
            let p = dist
                .iter()
                .find(|(c, _)| *c == token)
                .map(|(_, p)| *p)
                .unwrap_or(0.0);
            steps.push(ScoredToken {
                token,
                logprob: p.ln(),
                dist,
            });
        }
        Ok(TokenScores { steps })
    }

    fn identity(&self) -> String {
        format!("remote:{}", self.base_url)
    }
}
