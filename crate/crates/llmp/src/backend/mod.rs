//! Token-level model interface: sample a continuation, or score a given
//! continuation character-by-character with log-probabilities masked and
//! renormalized onto the numeric vocabulary.
//!
//! Ships deterministic mock models for desk-scale verification and a client
//! for a remote completion service, plus a local stub server speaking the
//! same wire protocol over the mocks.

mod mock;
mod remote;
mod stub;

pub use mock::{CheatFunctionBackend, TableLM, UniformDigitLM};
pub use remote::{RemoteBackend, ENV_TOKEN, ENV_URL};
pub use stub::StubServer;

use crate::numcodec::NumericVocab;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("backend request timed out")]
    Timeout,
    #[error("backend cannot provide the per-token probabilities required for scoring")]
    UnsupportedScoring,
    #[error("malformed backend response: {0}")]
    Protocol(String),
}

/// Generation-time sampling controls. The defaults (`temperature = 1`,
/// `top_p = 1`) leave the model's conditional distribution untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    /// Generation halts when this string has just been produced; it is not
    /// included in the returned text.
    pub stop: Option<String>,
    pub max_tokens: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 1.0,
            top_p: 1.0,
            stop: Some("\n".to_string()),
            max_tokens: 16,
        }
    }
}

impl SamplingParams {
    pub fn with_stop(stop: Option<String>) -> Self {
        SamplingParams {
            stop,
            ..Default::default()
        }
    }
}

/// One scored position: the continuation token, its masked log-probability,
/// and the full masked distribution at that position.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredToken {
    pub token: char,
    pub logprob: f64,
    pub dist: Vec<(char, f64)>,
}

/// Per-position masked log-probabilities for a scored continuation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenScores {
    pub steps: Vec<ScoredToken>,
}

impl TokenScores {
    /// Sum of the continuation tokens' log-probabilities: the log bin mass.
    pub fn total_logprob(&self) -> f64 {
        self.steps.iter().map(|s| s.logprob).sum()
    }
}

/// Uniform token-level interface over local mocks and remote services.
///
/// Implementations must be safe for concurrent calls; any sampling state is
/// derived from the per-call seed.
pub trait ModelBackend: Send + Sync {
    /// Samples a continuation of `prompt`, stopping at `params.stop` or
    /// after `params.max_tokens` tokens. Deterministic in `seed` for mocks.
    fn complete(
        &self,
        prompt: &str,
        params: &SamplingParams,
        seed: u64,
    ) -> Result<String, BackendError>;

    /// Scores `continuation` token-by-token. Position `t` conditions on
    /// `prompt` plus `continuation[..t]`; each position's distribution is
    /// masked to `vocab` and renormalized.
    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &[char],
        vocab: &NumericVocab,
    ) -> Result<TokenScores, BackendError>;

    /// Short identifier echoed into run reports.
    fn identity(&self) -> String;
}

impl<T: ModelBackend + ?Sized> ModelBackend for std::sync::Arc<T> {
    fn complete(
        &self,
        prompt: &str,
        params: &SamplingParams,
        seed: u64,
    ) -> Result<String, BackendError> {
        (**self).complete(prompt, params, seed)
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &[char],
        vocab: &NumericVocab,
    ) -> Result<TokenScores, BackendError> {
        (**self).score_continuation(prompt, continuation, vocab)
    }

    fn identity(&self) -> String {
        (**self).identity()
    }
}

/// Raw next-token conditionals of a character-level model. The probabilities
/// are the model's own (unmasked) distribution, normalized over its alphabet.
pub trait TokenConditional {
    fn conditional(&self, context: &str) -> Result<Vec<(char, f64)>, BackendError>;
}

/// Masks a raw distribution to `vocab` and renormalizes.
///
/// This is the limit of driving non-vocabulary logits to -100: when nothing
/// in the vocabulary has support, all masked logits tie, which recovers the
/// uniform distribution over the vocabulary.
pub(crate) fn mask_and_renormalize(
    raw: &[(char, f64)],
    vocab: &NumericVocab,
) -> Vec<(char, f64)> {
    let mut masked: Vec<(char, f64)> = vocab
        .tokens()
        .iter()
        .map(|&t| {
            let p = raw
                .iter()
                .find(|(c, _)| *c == t)
                .map(|(_, p)| *p)
                .unwrap_or(0.0);
            (t, p)
        })
        .collect();
    let total: f64 = masked.iter().map(|(_, p)| p).sum();
    if total > 0.0 {
        for (_, p) in masked.iter_mut() {
            *p /= total;
        }
    } else {
        let u = 1.0 / masked.len() as f64;
        for (_, p) in masked.iter_mut() {
            *p = u;
        }
    }
    masked
}

/// Applies temperature then nucleus truncation to a normalized distribution.
pub(crate) fn adjust_for_sampling(
    dist: &[(char, f64)],
    temperature: f64,
    top_p: f64,
) -> Vec<(char, f64)> {
    let mut adjusted: Vec<(char, f64)> = if (temperature - 1.0).abs() < f64::EPSILON {
        dist.to_vec()
    } else {
        let inv_t = 1.0 / temperature;
        let powed: Vec<(char, f64)> = dist.iter().map(|(c, p)| (*c, p.powf(inv_t))).collect();
        let z: f64 = powed.iter().map(|(_, p)| p).sum();
        powed.into_iter().map(|(c, p)| (c, p / z)).collect()
    };
    if top_p < 1.0 {
        // deterministic order: probability descending, character ascending
        adjusted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut cum = 0.0;
        let mut keep = 0;
        for (i, (_, p)) in adjusted.iter().enumerate() {
            cum += p;
            keep = i + 1;
            if cum >= top_p {
                break;
            }
        }
        adjusted.truncate(keep);
        let z: f64 = adjusted.iter().map(|(_, p)| p).sum();
        for (_, p) in adjusted.iter_mut() {
            *p /= z;
        }
    }
    adjusted
}

pub(crate) fn sample_categorical(dist: &[(char, f64)], rng: &mut ChaCha20Rng) -> char {
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (c, p) in dist {
        cum += p;
        if u < cum {
            return *c;
        }
    }
    dist.last().map(|(c, _)| *c).unwrap_or('\n')
}

/// Shared completion loop over raw conditionals.
pub(crate) fn complete_from_conditionals<M: TokenConditional + ?Sized>(
    model: &M,
    prompt: &str,
    params: &SamplingParams,
    seed: u64,
) -> Result<String, BackendError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut text = prompt.to_string();
    let mut out = String::new();
    for _ in 0..params.max_tokens {
        let raw = model.conditional(&text)?;
        let dist = adjust_for_sampling(&raw, params.temperature, params.top_p);
        let c = sample_categorical(&dist, &mut rng);
        out.push(c);
        text.push(c);
        if let Some(stop) = &params.stop {
            if !stop.is_empty() && out.ends_with(stop.as_str()) {
                out.truncate(out.len() - stop.len());
                return Ok(out);
            }
        }
    }
    Ok(out)
}

/// Shared scoring loop over raw conditionals.
pub(crate) fn score_from_conditionals<M: TokenConditional + ?Sized>(
    model: &M,
    prompt: &str,
    continuation: &[char],
    vocab: &NumericVocab,
) -> Result<TokenScores, BackendError> {
    let mut text = prompt.to_string();
    let mut steps = Vec::with_capacity(continuation.len());
    for &token in continuation {
        let raw = model.conditional(&text)?;
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
        text.push(token);
    }
    Ok(TokenScores { steps })
}
