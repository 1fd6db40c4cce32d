//! Deterministic mock models: a context-free weighted digit emitter, a
//! table-driven conditional model, and a backend that answers prompts with a
//! known function's value. These substitute for GPU-hosted models in tests.

use super::{
    complete_from_conditionals, score_from_conditionals, BackendError, ModelBackend,
    SamplingParams, ScoredToken, TokenConditional, TokenScores,
};
use crate::numcodec::{serialize_value, NumericFormat, NumericVocab};
use crate::prompting::PairFormat;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::sync::Arc;

fn normalize(weights: Vec<(char, f64)>) -> Vec<(char, f64)> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    weights.into_iter().map(|(c, w)| (c, w / total)).collect()
}

/// Context-free model over the numeric alphabet. Every position's conditional
/// distribution is the same weighted categorical, which makes closed-form
/// enumeration of string probabilities trivial.
#[derive(Debug, Clone)]
pub struct UniformDigitLM {
    weights: Vec<(char, f64)>,
}

impl UniformDigitLM {
    /// Uniform over the 13-token vocabulary: digits, point, minus and the
    /// `\n` terminal.
    pub fn uniform() -> Self {
        let mut weights: Vec<(char, f64)> = ('0'..='9').map(|c| (c, 1.0)).collect();
        weights.push(('.', 1.0));
        weights.push(('-', 1.0));
        weights.push(('\n', 1.0));
        UniformDigitLM {
            weights: normalize(weights),
        }
    }

    pub fn with_weights(weights: Vec<(char, f64)>) -> Self {
        assert!(!weights.is_empty(), "empty weight table");
        assert!(weights.iter().all(|(_, w)| *w >= 0.0));
        UniformDigitLM {
            weights: normalize(weights),
        }
    }

    pub fn weights(&self) -> &[(char, f64)] {
        &self.weights
    }
}

impl TokenConditional for UniformDigitLM {
    fn conditional(&self, _context: &str) -> Result<Vec<(char, f64)>, BackendError> {
        Ok(self.weights.clone())
    }
}

impl ModelBackend for UniformDigitLM {
    fn complete(
        &self,
        prompt: &str,
        params: &SamplingParams,
        seed: u64,
    ) -> Result<String, BackendError> {
        complete_from_conditionals(self, prompt, params, seed)
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &[char],
        vocab: &NumericVocab,
    ) -> Result<TokenScores, BackendError> {
        score_from_conditionals(self, prompt, continuation, vocab)
    }

    fn identity(&self) -> String {
        "mock:uniform".to_string()
    }
}

/// Conditional model defined by an explicit suffix table: the longest table
/// key that is a suffix of the current text selects the next-token
/// distribution, with an optional default fallback.
#[derive(Debug, Clone, Default)]
pub struct TableLM {
    entries: Vec<(String, Vec<(char, f64)>)>,
    default: Option<Vec<(char, f64)>>,
}

impl TableLM {
    pub fn new() -> Self {
        TableLM::default()
    }

    pub fn entry(mut self, suffix: &str, weights: Vec<(char, f64)>) -> Self {
        self.entries.push((suffix.to_string(), normalize(weights)));
        self
    }

    pub fn default_dist(mut self, weights: Vec<(char, f64)>) -> Self {
        self.default = Some(normalize(weights));
        self
    }

    /// Parses a table from its JSON spec, e.g.
    /// `{"entries":[{"suffix":", ","dist":{"2":1.0}}],"default":{"\n":1.0}}`.
    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let spec: TableSpec =
            serde_json::from_str(text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        spec.try_into()
    }
}

#[derive(Debug, Deserialize)]
struct TableSpec {
    entries: Vec<TableEntrySpec>,
    #[serde(default)]
    default: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Deserialize)]
struct TableEntrySpec {
    suffix: String,
    dist: BTreeMap<String, f64>,
}

fn dist_from_map(map: BTreeMap<String, f64>) -> Result<Vec<(char, f64)>, BackendError> {
    let mut weights = Vec::with_capacity(map.len());
    for (k, w) in map {
        let mut chars = k.chars();
        let c = chars
            .next()
            .ok_or_else(|| BackendError::Protocol("empty token in table spec".into()))?;
        if chars.next().is_some() {
            return Err(BackendError::Protocol(format!(
                "table token {:?} is not a single character",
                k
            )));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(BackendError::Protocol(format!(
                "non-finite or negative weight for token {:?}",
                k
            )));
        }
        weights.push((c, w));
    }
    if weights.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
        return Err(BackendError::Protocol(
            "table distribution has zero total weight".into(),
        ));
    }
    Ok(normalize(weights))
}

impl TryFrom<TableSpec> for TableLM {
    type Error = BackendError;

    fn try_from(spec: TableSpec) -> Result<Self, BackendError> {
        let mut table = TableLM::new();
        for entry in spec.entries {
            let dist = dist_from_map(entry.dist)?;
            table.entries.push((entry.suffix, dist));
        }
        if let Some(map) = spec.default {
            table.default = Some(dist_from_map(map)?);
        }
        Ok(table)
    }
}

impl TokenConditional for TableLM {
    fn conditional(&self, context: &str) -> Result<Vec<(char, f64)>, BackendError> {
        let mut best: Option<&(String, Vec<(char, f64)>)> = None;
        for entry in &self.entries {
            if context.ends_with(entry.0.as_str()) {
                match best {
                    Some(b) if b.0.len() >= entry.0.len() => {}
                    _ => best = Some(entry),
                }
            }
        }
        if let Some((_, dist)) = best {
            return Ok(dist.clone());
        }
        self.default
            .clone()
            .ok_or_else(|| BackendError::Unavailable("no table entry matches context".into()))
    }
}

impl ModelBackend for TableLM {
    fn complete(
        &self,
        prompt: &str,
        params: &SamplingParams,
        seed: u64,
    ) -> Result<String, BackendError> {
        complete_from_conditionals(self, prompt, params, seed)
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &[char],
        vocab: &NumericVocab,
    ) -> Result<TokenScores, BackendError> {
        score_from_conditionals(self, prompt, continuation, vocab)
    }

    fn identity(&self) -> String {
        "mock:table".to_string()
    }
}

/// Smoothing mass given to unexpected tokens when scoring with the cheat
/// backend, keeping mismatched continuations at a finite log-probability.
const CHEAT_EPSILON: f64 = 1e-12;

/// Backend that "knows" the target function: a prompt ending at a generation
/// point for input `x` is answered with `serialize(f(x) + noise)`.
///
/// Scoring ignores the noise and places an epsilon-smoothed point mass on the
/// noiseless serialized value. The comma format (`_,_`) is unsupported, since
/// without a pair break the generation point cannot be recovered from the
/// prompt text.
#[derive(Clone)]
pub struct CheatFunctionBackend {
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    noise: f64,
    pair_format: PairFormat,
    format: NumericFormat,
    label: String,
}

impl CheatFunctionBackend {
    pub fn new(
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        noise: f64,
        pair_format: PairFormat,
        format: NumericFormat,
    ) -> Self {
        CheatFunctionBackend {
            f,
            noise,
            pair_format,
            format,
            label: "mock:cheat".to_string(),
        }
    }

    pub fn noiseless(
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        pair_format: PairFormat,
        format: NumericFormat,
    ) -> Self {
        Self::new(f, 0.0, pair_format, format)
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    /// Recovers the generation-point input vector from the prompt tail.
    fn extract_key(&self, prompt: &str) -> Result<Vec<f64>, BackendError> {
        let pf = self.pair_format;
        let tail = match pf {
            PairFormat::Comma => {
                return Err(BackendError::Unavailable(
                    "cheat backend cannot locate the generation point in the comma format".into(),
                ))
            }
            PairFormat::Paren => prompt.rsplit('(').next().unwrap_or(""),
            PairFormat::XY => prompt.rsplit('x').next().unwrap_or(""),
            _ => prompt.rsplit('\n').next().unwrap_or(""),
        };
        let tail = tail.strip_prefix(pf.x_prefix()).unwrap_or(tail);
        let mut dims = Vec::new();
        for part in tail.split(pf.separator()) {
            if part.is_empty() {
                continue;
            }
            let v: f64 = part.parse().map_err(|_| {
                BackendError::Protocol(format!("unparseable generation point {:?}", tail))
            })?;
            dims.push(v);
        }
        if dims.is_empty() {
            return Err(BackendError::Protocol(format!(
                "no generation point found in prompt tail {:?}",
                tail
            )));
        }
        Ok(dims)
    }

    fn expected_value(&self, prompt: &str) -> Result<f64, BackendError> {
        let key = self.extract_key(prompt)?;
        Ok((self.f)(&key))
    }
}

impl ModelBackend for CheatFunctionBackend {
    fn complete(
        &self,
        prompt: &str,
        _params: &SamplingParams,
        seed: u64,
    ) -> Result<String, BackendError> {
        let mut y = self.expected_value(prompt)?;
        if self.noise > 0.0 {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, self.noise)
                .map_err(|e| BackendError::Protocol(e.to_string()))?;
            y += normal.sample(&mut rng);
        }
        serialize_value(y, &self.format)
            .map(|s| s.into_string())
            .map_err(|e| BackendError::Protocol(e.to_string()))
    }

    fn score_continuation(
        &self,
        prompt: &str,
        continuation: &[char],
        vocab: &NumericVocab,
    ) -> Result<TokenScores, BackendError> {
        let y = self.expected_value(prompt)?;
        let serialized = serialize_value(y, &self.format)
            .map_err(|e| BackendError::Protocol(e.to_string()))?;
        let mut expected: Vec<char> = serialized.as_str().chars().collect();
        if let Some(t) = self.pair_format.terminal() {
            expected.push(t);
        }
        let n = vocab.tokens().len() as f64;
        let mut steps = Vec::with_capacity(continuation.len());
        for (i, &token) in continuation.iter().enumerate() {
            let dist: Vec<(char, f64)> = match expected.get(i) {
                Some(&e) => vocab
                    .tokens()
                    .iter()
                    .map(|&c| {
                        if c == e {
                            (c, 1.0 - CHEAT_EPSILON)
                        } else {
                            (c, CHEAT_EPSILON / (n - 1.0))
                        }
                    })
                    .collect(),
                None => vocab.tokens().iter().map(|&c| (c, 1.0 / n)).collect(),
            };
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
        self.label.clone()
    }
}
