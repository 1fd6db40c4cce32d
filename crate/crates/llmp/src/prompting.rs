//! Prompt construction: serializing observation sets into the exact text fed
//! to a model, with configurable pair format, ordering, free-text prefix,
//! in-context example blocks and affine output scaling.

use crate::numcodec::{serialize_value, NumError, NumericFormat};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Clone)]
pub enum PromptError {
    #[error("distance ordering requires numeric keys")]
    DistanceOnTextKeys,
    #[error("scale factor must be non-zero")]
    ZeroScale,
    #[error("target key kind does not match training keys")]
    KeyKindMismatch,
    #[error("observations mix key kinds or output arities")]
    InconsistentObservations,
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Index of one observation: either a numeric input vector or a free-text
/// feature string such as `"Location: Austin, Texas, Latitude: 30.45738"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservationKey {
    Numeric(Vec<f64>),
    Text(String),
}

impl ObservationKey {
    pub fn scalar(x: f64) -> Self {
        ObservationKey::Numeric(vec![x])
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ObservationKey::Numeric(_))
    }

    fn same_kind(&self, other: &ObservationKey) -> bool {
        self.is_numeric() == other.is_numeric()
    }

    /// Euclidean distance between numeric keys; `None` when either side is
    /// a text key.
    pub fn distance_to_key(&self, other: &ObservationKey) -> Option<f64> {
        self.distance_to(other)
    }

    fn distance_to(&self, other: &ObservationKey) -> Option<f64> {
        match (self, other) {
            (ObservationKey::Numeric(a), ObservationKey::Numeric(b)) => {
                let d = a
                    .iter()
                    .zip(b.iter())
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>();
                Some(d.sqrt())
            }
            _ => None,
        }
    }
}

/// One (input, outputs) pair. Multi-output observations carry several values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub key: ObservationKey,
    pub values: Vec<f64>,
}

impl Observation {
    pub fn new(key: ObservationKey, values: Vec<f64>) -> Self {
        Observation { key, values }
    }

    pub fn scalar(x: f64, y: f64) -> Self {
        Observation {
            key: ObservationKey::scalar(x),
            values: vec![y],
        }
    }
}

/// Observations plus optional free-text context. Missing observations are
/// simply absent; there is no placeholder encoding.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSet {
    pub observations: Vec<Observation>,
    pub text: Option<String>,
}

impl TrainingSet {
    /// Validates that all observations share one key kind and output arity.
    pub fn new(observations: Vec<Observation>, text: Option<String>) -> Result<Self, PromptError> {
        if let Some(first) = observations.first() {
            let arity = first.values.len();
            for obs in &observations {
                if !obs.key.same_kind(&first.key) || obs.values.len() != arity {
                    return Err(PromptError::InconsistentObservations);
                }
            }
        }
        Ok(TrainingSet { observations, text })
    }

    pub fn empty() -> Self {
        TrainingSet::default()
    }

    pub fn output_arity(&self) -> Option<usize> {
        self.observations.first().map(|o| o.values.len())
    }
}

/// The six pair serialization schemes. In the names below the two `_` slots
/// hold the x and y values.
///
/// Each format fixes the intra-pair separator, the inter-pair break and the
/// terminal character scored/stopped on after a value (none when pairs run
/// together with no delimiter after y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairFormat {
    /// `_,_` — comma inside a pair, nothing between pairs.
    Comma,
    /// `x_y_` — letter prefixes separate values and pairs.
    XY,
    /// `_,_\n`
    CommaNewline,
    /// `_, _\n` — the default.
    CommaSpaceNewline,
    /// `(_, _)`
    Paren,
    /// `x=_, y=_\n`
    Labeled,
}

impl PairFormat {
    pub fn x_prefix(&self) -> &'static str {
        match self {
            PairFormat::XY => "x",
            PairFormat::Paren => "(",
            PairFormat::Labeled => "x=",
            _ => "",
        }
    }

    /// Separator between the x and y slots, also used to join the components
    /// of multi-dimensional inputs and multi-output values.
    pub fn separator(&self) -> &'static str {
        match self {
            PairFormat::Comma | PairFormat::CommaNewline => ",",
            PairFormat::XY => "y",
            PairFormat::CommaSpaceNewline | PairFormat::Paren => ", ",
            PairFormat::Labeled => ", y=",
        }
    }

    pub fn y_suffix(&self) -> &'static str {
        match self {
            PairFormat::Paren => ")",
            _ => "",
        }
    }

    pub fn break_str(&self) -> &'static str {
        match self {
            PairFormat::CommaNewline | PairFormat::CommaSpaceNewline | PairFormat::Labeled => "\n",
            _ => "",
        }
    }

    /// The character that marks the end of a generated/scored value: the
    /// first character following the y slot. `Comma` has no delimiter after
    /// y (the next pair starts with a digit), so it has no terminal.
    pub fn terminal(&self) -> Option<char> {
        match self {
            PairFormat::Comma => None,
            PairFormat::XY => Some('x'),
            PairFormat::CommaNewline | PairFormat::CommaSpaceNewline | PairFormat::Labeled => {
                Some('\n')
            }
            PairFormat::Paren => Some(')'),
        }
    }

    /// CLI spelling.
    pub fn name(&self) -> &'static str {
        match self {
            PairFormat::Comma => "comma",
            PairFormat::XY => "xy",
            PairFormat::CommaNewline => "comma-newline",
            PairFormat::CommaSpaceNewline => "comma-space-newline",
            PairFormat::Paren => "paren",
            PairFormat::Labeled => "labeled",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "comma" => Some(PairFormat::Comma),
            "xy" => Some(PairFormat::XY),
            "comma-newline" => Some(PairFormat::CommaNewline),
            "comma-space-newline" => Some(PairFormat::CommaSpaceNewline),
            "paren" => Some(PairFormat::Paren),
            "labeled" => Some(PairFormat::Labeled),
            _ => None,
        }
    }

    pub const ALL: [PairFormat; 6] = [
        PairFormat::Comma,
        PairFormat::XY,
        PairFormat::CommaNewline,
        PairFormat::CommaSpaceNewline,
        PairFormat::Paren,
        PairFormat::Labeled,
    ];
}

impl Default for PairFormat {
    fn default() -> Self {
        PairFormat::CommaSpaceNewline
    }
}

/// Training-point ordering strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ordering {
    /// Ascending by x (lexicographic over dimensions). Text keys keep their
    /// insertion order.
    Sequential,
    /// Seeded permutation, reproducible across runs.
    Random { seed: u64 },
    /// Farthest from the query point first, nearest last.
    Distance,
}

impl Default for Ordering {
    fn default() -> Self {
        Ordering::Distance
    }
}

/// Affine output transform `y' = a*y + b` with its change-of-variables
/// log-density correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub a: f64,
    pub b: f64,
}

impl Affine {
    pub fn new(a: f64, b: f64) -> Result<Self, PromptError> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(PromptError::ZeroScale);
        }
        Ok(Affine { a, b })
    }

    pub fn identity() -> Self {
        Affine { a: 1.0, b: 0.0 }
    }

    pub fn apply(&self, y: f64) -> f64 {
        self.a * y + self.b
    }

    pub fn invert(&self, y_scaled: f64) -> f64 {
        (y_scaled - self.b) / self.a
    }

    /// `ln|a|`, the constant added to a scaled-space log-density to recover
    /// the raw-space log-density: `log p(y) = log p'(y') + ln|a|`.
    pub fn log_density_correction(&self) -> f64 {
        self.a.abs().ln()
    }
}

/// Scales every output value of a training set, leaving keys untouched.
pub fn apply_scale(train: &TrainingSet, transform: &Affine) -> TrainingSet {
    TrainingSet {
        observations: train
            .observations
            .iter()
            .map(|o| Observation {
                key: o.key.clone(),
                values: o.values.iter().map(|y| transform.apply(*y)).collect(),
            })
            .collect(),
        text: train.text.clone(),
    }
}

/// In-context example block: a label line followed by serialized pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleBlock {
    pub label: String,
    pub observations: Vec<Observation>,
}

/// Full prompt-construction configuration.
///
/// `scale` is carried here for experiment plumbing; prompt builders render
/// the data they are given as-is, and the harness scales observations and
/// corrects densities explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub pair_format: PairFormat,
    pub ordering: Ordering,
    pub text_prefix: Option<String>,
    pub example_blocks: Vec<ExampleBlock>,
    pub format: NumericFormat,
    pub scale: Option<Affine>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            pair_format: PairFormat::default(),
            ordering: Ordering::default(),
            text_prefix: None,
            example_blocks: Vec::new(),
            format: NumericFormat::default(),
            scale: None,
        }
    }
}

/// Renders a key. Numeric components drop trailing fractional zeros, so the
/// x side of `(1, 2.53)` serializes as `1` rather than `1.00`.
fn render_key(key: &ObservationKey, fmt: &NumericFormat, sep: &str) -> Result<String, NumError> {
    match key {
        ObservationKey::Text(s) => Ok(s.clone()),
        ObservationKey::Numeric(dims) => {
            let parts: Result<Vec<String>, NumError> = dims
                .iter()
                .map(|x| serialize_value(*x, fmt).map(|s| trim_fraction(s.as_str())))
                .collect();
            Ok(parts?.join(sep))
        }
    }
}

fn trim_fraction(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t.is_empty() || t == "-" {
        "0".to_string()
    } else {
        t.to_string()
    }
}

fn render_values(values: &[f64], fmt: &NumericFormat, sep: &str) -> Result<String, NumError> {
    let parts: Result<Vec<String>, NumError> = values
        .iter()
        .map(|y| serialize_value(*y, fmt).map(|s| s.into_string()))
        .collect();
    Ok(parts?.join(sep))
}

fn render_pair(obs: &Observation, cfg: &PromptConfig) -> Result<String, NumError> {
    let pf = cfg.pair_format;
    Ok(format!(
        "{}{}{}{}{}{}",
        pf.x_prefix(),
        render_key(&obs.key, &cfg.format, pf.separator())?,
        pf.separator(),
        render_values(&obs.values, &cfg.format, pf.separator())?,
        pf.y_suffix(),
        pf.break_str(),
    ))
}

/// The trailing fragment at which generation/scoring happens: the target key
/// rendered with its intra-pair separator and no output value.
fn render_generation_point(
    key: &ObservationKey,
    cfg: &PromptConfig,
) -> Result<String, NumError> {
    let pf = cfg.pair_format;
    Ok(format!(
        "{}{}{}",
        pf.x_prefix(),
        render_key(key, &cfg.format, pf.separator())?,
        pf.separator(),
    ))
}

/// Orders observations for serialization into a prompt.
///
/// Distance ordering puts the farthest point first and the nearest last;
/// ties keep their original relative order.
pub fn order_observations(
    observations: &[Observation],
    target_key: &ObservationKey,
    strategy: Ordering,
) -> Result<Vec<Observation>, PromptError> {
    let mut out: Vec<Observation> = observations.to_vec();
    match strategy {
        Ordering::Sequential => {
            if out.iter().all(|o| o.key.is_numeric()) {
                out.sort_by(|a, b| match (&a.key, &b.key) {
                    (ObservationKey::Numeric(x), ObservationKey::Numeric(y)) => {
                        for (u, v) in x.iter().zip(y.iter()) {
                            match u.total_cmp(v) {
                                std::cmp::Ordering::Equal => continue,
                                other => return other,
                            }
                        }
                        x.len().cmp(&y.len())
                    }
                    _ => std::cmp::Ordering::Equal,
                });
            }
        }
        Ordering::Random { seed } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            out.shuffle(&mut rng);
        }
        Ordering::Distance => {
            let mut keyed: Vec<(f64, Observation)> = Vec::with_capacity(out.len());
            for obs in out {
                let d = obs
                    .key
                    .distance_to(target_key)
                    .ok_or(PromptError::DistanceOnTextKeys)?;
                keyed.push((d, obs));
            }
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
            return Ok(keyed.into_iter().map(|(_, o)| o).collect());
        }
    }
    Ok(out)
}

fn render_prefix(cfg: &PromptConfig) -> Result<String, PromptError> {
    let mut out = String::new();
    if let Some(text) = &cfg.text_prefix {
        if !text.is_empty() {
            out.push_str(text);
            out.push('\n');
        }
    }
    for block in &cfg.example_blocks {
        out.push_str(&block.label);
        out.push_str(":\n");
        let ordered = order_observations(
            &block.observations,
            &ObservationKey::Numeric(vec![]),
            Ordering::Sequential,
        )?;
        for obs in &ordered {
            out.push_str(&render_pair(obs, cfg)?);
        }
    }
    Ok(out)
}

fn check_kind(train: &TrainingSet, target_key: &ObservationKey) -> Result<(), PromptError> {
    if let Some(first) = train.observations.first() {
        if !first.key.same_kind(target_key) {
            return Err(PromptError::KeyKindMismatch);
        }
    }
    Ok(())
}

/// Builds the prompt for a single marginal prediction at `target_key`.
pub fn build_marginal_prompt(
    cfg: &PromptConfig,
    train: &TrainingSet,
    target_key: &ObservationKey,
) -> Result<String, PromptError> {
    check_kind(train, target_key)?;
    let mut out = render_prefix(cfg)?;
    let ordered = order_observations(&train.observations, target_key, cfg.ordering)?;
    for obs in &ordered {
        out.push_str(&render_pair(obs, cfg)?);
    }
    out.push_str(&render_generation_point(target_key, cfg)?);
    Ok(out)
}

/// Builds the prompt for the next target of an autoregressive pass, with the
/// already-sampled targets joined into the conditioning set.
///
/// Under distance ordering the union of training points and sampled targets
/// is re-sorted by distance to `next_key`; under sequential/random ordering
/// the sampled targets follow the training block in sampling order.
pub fn extend_autoregressive(
    cfg: &PromptConfig,
    train: &TrainingSet,
    sampled_targets: &[(ObservationKey, Vec<f64>)],
    next_key: &ObservationKey,
) -> Result<String, PromptError> {
    check_kind(train, next_key)?;
    let sampled: Vec<Observation> = sampled_targets
        .iter()
        .map(|(k, v)| Observation::new(k.clone(), v.clone()))
        .collect();

    let ordered: Vec<Observation> = match cfg.ordering {
        Ordering::Distance => {
            let mut union = train.observations.clone();
            union.extend(sampled);
            order_observations(&union, next_key, Ordering::Distance)?
        }
        strategy => {
            let mut ordered = order_observations(&train.observations, next_key, strategy)?;
            ordered.extend(sampled);
            ordered
        }
    };

    let mut out = render_prefix(cfg)?;
    for obs in &ordered {
        out.push_str(&render_pair(obs, cfg)?);
    }
    out.push_str(&render_generation_point(next_key, cfg)?);
    Ok(out)
}
