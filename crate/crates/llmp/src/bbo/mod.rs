//! Black-box maximization by Thompson sampling over model posteriors: after
//! a uniform cold start, each trial draws candidate inputs, obtains one
//! posterior sample per candidate from the backend, and queries the objective
//! at the best-sampled candidate.

mod functions;

pub use functions::BenchmarkFunction;

use crate::backend::{ModelBackend, SamplingParams};
use crate::density;
use crate::prompting::{
    build_marginal_prompt, Observation, ObservationKey, PromptConfig, PromptError, TrainingSet,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Clone)]
pub enum BboError {
    #[error("input lies outside the function bounds")]
    OutOfBounds,
    #[error("input has the wrong dimension")]
    WrongDimension,
    #[error("unknown benchmark function: {0}")]
    UnknownFunction(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Optimizer run configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OptConfig {
    /// Total number of objective queries.
    pub trials: usize,
    /// Candidate points sampled per model-guided trial.
    pub candidates: usize,
    /// Initial uniform-random queries.
    pub cold_start: usize,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl OptConfig {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        OptConfig {
            trials: 100,
            candidates: 500,
            cold_start: 7,
            bounds,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), BboError> {
        if self.cold_start >= self.trials {
            return Err(BboError::InvalidConfig(
                "cold start count must be below the trial count".into(),
            ));
        }
        if self.candidates == 0 {
            return Err(BboError::InvalidConfig(
                "need at least one candidate per trial".into(),
            ));
        }
        if self.bounds.is_empty()
            || self
                .bounds
                .iter()
                .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo >= hi)
        {
            return Err(BboError::InvalidConfig(
                "bounds must be finite with lower < upper".into(),
            ));
        }
        Ok(())
    }
}

/// One trial's record. `fallback` marks trials where candidate sampling
/// failed and the query degraded to a uniform draw.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub best_y: f64,
    pub fallback: bool,
}

/// Full optimization trace. Best-so-far is monotone nondecreasing and the
/// trace length always equals the configured trial count.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptTrace {
    pub trials: Vec<TrialRecord>,
    pub max_y: f64,
    pub max_x: Vec<f64>,
}

impl OptTrace {
    /// Line-delimited JSON export: one `{"trial", "x", "y", "best_y"}` record
    /// per line.
    pub fn to_ldjson(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            let record = serde_json::json!({
                "trial": t.trial,
                "x": t.x,
                "y": t.y,
                "best_y": t.best_y,
            });
            out.push_str(&record.to_string());
            out.push('\n');
        }
        out
    }
}

/// Checked benchmark evaluation.
pub fn eval_benchmark(function: BenchmarkFunction, x: &[f64]) -> Result<f64, BboError> {
    function.eval(x)
}

fn uniform_point(bounds: &[(f64, f64)], rng: &mut ChaCha20Rng) -> Vec<f64> {
    bounds
        .iter()
        .map(|(lo, hi)| rng.gen_range(*lo..*hi))
        .collect()
}

/// Runs the Thompson-sampling optimizer against `objective`.
///
/// Prompts use the default configuration (distance ordering, `_, _\n`
/// format, two decimals). The first `cold_start` trials query uniformly at
/// random; each later trial draws `candidates` uniform points, samples one
/// value per candidate from the backend conditioned on all observations so
/// far, and queries the objective at the argmax candidate.
pub fn optimize<B, F>(backend: &B, objective: F, cfg: &OptConfig) -> Result<OptTrace, BboError>
where
    B: ModelBackend + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    cfg.validate()?;
    let prompt_cfg = PromptConfig::default();
    let params = SamplingParams::with_stop(
        prompt_cfg.pair_format.terminal().map(|c| c.to_string()),
    );
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut observations: Vec<Observation> = Vec::with_capacity(cfg.trials);
    let mut trace = OptTrace::default();
    let mut best = f64::NEG_INFINITY;

    for trial in 1..=cfg.trials {
        let (x, fallback) = if trial <= cfg.cold_start {
            (uniform_point(&cfg.bounds, &mut rng), false)
        } else {
            let train = TrainingSet {
                observations: observations.clone(),
                text: None,
            };
            match thompson_pick(backend, &prompt_cfg, &params, &train, cfg, &mut rng)? {
                Some(x) => (x, false),
                // keeps the trace at full length when sampling failed
                None => (uniform_point(&cfg.bounds, &mut rng), true),
            }
        };
        let y = objective(&x);
        observations.push(Observation::new(
            ObservationKey::Numeric(x.clone()),
            vec![y],
        ));
        if y > best {
            best = y;
            trace.max_y = y;
            trace.max_x = x.clone();
        }
        trace.trials.push(TrialRecord {
            trial,
            x,
            y,
            best_y: best,
            fallback,
        });
    }
    Ok(trace)
}

/// One Thompson step: all candidates are drawn from `rng` first (dimension
/// by dimension), then one sampling seed per candidate, so the draw schedule
/// is reproducible from the generator state alone.
fn thompson_pick<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt_cfg: &PromptConfig,
    params: &SamplingParams,
    train: &TrainingSet,
    cfg: &OptConfig,
    rng: &mut ChaCha20Rng,
) -> Result<Option<Vec<f64>>, BboError> {
    let candidates: Vec<Vec<f64>> = (0..cfg.candidates)
        .map(|_| uniform_point(&cfg.bounds, rng))
        .collect();
    let seeds: Vec<u64> = (0..cfg.candidates).map(|_| rng.gen()).collect();

    let mut best: Option<(f64, usize)> = None;
    for (i, candidate) in candidates.iter().enumerate() {
        let key = ObservationKey::Numeric(candidate.clone());
        let prompt = build_marginal_prompt(prompt_cfg, train, &key)?;
        match density::sample_value(backend, &prompt, params, &prompt_cfg.format, 10, seeds[i]) {
            Ok(sample) => {
                if best.map(|(v, _)| sample.value > v).unwrap_or(true) {
                    best = Some((sample.value, i));
                }
            }
            // rejected candidates and backend failures both just drop this
            // candidate; a trial with no surviving candidate falls back
            Err(_) => continue,
        }
    }
    Ok(best.map(|(_, i)| candidates[i].clone()))
}
