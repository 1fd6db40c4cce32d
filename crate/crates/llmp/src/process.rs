//! Joint predictive distributions over many targets: the independent-marginal
//! product, the autoregressive chain, trajectory sampling and the
//! exchangeability diagnostics that measure how far the chain is from a valid
//! stochastic process.

use crate::backend::{ModelBackend, SamplingParams};
use crate::density::{self, DensityError};
use crate::prompting::{
    build_marginal_prompt, extend_autoregressive, ObservationKey, PromptConfig, PromptError,
    TrainingSet,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error("joint likelihood evaluation requires true target values")]
    MissingTruths,
    #[error("target keys and truths have mismatched lengths")]
    LengthMismatch,
}

/// Ordered targets with optional true values for likelihood evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub keys: Vec<ObservationKey>,
    pub truths: Option<Vec<Vec<f64>>>,
}

impl TargetSet {
    pub fn new(keys: Vec<ObservationKey>, truths: Option<Vec<Vec<f64>>>) -> Result<Self, ProcessError> {
        if let Some(t) = &truths {
            if t.len() != keys.len() {
                return Err(ProcessError::LengthMismatch);
            }
        }
        Ok(TargetSet { keys, truths })
    }

    pub fn scalar(keys: Vec<f64>, truths: Option<Vec<f64>>) -> Self {
        TargetSet {
            keys: keys.into_iter().map(ObservationKey::scalar).collect(),
            truths: truths.map(|t| t.into_iter().map(|y| vec![y]).collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn truths(&self) -> Result<&Vec<Vec<f64>>, ProcessError> {
        self.truths.as_ref().ok_or(ProcessError::MissingTruths)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum JointMode {
    Independent,
    Autoregressive,
}

/// Joint log-likelihood: per-target conditionals (in the original target
/// order) and their sum, plus the evaluation ordering used.
#[derive(Debug, Clone, PartialEq)]
pub struct JointResult {
    pub mode: JointMode,
    pub conditionals: Vec<f64>,
    pub joint_log_lik: f64,
    pub ordering: Vec<usize>,
}

/// Independent-marginal joint: the product of per-target marginals, each
/// conditioned only on the training data. Invariant to target permutation.
pub fn joint_loglik_independent<B: ModelBackend + ?Sized>(
    backend: &B,
    cfg: &PromptConfig,
    train: &TrainingSet,
    targets: &TargetSet,
) -> Result<JointResult, ProcessError> {
    let truths = targets.truths()?;
    let terminal = cfg.pair_format.terminal();
    let separator = cfg.pair_format.separator();
    let mut conditionals = Vec::with_capacity(targets.len());
    for (key, truth) in targets.keys.iter().zip(truths.iter()) {
        let prompt = build_marginal_prompt(cfg, train, key)?;
        let d = density::log_pdf_multi(backend, &prompt, truth, &cfg.format, terminal, separator)?;
        conditionals.push(d.log_pdf);
    }
    Ok(JointResult {
        mode: JointMode::Independent,
        joint_log_lik: conditionals.iter().sum(),
        conditionals,
        ordering: (0..targets.len()).collect(),
    })
}

/// Default target ordering for autoregressive likelihoods: ascending distance
/// to the nearest training point, ties by index. Falls back to the given
/// order when distances are undefined (text keys or an empty training set).
pub fn default_target_ordering(train: &TrainingSet, targets: &TargetSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..targets.len()).collect();
    if train.observations.is_empty() {
        return order;
    }
    let mut dists = Vec::with_capacity(targets.len());
    for key in &targets.keys {
        let mut best: Option<f64> = None;
        for obs in &train.observations {
            match key.distance_to_key(&obs.key) {
                Some(d) => {
                    best = Some(match best {
                        Some(b) if b <= d => b,
                        _ => d,
                    })
                }
                None => return order,
            }
        }
        dists.push(best.unwrap_or(f64::INFINITY));
    }
    order.sort_by(|&i, &j| dists[i].total_cmp(&dists[j]).then(i.cmp(&j)));
    order
}

/// Autoregressive joint under the default target ordering.
pub fn joint_loglik_autoregressive<B: ModelBackend + ?Sized>(
    backend: &B,
    cfg: &PromptConfig,
    train: &TrainingSet,
    targets: &TargetSet,
) -> Result<JointResult, ProcessError> {
    let order = default_target_ordering(train, targets);
    joint_loglik_autoregressive_ordered(backend, cfg, train, targets, &order)
}

/// Autoregressive joint in an explicit target order. Conditional `t` uses the
/// *true* values of the previously handled targets (teacher forcing); the
/// reported conditionals stay indexed by the original target positions.
pub fn joint_loglik_autoregressive_ordered<B: ModelBackend + ?Sized>(
    backend: &B,
    cfg: &PromptConfig,
    train: &TrainingSet,
    targets: &TargetSet,
    order: &[usize],
) -> Result<JointResult, ProcessError> {
    assert_eq!(order.len(), targets.len(), "order must index every target");
    let truths = targets.truths()?;
    let terminal = cfg.pair_format.terminal();
    let separator = cfg.pair_format.separator();
    let mut conditionals = vec![0.0; targets.len()];
    let mut history: Vec<(ObservationKey, Vec<f64>)> = Vec::with_capacity(targets.len());
    for &idx in order {
        let key = &targets.keys[idx];
        let truth = &truths[idx];
        let prompt = extend_autoregressive(cfg, train, &history, key)?;
        let d = density::log_pdf_multi(backend, &prompt, truth, &cfg.format, terminal, separator)?;
        conditionals[idx] = d.log_pdf;
        history.push((key.clone(), truth.clone()));
    }
    Ok(JointResult {
        mode: JointMode::Autoregressive,
        joint_log_lik: conditionals.iter().sum(),
        conditionals,
        ordering: order.to_vec(),
    })
}

/// One sampled trajectory: a value vector per target, in original target
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub values: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Trajectory sampling outcome; paths that exceeded the per-position retry
/// cap twice are dropped and counted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampledPaths {
    pub paths: Vec<PathSample>,
    pub failed: usize,
}

/// Per-position rejection cap before a path is abandoned.
const PATH_POSITION_ATTEMPTS: u32 = 10;

/// Draws `count` path samples over the targets.
///
/// Independent mode draws each target's value from its own marginal prompt;
/// autoregressive mode extends each path's prompt with that path's own
/// sampled values, visiting targets in their given order. A path whose
/// position exhausts its attempts is resampled once with a fresh seed, then
/// counted as failed.
pub fn sample_paths<B: ModelBackend + ?Sized>(
    backend: &B,
    cfg: &PromptConfig,
    train: &TrainingSet,
    targets: &TargetSet,
    count: usize,
    params: &SamplingParams,
    mode: JointMode,
    seed: u64,
) -> Result<SampledPaths, ProcessError> {
    assert!(count >= 1);
    let arity = train.output_arity().unwrap_or(1);
    let separator = cfg.pair_format.separator();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = SampledPaths::default();

    // marginal prompts are path-independent, build them once
    let marginal_prompts: Option<Vec<String>> = match mode {
        JointMode::Independent => {
            let mut prompts = Vec::with_capacity(targets.len());
            for key in &targets.keys {
                prompts.push(build_marginal_prompt(cfg, train, key)?);
            }
            Some(prompts)
        }
        JointMode::Autoregressive => None,
    };

    for _ in 0..count {
        let mut attempts_left = 2;
        loop {
            let path_seed: u64 = rng.gen();
            match sample_one_path(
                backend,
                cfg,
                train,
                targets,
                params,
                mode,
                marginal_prompts.as_deref(),
                separator,
                arity,
                path_seed,
            ) {
                Ok(values) => {
                    out.paths.push(PathSample {
                        values,
                        seed: path_seed,
                    });
                    break;
                }
                Err(ProcessError::Density(DensityError::MaxAttemptsExceeded { .. })) => {
                    attempts_left -= 1;
                    if attempts_left == 0 {
                        out.failed += 1;
                        break;
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn sample_one_path<B: ModelBackend + ?Sized>(
    backend: &B,
    cfg: &PromptConfig,
    train: &TrainingSet,
    targets: &TargetSet,
    params: &SamplingParams,
    mode: JointMode,
    marginal_prompts: Option<&[String]>,
    separator: &str,
    arity: usize,
    path_seed: u64,
) -> Result<Vec<Vec<f64>>, ProcessError> {
    let mut rng = ChaCha20Rng::seed_from_u64(path_seed);
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(targets.len());
    let mut history: Vec<(ObservationKey, Vec<f64>)> = Vec::new();
    for (idx, key) in targets.keys.iter().enumerate() {
        let prompt = match mode {
            JointMode::Independent => marginal_prompts.unwrap()[idx].clone(),
            JointMode::Autoregressive => extend_autoregressive(cfg, train, &history, key)?,
        };
        let sample = density::sample_vector(
            backend,
            &prompt,
            params,
            &cfg.format,
            separator,
            arity,
            PATH_POSITION_ATTEMPTS,
            rng.gen(),
        )?;
        if mode == JointMode::Autoregressive {
            history.push((key.clone(), sample.clone()));
        }
        values.push(sample);
    }
    Ok(values)
}

/// One evaluated target ordering and its joint log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingResult {
    pub order: Vec<usize>,
    pub joint_log_lik: f64,
}

/// Spread of autoregressive joint log-likelihoods across target orderings.
/// A valid stochastic process would make the spread exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeabilityReport {
    /// K random orderings followed by the default distance ordering.
    pub orderings: Vec<OrderingResult>,
    pub mean_random: f64,
    pub std_error_random: f64,
    /// max - min over every evaluated ordering.
    pub spread: f64,
}

/// Evaluates the autoregressive joint under `k` seeded random target
/// permutations plus the distance ordering.
pub fn exchangeability_gap<B: ModelBackend + ?Sized>(
    backend: &B,
    cfg: &PromptConfig,
    train: &TrainingSet,
    targets: &TargetSet,
    k: usize,
    seed: u64,
) -> Result<ExchangeabilityReport, ProcessError> {
    assert!(k >= 2, "need at least two orderings to measure a gap");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut orderings = Vec::with_capacity(k + 1);
    for _ in 0..k {
        let mut order: Vec<usize> = (0..targets.len()).collect();
        order.shuffle(&mut rng);
        let result = joint_loglik_autoregressive_ordered(backend, cfg, train, targets, &order)?;
        orderings.push(OrderingResult {
            order,
            joint_log_lik: result.joint_log_lik,
        });
    }
    let random_values: Vec<f64> = orderings.iter().map(|o| o.joint_log_lik).collect();
    let mean = random_values.iter().sum::<f64>() / k as f64;
    let var = random_values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (k.saturating_sub(1).max(1)) as f64;
    let std_error = (var / k as f64).sqrt();

    let distance_order = default_target_ordering(train, targets);
    let distance =
        joint_loglik_autoregressive_ordered(backend, cfg, train, targets, &distance_order)?;
    orderings.push(OrderingResult {
        order: distance_order,
        joint_log_lik: distance.joint_log_lik,
    });

    let max = orderings
        .iter()
        .map(|o| o.joint_log_lik)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = orderings
        .iter()
        .map(|o| o.joint_log_lik)
        .fold(f64::INFINITY, f64::min);
    Ok(ExchangeabilityReport {
        orderings,
        mean_random: mean,
        std_error_random: std_error,
        spread: max - min,
    })
}
