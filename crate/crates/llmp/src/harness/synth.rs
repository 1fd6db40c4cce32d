//! Synthetic task generation: the twelve named 1D function datasets (200-point
//! grid, noisy subsampled training points, equally spaced targets) and the
//! bimodal two-branch generator.
//!
//! The original datasets behind these names are not published as formulas, so
//! the parameterizations here are this crate's own, documented in the README;
//! they share the names and the generation protocol only.

use super::DataError;
use crate::numcodec::round_to;
use crate::process::TargetSet;
use crate::prompting::{Observation, ObservationKey, TrainingSet};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Number of grid points in every synthetic function dataset.
pub const GRID_POINTS: usize = 200;
/// Number of equally spaced target points.
pub const TARGET_POINTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SyntheticFunction {
    Linear,
    Exponential,
    Sigmoid,
    Log,
    Sine,
    Beat,
    LinearCosine,
    LinearSine,
    GaussianWave,
    Sinc,
    Quadratic,
    XSine,
}

impl SyntheticFunction {
    pub const ALL: [SyntheticFunction; 12] = [
        SyntheticFunction::Linear,
        SyntheticFunction::Exponential,
        SyntheticFunction::Sigmoid,
        SyntheticFunction::Log,
        SyntheticFunction::Sine,
        SyntheticFunction::Beat,
        SyntheticFunction::LinearCosine,
        SyntheticFunction::LinearSine,
        SyntheticFunction::GaussianWave,
        SyntheticFunction::Sinc,
        SyntheticFunction::Quadratic,
        SyntheticFunction::XSine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SyntheticFunction::Linear => "linear",
            SyntheticFunction::Exponential => "exponential",
            SyntheticFunction::Sigmoid => "sigmoid",
            SyntheticFunction::Log => "log",
            SyntheticFunction::Sine => "sine",
            SyntheticFunction::Beat => "beat",
            SyntheticFunction::LinearCosine => "linear-cosine",
            SyntheticFunction::LinearSine => "linear-sine",
            SyntheticFunction::GaussianWave => "gaussian-wave",
            SyntheticFunction::Sinc => "sinc",
            SyntheticFunction::Quadratic => "quadratic",
            SyntheticFunction::XSine => "x-sine",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, DataError> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == name)
            .ok_or_else(|| DataError::UnknownFunction(name.to_string()))
    }

    /// Evaluates the curve at grid coordinate `x` in `[0, 199]`; internally
    /// the formulas run on `t = x / 199`.
    pub fn value(&self, x: f64) -> f64 {
        let t = x / (GRID_POINTS - 1) as f64;
        match self {
            SyntheticFunction::Linear => t,
            SyntheticFunction::Exponential => (3.0 * (t - 1.0)).exp(),
            SyntheticFunction::Sigmoid => 1.0 / (1.0 + (-10.0 * (t - 0.5)).exp()),
            SyntheticFunction::Log => (1.0 + 9.0 * t).ln() / 10f64.ln(),
            SyntheticFunction::Sine => 0.5 + 0.5 * (4.0 * PI * t).sin(),
            SyntheticFunction::Beat => {
                0.5 + 0.25 * ((10.0 * PI * t).sin() + (11.0 * PI * t).sin())
            }
            SyntheticFunction::LinearCosine => t + 0.2 * (4.0 * PI * t).cos(),
            SyntheticFunction::LinearSine => t * (4.0 * PI * t).sin(),
            SyntheticFunction::GaussianWave => {
                (-8.0 * (t - 0.5) * (t - 0.5)).exp() * (8.0 * PI * t).sin()
            }
            SyntheticFunction::Sinc => {
                let u = 12.0 * PI * (t - 0.5);
                if u.abs() < 1e-12 {
                    1.0
                } else {
                    u.sin() / u
                }
            }
            SyntheticFunction::Quadratic => (2.0 * t - 1.0) * (2.0 * t - 1.0),
            SyntheticFunction::XSine => 10.0 * t * (10.0 * t).sin(),
        }
    }
}

/// Generation protocol for one synthetic task.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SyntheticTask {
    pub function: SyntheticFunction,
    pub train_size: usize,
    pub noise_sigma: f64,
    pub precision: u32,
    pub seed: u64,
    /// Drop target points whose x coincides with a training point.
    pub exclude_train_overlap: bool,
}

impl SyntheticTask {
    pub fn new(function: SyntheticFunction, train_size: usize, seed: u64) -> Self {
        SyntheticTask {
            function,
            train_size,
            noise_sigma: 0.05,
            precision: 2,
            seed,
            exclude_train_overlap: false,
        }
    }

    pub fn noiseless(function: SyntheticFunction, train_size: usize, seed: u64) -> Self {
        SyntheticTask {
            noise_sigma: 0.0,
            ..Self::new(function, train_size, seed)
        }
    }
}

/// Builds the dataset: training points are subsampled from the 200-point
/// grid, perturbed with Gaussian noise, then rounded; the 40 equally spaced
/// targets keep their exact function values.
pub fn generate_synthetic(task: &SyntheticTask) -> Result<(TrainingSet, TargetSet), DataError> {
    if task.train_size == 0 || task.train_size > GRID_POINTS {
        return Err(DataError::SchemaMismatch(format!(
            "train size {} outside 1..={}",
            task.train_size, GRID_POINTS
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(task.seed);
    let mut indices: Vec<usize> = index_sample(&mut rng, GRID_POINTS, task.train_size).into_vec();
    indices.sort_unstable();

    let noise = Normal::new(0.0, task.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut observations = Vec::with_capacity(task.train_size);
    for &i in &indices {
        let x = i as f64;
        let mut y = task.function.value(x);
        if task.noise_sigma > 0.0 {
            y += noise.sample(&mut rng);
        }
        observations.push(Observation::scalar(x, round_to(y, task.precision)));
    }
    let train = TrainingSet::new(observations, None).expect("scalar observations are consistent");

    let step = GRID_POINTS / TARGET_POINTS;
    let mut keys = Vec::with_capacity(TARGET_POINTS);
    let mut truths = Vec::with_capacity(TARGET_POINTS);
    for k in 0..TARGET_POINTS {
        let i = k * step;
        if task.exclude_train_overlap && indices.contains(&i) {
            continue;
        }
        keys.push(ObservationKey::scalar(i as f64));
        truths.push(vec![task.function.value(i as f64)]);
    }
    let targets = TargetSet::new(keys, Some(truths)).expect("lengths match by construction");
    Ok((train, targets))
}

/// Two-branch generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BimodalTask {
    pub x_min: f64,
    pub x_max: f64,
    pub count: usize,
    pub seed: u64,
}

/// The generator's closed form given the branch indicator and the Gaussian
/// draw.
pub fn bimodal_value(x: f64, eps1: f64, eps2: f64) -> f64 {
    0.05 / (1.0 + (-x).exp()) + 0.02 * x + eps1 * (0.02 * x + 0.08) + 0.03 * eps2
}

/// Draws the bimodal training set at equally spaced inputs.
pub fn generate_bimodal(task: &BimodalTask) -> TrainingSet {
    assert!(task.count >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(task.seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut observations = Vec::with_capacity(task.count);
    for i in 0..task.count {
        let frac = if task.count == 1 {
            0.0
        } else {
            i as f64 / (task.count - 1) as f64
        };
        let x = task.x_min + (task.x_max - task.x_min) * frac;
        let eps1 = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
        let eps2 = normal.sample(&mut rng);
        observations.push(Observation::scalar(x, bimodal_value(x, eps1, eps2)));
    }
    TrainingSet::new(observations, None).expect("scalar observations are consistent")
}
