//! Metrics and predictive summaries: negative log-likelihood, mean absolute
//! error, medians and percentile bands.
//!
//! Quantiles are nearest-rank order statistics (`rank = ceil(p * n)`), never
//! interpolated, so they commute exactly with strictly increasing transforms.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("input lengths differ")]
    LengthMismatch,
}

/// The reported percentile set: the 95% interval bounds plus the tenth
/// percentiles used for band plots.
pub const PERCENTILES: [f64; 11] = [2.5, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 97.5];

/// Summary of one target's sample distribution.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TargetSummary {
    pub samples: Vec<f64>,
    pub median: f64,
    pub lower95: f64,
    pub upper95: f64,
    /// (percent, value) pairs at [`PERCENTILES`].
    pub bands: Vec<(f64, f64)>,
}

/// Per-target summaries plus the two aggregate metrics, filled in when
/// truths and log-densities are available.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictiveSummary {
    pub targets: Vec<TargetSummary>,
    pub nll: Option<f64>,
    pub mae: Option<f64>,
}

/// Negative mean log-density at the true values, in nats.
pub fn nll(per_target_log_pdfs: &[f64]) -> Result<f64, EvalError> {
    if per_target_log_pdfs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(-per_target_log_pdfs.iter().sum::<f64>() / per_target_log_pdfs.len() as f64)
}

/// Mean absolute error between predictive medians and true values.
pub fn mae(medians: &[f64], truths: &[f64]) -> Result<f64, EvalError> {
    if medians.len() != truths.len() {
        return Err(EvalError::LengthMismatch);
    }
    if medians.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(medians
        .iter()
        .zip(truths.iter())
        .map(|(m, t)| (m - t).abs())
        .sum::<f64>()
        / medians.len() as f64)
}

/// Nearest-rank quantile at `percent` of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], percent: f64) -> Result<f64, EvalError> {
    if sorted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = sorted.len();
    let rank = ((percent / 100.0) * n as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, n) - 1])
}

/// Summarizes one target's samples.
pub fn summarize_target(samples: &[f64]) -> Result<TargetSummary, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let bands: Vec<(f64, f64)> = PERCENTILES
        .iter()
        .map(|&p| Ok((p, quantile_sorted(&sorted, p)?)))
        .collect::<Result<_, EvalError>>()?;
    Ok(TargetSummary {
        samples: samples.to_vec(),
        median: quantile_sorted(&sorted, 50.0)?,
        lower95: quantile_sorted(&sorted, 2.5)?,
        upper95: quantile_sorted(&sorted, 97.5)?,
        bands,
    })
}

/// Summarizes per-target sample lists; aggregates stay unset until truths
/// and log-densities are attached.
pub fn summarize(samples_per_target: &[Vec<f64>]) -> Result<PredictiveSummary, EvalError> {
    if samples_per_target.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let targets: Vec<TargetSummary> = samples_per_target
        .iter()
        .map(|s| summarize_target(s))
        .collect::<Result<_, _>>()?;
    Ok(PredictiveSummary {
        targets,
        nll: None,
        mae: None,
    })
}
