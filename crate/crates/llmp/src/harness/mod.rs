//! Experiment drivers tying data generation, prompting, the process layer
//! and metrics into reproducible runs with machine-readable reports.

pub mod data;
pub mod report;
pub mod synth;

pub use data::{load_csv, load_dataset, load_jsonl, parse_csv, parse_jsonl, LoadedData};
pub use report::{Aggregate, OutputSummary, Quantile, RunReport, TargetRecord, REPORT_SCHEMA_VERSION};
pub use synth::{
    bimodal_value, generate_bimodal, generate_synthetic, BimodalTask, SyntheticFunction,
    SyntheticTask,
};

use crate::backend::{ModelBackend, SamplingParams};
use crate::density::DensityError;
use crate::eval::{self, EvalError};
use crate::gp::{self, GpError};
use crate::process::{
    self, JointMode, ProcessError, TargetSet,
};
use crate::prompting::{apply_scale, Affine, ObservationKey, PromptConfig, PromptError, TrainingSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown function name: {0}")]
    UnknownFunction(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error("report error: {0}")]
    Report(String),
    #[error("no sample paths survived; cannot summarize")]
    NoSamples,
    #[error("the GP baseline requires numeric keys")]
    NonNumericKeys,
    #[error("io error: {0}")]
    Io(String),
}

/// Configuration of one regression/forecasting run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegressionConfig {
    pub mode: JointMode,
    pub prompt: PromptConfig,
    /// Sample paths per run (the protocol default is 50 per target).
    pub samples: usize,
    pub seed: u64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            mode: JointMode::Independent,
            prompt: PromptConfig::default(),
            samples: 50,
            seed: 0,
        }
    }
}

fn scale_targets(targets: &TargetSet, transform: &Affine) -> TargetSet {
    TargetSet {
        keys: targets.keys.clone(),
        truths: targets.truths.as_ref().map(|ts| {
            ts.iter()
                .map(|t| t.iter().map(|y| transform.apply(*y)).collect())
                .collect()
        }),
    }
}

/// Runs a full regression experiment: density evaluation at the truths (when
/// present), path sampling, summaries and aggregate metrics.
///
/// When the prompt config carries an affine scale, observations and truths
/// are scaled before prompting, reported log-densities are corrected back by
/// `arity * ln|a|` per target, and samples are mapped back through the
/// inverse transform.
pub fn run_regression<B: ModelBackend + ?Sized>(
    backend: &B,
    cfg: &RegressionConfig,
    train: &TrainingSet,
    targets: &TargetSet,
) -> Result<RunReport, HarnessError> {
    let transform = cfg.prompt.scale.unwrap_or_else(Affine::identity);
    let train_scaled = apply_scale(train, &transform);
    let targets_scaled = scale_targets(targets, &transform);
    let arity = train.output_arity().unwrap_or(1);

    // densities at the true values, reported in raw space
    let log_pdfs: Option<Vec<f64>> = if targets.truths.is_some() {
        let joint = match cfg.mode {
            JointMode::Independent => process::joint_loglik_independent(
                backend,
                &cfg.prompt,
                &train_scaled,
                &targets_scaled,
            )?,
            JointMode::Autoregressive => process::joint_loglik_autoregressive(
                backend,
                &cfg.prompt,
                &train_scaled,
                &targets_scaled,
            )?,
        };
        let correction = arity as f64 * transform.log_density_correction();
        Some(joint.conditionals.iter().map(|c| c + correction).collect())
    } else {
        None
    };

    // sampling, in scaled space, mapped back for the summaries
    let params = SamplingParams::with_stop(
        cfg.prompt.pair_format.terminal().map(|c| c.to_string()),
    );
    let unsupervised = TargetSet {
        keys: targets.keys.clone(),
        truths: None,
    };
    let sampled = process::sample_paths(
        backend,
        &cfg.prompt,
        &train_scaled,
        &unsupervised,
        cfg.samples,
        &params,
        cfg.mode,
        cfg.seed,
    )?;
    if sampled.paths.is_empty() {
        return Err(HarnessError::NoSamples);
    }

    let mut records = Vec::with_capacity(targets.len());
    let mut medians_flat = Vec::new();
    let mut truths_flat = Vec::new();
    for (idx, key) in targets.keys.iter().enumerate() {
        let mut outputs = Vec::with_capacity(arity);
        for dim in 0..arity {
            let samples: Vec<f64> = sampled
                .paths
                .iter()
                .map(|p| transform.invert(p.values[idx][dim]))
                .collect();
            let summary = eval::summarize_target(&samples)?;
            if let Some(truths) = &targets.truths {
                medians_flat.push(summary.median);
                truths_flat.push(truths[idx][dim]);
            }
            outputs.push(OutputSummary {
                median: summary.median,
                quantiles: summary
                    .bands
                    .iter()
                    .map(|(p, v)| Quantile {
                        percent: *p,
                        value: *v,
                    })
                    .collect(),
                samples,
            });
        }
        records.push(TargetRecord {
            key: key.clone(),
            truth: targets.truths.as_ref().map(|t| t[idx].clone()),
            log_pdf: log_pdfs.as_ref().map(|l| l[idx]),
            outputs,
        });
    }

    let aggregate = Aggregate {
        nll: log_pdfs.as_ref().map(|l| eval::nll(l)).transpose()?,
        mae: if medians_flat.is_empty() {
            None
        } else {
            Some(eval::mae(&medians_flat, &truths_flat)?)
        },
    };
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "regress".into(),
        backend: backend.identity(),
        config: serde_json::to_value(cfg).map_err(|e| HarnessError::Report(e.to_string()))?,
        targets: records,
        aggregate,
    })
}

/// GP baseline run configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GpRunConfig {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GpRunConfig {
    fn default() -> Self {
        GpRunConfig {
            restarts: 8,
            seed: 0,
        }
    }
}

fn numeric_keys(keys: &[ObservationKey]) -> Result<Vec<Vec<f64>>, HarnessError> {
    keys.iter()
        .map(|k| match k {
            ObservationKey::Numeric(v) => Ok(v.clone()),
            ObservationKey::Text(_) => Err(HarnessError::NonNumericKeys),
        })
        .collect()
}

/// Runs the RBF-GP baseline: independent per-output fits, analytic
/// posterior summaries (median of a Gaussian is its mean), and the same
/// aggregate metrics as the model runs.
pub fn run_gp(
    cfg: &GpRunConfig,
    train: &TrainingSet,
    targets: &TargetSet,
) -> Result<RunReport, HarnessError> {
    let xs = numeric_keys(
        &train
            .observations
            .iter()
            .map(|o| o.key.clone())
            .collect::<Vec<_>>(),
    )?;
    let ys: Vec<Vec<f64>> = train.observations.iter().map(|o| o.values.clone()).collect();
    let target_xs = numeric_keys(&targets.keys)?;
    let arity = train.output_arity().unwrap_or(0).max(1);

    let hypers = gp::gp_fit_multi(&xs, &ys, cfg.restarts, cfg.seed)?;
    let mut per_dim_posteriors = Vec::with_capacity(arity);
    for (dim, h) in hypers.iter().enumerate() {
        let column: Vec<f64> = ys.iter().map(|v| v[dim]).collect();
        let truth_column: Option<Vec<f64>> = targets
            .truths
            .as_ref()
            .map(|ts| ts.iter().map(|t| t[dim]).collect());
        per_dim_posteriors.push(gp::gp_predict(
            h,
            &xs,
            &column,
            &target_xs,
            truth_column.as_deref(),
        )?);
    }

    let mut records = Vec::with_capacity(targets.len());
    let mut medians_flat = Vec::new();
    let mut truths_flat = Vec::new();
    let mut log_pdfs = Vec::new();
    for (idx, key) in targets.keys.iter().enumerate() {
        let mut outputs = Vec::with_capacity(arity);
        let mut target_log_pdf = 0.0;
        let mut has_log_pdf = false;
        for post in &per_dim_posteriors {
            let mean = post.means[idx];
            let var = post.variances[idx];
            outputs.push(OutputSummary {
                median: mean,
                quantiles: eval::PERCENTILES
                    .iter()
                    .map(|&p| Quantile {
                        percent: p,
                        value: gp::gaussian_quantile(mean, var, p),
                    })
                    .collect(),
                samples: Vec::new(),
            });
            if let Some(lps) = &post.log_pdfs {
                target_log_pdf += lps[idx];
                has_log_pdf = true;
            }
            if let Some(truths) = &targets.truths {
                medians_flat.push(mean);
                truths_flat.push(truths[idx][outputs.len() - 1]);
            }
        }
        if has_log_pdf {
            log_pdfs.push(target_log_pdf);
        }
        records.push(TargetRecord {
            key: key.clone(),
            truth: targets.truths.as_ref().map(|t| t[idx].clone()),
            log_pdf: if has_log_pdf {
                Some(target_log_pdf)
            } else {
                None
            },
            outputs,
        });
    }

    let aggregate = Aggregate {
        nll: if log_pdfs.is_empty() {
            None
        } else {
            Some(eval::nll(&log_pdfs)?)
        },
        mae: if medians_flat.is_empty() {
            None
        } else {
            Some(eval::mae(&medians_flat, &truths_flat)?)
        },
    };
    Ok(RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "gp".into(),
        backend: "gp:rbf".into(),
        config: serde_json::to_value(cfg).map_err(|e| HarnessError::Report(e.to_string()))?,
        targets: records,
        aggregate,
    })
}
