//! Machine-readable run reports: a versioned, self-contained JSON document
//! from which every summary number can be recomputed without backend access,
//! plus an optional flat CSV projection for external plotting.
//!
//! Reports deliberately carry no wall-clock content, so reruns with the same
//! configuration and seed are byte-identical; timing goes to the log.

use super::HarnessError;
use crate::eval::{self, PERCENTILES};
use crate::prompting::ObservationKey;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    pub percent: f64,
    pub value: f64,
}

/// Summary of one output dimension at one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSummary {
    pub median: f64,
    pub quantiles: Vec<Quantile>,
    /// Raw samples; empty for analytic posteriors (the GP baseline).
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub key: ObservationKey,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_pdf: Option<f64>,
    pub outputs: Vec<OutputSummary>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nll: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub kind: String,
    pub backend: String,
    pub config: serde_json::Value,
    pub targets: Vec<TargetRecord>,
    pub aggregate: Aggregate,
}

impl RunReport {
    /// Recomputes the aggregates and per-target summaries from the stored
    /// samples/log-densities and checks them against the stored values.
    pub fn validate(&self) -> Result<Aggregate, HarnessError> {
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(HarnessError::Report(format!(
                "schema version {} unsupported (expected {})",
                self.schema_version, REPORT_SCHEMA_VERSION
            )));
        }
        let mut medians = Vec::new();
        let mut truths = Vec::new();
        let mut log_pdfs = Vec::new();
        for record in &self.targets {
            if let Some(truth) = &record.truth {
                if truth.len() != record.outputs.len() {
                    return Err(HarnessError::Report(format!(
                        "truth arity {} disagrees with {} outputs",
                        truth.len(),
                        record.outputs.len()
                    )));
                }
            }
            for (dim, output) in record.outputs.iter().enumerate() {
                if !output.samples.is_empty() {
                    let summary = eval::summarize_target(&output.samples)
                        .map_err(|e| HarnessError::Report(e.to_string()))?;
                    if summary.median != output.median {
                        return Err(HarnessError::Report(format!(
                            "stored median {} disagrees with samples ({})",
                            output.median, summary.median
                        )));
                    }
                }
                if let Some(truth) = &record.truth {
                    medians.push(output.median);
                    truths.push(truth[dim]);
                }
            }
            if let Some(lp) = record.log_pdf {
                log_pdfs.push(lp);
            }
        }
        let recomputed = Aggregate {
            nll: if log_pdfs.is_empty() {
                None
            } else {
                Some(eval::nll(&log_pdfs).map_err(|e| HarnessError::Report(e.to_string()))?)
            },
            mae: if medians.is_empty() {
                None
            } else {
                Some(
                    eval::mae(&medians, &truths)
                        .map_err(|e| HarnessError::Report(e.to_string()))?,
                )
            },
        };
        let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => (x - y).abs() < 1e-9,
            _ => false,
        };
        if !close(recomputed.nll, self.aggregate.nll) || !close(recomputed.mae, self.aggregate.mae)
        {
            return Err(HarnessError::Report(format!(
                "stored aggregates {:?} disagree with recomputed {:?}",
                self.aggregate, recomputed
            )));
        }
        Ok(recomputed)
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| HarnessError::Report(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| HarnessError::Io(format!("{}: {}", path.display(), e)))
    }

    pub fn read(path: &Path) -> Result<RunReport, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Io(format!("{}: {}", path.display(), e)))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Report(e.to_string()))
    }

    /// Flat CSV projection: one row per target and output dimension.
    pub fn to_flat_csv(&self) -> String {
        let mut header = String::from("target,output,truth,median");
        for p in PERCENTILES {
            header.push_str(&format!(",p{}", p));
        }
        header.push_str(",log_pdf\n");
        let mut out = header;
        for record in &self.targets {
            let key = match &record.key {
                ObservationKey::Numeric(dims) => dims
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
                ObservationKey::Text(t) => format!("{:?}", t),
            };
            for (dim, output) in record.outputs.iter().enumerate() {
                out.push_str(&key);
                out.push(',');
                out.push_str(&dim.to_string());
                out.push(',');
                if let Some(truth) = record.truth.as_ref().and_then(|t| t.get(dim)) {
                    out.push_str(&truth.to_string());
                }
                out.push(',');
                out.push_str(&output.median.to_string());
                for q in &output.quantiles {
                    out.push(',');
                    out.push_str(&q.value.to_string());
                }
                out.push(',');
                if let Some(lp) = record.log_pdf {
                    out.push_str(&lp.to_string());
                }
                out.push('\n');
            }
        }
        out
    }
}
