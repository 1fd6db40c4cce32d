//! Continuous marginal densities and numeric samples at a single target.
//!
//! A value serialized at precision `n` names one bin of width `10^-n`; the
//! bin's probability mass is the product of per-token conditional
//! probabilities of its digit string followed by the terminal separator, and
//! dividing by the bin width (adding `n ln 10` in log space) converts mass to
//! density.

use crate::backend::{BackendError, ModelBackend, SamplingParams};
use crate::numcodec::{
    parse_value, serialize_value, tokenize_numeric, NumError, NumericFormat,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("no numeric sample accepted after {attempts} attempts")]
    MaxAttemptsExceeded { attempts: u32 },
}

/// Density of one bin: the queried (canonicalized) value(s), the bin's
/// probability mass and the log-density after bin-width correction.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDensity {
    pub values: Vec<f64>,
    pub log_pdf: f64,
    pub bin_mass: f64,
    pub precision: u32,
}

impl MarginalDensity {
    /// Residual of the identity `log_pdf = log(bin_mass) + dims * n * ln 10`;
    /// zero up to floating-point roundoff on every evaluation.
    pub fn identity_residual(&self) -> f64 {
        let n = self.precision as f64;
        let dims = self.values.len() as f64;
        self.log_pdf - (self.bin_mass.ln() + dims * n * std::f64::consts::LN_10)
    }
}

/// Log-density of the bin containing `y`.
///
/// The scored continuation is `serialize(y)` followed by the terminal
/// separator, when the prompt format has one.
pub fn log_pdf<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    y: f64,
    fmt: &NumericFormat,
    terminal: Option<char>,
) -> Result<MarginalDensity, DensityError> {
    log_pdf_multi(backend, prompt, &[y], fmt, terminal, "")
}

/// Multi-output variant: the continuation is the output components joined by
/// `separator`, then the terminal. The bin is a `dims`-dimensional cube, so
/// the width correction is `dims * n * ln 10`.
pub fn log_pdf_multi<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    values: &[f64],
    fmt: &NumericFormat,
    terminal: Option<char>,
    separator: &str,
) -> Result<MarginalDensity, DensityError> {
    assert!(!values.is_empty(), "log_pdf over an empty value vector");
    let mut continuation: Vec<char> = Vec::new();
    let mut canonical = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            continuation.extend(separator.chars());
        }
        let s = serialize_value(v, fmt)?;
        canonical.push(parse_value(s.as_str(), fmt)?);
        continuation.extend(tokenize_numeric(&s));
    }
    if let Some(t) = terminal {
        continuation.push(t);
    }
    let mut vocab = fmt.vocabulary(terminal);
    if values.len() > 1 {
        vocab = vocab.with_separator(separator);
    }
    let scores = backend.score_continuation(prompt, &continuation, &vocab)?;
    let log_mass = scores.total_logprob();
    let n = fmt.precision as f64;
    Ok(MarginalDensity {
        values: canonical,
        log_pdf: log_mass + values.len() as f64 * n * std::f64::consts::LN_10,
        bin_mass: log_mass.exp(),
        precision: fmt.precision,
    })
}

/// One accepted rejection sample and the attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptedSample {
    pub value: f64,
    pub attempts: u32,
}

/// Accepted samples at one target plus rejection bookkeeping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub samples: Vec<f64>,
    pub attempts: u32,
    pub rejected: u32,
}

/// Draws generations until one parses as a number, up to `max_attempts`.
pub fn sample_value<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    params: &SamplingParams,
    fmt: &NumericFormat,
    max_attempts: u32,
    seed: u64,
) -> Result<AcceptedSample, DensityError> {
    assert!(max_attempts >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for attempt in 1..=max_attempts {
        let generation_seed: u64 = rng.gen();
        let out = backend.complete(prompt, params, generation_seed)?;
        if let Ok(value) = parse_value(&out, fmt) {
            return Ok(AcceptedSample {
                value,
                attempts: attempt,
            });
        }
    }
    Err(DensityError::MaxAttemptsExceeded {
        attempts: max_attempts,
    })
}

/// Rejection-samples a whole set at one target.
pub fn sample_set<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    params: &SamplingParams,
    fmt: &NumericFormat,
    count: usize,
    max_attempts: u32,
    seed: u64,
) -> Result<SampleSet, DensityError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut set = SampleSet::default();
    while set.samples.len() < count {
        let remaining = max_attempts.saturating_sub(set.attempts);
        if remaining == 0 {
            return Err(DensityError::MaxAttemptsExceeded {
                attempts: set.attempts,
            });
        }
        match sample_value(backend, prompt, params, fmt, remaining, rng.gen()) {
            Ok(sample) => {
                set.attempts += sample.attempts;
                set.rejected += sample.attempts - 1;
                set.samples.push(sample.value);
            }
            Err(DensityError::MaxAttemptsExceeded { attempts }) => {
                return Err(DensityError::MaxAttemptsExceeded {
                    attempts: set.attempts + attempts,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(set)
}

/// A multi-output sample: the generation must split on `separator` into
/// exactly `arity` parseable numbers to be accepted.
pub fn sample_vector<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    params: &SamplingParams,
    fmt: &NumericFormat,
    separator: &str,
    arity: usize,
    max_attempts: u32,
    seed: u64,
) -> Result<Vec<f64>, DensityError> {
    assert!(max_attempts >= 1 && arity >= 1);
    if arity == 1 {
        return sample_value(backend, prompt, params, fmt, max_attempts, seed)
            .map(|s| vec![s.value]);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..max_attempts {
        let generation_seed: u64 = rng.gen();
        let out = backend.complete(prompt, params, generation_seed)?;
        let parts: Vec<&str> = out.split(separator).collect();
        if parts.len() != arity {
            continue;
        }
        let parsed: Result<Vec<f64>, _> =
            parts.iter().map(|p| parse_value(p, fmt)).collect();
        if let Ok(values) = parsed {
            return Ok(values);
        }
    }
    Err(DensityError::MaxAttemptsExceeded {
        attempts: max_attempts,
    })
}

/// Log-density over a grid of values, e.g. for heatmap emission.
///
/// Grid values are canonicalized first; values that land in the same bin
/// collapse to the first occurrence.
pub fn density_grid<B: ModelBackend + ?Sized>(
    backend: &B,
    prompt: &str,
    y_grid: &[f64],
    fmt: &NumericFormat,
    terminal: Option<char>,
) -> Result<Vec<MarginalDensity>, DensityError> {
    let mut seen: Vec<u64> = Vec::new();
    let mut out = Vec::new();
    for &y in y_grid {
        let canonical = parse_value(serialize_value(y, fmt)?.as_str(), fmt)?;
        if seen.contains(&canonical.to_bits()) {
            continue;
        }
        seen.push(canonical.to_bits());
        out.push(log_pdf(backend, prompt, canonical, fmt, terminal)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{TableLM, UniformDigitLM};
    use std::f64::consts::LN_10;

    fn table_emitting_25() -> TableLM {
        TableLM::new()
            .entry(", ", vec![('2', 1.0)])
            .entry("2", vec![('.', 1.0)])
            .entry(".", vec![('5', 1.0)])
            .entry("5", vec![('\n', 1.0)])
    }

    #[test]
    fn unit_mass_bin_gives_bin_width_correction_only() {
        let table = table_emitting_25();
        let fmt = NumericFormat::new(1);
        let d = log_pdf(&table, "1, 2.5\n3, ", 2.5, &fmt, Some('\n')).unwrap();
        assert!((d.bin_mass - 1.0).abs() < 1e-12);
        assert!((d.log_pdf - LN_10).abs() < 1e-12);
    }

    #[test]
    fn uniform_mass_is_per_token_product() {
        let lm = UniformDigitLM::uniform();
        let fmt = NumericFormat::new(1);
        let d = log_pdf(&lm, "prompt", 12.5, &fmt, Some('\n')).unwrap();
        // tokens '1' '2' '.' '5' and the terminal
        let expect = 5.0 * (1.0f64 / 13.0).ln() + LN_10;
        assert!((d.log_pdf - expect).abs() < 1e-12);
        assert!((d.log_pdf - (-10.522)).abs() < 1e-3);
    }

    #[test]
    fn identity_residual_is_zero() {
        let lm = UniformDigitLM::uniform();
        let fmt = NumericFormat::new(2);
        for y in [0.0, 1.25, -3.75, 99.99] {
            let d = log_pdf(&lm, "p", y, &fmt, Some('\n')).unwrap();
            assert!(d.identity_residual().abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_refinement_prefix_property() {
        let lm = UniformDigitLM::uniform();
        let coarse = log_pdf(&lm, "p", 2.5, &NumericFormat::new(1), Some('\n')).unwrap();
        let fine = log_pdf(&lm, "p", 2.50, &NumericFormat::new(2), Some('\n')).unwrap();
        assert!(coarse.bin_mass >= fine.bin_mass);
    }

    #[test]
    fn table_bin_masses_sum_to_one_over_support() {
        // first digit uniform over 0..9, '.' certain, second digit uniform,
        // terminal certain: supported on exactly the 100 strings "d.d"
        let mut table = TableLM::new().entry(
            ", ",
            ('0'..='9').map(|c| (c, 1.0)).collect::<Vec<_>>(),
        );
        for d in '0'..='9' {
            table = table.entry(&d.to_string(), vec![('.', 1.0)]);
            table = table.entry(&format!(".{}", d), vec![('\n', 1.0)]);
        }
        table = table.entry(".", ('0'..='9').map(|c| (c, 1.0)).collect::<Vec<_>>());
        let fmt = NumericFormat::new(1);
        let mut total = 0.0;
        for a in 0..10 {
            for b in 0..10 {
                let y = a as f64 + b as f64 / 10.0;
                let d = log_pdf(&table, "0, 5.5\n1, ", y, &fmt, Some('\n')).unwrap();
                total += d.bin_mass;
            }
        }
        assert!((total - 1.0).abs() < 1e-9, "total mass {}", total);
    }

    #[test]
    fn deterministic_model_samples_first_attempt() {
        let table = table_emitting_25();
        let fmt = NumericFormat::new(1);
        let params = SamplingParams::default();
        let s = sample_value(&table, "1, 2.5\n3, ", &params, &fmt, 10, 0).unwrap();
        assert_eq!(s.value, 2.5);
        assert_eq!(s.attempts, 1);
    }

    #[test]
    fn non_numeric_model_exhausts_attempts() {
        let table = TableLM::new().default_dist(vec![('a', 1.0)]);
        let fmt = NumericFormat::new(1);
        let params = SamplingParams::default();
        let err = sample_value(&table, "p", &params, &fmt, 5, 0).unwrap_err();
        assert!(matches!(
            err,
            DensityError::MaxAttemptsExceeded { attempts: 5 }
        ));
    }

    #[test]
    fn sample_set_counts_rejections() {
        // 50/50 between a numeric path and garbage
        let table = TableLM::new()
            .entry("q", vec![('7', 0.5), ('a', 0.5)])
            .entry("7", vec![('\n', 1.0)])
            .entry("a", vec![('\n', 1.0)]);
        let fmt = NumericFormat::new(0);
        let params = SamplingParams::default();
        let set = sample_set(&table, "q", &params, &fmt, 20, 1000, 42).unwrap();
        assert_eq!(set.samples.len(), 20);
        assert_eq!(set.attempts as usize, 20 + set.rejected as usize);
        assert!(set.samples.iter().all(|v| *v == 7.0));
    }

    #[test]
    fn grid_of_one_value_reduces_to_log_pdf() {
        let lm = UniformDigitLM::uniform();
        let fmt = NumericFormat::new(1);
        let grid = density_grid(&lm, "p", &[3.2], &fmt, Some('\n')).unwrap();
        let single = log_pdf(&lm, "p", 3.2, &fmt, Some('\n')).unwrap();
        assert_eq!(grid, vec![single]);
    }

    #[test]
    fn grid_collapses_duplicate_bins() {
        let lm = UniformDigitLM::uniform();
        let fmt = NumericFormat::new(1);
        let grid = density_grid(&lm, "p", &[3.21, 3.24, 3.3], &fmt, Some('\n')).unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid[0].values, vec![3.2]);
        assert_eq!(grid[1].values, vec![3.3]);
    }

    #[test]
    fn uniform_grid_densities_equal_within_token_length_class() {
        let lm = UniformDigitLM::uniform();
        let fmt = NumericFormat::new(1);
        let grid = density_grid(&lm, "p", &[1.2, 3.4, 9.9], &fmt, Some('\n')).unwrap();
        assert!((grid[0].log_pdf - grid[1].log_pdf).abs() < 1e-12);
        assert!((grid[0].log_pdf - grid[2].log_pdf).abs() < 1e-12);
        let longer = log_pdf(&lm, "p", 12.5, &fmt, Some('\n')).unwrap();
        assert!(longer.log_pdf < grid[0].log_pdf);
    }

    #[test]
    fn bimodal_table_grid_shows_two_local_maxima() {
        // discretized two-branch generator at x = 0: the low branch sits near
        // 0.03 and the high branch near 0.11, equally likely
        let table = TableLM::new()
            .entry(", ", vec![('0', 1.0)])
            .entry("0", vec![('.', 1.0)])
            .entry(".", vec![('0', 0.5), ('1', 0.5)])
            .entry(".0", vec![('2', 0.2), ('3', 0.6), ('4', 0.2)])
            .entry(".1", vec![('1', 0.6), ('2', 0.2), ('3', 0.2)])
            .entry("2", vec![('\n', 1.0)])
            .entry("3", vec![('\n', 1.0)])
            .entry("4", vec![('\n', 1.0)])
            .entry("1", vec![('\n', 1.0)])
            // grid scoring probes zero-mass digits outside the support
            .default_dist(vec![('\n', 1.0)]);
        let fmt = NumericFormat::new(2);
        let grid_values: Vec<f64> = (0..16).map(|i| i as f64 / 100.0).collect();
        let grid = density_grid(&table, "0, 0.03\n1, ", &grid_values, &fmt, Some('\n')).unwrap();
        let masses: Vec<f64> = grid.iter().map(|d| d.bin_mass).collect();
        let mut local_maxima = 0;
        for i in 1..masses.len() - 1 {
            if masses[i] > masses[i - 1] && masses[i] > masses[i + 1] && masses[i] > 0.0 {
                local_maxima += 1;
            }
        }
        assert_eq!(local_maxima, 2, "masses: {:?}", masses);
    }
}
