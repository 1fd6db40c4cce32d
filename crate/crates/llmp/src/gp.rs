//! RBF-kernel Gaussian-process regression baseline with hyperparameters
//! fitted by multi-start maximization of the log marginal likelihood.
//!
//! Multi-output data is handled as independent single-output fits per output
//! dimension.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum GpError {
    #[error("degenerate training data (fewer than two points, or all inputs identical)")]
    DegenerateData,
    #[error("kernel matrix is not positive definite even after jitter")]
    NumericalFailure,
}

/// RBF kernel hyperparameters; all strictly positive except that the noise
/// variance may be zero.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GpHyperparams {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

/// Posterior mean/variance per target, with Gaussian log-densities at the
/// true values when those are supplied. Variances include the fitted noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GpPosterior {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub log_pdfs: Option<Vec<f64>>,
}

/// Relative diagonal jitter added before factorization.
const JITTER_FACTOR: f64 = 1e-8;

fn rbf(a: &[f64], b: &[f64], ell: f64, sf2: f64) -> f64 {
    let d2: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(u, v)| (u - v) * (u - v))
        .sum();
    sf2 * (-d2 / (2.0 * ell * ell)).exp()
}

fn kernel_matrix(xs: &[Vec<f64>], h: &GpHyperparams) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rbf(&xs[i], &xs[j], h.length_scale, h.signal_variance);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += h.noise_variance + JITTER_FACTOR * h.signal_variance;
    }
    k
}

fn factorize(
    xs: &[Vec<f64>],
    ys: &[f64],
    h: &GpHyperparams,
) -> Result<(Cholesky<f64, Dyn>, DVector<f64>), GpError> {
    let k = kernel_matrix(xs, h);
    let chol = Cholesky::new(k).ok_or(GpError::NumericalFailure)?;
    let y = DVector::from_column_slice(ys);
    let alpha = chol.solve(&y);
    Ok((chol, alpha))
}

/// Gaussian log marginal likelihood of the data under `h`.
pub fn log_marginal_likelihood(
    xs: &[Vec<f64>],
    ys: &[f64],
    h: &GpHyperparams,
) -> Result<f64, GpError> {
    let n = xs.len() as f64;
    let (chol, alpha) = factorize(xs, ys, h)?;
    let y = DVector::from_column_slice(ys);
    let log_det_half: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum();
    Ok(-0.5 * y.dot(&alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

fn objective(xs: &[Vec<f64>], ys: &[f64], log_params: &[f64; 3]) -> f64 {
    let h = GpHyperparams {
        length_scale: log_params[0].exp(),
        signal_variance: log_params[1].exp(),
        noise_variance: log_params[2].exp(),
    };
    log_marginal_likelihood(xs, ys, &h).unwrap_or(f64::NEG_INFINITY)
}

/// Derivative-free pattern search over (ln l, ln sf2, ln sn2).
pub(crate) fn pattern_search(
    xs: &[Vec<f64>],
    ys: &[f64],
    start: [f64; 3],
) -> ([f64; 3], f64) {
    let mut point = start;
    let mut best = objective(xs, ys, &point);
    let mut step = 0.5;
    while step > 1e-5 {
        let mut improved = false;
        for coord in 0..3 {
            for sign in [1.0, -1.0] {
                let mut candidate = point;
                candidate[coord] += sign * step;
                let value = objective(xs, ys, &candidate);
                if value > best {
                    best = value;
                    point = candidate;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (point, best)
}

/// Fits hyperparameters by multi-start local search; the result attains at
/// least the likelihood of every start point.
pub fn gp_fit(
    xs: &[Vec<f64>],
    ys: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<GpHyperparams, GpError> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(GpError::DegenerateData);
    }
    if xs.iter().all(|x| x == &xs[0]) {
        return Err(GpError::DegenerateData);
    }

    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    let var_y = (ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum::<f64>()
        / ys.len() as f64)
        .max(1e-12);
    let mut spread = 0.0f64;
    for dim in 0..xs[0].len() {
        let lo = xs.iter().map(|x| x[dim]).fold(f64::INFINITY, f64::min);
        let hi = xs.iter().map(|x| x[dim]).fold(f64::NEG_INFINITY, f64::max);
        spread = spread.max(hi - lo);
    }
    let ell0 = (spread / 4.0).max(1e-3);

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut starts: Vec<[f64; 3]> = vec![[ell0.ln(), var_y.ln(), (0.05 * var_y).ln()]];
    for _ in 1..restarts.max(1) {
        starts.push([
            ell0.ln() + rng.gen_range(-2.0..2.0),
            var_y.ln() + rng.gen_range(-2.0..2.0),
            var_y.ln() + rng.gen_range(-8.0..0.0),
        ]);
    }

    let mut best_point = starts[0];
    let mut best_value = f64::NEG_INFINITY;
    for start in starts {
        let (point, value) = pattern_search(xs, ys, start);
        if value > best_value {
            best_value = value;
            best_point = point;
        }
    }
    if best_value.is_infinite() {
        return Err(GpError::NumericalFailure);
    }
    Ok(GpHyperparams {
        length_scale: best_point[0].exp(),
        signal_variance: best_point[1].exp(),
        noise_variance: best_point[2].exp(),
    })
}

/// Standard GP posterior at the target inputs.
pub fn gp_predict(
    h: &GpHyperparams,
    xs: &[Vec<f64>],
    ys: &[f64],
    targets: &[Vec<f64>],
    truths: Option<&[f64]>,
) -> Result<GpPosterior, GpError> {
    let (chol, alpha) = factorize(xs, ys, h)?;
    let mut means = Vec::with_capacity(targets.len());
    let mut variances = Vec::with_capacity(targets.len());
    for t in targets {
        let kstar = DVector::from_iterator(
            xs.len(),
            xs.iter().map(|x| rbf(x, t, h.length_scale, h.signal_variance)),
        );
        let mean = kstar.dot(&alpha);
        let v = chol.l().solve_lower_triangular(&kstar).unwrap();
        let var_latent = (h.signal_variance - v.dot(&v)).max(0.0);
        means.push(mean);
        variances.push(var_latent + h.noise_variance);
    }
    let log_pdfs = truths.map(|ts| {
        means
            .iter()
            .zip(variances.iter())
            .zip(ts.iter())
            .map(|((m, v), t)| gaussian_log_pdf(*t, *m, *v, h.signal_variance))
            .collect()
    });
    Ok(GpPosterior {
        means,
        variances,
        log_pdfs,
    })
}

fn gaussian_log_pdf(y: f64, mean: f64, var: f64, sf2: f64) -> f64 {
    // floor keeps interpolated (zero-variance) points finite
    let v = var.max(1e-18 * sf2).max(f64::MIN_POSITIVE);
    -0.5 * ((y - mean) * (y - mean) / v + v.ln() + (2.0 * std::f64::consts::PI).ln())
}

/// Per-output independent fits for multi-output observations.
pub fn gp_fit_multi(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    restarts: usize,
    seed: u64,
) -> Result<Vec<GpHyperparams>, GpError> {
    let arity = ys.first().map(|v| v.len()).unwrap_or(0);
    if arity == 0 {
        return Err(GpError::DegenerateData);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(arity);
    for dim in 0..arity {
        let column: Vec<f64> = ys.iter().map(|v| v[dim]).collect();
        out.push(gp_fit(xs, &column, restarts, rng.gen())?);
    }
    Ok(out)
}

/// Quantile of `N(mean, var)` at `percent`, for analytic band rendering.
pub fn gaussian_quantile(mean: f64, var: f64, percent: f64) -> f64 {
    mean + var.max(0.0).sqrt() * standard_normal_quantile(percent / 100.0)
}

/// Acklam's rational approximation to the standard normal inverse CDF,
/// accurate to about 1e-9 over (0, 1).
fn standard_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
