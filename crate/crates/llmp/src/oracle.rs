//! Brute-force reference computations used by the test and acceptance
//! suites.
//!
//! Everything here works directly off a mock model's raw conditionals via
//! [`TokenConditional`], never through the scoring or sampling code paths it
//! is used to check. The results match those paths exactly whenever the
//! model's support lies inside the scored vocabulary (so masking and
//! renormalization are the identity), which is how the verification fixtures
//! are constructed.

use crate::backend::{BackendError, TokenConditional};
use crate::numcodec::{parse_value, NumericFormat};

/// Probability that the model, continuing `prompt`, produces exactly
/// `string` followed by `terminal` (when given). Direct product of raw
/// conditionals.
pub fn string_probability<M: TokenConditional + ?Sized>(
    model: &M,
    prompt: &str,
    string: &str,
    terminal: Option<char>,
) -> Result<f64, BackendError> {
    let mut context = prompt.to_string();
    let mut prob = 1.0;
    let mut chars: Vec<char> = string.chars().collect();
    if let Some(t) = terminal {
        chars.push(t);
    }
    for c in chars {
        let dist = model.conditional(&context)?;
        let p = dist
            .iter()
            .find(|(tok, _)| *tok == c)
            .map(|(_, p)| *p)
            .unwrap_or(0.0);
        prob *= p;
        if prob == 0.0 {
            return Ok(0.0);
        }
        context.push(c);
    }
    Ok(prob)
}

/// Enumerates every complete generation of up to `max_tokens` tokens with its
/// probability. A generation ends when `stop` is drawn (excluded from the
/// string, its probability included) or at the token cap.
pub fn enumerate_generations<M: TokenConditional + ?Sized>(
    model: &M,
    prompt: &str,
    stop: Option<char>,
    max_tokens: usize,
) -> Result<Vec<(String, f64)>, BackendError> {
    let mut out = Vec::new();
    let mut context = prompt.to_string();
    let mut partial = String::new();
    walk(model, &mut context, &mut partial, 1.0, stop, max_tokens, &mut out)?;
    Ok(out)
}

fn walk<M: TokenConditional + ?Sized>(
    model: &M,
    context: &mut String,
    partial: &mut String,
    prob: f64,
    stop: Option<char>,
    remaining: usize,
    out: &mut Vec<(String, f64)>,
) -> Result<(), BackendError> {
    if remaining == 0 {
        out.push((partial.clone(), prob));
        return Ok(());
    }
    let dist = model.conditional(context)?;
    for (c, p) in dist {
        if p <= 0.0 {
            continue;
        }
        if Some(c) == stop {
            out.push((partial.clone(), prob * p));
            continue;
        }
        context.push(c);
        partial.push(c);
        walk(model, context, partial, prob * p, stop, remaining - 1, out)?;
        partial.pop();
        context.pop();
    }
    Ok(())
}

/// Distribution over parsed values conditional on rejection-sampling
/// acceptance: enumerates all generations, keeps those that parse, groups by
/// value and renormalizes.
pub fn accepted_value_distribution<M: TokenConditional + ?Sized>(
    model: &M,
    prompt: &str,
    fmt: &NumericFormat,
    stop: Option<char>,
    max_tokens: usize,
) -> Result<Vec<(f64, f64)>, BackendError> {
    let generations = enumerate_generations(model, prompt, stop, max_tokens)?;
    let mut grouped: Vec<(f64, f64)> = Vec::new();
    let mut accepted_mass = 0.0;
    for (s, p) in generations {
        let Ok(v) = parse_value(&s, fmt) else { continue };
        accepted_mass += p;
        match grouped.iter_mut().find(|(g, _)| g.to_bits() == v.to_bits()) {
            Some((_, gp)) => *gp += p,
            None => grouped.push((v, p)),
        }
    }
    for (_, p) in grouped.iter_mut() {
        *p /= accepted_mass;
    }
    grouped.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(grouped)
}

/// Total variation distance between an empirical sample and a reference
/// distribution over exact values.
pub fn total_variation(samples: &[f64], reference: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let mut tv = 0.0;
    let mut accounted = 0.0;
    for (v, p) in reference {
        let emp = samples
            .iter()
            .filter(|s| s.to_bits() == v.to_bits())
            .count() as f64
            / n;
        tv += (emp - p).abs();
        accounted += emp;
    }
    // sample values outside the reference support
    tv += 1.0 - accounted;
    tv / 2.0
}

/// GP posterior computed with naive Gaussian elimination instead of the
/// Cholesky path the `gp` module uses: `mean = k*ᵀ K⁻¹ y`,
/// `var = k** - k*ᵀ K⁻¹ k* + σn²`, with the same relative jitter.
pub fn gp_posterior_dense(
    h: &crate::gp::GpHyperparams,
    xs: &[Vec<f64>],
    ys: &[f64],
    targets: &[Vec<f64>],
) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let kern = |a: &[f64], b: &[f64]| -> f64 {
        let d2: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(u, v)| (u - v) * (u - v))
            .sum();
        h.signal_variance * (-d2 / (2.0 * h.length_scale * h.length_scale)).exp()
    };
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = kern(&xs[i], &xs[j]);
        }
        k[i][i] += h.noise_variance + 1e-8 * h.signal_variance;
    }
    let mut means = Vec::with_capacity(targets.len());
    let mut vars = Vec::with_capacity(targets.len());
    for t in targets {
        let kstar: Vec<f64> = xs.iter().map(|x| kern(x, t)).collect();
        let alpha = solve_dense(&k, ys);
        let beta = solve_dense(&k, &kstar);
        let mean: f64 = kstar.iter().zip(alpha.iter()).map(|(a, b)| a * b).sum();
        let quad: f64 = kstar.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        means.push(mean);
        vars.push((h.signal_variance - quad).max(0.0) + h.noise_variance);
    }
    (means, vars)
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(matrix: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut b: Vec<f64> = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for col in row + 1..n {
            sum -= a[row][col] * x[col];
        }
        x[row] = sum / a[row][row];
    }
    x
}
