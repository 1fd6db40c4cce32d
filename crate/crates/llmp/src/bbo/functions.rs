//! The six benchmark objectives, in maximization convention: standard
//! minimization forms are negated (Branin additionally carries a 1/10 scale
//! so its maximum sits at -0.0398). Each function's dense-grid maximum is
//! validated against its pinned reference value.

use super::BboError;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BenchmarkFunction {
    Sinusoidal,
    Gramacy,
    Branin,
    Bohachevsky,
    Goldstein,
    Hartmann3,
}

impl BenchmarkFunction {
    pub const ALL: [BenchmarkFunction; 6] = [
        BenchmarkFunction::Sinusoidal,
        BenchmarkFunction::Gramacy,
        BenchmarkFunction::Branin,
        BenchmarkFunction::Bohachevsky,
        BenchmarkFunction::Goldstein,
        BenchmarkFunction::Hartmann3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkFunction::Sinusoidal => "sinusoidal",
            BenchmarkFunction::Gramacy => "gramacy",
            BenchmarkFunction::Branin => "branin",
            BenchmarkFunction::Bohachevsky => "bohachevsky",
            BenchmarkFunction::Goldstein => "goldstein",
            BenchmarkFunction::Hartmann3 => "hartmann3",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, BboError> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == name)
            .ok_or_else(|| BboError::UnknownFunction(name.to_string()))
    }

    pub fn dimension(&self) -> usize {
        match self {
            BenchmarkFunction::Sinusoidal | BenchmarkFunction::Gramacy => 1,
            BenchmarkFunction::Hartmann3 => 3,
            _ => 2,
        }
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            BenchmarkFunction::Sinusoidal => vec![(0.0, 2.0 * PI)],
            BenchmarkFunction::Gramacy => vec![(0.5, 2.5)],
            BenchmarkFunction::Branin => vec![(-5.0, 10.0), (0.0, 15.0)],
            BenchmarkFunction::Bohachevsky => vec![(-100.0, 100.0), (-100.0, 100.0)],
            BenchmarkFunction::Goldstein => vec![(-2.0, 2.0), (-2.0, 2.0)],
            BenchmarkFunction::Hartmann3 => vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
        }
    }

    /// Reference maximum each implementation is validated against.
    pub fn reference_max(&self) -> f64 {
        match self {
            BenchmarkFunction::Sinusoidal => 1.879,
            BenchmarkFunction::Gramacy => 0.869,
            BenchmarkFunction::Branin => -0.040,
            BenchmarkFunction::Bohachevsky => 0.000,
            BenchmarkFunction::Goldstein => -3.000,
            BenchmarkFunction::Hartmann3 => 3.863,
        }
    }

    /// Evaluates without bounds or dimension checks.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            BenchmarkFunction::Sinusoidal => {
                let x = x[0];
                x.cos() + (3.0 * x).sin()
            }
            BenchmarkFunction::Gramacy => {
                let x = x[0];
                -((10.0 * PI * x).sin() / (2.0 * x) + (x - 1.0).powi(4))
            }
            BenchmarkFunction::Branin => {
                let (x1, x2) = (x[0], x[1]);
                let a = x2 - 5.1 * x1 * x1 / (4.0 * PI * PI) + 5.0 * x1 / PI - 6.0;
                let b = 10.0 * (1.0 - 1.0 / (8.0 * PI)) * x1.cos();
                -(a * a + b + 10.0) / 10.0
            }
            BenchmarkFunction::Bohachevsky => {
                let (x1, x2) = (x[0], x[1]);
                -(x1 * x1 + 2.0 * x2 * x2
                    - 0.3 * (3.0 * PI * x1).cos()
                    - 0.4 * (4.0 * PI * x2).cos()
                    + 0.7)
            }
            BenchmarkFunction::Goldstein => {
                let (a, b) = (x[0], x[1]);
                let t1 = 1.0
                    + (a + b + 1.0).powi(2)
                        * (19.0 - 14.0 * a + 3.0 * a * a - 14.0 * b + 6.0 * a * b + 3.0 * b * b);
                let t2 = 30.0
                    + (2.0 * a - 3.0 * b).powi(2)
                        * (18.0 - 32.0 * a + 12.0 * a * a + 48.0 * b - 36.0 * a * b
                            + 27.0 * b * b);
                -(t1 * t2)
            }
            BenchmarkFunction::Hartmann3 => {
                const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
                const A: [[f64; 3]; 4] = [
                    [3.0, 10.0, 30.0],
                    [0.1, 10.0, 35.0],
                    [3.0, 10.0, 30.0],
                    [0.1, 10.0, 35.0],
                ];
                const P: [[f64; 3]; 4] = [
                    [0.3689, 0.1170, 0.2673],
                    [0.4699, 0.4387, 0.7470],
                    [0.1091, 0.8732, 0.5547],
                    [0.0381, 0.5743, 0.8828],
                ];
                let mut sum = 0.0;
                for i in 0..4 {
                    let mut inner = 0.0;
                    for j in 0..3 {
                        inner += A[i][j] * (x[j] - P[i][j]).powi(2);
                    }
                    sum += ALPHA[i] * (-inner).exp();
                }
                sum
            }
        }
    }

    /// Checked evaluation in the maximization convention.
    pub fn eval(&self, x: &[f64]) -> Result<f64, BboError> {
        if x.len() != self.dimension() {
            return Err(BboError::WrongDimension);
        }
        for (v, (lo, hi)) in x.iter().zip(self.bounds()) {
            if !(lo..=hi).contains(v) {
                return Err(BboError::OutOfBounds);
            }
        }
        Ok(self.eval_unchecked(x))
    }

    /// Maximum over a dense axis-aligned grid with `points_per_dim` points
    /// per dimension.
    pub fn grid_max(&self, points_per_dim: usize) -> (f64, Vec<f64>) {
        let bounds = self.bounds();
        let dims = bounds.len();
        let axis = |d: usize, i: usize| -> f64 {
            let (lo, hi) = bounds[d];
            lo + (hi - lo) * i as f64 / (points_per_dim - 1) as f64
        };
        let mut best = f64::NEG_INFINITY;
        let mut best_x = vec![0.0; dims];
        let mut idx = vec![0usize; dims];
        let mut x = vec![0.0; dims];
        loop {
            for d in 0..dims {
                x[d] = axis(d, idx[d]);
            }
            let v = self.eval_unchecked(&x);
            if v > best {
                best = v;
                best_x.copy_from_slice(&x);
            }
            // odometer increment
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < points_per_dim {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dims {
                    return (best, best_x);
                }
            }
        }
    }

    /// Grid resolution that locates the maximum to well within 1e-2.
    pub fn validation_grid_points(&self) -> usize {
        match self {
            BenchmarkFunction::Sinusoidal => 20_001,
            BenchmarkFunction::Gramacy => 20_001,
            BenchmarkFunction::Branin => 1_501,
            BenchmarkFunction::Bohachevsky => 6_001,
            BenchmarkFunction::Goldstein => 2_001,
            BenchmarkFunction::Hartmann3 => 181,
        }
    }
}
