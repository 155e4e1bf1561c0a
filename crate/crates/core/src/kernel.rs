//! Reproducing kernels with the derivative blocks used by Stein kernels.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value and first/second derivatives of `k(x, y)` at one pair of points.
#[derive(Debug, Clone)]
pub struct KernelDerivatives {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
    /// Row-major `d x d` block of `∂²k / ∂x_i ∂y_j`.
    pub mixed: Vec<f64>,
}

impl KernelDerivatives {
    pub fn new(dim: usize) -> Self {
        KernelDerivatives {
            value: 0.0,
            grad_x: vec![0.0; dim],
            grad_y: vec![0.0; dim],
            mixed: vec![0.0; dim * dim],
        }
    }

    pub fn mixed_at(&self, i: usize, j: usize) -> f64 {
        self.mixed[i * self.grad_x.len() + j]
    }
}

pub trait SmoothKernel: Send + Sync {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64;

    /// Fill `out` with the value and derivative blocks at `(x, y)`.
    fn derivatives_into(&self, x: &[f64], y: &[f64], out: &mut KernelDerivatives);

    fn derivatives(&self, x: &[f64], y: &[f64]) -> KernelDerivatives {
        let mut out = KernelDerivatives::new(x.len());
        self.derivatives_into(x, y, &mut out);
        out
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.derivatives(x, y).grad_x
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.derivatives(x, y).grad_y
    }

    fn mixed_second(&self, x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        DMatrix::from_row_slice(d, d, &self.derivatives(x, y).mixed)
    }
}

/// Gaussian kernel `k(x, y) = exp(-|x - y|² / σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rbf {
    bandwidth_sq: f64,
}

impl Rbf {
    pub fn new(bandwidth_sq: f64) -> Result<Self> {
        if !(bandwidth_sq > 0.0) || !bandwidth_sq.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {bandwidth_sq}"
            )));
        }
        Ok(Rbf { bandwidth_sq })
    }

    pub fn bandwidth_sq(&self) -> f64 {
        self.bandwidth_sq
    }
}

pub fn rbf(bandwidth_sq: f64) -> Result<Rbf> {
    Rbf::new(bandwidth_sq)
}

impl SmoothKernel for Rbf {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        (-r2 / self.bandwidth_sq).exp()
    }

    fn derivatives_into(&self, x: &[f64], y: &[f64], out: &mut KernelDerivatives) {
        let d = x.len();
        let k = self.eval(x, y);
        let a = 2.0 / self.bandwidth_sq;
        out.value = k;
        for i in 0..d {
            let diff = x[i] - y[i];
            out.grad_x[i] = -a * diff * k;
            out.grad_y[i] = a * diff * k;
        }
        for i in 0..d {
            let di = x[i] - y[i];
            for j in 0..d {
                let dj = x[j] - y[j];
                let delta = if i == j { a } else { 0.0 };
                out.mixed[i * d + j] = k * (delta - a * a * di * dj);
            }
        }
    }
}

/// Median of the squared pairwise distances (lower median for even counts).
pub fn median_heuristic(samples: &DMatrix<f64>) -> Result<f64> {
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| samples.row(i).iter().copied().collect()).collect();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(
                rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>(),
            );
        }
    }
    if dists.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateBandwidth);
    }
    let mid = (dists.len() - 1) / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    Ok(*median)
}
