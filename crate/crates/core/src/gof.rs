//! Goodness-of-fit decisions: wild-bootstrap calibration of the Stein
//! discrepancy U-statistic and a permutation-calibrated MMD baseline.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::SmoothKernel;
use crate::linalg::rows;
use crate::sampling::RngStream;
use crate::stein::{u_statistic, SteinKernelSpec};

pub const DEFAULT_BOOTSTRAP: usize = 300;
pub const DEFAULT_PERMUTATIONS: usize = 200;
pub const DEFAULT_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    pub n: usize,
    #[serde(rename = "B")]
    pub bootstrap_draws: usize,
    pub seed: u64,
}

impl TestResult {
    fn from_null_draws(statistic: f64, mut draws: Vec<f64>, level: f64, n: usize, seed: u64) -> Self {
        let b = draws.len();
        let exceed = draws.iter().filter(|d| **d >= statistic).count();
        draws.sort_by(|a, b| a.total_cmp(b));
        let threshold = draws[quantile_index(level, b)];
        TestResult {
            statistic,
            threshold,
            p_value: (1 + exceed) as f64 / (1 + b) as f64,
            reject: statistic > threshold,
            n,
            bootstrap_draws: b,
            seed,
        }
    }
}

/// Zero-based index of the `⌈(1-α)B⌉`-th order statistic.
fn quantile_index(level: f64, b: usize) -> usize {
    let k = ((1.0 - level) * b as f64 - 1e-9).ceil() as usize;
    k.clamp(1, b) - 1
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")))
    }
}

/// `(εᵀHε - tr H) / (n(n-1))`: the U-statistic with sign multipliers.
pub fn bootstrap_draw(h: &DMatrix<f64>, eps: &[f64]) -> f64 {
    let n = h.nrows();
    let data = h.as_slice();
    let mut quad = 0.0;
    let mut trace = 0.0;
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        let s: f64 = col.iter().zip(eps).map(|(a, e)| a * e).sum();
        quad += eps[j] * s;
        trace += col[j];
    }
    (quad - trace) / (n * (n - 1)) as f64
}

/// Wild-bootstrap replicates with Rademacher multipliers; draw `b` uses
/// stream `(seed, b)`.
pub fn wild_bootstrap_draws(h: &DMatrix<f64>, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let n = h.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if draws == 0 {
        return Err(Error::InvalidParameter("need at least one bootstrap draw".into()));
    }
    Ok((0..draws)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b as u64).rng();
            let eps: Vec<f64> = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            bootstrap_draw(h, &eps)
        })
        .collect())
}

/// Test `H0: samples ~ q` with the Stein discrepancy of `spec`.
pub fn ksd_test<K: SmoothKernel>(
    spec: &SteinKernelSpec<K>,
    samples: &DMatrix<f64>,
    level: f64,
    bootstrap: usize,
    seed: u64,
) -> Result<TestResult> {
    check_level(level)?;
    let n = samples.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let h = spec.gram_matrix(samples)?;
    let stat = u_statistic(&h)?;
    let draws = wild_bootstrap_draws(&h, bootstrap, seed)?;
    Ok(TestResult::from_null_draws(stat, draws, level, n, seed))
}

fn check_two_samples(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    for m in [x, y] {
        if m.nrows() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: m.nrows(),
            });
        }
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    Ok(())
}

/// Unbiased squared MMD between the rows of `x` and `y`.
pub fn mmd_u_statistic<K: SmoothKernel>(x: &DMatrix<f64>, y: &DMatrix<f64>, kernel: &K) -> Result<f64> {
    check_two_samples(x, y)?;
    let (xs, ys) = (rows(x), rows(y));
    let pooled: Vec<Vec<f64>> = xs.into_iter().chain(ys).collect();
    let gram = pooled_gram(&pooled, kernel);
    let labels: Vec<bool> = (0..pooled.len()).map(|i| i < x.nrows()).collect();
    Ok(mmd_from_gram(&gram, &labels, x.nrows()))
}

fn pooled_gram<K: SmoothKernel>(pooled: &[Vec<f64>], kernel: &K) -> Vec<Vec<f64>> {
    let n = pooled.len();
    // upper triangle only, row i holds entries (i, i+1..n)
    (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| kernel.eval(&pooled[i], &pooled[j])).collect())
        .collect()
}

fn mmd_from_gram(upper: &[Vec<f64>], in_x: &[bool], nx: usize) -> f64 {
    let ny = in_x.len() - nx;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (i, row) in upper.iter().enumerate() {
        for (off, k) in row.iter().enumerate() {
            let j = i + 1 + off;
            match (in_x[i], in_x[j]) {
                (true, true) => sxx += k,
                (false, false) => syy += k,
                _ => sxy += k,
            }
        }
    }
    let (nx, ny) = (nx as f64, ny as f64);
    2.0 * sxx / (nx * (nx - 1.0)) + 2.0 * syy / (ny * (ny - 1.0)) - 2.0 * sxy / (nx * ny)
}

/// Permutation two-sample test on the pooled sample; permutation `b` uses
/// stream `(seed, b)`.
pub fn mmd_test<K: SmoothKernel>(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    kernel: &K,
    level: f64,
    permutations: usize,
    seed: u64,
) -> Result<TestResult> {
    check_level(level)?;
    check_two_samples(x, y)?;
    if permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let nx = x.nrows();
    let pooled: Vec<Vec<f64>> = rows(x).into_iter().chain(rows(y)).collect();
    let total = pooled.len();
    let gram = pooled_gram(&pooled, kernel);
    let labels: Vec<bool> = (0..total).map(|i| i < nx).collect();
    let stat = mmd_from_gram(&gram, &labels, nx);
    let draws: Vec<f64> = (0..permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b as u64).rng();
            let mut perm = labels.clone();
            perm.shuffle(&mut rng);
            mmd_from_gram(&gram, &perm, nx)
        })
        .collect();
    Ok(TestResult::from_null_draws(stat, draws, level, total, seed))
}
