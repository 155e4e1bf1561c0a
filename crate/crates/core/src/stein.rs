//! Closed-form Stein kernels for the standardised Stein operator and the
//! U/V-statistic estimators of the squared discrepancy.
//!
//! For a diagonal auxiliary `g` the operator applied to the feature map
//! `K(x, ·)` has coordinates `u_i(x) k(x, ·) + g_i(x) ∂_{x_i} k(x, ·)` with
//! `u_i = g_i ∂_i log q + ∂_i g_i`; the Stein kernel is the RKHS inner
//! product of two such elements, summed over coordinates. The matrix case
//! replaces `g_i ∂_i` by `Σ_j G_ji ∂_j`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::auxiliary::Auxiliary;
use crate::error::{Error, Result};
use crate::kernel::{KernelDerivatives, Rbf, SmoothKernel};
use crate::linalg::rows;
use crate::model::DensityModel;

/// Model, kernel and auxiliary function defining one Stein kernel.
#[derive(Debug, Clone)]
pub struct SteinKernelSpec<K = Rbf> {
    model: Arc<DensityModel>,
    kernel: K,
    aux: Auxiliary,
}

/// Per-point quantities that do not depend on the second argument.
#[derive(Debug, Clone)]
enum PointTerms {
    Diagonal { u: Vec<f64>, g: Vec<f64> },
    Matrix { u: Vec<f64>, g: DMatrix<f64> },
}

impl<K: SmoothKernel> SteinKernelSpec<K> {
    pub fn new(model: Arc<DensityModel>, kernel: K, aux: impl Into<Auxiliary>) -> Result<Self> {
        let aux = aux.into();
        if aux.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: aux.dim(),
            });
        }
        Ok(SteinKernelSpec { model, kernel, aux })
    }

    pub fn model(&self) -> &DensityModel {
        &self.model
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn aux(&self) -> &Auxiliary {
        &self.aux
    }

    pub fn with_aux(&self, aux: impl Into<Auxiliary>) -> Result<Self>
    where
        K: Clone,
    {
        Self::new(self.model.clone(), self.kernel.clone(), aux)
    }

    fn point_terms(&self, x: &[f64]) -> Result<PointTerms> {
        self.model.domain().check(x)?;
        let s = self.model.score(x);
        match &self.aux {
            Auxiliary::Diagonal(a) => {
                let v = a.evaluate(x)?;
                let u = v
                    .g
                    .iter()
                    .zip(&s)
                    .zip(&v.div)
                    .map(|((g, s), dg)| g * s + dg)
                    .collect();
                Ok(PointTerms::Diagonal { u, g: v.g })
            }
            Auxiliary::Matrix(a) => {
                let v = a.evaluate(x)?;
                let d = s.len();
                let u = (0..d)
                    .map(|i| (0..d).map(|j| v.g[(j, i)] * s[j]).sum::<f64>() + v.col_div[i])
                    .collect();
                Ok(PointTerms::Matrix { u, g: v.g })
            }
        }
    }

    fn pair(&self, x: &[f64], tx: &PointTerms, y: &[f64], ty: &PointTerms, kd: &mut KernelDerivatives) -> f64 {
        self.kernel.derivatives_into(x, y, kd);
        let k = kd.value;
        match (tx, ty) {
            (PointTerms::Diagonal { u: ux, g: gx }, PointTerms::Diagonal { u: uy, g: gy }) => {
                let mut h = 0.0;
                for i in 0..ux.len() {
                    h += ux[i] * uy[i] * k
                        + ux[i] * gy[i] * kd.grad_y[i]
                        + uy[i] * gx[i] * kd.grad_x[i]
                        + gx[i] * gy[i] * kd.mixed_at(i, i);
                }
                h
            }
            (PointTerms::Matrix { u: ux, g: gx }, PointTerms::Matrix { u: uy, g: gy }) => {
                let d = ux.len();
                let mut h = 0.0;
                for i in 0..d {
                    let mut dy = 0.0;
                    let mut dx = 0.0;
                    for j in 0..d {
                        dy += gy[(j, i)] * kd.grad_y[j];
                        dx += gx[(j, i)] * kd.grad_x[j];
                    }
                    let mut second = 0.0;
                    for j in 0..d {
                        for l in 0..d {
                            second += gx[(j, i)] * gy[(l, i)] * kd.mixed_at(j, l);
                        }
                    }
                    h += ux[i] * uy[i] * k + ux[i] * dy + uy[i] * dx + second;
                }
                h
            }
            _ => unreachable!("both points share one auxiliary"),
        }
    }

    /// `h(x, y)` for two interior points.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let tx = self.point_terms(x)?;
        let ty = self.point_terms(y)?;
        let mut kd = KernelDerivatives::new(x.len());
        Ok(self.pair(x, &tx, y, &ty, &mut kd))
    }

    /// Stein kernel matrix over the rows of `samples`. Each unordered pair is
    /// evaluated once, so the result is exactly symmetric and independent of
    /// the number of worker threads.
    pub fn gram_matrix(&self, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if samples.ncols() != self.model.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim(),
                got: samples.ncols(),
            });
        }
        let pts = rows(samples);
        let terms = pts
            .iter()
            .enumerate()
            .map(|(r, x)| self.point_terms(x).map_err(|e| e.at_row(r)))
            .collect::<Result<Vec<_>>>()?;
        let n = pts.len();
        let dim = self.model.dim();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map_init(
                || KernelDerivatives::new(dim),
                |kd, i| {
                    (i..n)
                        .map(|j| self.pair(&pts[i], &terms[i], &pts[j], &terms[j], kd))
                        .collect()
                },
            )
            .collect();
        let mut h = DMatrix::zeros(n, n);
        for (i, row) in upper.iter().enumerate() {
            for (off, v) in row.iter().enumerate() {
                h[(i, i + off)] = *v;
                h[(i + off, i)] = *v;
            }
        }
        Ok(h)
    }
}

pub fn stein_kernel_eval<K: SmoothKernel>(spec: &SteinKernelSpec<K>, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.eval(x, y)
}

pub fn gram_matrix<K: SmoothKernel>(spec: &SteinKernelSpec<K>, samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.gram_matrix(samples)
}

/// Unbiased estimate: mean of the off-diagonal entries.
pub fn u_statistic(h: &DMatrix<f64>) -> Result<f64> {
    let n = h.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += h[(i, j)];
            }
        }
    }
    Ok(total / (n * (n - 1)) as f64)
}

/// Biased estimate: mean of all entries.
pub fn v_statistic(h: &DMatrix<f64>) -> Result<f64> {
    let n = h.nrows();
    if n < 1 {
        return Err(Error::TooFewSamples { needed: 1, got: n });
    }
    Ok(h.iter().sum::<f64>() / (n * n) as f64)
}
