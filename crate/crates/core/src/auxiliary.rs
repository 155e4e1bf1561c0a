//! Standardisation (auxiliary) functions for the Stein operator, and the
//! diagnostics that check whether an auxiliary function is well chosen.
//!
//! A diagonal auxiliary scales each coordinate of the test function by
//! `g_i(x)`; a matrix auxiliary premultiplies it by `G(x)`. On a compact
//! domain the auxiliary must vanish at the boundary (in the normal direction
//! for matrices) for Stein's identity to hold.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::domain::{barycentric, norm_sq};
use crate::error::{Error, Result};
use crate::linalg::rows;
use crate::model::DensityModel;

/// Values of a diagonal auxiliary and its per-coordinate partials at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalValues {
    pub g: Vec<f64>,
    /// `∂g_i / ∂x^i`.
    pub div: Vec<f64>,
}

/// Values of a matrix auxiliary and its column divergences at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixValues {
    pub g: DMatrix<f64>,
    /// `Σ_j ∂G_ji / ∂x^j`.
    pub col_div: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DensityRatio {
    q: Arc<DensityModel>,
    p: Arc<DensityModel>,
    log_normalizer: f64,
}

impl DensityRatio {
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    fn log_ratio(&self, x: &[f64]) -> f64 {
        self.q.log_density_unnorm(x) - self.p.log_density_unnorm(x)
    }
}

#[derive(Debug, Clone)]
pub enum DiagonalKind {
    ConstantOne,
    BallPower { p: f64 },
    SimplexGeomean,
    SimplexMinDist,
    DensityRatio(DensityRatio),
}

#[derive(Debug, Clone)]
pub struct DiagonalAux {
    kind: DiagonalKind,
    dim: usize,
    scale: f64,
}

impl DiagonalAux {
    pub fn kind(&self) -> &DiagonalKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The same auxiliary multiplied by a positive constant.
    pub fn scaled(&self, c: f64) -> Self {
        DiagonalAux {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<DiagonalValues> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let d = self.dim;
        let (g, div) = match &self.kind {
            DiagonalKind::ConstantOne => (vec![1.0; d], vec![0.0; d]),
            DiagonalKind::BallPower { p } => {
                let r2 = norm_sq(x);
                let r = r2.sqrt();
                let gval = 1.0 - r.powf(*p);
                let div = if r == 0.0 {
                    if *p < 2.0 {
                        return Err(Error::SingularDerivative(x.to_vec()));
                    }
                    vec![0.0; d]
                } else {
                    let c = -p * r.powf(p - 2.0);
                    x.iter().map(|v| c * v).collect()
                };
                (vec![gval; d], div)
            }
            DiagonalKind::SimplexGeomean => {
                let bary = interior_barycentric(x)?;
                let parts = bary.len() as f64;
                let gval = (bary.iter().map(|v| v.ln()).sum::<f64>() / parts).exp();
                let last = bary[d];
                let div = bary[..d]
                    .iter()
                    .map(|v| gval / parts * (1.0 / v - 1.0 / last))
                    .collect();
                (vec![gval; d], div)
            }
            DiagonalKind::SimplexMinDist => {
                let bary = interior_barycentric(x)?;
                // lowest index wins ties
                let mut active = 0;
                for (j, v) in bary.iter().enumerate() {
                    if *v < bary[active] {
                        active = j;
                    }
                }
                let div = (0..d)
                    .map(|i| {
                        if active == d {
                            -1.0
                        } else if active == i {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                (vec![bary[active]; d], div)
            }
            DiagonalKind::DensityRatio(r) => {
                let log_g = r.log_ratio(x) - r.log_normalizer;
                if log_g > 700.0 {
                    return Err(Error::RatioOverflow(log_g));
                }
                let gval = log_g.exp();
                let (sq, sp) = (r.q.score(x), r.p.score(x));
                let div = sq.iter().zip(&sp).map(|(a, b)| gval * (a - b)).collect();
                (vec![gval; d], div)
            }
        };
        Ok(self.apply_scale(DiagonalValues { g, div }))
    }

    fn apply_scale(&self, mut v: DiagonalValues) -> DiagonalValues {
        if self.scale != 1.0 {
            v.g.iter_mut().for_each(|a| *a *= self.scale);
            v.div.iter_mut().for_each(|a| *a *= self.scale);
        }
        v
    }
}

fn interior_barycentric(x: &[f64]) -> Result<Vec<f64>> {
    let bary = barycentric(x);
    if bary.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::OutsideDomain {
            point: x.to_vec(),
            domain: format!("open simplex with {} parts", bary.len()),
        });
    }
    Ok(bary)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixKind {
    /// Inverse Hessian of the negative entropy on the simplex.
    MirrorNegEntropy,
}

#[derive(Debug, Clone)]
pub struct MatrixAux {
    kind: MatrixKind,
    dim: usize,
    scale: f64,
}

impl MatrixAux {
    pub fn kind(&self) -> &MatrixKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scaled(&self, c: f64) -> Self {
        MatrixAux {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<MatrixValues> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        match self.kind {
            MatrixKind::MirrorNegEntropy => {
                interior_barycentric(x)?;
                let d = self.dim;
                let parts = (d + 1) as f64;
                let s = self.scale;
                let g = DMatrix::from_fn(d, d, |i, j| {
                    let diag = if i == j { x[i] } else { 0.0 };
                    s * (diag - x[i] * x[j])
                });
                let col_div = x.iter().map(|v| s * (1.0 - parts * v)).collect();
                Ok(MatrixValues { g, col_div })
            }
        }
    }
}

/// A diagonal or matrix-valued standardisation function.
#[derive(Debug, Clone)]
pub enum Auxiliary {
    Diagonal(DiagonalAux),
    Matrix(MatrixAux),
}

impl Auxiliary {
    pub fn dim(&self) -> usize {
        match self {
            Auxiliary::Diagonal(a) => a.dim(),
            Auxiliary::Matrix(a) => a.dim(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Auxiliary::Diagonal(a) => Auxiliary::Diagonal(a.scaled(c)),
            Auxiliary::Matrix(a) => Auxiliary::Matrix(a.scaled(c)),
        }
    }
}

impl From<DiagonalAux> for Auxiliary {
    fn from(a: DiagonalAux) -> Self {
        Auxiliary::Diagonal(a)
    }
}

impl From<MatrixAux> for Auxiliary {
    fn from(a: MatrixAux) -> Self {
        Auxiliary::Matrix(a)
    }
}

fn diagonal(kind: DiagonalKind, dim: usize) -> DiagonalAux {
    DiagonalAux {
        kind,
        dim,
        scale: 1.0,
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::InvalidParameter("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_parts(parts: usize) -> Result<()> {
    if parts < 2 {
        Err(Error::InvalidParameter("simplex needs at least two parts".into()))
    } else {
        Ok(())
    }
}

/// `g ≡ 1`: the classic Langevin Stein operator.
pub fn aux_constant_one(dim: usize) -> Result<DiagonalAux> {
    check_dim(dim)?;
    Ok(diagonal(DiagonalKind::ConstantOne, dim))
}

/// `g_i(x) = 1 - |x|^p`, vanishing on the unit sphere.
pub fn aux_ball_power(p: f64, dim: usize) -> Result<DiagonalAux> {
    check_dim(dim)?;
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("power must be positive, got {p}")));
    }
    Ok(diagonal(DiagonalKind::BallPower { p }, dim))
}

/// Geometric mean of all barycentric parts.
pub fn aux_simplex_geomean(parts: usize) -> Result<DiagonalAux> {
    check_parts(parts)?;
    Ok(diagonal(DiagonalKind::SimplexGeomean, parts - 1))
}

/// Smallest barycentric part, shared by every coordinate.
pub fn aux_simplex_mindist(parts: usize) -> Result<DiagonalAux> {
    check_parts(parts)?;
    Ok(diagonal(DiagonalKind::SimplexMinDist, parts - 1))
}

/// `G(x) = diag(x) - x xᵀ` in chart coordinates.
pub fn aux_mirror_negentropy(parts: usize) -> Result<MatrixAux> {
    check_parts(parts)?;
    Ok(MatrixAux {
        kind: MatrixKind::MirrorNegEntropy,
        dim: parts - 1,
        scale: 1.0,
    })
}

/// Self-normalised importance weight `q(x) / p(x)`; `normalizer_samples`
/// must be drawn from `p`.
pub fn aux_density_ratio(
    q_model: Arc<DensityModel>,
    p_model: Arc<DensityModel>,
    normalizer_samples: &DMatrix<f64>,
) -> Result<DiagonalAux> {
    let dim = q_model.dim();
    if p_model.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p_model.dim(),
        });
    }
    if q_model.domain() != p_model.domain() {
        return Err(Error::InvalidParameter(
            "density ratio requires models on the same domain".into(),
        ));
    }
    if normalizer_samples.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: normalizer_samples.ncols(),
        });
    }
    let n = normalizer_samples.nrows();
    if n < 100 {
        return Err(Error::TooFewSamples { needed: 100, got: n });
    }
    let log_ratios: Vec<f64> = rows(normalizer_samples)
        .iter()
        .map(|x| q_model.log_density_unnorm(x) - p_model.log_density_unnorm(x))
        .collect();
    if let Some(big) = log_ratios.iter().find(|v| **v > 700.0 || v.is_nan()) {
        return Err(Error::RatioOverflow(*big));
    }
    let log_normalizer = crate::model::log_sum_exp(&log_ratios) - (n as f64).ln();
    Ok(diagonal(
        DiagonalKind::DensityRatio(DensityRatio {
            q: q_model,
            p: p_model,
            log_normalizer,
        }),
        dim,
    ))
}

/// Sample means and standard errors of `g_i(x) ∂_i log q(x)` under the data.
/// Zero means the auxiliary is a stationary point of the discrepancy.
pub fn optimality_residual(
    aux: &DiagonalAux,
    q_model: &DensityModel,
    p_samples: &DMatrix<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let pts = rows(p_samples);
    if pts.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: pts.len(),
        });
    }
    let values = pts
        .iter()
        .enumerate()
        .map(|(r, x)| {
            let v = aux.evaluate(x).map_err(|e| e.at_row(r))?;
            let s = q_model.score(x);
            Ok(v.g.iter().zip(&s).map(|(g, s)| g * s).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(column_mean_and_stderr(&values, aux.dim()))
}

/// Per-coordinate sample mean of `g_i`; the variance constraint asks for 1.
pub fn variance_normalization(aux: &DiagonalAux, p_samples: &DMatrix<f64>) -> Result<Vec<f64>> {
    let pts = rows(p_samples);
    if pts.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: pts.len(),
        });
    }
    let values = pts
        .iter()
        .enumerate()
        .map(|(r, x)| aux.evaluate(x).map(|v| v.g).map_err(|e| e.at_row(r)))
        .collect::<Result<Vec<_>>>()?;
    Ok(column_mean_and_stderr(&values, aux.dim()).0)
}

pub(crate) fn column_mean_and_stderr(values: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = values.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in values {
        for (m, a) in mean.iter_mut().zip(v) {
            *m += a;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for v in values {
        for ((s, a), m) in var.iter_mut().zip(v).zip(&mean) {
            *s += (a - m) * (a - m);
        }
    }
    let stderr = var.iter().map(|s| (s / (n - 1.0)).sqrt() / n.sqrt()).collect();
    (mean, stderr)
}
