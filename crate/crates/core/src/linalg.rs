use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Smallest pivot accepted when factorising a covariance matrix.
pub const MIN_PIVOT: f64 = 1e-12;

/// Lower Cholesky factor of a symmetric matrix, rejecting any pivot at or
/// below [`MIN_PIVOT`].
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.ncols(),
        });
    }
    for i in 0..n {
        for j in 0..i {
            let (u, v) = (a[(i, j)], a[(j, i)]);
            if (u - v).abs() > 1e-10 * (1.0 + u.abs().max(v.abs())) {
                return Err(Error::InvalidParameter(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > MIN_PIVOT) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(l)
}

/// Inverse of `L Lᵀ` given the lower factor `L`.
pub fn inverse_from_cholesky(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut linv = DMatrix::<f64>::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[(i, k)] * linv[(k, col)];
            }
            linv[(i, col)] = s / l[(i, i)];
        }
    }
    linv.transpose() * linv
}

/// Rows of an `n x d` sample matrix as owned points.
pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Stack points as the rows of a matrix. `dim` fixes the width when `points` is empty.
pub fn from_rows(points: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), dim, |i, j| points[i][j])
}
