//! Unnormalised target densities with analytic score functions.
//!
//! Truncating a model to a compact domain changes neither its unnormalised
//! log-density nor its score, so truncated models are the untruncated family
//! paired with a compact [`Domain`].

use nalgebra::{DMatrix, DVector};

use crate::domain::{barycentric, Domain};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, inverse_from_cholesky};

#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    chol: DMatrix<f64>,
    half_log_det: f64,
}

impl Gaussian {
    pub fn new(mean: &[f64], covariance: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter("empty mean vector".into()));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: covariance.nrows(),
            });
        }
        let chol = cholesky_lower(covariance)?;
        let precision = inverse_from_cholesky(&chol);
        let half_log_det = chol.diagonal().iter().map(|v| v.ln()).sum();
        Ok(Gaussian {
            mean: DVector::from_column_slice(mean),
            covariance: covariance.clone(),
            precision,
            chol,
            half_log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    fn centered(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m))
    }

    /// `-(x-m)ᵀ P (x-m) / 2`, no normalising constant.
    pub fn log_kernel(&self, x: &[f64]) -> f64 {
        let c = self.centered(x);
        -0.5 * c.dot(&(&self.precision * &c))
    }

    /// Log density up to the dimension-only constant `-(d/2) log 2π`.
    fn log_density_up_to_pi(&self, x: &[f64]) -> f64 {
        self.log_kernel(x) - self.half_log_det
    }

    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let c = self.centered(x);
        (-(&self.precision * c)).iter().copied().collect()
    }
}

#[derive(Debug, Clone)]
pub struct Mixture {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl Mixture {
    pub fn new(weights: &[f64], components: Vec<Gaussian>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter("mixture has no components".into()));
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParameter("mixture weight outside [0, 1]".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        Ok(Mixture {
            weights: weights.to_vec(),
            components,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| {
                if *w > 0.0 {
                    w.ln() + c.log_density_up_to_pi(x)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    pub fn log_density_unnorm(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.log_terms(x))
    }

    /// Posterior component probabilities, computed with a stabilised softmax.
    pub fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let terms = self.log_terms(x);
        let lse = log_sum_exp(&terms);
        terms.iter().map(|t| (t - lse).exp()).collect()
    }

    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let r = self.responsibilities(x);
        let mut out = vec![0.0; x.len()];
        for (rc, comp) in r.iter().zip(&self.components) {
            if *rc == 0.0 {
                continue;
            }
            for (o, s) in out.iter_mut().zip(comp.score(x)) {
                *o += rc * s;
            }
        }
        out
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone)]
pub enum Family {
    Gaussian(Gaussian),
    Mixture(Mixture),
    Dirichlet { alpha: Vec<f64> },
}

/// An unnormalised density together with its score and support.
///
/// Values are immutable after construction and `Send + Sync`.
#[derive(Debug, Clone)]
pub struct DensityModel {
    family: Family,
    domain: Domain,
}

impl DensityModel {
    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Chart dimension.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn log_density_unnorm(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::Gaussian(g) => g.log_kernel(x),
            Family::Mixture(m) => m.log_density_unnorm(x),
            Family::Dirichlet { alpha } => barycentric(x)
                .iter()
                .zip(alpha)
                .map(|(v, a)| (a - 1.0) * v.ln())
                .sum(),
        }
    }

    /// Gradient of the log density in chart coordinates.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        match &self.family {
            Family::Gaussian(g) => g.score(x),
            Family::Mixture(m) => m.score(x),
            Family::Dirichlet { alpha } => {
                let d = alpha.len();
                let last = 1.0 - x.iter().sum::<f64>();
                let tail = (alpha[d - 1] - 1.0) / last;
                x.iter()
                    .zip(alpha)
                    .map(|(v, a)| (a - 1.0) / v - tail)
                    .collect()
            }
        }
    }
}

fn check_domain_dim(domain: &Domain, dim: usize) -> Result<()> {
    domain.validate()?;
    if domain.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: domain.dim(),
        });
    }
    Ok(())
}

pub fn make_gaussian(mean: &[f64], covariance: &DMatrix<f64>, domain: Domain) -> Result<DensityModel> {
    let g = Gaussian::new(mean, covariance)?;
    check_domain_dim(&domain, g.dim())?;
    if matches!(domain, Domain::SimplexChart { .. }) {
        return Err(Error::InvalidParameter(
            "Gaussian models live on Euclidean domains".into(),
        ));
    }
    Ok(DensityModel {
        family: Family::Gaussian(g),
        domain,
    })
}

pub fn make_gaussian_mixture(
    weights: &[f64],
    means: &[Vec<f64>],
    covariances: &[DMatrix<f64>],
    domain: Domain,
) -> Result<DensityModel> {
    if means.len() != covariances.len() {
        return Err(Error::DimensionMismatch {
            expected: means.len(),
            got: covariances.len(),
        });
    }
    let components = means
        .iter()
        .zip(covariances)
        .map(|(m, c)| Gaussian::new(m, c))
        .collect::<Result<Vec<_>>>()?;
    let mix = Mixture::new(weights, components)?;
    check_domain_dim(&domain, mix.components[0].dim())?;
    if matches!(domain, Domain::SimplexChart { .. }) {
        return Err(Error::InvalidParameter(
            "Gaussian mixtures live on Euclidean domains".into(),
        ));
    }
    Ok(DensityModel {
        family: Family::Mixture(mix),
        domain,
    })
}

/// Dirichlet density on the open simplex with `alpha.len()` parts.
pub fn make_dirichlet_chart(alpha: &[f64]) -> Result<DensityModel> {
    if alpha.len() < 2 {
        return Err(Error::InvalidParameter(
            "Dirichlet needs at least two concentration parameters".into(),
        ));
    }
    if alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter(
            "Dirichlet concentrations must be positive".into(),
        ));
    }
    Ok(DensityModel {
        family: Family::Dirichlet {
            alpha: alpha.to_vec(),
        },
        domain: Domain::simplex(alpha.len())?,
    })
}

/// Covariance with correlation `nu` between the first two coordinates.
pub fn correlated_covariance(dim: usize, nu: f64) -> DMatrix<f64> {
    let mut c = DMatrix::identity(dim, dim);
    if dim >= 2 {
        c[(0, 1)] = nu;
        c[(1, 0)] = nu;
    }
    c
}

/// Largest central-difference residual between the log density and the score.
pub fn check_score_consistency(model: &DensityModel, x: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("step must be positive".into()));
    }
    model.domain().check(x)?;
    let score = model.score(x);
    let mut worst = 0.0_f64;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        model.domain().check(&probe)?;
        let up = model.log_density_unnorm(&probe);
        probe[i] = x[i] - step;
        model.domain().check(&probe)?;
        let down = model.log_density_unnorm(&probe);
        probe[i] = x[i];
        worst = worst.max(((up - down) / (2.0 * step) - score[i]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(d: usize) -> DMatrix<f64> {
        DMatrix::identity(d, d)
    }

    #[test]
    fn standard_normal_score() {
        let m = make_gaussian(&[0.0], &eye(1), Domain::full_space(1).unwrap()).unwrap();
        assert_eq!(m.score(&[2.0]), vec![-2.0]);
    }

    #[test]
    fn identity_covariance_score() {
        let m = make_gaussian(&[0.0; 3], &correlated_covariance(3, 0.0), Domain::full_space(3).unwrap())
            .unwrap();
        assert_eq!(m.score(&[1.0, 1.0, 1.0]), vec![-1.0, -1.0, -1.0]);
    }

    #[test]
    fn correlated_covariance_score() {
        // inverse of [[1, .5], [.5, 1]] is (4/3) [[1, -.5], [-.5, 1]]
        let m = make_gaussian(&[0.0; 3], &correlated_covariance(3, 0.5), Domain::unit_ball(3).unwrap())
            .unwrap();
        let s = m.score(&[1.0, 0.0, 0.0]);
        assert!((s[0] + 4.0 / 3.0).abs() < 1e-14);
        assert!((s[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!(s[2].abs() < 1e-14);
    }

    #[test]
    fn gaussian_errors() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            make_gaussian(&[0.0, 0.0], &bad, Domain::full_space(2).unwrap()),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(
            make_gaussian(&[0.0, 0.0], &eye(3), Domain::full_space(2).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            make_gaussian(&[0.0, 0.0], &eye(2), Domain::full_space(3).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_component_mixture_matches_gaussian() {
        let cov = correlated_covariance(2, 0.3);
        let dom = Domain::full_space(2).unwrap();
        let g = make_gaussian(&[0.2, -0.1], &cov, dom.clone()).unwrap();
        let m = make_gaussian_mixture(&[1.0], &[vec![0.2, -0.1]], &[cov], dom).unwrap();
        for k in 0..10 {
            let x = [0.37 * k as f64 - 1.5, (k as f64 * 1.3).sin()];
            let (a, b) = (g.score(&x), m.score(&x));
            assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn duplicated_components_match_single() {
        let dom = Domain::full_space(1).unwrap();
        let g = make_gaussian(&[0.4], &eye(1), dom.clone()).unwrap();
        let m = make_gaussian_mixture(&[0.5, 0.5], &[vec![0.4], vec![0.4]], &[eye(1), eye(1)], dom)
            .unwrap();
        for x in [-2.0, 0.1, 3.3] {
            assert!((g.score(&[x])[0] - m.score(&[x])[0]).abs() < 1e-13);
        }
    }

    #[test]
    fn symmetric_mixture_zero_score_at_origin() {
        let m = make_gaussian_mixture(
            &[0.5, 0.5],
            &[vec![-1.0], vec![1.0]],
            &[eye(1), eye(1)],
            Domain::full_space(1).unwrap(),
        )
        .unwrap();
        assert!(m.score(&[0.0])[0].abs() < 1e-15);
    }

    #[test]
    fn separated_mixture_does_not_underflow() {
        let m = make_gaussian_mixture(
            &[0.5, 0.5],
            &[vec![-100.0], vec![100.0]],
            &[eye(1), eye(1)],
            Domain::full_space(1).unwrap(),
        )
        .unwrap();
        let s = m.score(&[60.0])[0];
        assert!((s - 40.0).abs() < 1e-9, "{s}");
        assert!(m.log_density_unnorm(&[0.0]).is_finite());
    }

    #[test]
    fn mixture_errors() {
        let dom = Domain::full_space(1).unwrap();
        assert!(make_gaussian_mixture(&[], &[], &[], dom.clone()).is_err());
        assert!(make_gaussian_mixture(&[1.5, -0.5], &[vec![0.0], vec![1.0]], &[eye(1), eye(1)], dom.clone())
            .is_err());
        assert!(make_gaussian_mixture(&[0.5, 0.4], &[vec![0.0], vec![1.0]], &[eye(1), eye(1)], dom).is_err());
    }

    #[test]
    fn dirichlet_scores() {
        let u = make_dirichlet_chart(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(u.dim(), 2);
        assert_eq!(u.score(&[0.2, 0.5]), vec![0.0, 0.0]);
        let h = make_dirichlet_chart(&[0.5, 0.5, 0.5]).unwrap();
        let s = h.score(&[1.0 / 3.0, 1.0 / 3.0]);
        assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14);
        let a = make_dirichlet_chart(&[2.0, 1.0, 1.0]).unwrap();
        let s = a.score(&[0.5, 0.25]);
        assert!((s[0] - 2.0).abs() < 1e-14 && s[1].abs() < 1e-14);
        assert!(make_dirichlet_chart(&[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn score_consistency_examples() {
        let n = make_gaussian(&[0.0], &eye(1), Domain::full_space(1).unwrap()).unwrap();
        assert!(check_score_consistency(&n, &[0.7], 1e-5).unwrap() < 1e-6);
        let d = make_dirichlet_chart(&[0.5, 0.5, 0.5]).unwrap();
        assert!(check_score_consistency(&d, &[0.4, 0.3], 1e-6).unwrap() < 1e-4);
        let m = make_gaussian_mixture(
            &[0.3, 0.7],
            &[vec![-1.0], vec![2.0]],
            &[eye(1), DMatrix::from_element(1, 1, 0.5)],
            Domain::full_space(1).unwrap(),
        )
        .unwrap();
        assert!(check_score_consistency(&m, &[0.3], 1e-5).unwrap() < 1e-6);
    }

    #[test]
    fn score_consistency_rejects_boundary() {
        let d = make_dirichlet_chart(&[0.5, 0.5, 0.5]).unwrap();
        assert!(check_score_consistency(&d, &[0.0, 0.3], 1e-6).is_err());
        assert!(check_score_consistency(&d, &[1e-8, 0.3], 1e-6).is_err());
    }

    #[test]
    fn truncation_leaves_score_unchanged() {
        let cov = correlated_covariance(3, 0.5);
        let full = make_gaussian(&[0.1, 0.0, -0.2], &cov, Domain::full_space(3).unwrap()).unwrap();
        let ball = make_gaussian(&[0.1, 0.0, -0.2], &cov, Domain::unit_ball(3).unwrap()).unwrap();
        for x in [[0.1, 0.2, 0.3], [-0.5, 0.5, 0.0], [0.0, 0.0, 0.9]] {
            assert_eq!(full.score(&x), ball.score(&x));
            assert_eq!(full.log_density_unnorm(&x), ball.log_density_unnorm(&x));
        }
    }

    #[test]
    fn dirichlet_permutation_symmetry() {
        // permuting the first two parts together with the coordinates swaps the score
        let a = make_dirichlet_chart(&[0.7, 2.0, 1.3]).unwrap();
        let b = make_dirichlet_chart(&[2.0, 0.7, 1.3]).unwrap();
        let x = [0.2, 0.45];
        let (sa, sb) = (a.score(&x), b.score(&[0.45, 0.2]));
        assert!((sa[0] - sb[1]).abs() < 1e-13 && (sa[1] - sb[0]).abs() < 1e-13);
    }
}
