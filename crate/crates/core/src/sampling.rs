//! Seeded samplers for the experiment distributions.
//!
//! Every random quantity is drawn from an [`RngStream`]: a ChaCha20 generator
//! keyed by a master seed and selected by a 64-bit stream id, so parallel
//! trial `i` always consumes stream `(seed, i)` whatever the scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::linalg::from_rows;
use crate::model::{DensityModel, Family, Gaussian, Mixture};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        RngStream {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A master seed for nested streams owned by this stream.
    pub fn child_seed(&self) -> u64 {
        splitmix64(splitmix64(self.master_seed) ^ self.stream_id.wrapping_mul(0xD1B5_4A32_D192_ED03))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One right-censored observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample {
    /// `min(X, C)`.
    pub t: f64,
    /// Whether the event time was observed (`X <= C`).
    pub delta: bool,
}

pub(crate) fn draw_gaussian<R: Rng + ?Sized>(g: &Gaussian, rng: &mut R) -> Vec<f64> {
    let d = g.dim();
    let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
    (g.mean() + g.cholesky() * z).iter().copied().collect()
}

pub(crate) fn draw_mixture<R: Rng + ?Sized>(m: &Mixture, rng: &mut R) -> Vec<f64> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut pick = m.components().len() - 1;
    for (c, w) in m.weights().iter().enumerate() {
        acc += w;
        if u < acc {
            pick = c;
            break;
        }
    }
    // guard against rounding selecting a zero-weight tail component
    while m.weights()[pick] == 0.0 && pick > 0 {
        pick -= 1;
    }
    draw_gaussian(&m.components()[pick], rng)
}

pub fn sample_gaussian_mixture<R: Rng + ?Sized>(
    weights: &[f64],
    means: &[Vec<f64>],
    covariances: &[DMatrix<f64>],
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if means.len() != covariances.len() {
        return Err(Error::DimensionMismatch {
            expected: means.len(),
            got: covariances.len(),
        });
    }
    let comps = means
        .iter()
        .zip(covariances)
        .map(|(m, c)| Gaussian::new(m, c))
        .collect::<Result<Vec<_>>>()?;
    let mix = Mixture::new(weights, comps)?;
    let d = mix.components()[0].dim();
    let pts: Vec<Vec<f64>> = (0..n).map(|_| draw_mixture(&mix, rng)).collect();
    Ok(from_rows(&pts, d))
}

/// Accepted draws plus the bookkeeping of how many proposals it took.
#[derive(Debug, Clone)]
pub struct RejectionDraw {
    pub samples: DMatrix<f64>,
    pub attempts: usize,
    pub acceptance_rate: f64,
}

/// Draw from `proposal` until `n` points fall strictly inside `domain`.
pub fn rejection_sample<R, F>(
    domain: &Domain,
    mut proposal: F,
    n: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<RejectionDraw>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> Vec<f64>,
{
    if max_attempts < n {
        return Err(Error::InvalidParameter(format!(
            "max_attempts ({max_attempts}) must be at least n ({n})"
        )));
    }
    let mut accepted = Vec::with_capacity(n);
    let mut attempts = 0;
    while accepted.len() < n {
        if attempts == max_attempts {
            return Err(Error::AcceptanceExhausted {
                attempts,
                rate: accepted.len() as f64 / attempts as f64,
            });
        }
        attempts += 1;
        let x = proposal(rng);
        if domain.contains(&x) {
            accepted.push(x);
        }
    }
    let acceptance_rate = if attempts == 0 {
        1.0
    } else {
        n as f64 / attempts as f64
    };
    Ok(RejectionDraw {
        samples: from_rows(&accepted, domain.dim()),
        attempts,
        acceptance_rate,
    })
}

/// Dirichlet draws in chart coordinates (the first `parts - 1` parts).
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if alpha.len() < 2 || alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter(
            "Dirichlet needs at least two positive concentrations".into(),
        ));
    }
    let gammas = alpha
        .iter()
        .map(|a| Gamma::new(*a, 1.0).map_err(|e| Error::InvalidParameter(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let d = alpha.len() - 1;
    let mut out = DMatrix::zeros(n, d);
    let mut parts = vec![0.0; alpha.len()];
    for r in 0..n {
        loop {
            for (p, g) in parts.iter_mut().zip(&gammas) {
                *p = g.sample(rng);
            }
            let total: f64 = parts.iter().sum();
            // all parts underflowing to zero is possible for tiny concentrations
            if total > 0.0 && parts.iter().all(|p| *p > 0.0) {
                for i in 0..d {
                    out[(r, i)] = parts[i] / total;
                }
                break;
            }
        }
    }
    Ok(out)
}

pub fn sample_censored_exponential<R: Rng + ?Sized>(
    rate_x: f64,
    rate_c: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<CensoredSample>> {
    if !(rate_x > 0.0) || !(rate_c > 0.0) {
        return Err(Error::InvalidParameter("exponential rates must be positive".into()));
    }
    Ok((0..n)
        .map(|_| {
            let e1: f64 = Exp1.sample(rng);
            let e2: f64 = Exp1.sample(rng);
            let (x, c) = (e1 / rate_x, e2 / rate_c);
            CensoredSample {
                t: x.min(c),
                delta: x <= c,
            }
        })
        .collect())
}

/// Default proposal budget per requested point for truncated models.
pub const DEFAULT_ATTEMPTS_PER_POINT: usize = 10_000;

/// Draw `n` points from a model restricted to its domain.
pub fn sample_model<R: Rng + ?Sized>(model: &DensityModel, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let budget = n.saturating_mul(DEFAULT_ATTEMPTS_PER_POINT).max(1000);
    match model.family() {
        Family::Dirichlet { alpha } => sample_dirichlet(alpha, n, rng),
        Family::Gaussian(g) => {
            Ok(rejection_sample(model.domain(), |r: &mut R| draw_gaussian(g, r), n, budget, rng)?.samples)
        }
        Family::Mixture(m) => {
            Ok(rejection_sample(model.domain(), |r: &mut R| draw_mixture(m, r), n, budget, rng)?.samples)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..4).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..4).map(|_| r.random()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RngStream::new(7, 4).rng();
            (0..4).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngStream::new(7, 3).child_seed(), RngStream::new(7, 4).child_seed());
    }

    #[test]
    fn zero_weight_component_never_drawn() {
        let mut rng = RngStream::new(1, 0).rng();
        let x = sample_gaussian_mixture(
            &[1.0, 0.0],
            &[vec![0.0], vec![100.0]],
            &[DMatrix::identity(1, 1), DMatrix::identity(1, 1)],
            2000,
            &mut rng,
        )
        .unwrap();
        assert!(x.iter().all(|v| v.abs() < 10.0));
    }

    #[test]
    fn rejection_with_inside_proposal() {
        let dom = Domain::unit_ball(2).unwrap();
        let mut rng = RngStream::new(2, 0).rng();
        let out = rejection_sample(&dom, |_r: &mut ChaCha20Rng| vec![0.1, 0.1], 25, 25, &mut rng).unwrap();
        assert_eq!(out.acceptance_rate, 1.0);
        assert_eq!(out.attempts, 25);
        let empty = rejection_sample(&dom, |_r: &mut ChaCha20Rng| vec![0.1, 0.1], 0, 0, &mut rng).unwrap();
        assert_eq!(empty.samples.shape(), (0, 2));
        assert_eq!(empty.attempts, 0);
    }

    #[test]
    fn rejection_exhaustion_reports_rate() {
        let dom = Domain::unit_ball(1).unwrap();
        let mut rng = RngStream::new(3, 0).rng();
        let mut flip = false;
        let err = rejection_sample(
            &dom,
            |_r: &mut ChaCha20Rng| {
                flip = !flip;
                vec![if flip { 0.5 } else { 5.0 }]
            },
            10,
            10,
            &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, Error::AcceptanceExhausted { attempts: 10, rate: 0.5 });
    }

    #[test]
    fn dirichlet_rows_are_on_the_simplex() {
        let mut rng = RngStream::new(4, 0).rng();
        let x = sample_dirichlet(&[0.5, 0.5, 0.5], 500, &mut rng).unwrap();
        let dom = Domain::simplex(3).unwrap();
        for r in 0..x.nrows() {
            let row: Vec<f64> = x.row(r).iter().copied().collect();
            let last = 1.0 - row.iter().sum::<f64>();
            assert!((row.iter().sum::<f64>() + last - 1.0).abs() < 1e-12);
            assert!(dom.contains(&row));
        }
    }

    #[test]
    fn no_censoring_limit() {
        let mut rng = RngStream::new(5, 0).rng();
        let obs = sample_censored_exponential(1.0, 1e-9, 100_000, &mut rng).unwrap();
        assert!(obs.iter().all(|o| o.delta && o.t > 0.0));
    }
}
