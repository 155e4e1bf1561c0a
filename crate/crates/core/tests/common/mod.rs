//! Checks shared by the oracle tests and the acceptance harness. Each returns
//! a one-line summary on success and a description of the violation otherwise.

#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::RngExt;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use sfksd::auxiliary::*;
use sfksd::gof::{bootstrap_draw, ksd_test};
use sfksd::kernel::{median_heuristic, rbf};
use sfksd::model::{correlated_covariance, make_gaussian, make_gaussian_mixture, DensityModel};
use sfksd::sampling::{rejection_sample, sample_censored_exponential, sample_dirichlet, sample_model};
use sfksd::stein::u_statistic;
use sfksd::{Domain, RngStream, SteinKernelSpec};

pub type Check = Result<String, String>;

pub fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: sfksd::Error) -> String {
    e.to_string()
}

pub fn column_mean_stderr(m: &DMatrix<f64>, c: usize) -> (f64, f64) {
    let n = m.nrows() as f64;
    let mean = m.column(c).mean();
    let var = m.column(c).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn truncated_gaussian_ball() -> Arc<DensityModel> {
    Arc::new(make_gaussian(&[0.0; 3], &correlated_covariance(3, 0.0), Domain::unit_ball(3).unwrap()).unwrap())
}

pub fn standard_normal(dim: usize) -> Arc<DensityModel> {
    Arc::new(make_gaussian(&vec![0.0; dim], &DMatrix::identity(dim, dim), Domain::full_space(dim).unwrap()).unwrap())
}

/// Smallest eigenvalue of the Stein kernel matrix relative to its largest entry.
pub fn gram_symmetric_psd(seed: u64) -> Check {
    let model = truncated_gaussian_ball();
    let x = sample_model(&model, 50, &mut RngStream::new(seed, 0).rng()).map_err(err)?;
    let spec = SteinKernelSpec::new(model, rbf(median_heuristic(&x).map_err(err)?).map_err(err)?, aux_ball_power(2.0, 3).map_err(err)?)
        .map_err(err)?;
    let h = spec.gram_matrix(&x).map_err(err)?;
    ensure(h == h.transpose(), || "stein kernel matrix is not symmetric".into())?;
    let min = SymmetricEigen::new(h.clone()).eigenvalues.min();
    let scale = h.amax();
    ensure(min >= -1e-8 * scale, || format!("min eigenvalue {min:.3e} below -1e-8 * {scale:.3e}"))?;
    Ok(format!("min eigenvalue / max|H| = {:.2e}", min / scale))
}

/// `h` with `c·g` equals `c²` times `h` with `g`, over random pairs.
pub fn scale_quadratic(seed: u64) -> Check {
    let model = truncated_gaussian_ball();
    let x = sample_model(&model, 200, &mut RngStream::new(seed, 0).rng()).map_err(err)?;
    let spec = SteinKernelSpec::new(model, rbf(0.6).map_err(err)?, aux_ball_power(2.0, 3).map_err(err)?).map_err(err)?;
    let mut worst: f64 = 0.0;
    for c in [0.01, 0.5, 3.0, 40.0] {
        let scaled = spec.with_aux(spec.aux().scaled(c)).map_err(err)?;
        for i in 0..100 {
            let (a, b) = (x.row(2 * i), x.row(2 * i + 1));
            let (a, b): (Vec<f64>, Vec<f64>) = (a.iter().copied().collect(), b.iter().copied().collect());
            let h = spec.eval(&a, &b).map_err(err)?;
            let hc = scaled.eval(&a, &b).map_err(err)?;
            worst = worst.max((hc - c * c * h).abs() / (1.0 + (c * c * h).abs()));
        }
    }
    ensure(worst < 1e-12, || format!("relative deviation {worst:.2e}"))?;
    Ok(format!("max relative deviation {worst:.1e}"))
}

/// Classic KSD with the RBF kernel written out in closed form.
pub fn classic_ksd_rbf(sx: &[f64], sy: &[f64], sigma2: f64, x: &[f64], y: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let r2: f64 = diff.iter().map(|v| v * v).sum();
    let k = (-r2 / sigma2).exp();
    let d = x.len() as f64;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    k * (dot(sx, sy) + (2.0 / sigma2) * (dot(sx, &diff) - dot(sy, &diff)) + 2.0 * d / sigma2
        - 4.0 * r2 / (sigma2 * sigma2))
}

/// The general Stein kernel with `g ≡ 1` against the classic closed form.
pub fn constant_aux_matches_classic(seed: u64) -> Check {
    let model = Arc::new(
        make_gaussian_mixture(
            &[0.4, 0.6],
            &[vec![-1.0, 0.0, 0.5], vec![1.0, 0.5, 0.0]],
            &[correlated_covariance(3, 0.5), DMatrix::identity(3, 3)],
            Domain::full_space(3).unwrap(),
        )
        .map_err(err)?,
    );
    let sigma2 = 1.3;
    let spec = SteinKernelSpec::new(model.clone(), rbf(sigma2).map_err(err)?, aux_constant_one(3).map_err(err)?).map_err(err)?;
    let mut rng = RngStream::new(seed, 0).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let y: Vec<f64> = (0..3).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let want = classic_ksd_rbf(&model.score(&x), &model.score(&y), sigma2, &x, &y);
        worst = worst.max((spec.eval(&x, &y).map_err(err)? - want).abs() / (1.0 + want.abs()));
    }
    ensure(worst < 1e-10, || format!("relative deviation {worst:.2e}"))?;
    Ok(format!("100 pairs, max relative deviation {worst:.1e}"))
}

/// All-ones multipliers turn a bootstrap draw into the U-statistic.
pub fn bootstrap_identity(seed: u64) -> Check {
    let mut rng = RngStream::new(seed, 0).rng();
    let mut worst: f64 = 0.0;
    for n in [2, 5, 40] {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let h = &a + a.transpose();
        worst = worst.max((bootstrap_draw(&h, &vec![1.0; n]) - u_statistic(&h).map_err(err)?).abs());
    }
    ensure(worst < 1e-14, || format!("deviation {worst:.2e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

/// Fraction of null p-values at or below each threshold.
pub fn null_p_values(model: &Arc<DensityModel>, aux: Auxiliary, n: usize, trials: u64, seed: u64) -> Result<Vec<f64>, String> {
    (0..trials)
        .map(|t| {
            let stream = RngStream::new(seed, t);
            let x = sample_model(model, n, &mut stream.rng()).map_err(err)?;
            let spec = SteinKernelSpec::new(model.clone(), rbf(median_heuristic(&x).map_err(err)?).map_err(err)?, aux.clone())
                .map_err(err)?;
            Ok(ksd_test(&spec, &x, 0.05, 300, stream.child_seed()).map_err(err)?.p_value)
        })
        .collect()
}

pub fn p_value_uniformity(seed: u64) -> Check {
    let model = truncated_gaussian_ball();
    let p = null_p_values(&model, aux_ball_power(2.0, 3).map_err(err)?.into(), 100, 500, seed)?;
    let mut parts = Vec::new();
    for t in [0.05, 0.1, 0.25] {
        let frac = p.iter().filter(|v| **v <= t).count() as f64 / p.len() as f64;
        ensure((frac - t).abs() <= 0.04, || format!("P(p <= {t}) = {frac:.3}, outside ±0.04"))?;
        parts.push(format!("P(p<={t})={frac:.3}"));
    }
    Ok(parts.join(", "))
}

/// Sampler moments against closed forms.
pub fn sampler_moments(seed: u64) -> Check {
    let n = 100_000;
    let mut notes = Vec::new();

    let g = sample_model(&standard_normal(2), n, &mut RngStream::new(seed, 0).rng()).map_err(err)?;
    for c in 0..2 {
        let (m, _) = column_mean_stderr(&g, c);
        ensure(m.abs() <= 4.0 / (n as f64).sqrt(), || format!("normal mean[{c}] = {m:.4}"))?;
    }
    notes.push("normal mean".to_string());

    let d = sample_dirichlet(&[1.0, 1.0, 1.0], n, &mut RngStream::new(seed, 1).rng()).map_err(err)?;
    for c in 0..2 {
        let (m, se) = column_mean_stderr(&d, c);
        ensure((m - 1.0 / 3.0).abs() <= 4.0 * se, || format!("Dirichlet(1,1,1) mean[{c}] = {m:.4}"))?;
        // Var of a Dirichlet part: α_i(α₀ − α_i) / (α₀²(α₀ + 1)) = 2/36
        let var = se * se * n as f64;
        ensure((var - 2.0 / 36.0).abs() < 2e-3, || format!("Dirichlet(1,1,1) var[{c}] = {var:.4}"))?;
    }
    let skew = sample_dirichlet(&[0.2, 0.5, 0.5], 20_000, &mut RngStream::new(seed, 2).rng()).map_err(err)?;
    let mut first: Vec<f64> = skew.column(0).iter().copied().collect();
    first.sort_by(|a, b| a.total_cmp(b));
    let median = first[first.len() / 2];
    ensure(median < 0.1, || format!("Dirichlet(0.2,0.5,0.5) first-part median {median:.3}"))?;
    notes.push("Dirichlet moments".to_string());

    let ball = Domain::unit_ball(3).unwrap();
    let proposal = |r: &mut rand_chacha::ChaCha20Rng| -> Vec<f64> {
        (0..3).map(|_| rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, r)).collect()
    };
    let draw = rejection_sample(&ball, proposal, 19_000, 1_000_000, &mut RngStream::new(seed, 3).rng()).map_err(err)?;
    let want = ChiSquared::new(3.0).unwrap().cdf(1.0);
    ensure((draw.acceptance_rate - want).abs() <= 0.01, || {
        format!("ball acceptance {:.4} vs chi-square {want:.4}", draw.acceptance_rate)
    })?;
    notes.push(format!("ball acceptance {:.4} (oracle {want:.4})", draw.acceptance_rate));

    let cens = sample_censored_exponential(1.0, 1.0, n, &mut RngStream::new(seed, 4).rng()).map_err(err)?;
    let deltas: Vec<f64> = cens.iter().map(|c| if c.delta { 1.0 } else { 0.0 }).collect();
    let times: Vec<f64> = cens.iter().map(|c| c.t).collect();
    let ((md, sd), (mt, st)) = (mean_stderr(&deltas), mean_stderr(&times));
    ensure((md - 0.5).abs() <= 4.0 * sd && (mt - 0.5).abs() <= 4.0 * st, || {
        format!("censored race: E[delta] = {md:.4}, E[t] = {mt:.4}")
    })?;
    notes.push("censored race".to_string());
    Ok(notes.join(", "))
}

/// Mean and standard error of the optimality residual, per coordinate, plus
/// the closed-form target.
pub struct Residual {
    pub label: &'static str,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub target: f64,
}

impl Residual {
    pub fn within(&self, k: f64) -> bool {
        self.mean.iter().zip(&self.stderr).all(|(m, s)| (m - self.target).abs() <= k * s)
    }
}

pub fn optimality_residuals(seed: u64) -> Result<Vec<Residual>, String> {
    let n = 20_000;
    let mut out = Vec::new();

    let q = standard_normal(2);
    let x = sample_model(&q, n, &mut RngStream::new(seed, 0).rng()).map_err(err)?;
    let (mean, stderr) = optimality_residual(&aux_constant_one(2).map_err(err)?, &q, &x).map_err(err)?;
    out.push(Residual { label: "g=1, p=q", mean, stderr, target: 0.0 });

    let q1 = standard_normal(1);
    let p = Arc::new(make_gaussian(&[0.5], &DMatrix::from_element(1, 1, 1.5), Domain::full_space(1).unwrap()).map_err(err)?);
    let norm = sample_model(&p, n, &mut RngStream::new(seed, 1).rng()).map_err(err)?;
    let xs = sample_model(&p, n, &mut RngStream::new(seed, 2).rng()).map_err(err)?;
    let ratio = aux_density_ratio(q1.clone(), p, &norm).map_err(err)?;
    let (mean, stderr) = optimality_residual(&ratio, &q1, &xs).map_err(err)?;
    out.push(Residual { label: "density ratio, p!=q", mean, stderr, target: 0.0 });

    let shifted = Arc::new(make_gaussian(&[1.0], &DMatrix::identity(1, 1), Domain::full_space(1).unwrap()).map_err(err)?);
    let xs = sample_model(&shifted, n, &mut RngStream::new(seed, 3).rng()).map_err(err)?;
    let (mean, stderr) = optimality_residual(&aux_constant_one(1).map_err(err)?, &q1, &xs).map_err(err)?;
    out.push(Residual { label: "g=1, q=N(0,1), p=N(1,1)", mean, stderr, target: -1.0 });
    Ok(out)
}
