mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use common::*;
use sfksd::auxiliary::*;
use sfksd::gof::{ksd_test, mmd_test, mmd_u_statistic};
use sfksd::kernel::{median_heuristic, rbf};
use sfksd::model::{make_gaussian, make_gaussian_mixture};
use sfksd::sampling::{sample_gaussian_mixture, sample_model};
use sfksd::stein::u_statistic;
use sfksd::verify::{stein_identity_mc_1d, verify_latent_stein_identity, LatentMixture, SmoothTestFunction};
use sfksd::{Domain, RngStream, SteinKernelSpec};

fn pass(check: Check) {
    match check {
        Ok(note) => eprintln!("{note}"),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn gram_is_psd() {
    for seed in 0..3 {
        pass(gram_symmetric_psd(seed));
    }
}

#[test]
fn scaling_and_reduction() {
    pass(scale_quadratic(5));
    pass(constant_aux_matches_classic(6));
    pass(bootstrap_identity(7));
}

#[test]
fn samplers_match_moments() {
    pass(sampler_moments(11));
}

#[test]
fn truncated_normal_matches_cdf() {
    let (a, b) = (-1.0, 2.0);
    let model = make_gaussian(&[0.3], &DMatrix::from_element(1, 1, 0.8), Domain::boxed(vec![a], vec![b]).unwrap()).unwrap();
    let n = 20_000;
    let x = sample_model(&model, n, &mut RngStream::new(3, 0).rng()).unwrap();
    let mut v: Vec<f64> = x.iter().copied().collect();
    v.sort_by(|p, q| p.total_cmp(q));
    let phi = Normal::new(0.3, 0.8f64.sqrt()).unwrap();
    let (fa, fb) = (phi.cdf(a), phi.cdf(b));
    let ks = v
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let f = (phi.cdf(*t) - fa) / (fb - fa);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the Kolmogorov distribution
    assert!(ks < 1.63 / (n as f64).sqrt(), "KS distance {ks}");
}

#[test]
fn null_stein_statistic_is_centred() {
    let model = truncated_gaussian_ball();
    let stats: Vec<f64> = (0..500)
        .map(|t| {
            let x = sample_model(&model, 100, &mut RngStream::new(21, t).rng()).unwrap();
            let spec = SteinKernelSpec::new(model.clone(), rbf(median_heuristic(&x).unwrap()).unwrap(), aux_ball_power(2.0, 3).unwrap())
                .unwrap();
            u_statistic(&spec.gram_matrix(&x).unwrap()).unwrap()
        })
        .collect();
    let (m, se) = mean_stderr(&stats);
    assert!(m.abs() <= 3.0 * se, "mean {m} stderr {se}");
}

#[test]
fn null_p_values_are_uniform() {
    pass(p_value_uniformity(31));
}

#[test]
fn langevin_p_values_are_uniform() {
    let p = null_p_values(&standard_normal(2), aux_constant_one(2).unwrap().into(), 100, 500, 32).unwrap();
    for t in [0.05, 0.1, 0.25] {
        let frac = p.iter().filter(|v| **v <= t).count() as f64 / p.len() as f64;
        assert!((frac - t).abs() <= 0.04, "P(p <= {t}) = {frac}");
    }
}

#[test]
fn mmd_permutation_calibration_and_power() {
    let eye = DMatrix::<f64>::identity(2, 2);
    let draw = |shift: f64, seed: u64, stream: u64| {
        sample_gaussian_mixture(&[1.0], &[vec![shift, 0.0]], std::slice::from_ref(&eye), 100, &mut RngStream::new(seed, stream).rng()).unwrap()
    };
    let trials = 500;
    let mut rejects = 0;
    let mut stats = Vec::new();
    for t in 0..trials {
        let (x, y) = (draw(0.0, t, 0), draw(0.0, t, 1));
        let k = rbf(median_heuristic(&x).unwrap()).unwrap();
        stats.push(mmd_u_statistic(&x, &y, &k).unwrap());
        rejects += mmd_test(&x, &y, &k, 0.05, 200, t).unwrap().reject as usize;
    }
    let rate = rejects as f64 / trials as f64;
    assert!((0.02..=0.09).contains(&rate), "same-distribution rejection {rate}");
    let (m, se) = mean_stderr(&stats);
    assert!(m.abs() <= 4.0 * se, "MMD mean {m} stderr {se}");

    let mut rejects = 0;
    for t in 0..100 {
        let y = draw(0.0, t, 1);
        let sigma2: f64 = median_heuristic(&y).unwrap();
        let x = draw(3.0 * sigma2.sqrt(), t, 0);
        rejects += mmd_test(&x, &y, &rbf(sigma2).unwrap(), 0.05, 200, t).unwrap().reject as usize;
    }
    assert!(rejects >= 99, "shifted rejections {rejects}/100");
}

#[test]
fn tests_are_deterministic() {
    let model = truncated_gaussian_ball();
    let x = sample_model(&model, 80, &mut RngStream::new(4, 0).rng()).unwrap();
    let again = sample_model(&model, 80, &mut RngStream::new(4, 0).rng()).unwrap();
    assert_eq!(x, again);
    let spec = SteinKernelSpec::new(model, rbf(0.5).unwrap(), aux_ball_power(1.0, 3).unwrap()).unwrap();
    let a = ksd_test(&spec, &x, 0.01, 300, 17).unwrap();
    let b = ksd_test(&spec, &x, 0.01, 300, 17).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn optimality_diagnostics() {
    for r in optimality_residuals(41).unwrap() {
        assert!(r.within(3.0), "{}: mean {:?} stderr {:?} target {}", r.label, r.mean, r.stderr, r.target);
    }
}

#[test]
fn density_ratio_value_matches_quadrature() {
    let q = Arc::new(make_gaussian(&[0.0], &DMatrix::identity(1, 1), Domain::full_space(1).unwrap()).unwrap());
    let p = Arc::new(make_gaussian(&[0.0], &DMatrix::from_element(1, 1, 2.0), Domain::full_space(1).unwrap()).unwrap());
    let samples = sample_model(&p, 10_000, &mut RngStream::new(8, 0).rng()).unwrap();
    let aux = aux_density_ratio(q.clone(), p.clone(), &samples).unwrap();
    // Z = E_p[q̃/p̃] = ∫q̃ / ∫p̃ = √(2π)/√(4π), so g(0) = 1/Z = √2
    let g0 = aux.evaluate(&[0.0]).unwrap().g[0];
    assert!((g0 / 2f64.sqrt() - 1.0).abs() < 0.02, "g(0) = {g0}");
}

#[test]
fn latent_identity_is_unbiased_in_m() {
    let lm = LatentMixture::new(&[0.5, 0.5], &[-1.0, 1.0], &[1.0, 1.0]).unwrap();
    let f = SmoothTestFunction::power(1);
    for m in [1, 20] {
        let (est, se) = verify_latent_stein_identity(&lm, &f, 50_000, m, 12).unwrap();
        assert!(est.abs() <= 4.0 * se, "m={m}: {est} ± {se}");
    }
}

#[test]
fn degenerate_latent_mixture_matches_direct_identity() {
    let lm = LatentMixture::new(&[1.0], &[0.4], &[1.3]).unwrap();
    let model = make_gaussian_mixture(&[1.0], &[vec![0.4]], &[DMatrix::from_element(1, 1, 1.3)], Domain::full_space(1).unwrap()).unwrap();
    let f = SmoothTestFunction::sin();
    let latent = verify_latent_stein_identity(&lm, &f, 2_000, 3, 9).unwrap();
    let direct = stein_identity_mc_1d(&model, &aux_constant_one(1).unwrap(), &f, 2_000, 9).unwrap();
    assert!((latent.0 - direct.0).abs() < 1e-12, "{latent:?} vs {direct:?}");
}
