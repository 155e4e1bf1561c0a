//! Rejection-rate experiments: repeated seeded trials of each configured test
//! on data drawn from a perturbed alternative, with trial-level parallelism.
//!
//! Cell `c` (one `(ν, n)` pair) owns master seed
//! `RngStream::new(seed, c).child_seed()`, and trial `t` in that cell draws
//! from stream `(cell seed, t)`, so tables do not depend on the thread count.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, KernelSpec, MethodSpec, ModelSpec};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::gof::{ksd_test, mmd_test, TestResult};
use crate::model::DensityModel;
use crate::sampling::{rejection_sample, sample_model, RngStream, DEFAULT_ATTEMPTS_PER_POINT};
use crate::stein::SteinKernelSpec;

/// Law that generates the observed data in a cell.
#[derive(Debug, Clone)]
pub enum DataSource {
    Model(Arc<DensityModel>),
    /// Gaussian mixture with a shared, possibly singular, covariance given
    /// by its factor `L` (covariance `L Lᵀ`), restricted to `domain`. At
    /// `|ν| = 1` the correlated settings have no density but can be sampled.
    FactorMixture {
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        factor: DMatrix<f64>,
        domain: Domain,
    },
}

impl DataSource {
    pub fn for_setting(model: &ModelSpec, nu: f64) -> Result<Self> {
        let dim = match model {
            ModelSpec::TruncatedMixtureBall { dim } | ModelSpec::TruncatedGaussianBall { dim } if nu.abs() >= 1.0 => *dim,
            _ => return Ok(DataSource::Model(Arc::new(model.build(nu)?))),
        };
        if nu.abs() > 1.0 {
            return Err(Error::Config(format!("correlation must lie in [-1, 1], got {nu}")));
        }
        if dim < 2 {
            return Err(Error::Config("correlated settings need dim >= 2".into()));
        }
        let mut factor = DMatrix::identity(dim, dim);
        factor[(1, 0)] = nu;
        factor[(1, 1)] = (1.0 - nu * nu).max(0.0).sqrt();
        let (weights, means) = match model {
            ModelSpec::TruncatedMixtureBall { .. } => {
                let mut m1 = DVector::zeros(dim);
                let mut m2 = DVector::zeros(dim);
                m1[0] = -1.0;
                m2[0] = 1.0;
                (vec![0.5, 0.5], vec![m1, m2])
            }
            _ => (vec![1.0], vec![DVector::zeros(dim)]),
        };
        Ok(DataSource::FactorMixture {
            weights,
            means,
            factor,
            domain: Domain::unit_ball(dim)?,
        })
    }

    /// The density, when the law has one.
    pub fn density_model(&self) -> Option<&Arc<DensityModel>> {
        match self {
            DataSource::Model(m) => Some(m),
            DataSource::FactorMixture { .. } => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
        match self {
            DataSource::Model(m) => sample_model(m, n, rng),
            DataSource::FactorMixture {
                weights,
                means,
                factor,
                domain,
            } => {
                let d = factor.nrows();
                let budget = n.saturating_mul(DEFAULT_ATTEMPTS_PER_POINT).max(1000);
                let propose = |r: &mut R| {
                    let u: f64 = r.random();
                    let mut acc = 0.0;
                    let mut pick = weights.len() - 1;
                    for (c, w) in weights.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            pick = c;
                            break;
                        }
                    }
                    let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(r)));
                    (&means[pick] + factor * z).iter().copied().collect()
                };
                Ok(rejection_sample(domain, propose, n, budget, rng)?.samples)
            }
        }
    }
}

/// Everything one trial needs besides its stream.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub null: Arc<DensityModel>,
    pub alternative: DataSource,
    pub methods: Vec<MethodSpec>,
    pub kernel: KernelSpec,
    pub n: usize,
    pub level: f64,
    pub bootstrap: usize,
    pub permutations: usize,
}

/// Run every method on one draw of `n` points from the alternative.
pub fn run_trial(setup: &TrialSetup, stream: RngStream) -> Result<Vec<TestResult>> {
    let mut rng = stream.rng();
    let x = setup.alternative.draw(setup.n, &mut rng)?;
    let base = stream.child_seed();
    setup
        .methods
        .iter()
        .enumerate()
        .map(|(j, method)| {
            let method_stream = RngStream::new(base, j as u64);
            run_method(setup, method, &x, method_stream)
        })
        .collect()
}

fn run_method(setup: &TrialSetup, method: &MethodSpec, x: &DMatrix<f64>, stream: RngStream) -> Result<TestResult> {
    let calib_seed = stream.child_seed();
    match method {
        MethodSpec::Mmd => {
            let y = sample_model(&setup.null, x.nrows(), &mut stream.rng())?;
            let pooled = DMatrix::from_fn(x.nrows() + y.nrows(), x.ncols(), |r, c| {
                if r < x.nrows() {
                    x[(r, c)]
                } else {
                    y[(r - x.nrows(), c)]
                }
            });
            let kernel = setup.kernel.build(&pooled)?;
            mmd_test(x, &y, &kernel, setup.level, setup.permutations, calib_seed)
        }
        MethodSpec::Ksd | MethodSpec::BdKsd { .. } => {
            let aux = match method {
                MethodSpec::BdKsd { aux } => aux.build(&setup.null, setup.alternative.density_model(), Some(x))?,
                _ => crate::auxiliary::aux_constant_one(setup.null.dim())?.into(),
            };
            let spec = SteinKernelSpec::new(setup.null.clone(), setup.kernel.build(x)?, aux)?;
            ksd_test(&spec, x, setup.level, setup.bootstrap, calib_seed)
        }
    }
}

/// One `(method, ν, n)` cell of a rejection-rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub setting: String,
    pub method: String,
    pub nu: f64,
    pub n: usize,
    pub trials: usize,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial Monte Carlo standard error of `rate`.
    pub stderr: f64,
    pub mean_statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r
            .deserialize()
            .enumerate()
            .map(|(i, row)| row.map_err(|e| Error::Config(e.to_string()).at_row(i)))
            .collect::<Result<Vec<RateRow>>>()?;
        Ok(RateTable { rows })
    }

    /// Row for a method label, `ν` and `n`.
    pub fn get(&self, method: &str, nu: f64, n: usize) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.method == method && r.nu == nu && r.n == n)
    }
}

/// Rejection rates over the grid `nus × ns`, each from `trials` repetitions.
#[allow(clippy::too_many_arguments)]
pub fn rejection_rates(
    model: &ModelSpec,
    methods: &[MethodSpec],
    kernel: KernelSpec,
    nus: &[f64],
    ns: &[usize],
    trials: usize,
    level: f64,
    bootstrap: usize,
    permutations: usize,
    seed: u64,
) -> Result<RateTable> {
    if methods.is_empty() || nus.is_empty() || ns.is_empty() {
        return Err(Error::Config("need at least one method, perturbation and sample size".into()));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let null = Arc::new(model.build(0.0)?);
    let mut table = RateTable::default();
    for (iv, &nu) in nus.iter().enumerate() {
        let alternative = DataSource::for_setting(model, nu)?;
        for (inn, &n) in ns.iter().enumerate() {
            let setup = TrialSetup {
                null: null.clone(),
                alternative: alternative.clone(),
                methods: methods.to_vec(),
                kernel,
                n,
                level,
                bootstrap,
                permutations,
            };
            let cell = (iv * ns.len() + inn) as u64;
            let cell_seed = RngStream::new(seed, cell).child_seed();
            let results = (0..trials as u64)
                .into_par_iter()
                .map(|t| run_trial(&setup, RngStream::new(cell_seed, t)).map_err(|e| trial_error(e, nu, n, t)))
                .collect::<Result<Vec<_>>>()?;
            for (j, method) in methods.iter().enumerate() {
                let rejections = results.iter().filter(|r| r[j].reject).count();
                let rate = rejections as f64 / trials as f64;
                let mean_statistic = results.iter().map(|r| r[j].statistic).sum::<f64>() / trials as f64;
                table.rows.push(RateRow {
                    setting: model.label(),
                    method: method.label(),
                    nu,
                    n,
                    trials,
                    rejections,
                    rate,
                    stderr: (rate * (1.0 - rate) / trials as f64).sqrt(),
                    mean_statistic,
                });
            }
        }
    }
    Ok(table)
}

fn trial_error(e: Error, nu: f64, n: usize, trial: u64) -> Error {
    Error::InTrial {
        trial,
        nu,
        n,
        source: Box::new(e),
    }
}

/// Power table for a perturbable setting.
pub fn run_power(cfg: &ExperimentConfig) -> Result<RateTable> {
    let model = cfg.model()?;
    if !model.is_perturbable() {
        return Err(Error::Config(format!("power needs a perturbable setting, got '{}'", model.label())));
    }
    if cfg.nu.is_empty() {
        return Err(Error::Config("power needs at least one perturbation level".into()));
    }
    rejection_rates(
        model,
        &cfg.methods,
        cfg.kernel,
        &cfg.nu,
        &cfg.n,
        cfg.trials,
        cfg.level,
        cfg.bootstrap,
        cfg.permutations,
        cfg.seed,
    )
}

/// Null rejection rates: the power experiment with `ν` forced to 0.
pub fn run_type1(cfg: &ExperimentConfig) -> Result<RateTable> {
    rejection_rates(
        cfg.model()?,
        &cfg.methods,
        cfg.kernel,
        &[0.0],
        &cfg.n,
        cfg.trials,
        cfg.level,
        cfg.bootstrap,
        cfg.permutations,
        cfg.seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AuxSpec;

    #[test]
    fn csv_round_trip() {
        let t = RateTable {
            rows: vec![RateRow {
                setting: "s".into(),
                method: "bd-KSD(p=2)".into(),
                nu: 0.3,
                n: 200,
                trials: 7,
                rejections: 3,
                rate: 3.0 / 7.0,
                stderr: 0.187_043_905_380_194_3,
                mean_statistic: -1.25e-5,
            }],
        };
        assert_eq!(RateTable::from_csv(&t.to_csv().unwrap()).unwrap(), t);
    }

    #[test]
    fn small_table_is_deterministic() {
        let methods = [MethodSpec::BdKsd { aux: AuxSpec::BallPower { p: 2.0 } }, MethodSpec::Mmd];
        let run = || {
            rejection_rates(
                &ModelSpec::TruncatedGaussianBall { dim: 2 },
                &methods,
                KernelSpec::default(),
                &[0.0, 0.9],
                &[30],
                4,
                0.05,
                50,
                50,
                11,
            )
            .unwrap()
        };
        let a = run();
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.to_csv().unwrap(), run().to_csv().unwrap());
        assert!(a.get("MMD", 0.9, 30).is_some());
    }

    #[test]
    fn singular_alternative_lies_on_a_plane() {
        let src = DataSource::for_setting(&ModelSpec::TruncatedMixtureBall { dim: 3 }, 1.0).unwrap();
        assert!(src.density_model().is_none());
        let x = src.draw(200, &mut RngStream::new(3, 0).rng()).unwrap();
        for r in 0..x.nrows() {
            assert!(((x[(r, 0)] - x[(r, 1)]).abs() - 1.0).abs() < 1e-12);
        }
        let src = DataSource::for_setting(&ModelSpec::TruncatedGaussianBall { dim: 3 }, -1.0).unwrap();
        let x = src.draw(200, &mut RngStream::new(3, 0).rng()).unwrap();
        for r in 0..x.nrows() {
            assert!((x[(r, 0)] + x[(r, 1)]).abs() < 1e-12);
        }
        assert!(DataSource::for_setting(&ModelSpec::TruncatedGaussianBall { dim: 3 }, 1.5).is_err());
        assert!(matches!(
            DataSource::for_setting(&ModelSpec::TruncatedGaussianBall { dim: 3 }, 0.5).unwrap(),
            DataSource::Model(_)
        ));
    }

    #[test]
    fn power_requires_setting() {
        let cfg = ExperimentConfig::from_json(
            r#"{"model": {"family": "dirichlet", "alpha": [1, 1, 1]}, "methods": [{"method": "ksd"}], "nu": [0.1], "n": [10]}"#,
        )
        .unwrap();
        assert!(matches!(run_power(&cfg), Err(Error::Config(_))));
    }
}
