//! JSON experiment configuration: model, auxiliary, kernel and method specs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::auxiliary::{
    aux_ball_power, aux_constant_one, aux_density_ratio, aux_mirror_negentropy, aux_simplex_geomean,
    aux_simplex_mindist, Auxiliary,
};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::gof::{DEFAULT_BOOTSTRAP, DEFAULT_LEVEL, DEFAULT_PERMUTATIONS};
use crate::kernel::{median_heuristic, rbf, Rbf};
use crate::model::{correlated_covariance, make_dirichlet_chart, make_gaussian, make_gaussian_mixture, DensityModel};

/// A model family with explicit parameters, or one of the perturbable
/// experiment settings whose alternative is indexed by `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        domain: Domain,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
        domain: Domain,
    },
    Dirichlet {
        alpha: Vec<f64>,
    },
    /// Equal mixture of `N(∓e₁, Σ_ν)` restricted to the unit ball; `Σ_ν` has
    /// correlation `ν` between the first two coordinates.
    TruncatedMixtureBall {
        dim: usize,
    },
    /// `N(0, Σ_ν)` restricted to the unit ball.
    TruncatedGaussianBall {
        dim: usize,
    },
    /// Dirichlet with every concentration 0.5 except `α₁ = 0.5 + ν`.
    DirichletSimplex {
        parts: usize,
    },
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("covariance must be a square array of rows".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ModelSpec {
    pub fn is_perturbable(&self) -> bool {
        matches!(
            self,
            ModelSpec::TruncatedMixtureBall { .. } | ModelSpec::TruncatedGaussianBall { .. } | ModelSpec::DirichletSimplex { .. }
        )
    }

    /// Short name used in result tables.
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Gaussian { .. } => "gaussian".into(),
            ModelSpec::GaussianMixture { .. } => "gaussian_mixture".into(),
            ModelSpec::Dirichlet { .. } => "dirichlet".into(),
            ModelSpec::TruncatedMixtureBall { dim } => format!("truncated_mixture_ball_d{dim}"),
            ModelSpec::TruncatedGaussianBall { dim } => format!("truncated_gaussian_ball_d{dim}"),
            ModelSpec::DirichletSimplex { parts } => format!("dirichlet_simplex_d{parts}"),
        }
    }

    /// The model at perturbation `nu`; `nu = 0` is the null.
    pub fn build(&self, nu: f64) -> Result<DensityModel> {
        if !nu.is_finite() {
            return Err(Error::Config(format!("perturbation must be finite, got {nu}")));
        }
        if nu != 0.0 && !self.is_perturbable() {
            return Err(Error::Config(format!("model '{}' has no perturbation parameter", self.label())));
        }
        match self {
            ModelSpec::Gaussian { mean, covariance, domain } => {
                domain.validate()?;
                make_gaussian(mean, &matrix(covariance)?, domain.clone())
            }
            ModelSpec::GaussianMixture {
                weights,
                means,
                covariances,
                domain,
            } => {
                domain.validate()?;
                let covs = covariances.iter().map(|c| matrix(c)).collect::<Result<Vec<_>>>()?;
                make_gaussian_mixture(weights, means, &covs, domain.clone())
            }
            ModelSpec::Dirichlet { alpha } => make_dirichlet_chart(alpha),
            ModelSpec::TruncatedMixtureBall { dim } => {
                if *dim < 2 {
                    return Err(Error::Config("truncated mixture needs dim >= 2".into()));
                }
                let cov = correlated_covariance(*dim, nu);
                let mut m1 = vec![0.0; *dim];
                let mut m2 = vec![0.0; *dim];
                m1[0] = -1.0;
                m2[0] = 1.0;
                make_gaussian_mixture(&[0.5, 0.5], &[m1, m2], &[cov.clone(), cov], Domain::unit_ball(*dim)?)
            }
            ModelSpec::TruncatedGaussianBall { dim } => {
                make_gaussian(&vec![0.0; *dim], &correlated_covariance(*dim, nu), Domain::unit_ball(*dim)?)
            }
            ModelSpec::DirichletSimplex { parts } => {
                if *parts < 2 {
                    return Err(Error::Config("simplex needs at least two parts".into()));
                }
                let mut alpha = vec![0.5; *parts];
                alpha[0] += nu;
                make_dirichlet_chart(&alpha)
            }
        }
    }
}

/// Choice of auxiliary function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "aux", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuxSpec {
    One,
    BallPower { p: f64 },
    Geomean,
    Mindist,
    Mirror,
    DensityRatio,
}

impl AuxSpec {
    pub fn label(&self) -> String {
        match self {
            AuxSpec::One => "g=1".into(),
            AuxSpec::BallPower { p } => format!("p={p}"),
            AuxSpec::Geomean => "geomean".into(),
            AuxSpec::Mindist => "mindist".into(),
            AuxSpec::Mirror => "mirror".into(),
            AuxSpec::DensityRatio => "density_ratio".into(),
        }
    }

    /// Build the auxiliary for `q`. The density ratio needs the data model
    /// `p` and samples from it for the normaliser.
    pub fn build(
        &self,
        q: &Arc<DensityModel>,
        p: Option<&Arc<DensityModel>>,
        p_samples: Option<&DMatrix<f64>>,
    ) -> Result<Auxiliary> {
        let dim = q.dim();
        let parts = || match q.domain() {
            Domain::SimplexChart { parts } => Ok(*parts),
            other => Err(Error::Config(format!("{} needs a simplex model, got {other}", self.label()))),
        };
        Ok(match self {
            AuxSpec::One => aux_constant_one(dim)?.into(),
            AuxSpec::BallPower { p } => match q.domain() {
                Domain::Ball { radius, .. } if *radius == 1.0 => aux_ball_power(*p, dim)?.into(),
                other => return Err(Error::Config(format!("ball_power needs a unit-ball model, got {other}"))),
            },
            AuxSpec::Geomean => aux_simplex_geomean(parts()?)?.into(),
            AuxSpec::Mindist => aux_simplex_mindist(parts()?)?.into(),
            AuxSpec::Mirror => aux_mirror_negentropy(parts()?)?.into(),
            AuxSpec::DensityRatio => {
                let (p, samples) = p
                    .zip(p_samples)
                    .ok_or_else(|| Error::Config("density_ratio needs an alternative model".into()))?;
                aux_density_ratio(q.clone(), p.clone(), samples)?.into()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Rule(BandwidthRule),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Rbf,
}

/// `{"kernel": "rbf", "bandwidth": "median" | σ²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kernel: KernelName,
    pub bandwidth: Bandwidth,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kernel: KernelName::Rbf,
            bandwidth: Bandwidth::Rule(BandwidthRule::Median),
        }
    }
}

impl KernelSpec {
    /// The kernel for a sample; the median rule reads the sample itself.
    pub fn build(&self, samples: &DMatrix<f64>) -> Result<Rbf> {
        match self.bandwidth {
            Bandwidth::Rule(BandwidthRule::Median) => rbf(median_heuristic(samples)?),
            Bandwidth::Fixed(s) => rbf(s),
        }
    }
}

/// One test in a power or type-I table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    /// Stein discrepancy with the given auxiliary.
    BdKsd { aux: AuxSpec },
    /// Stein discrepancy with `g ≡ 1`.
    Ksd,
    /// Two-sample MMD against `n` draws from the null.
    Mmd,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::BdKsd { aux } => format!("bd-KSD({})", aux.label()),
            MethodSpec::Ksd => "KSD(g=1)".into(),
            MethodSpec::Mmd => "MMD".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Test,
    Power,
    Type1,
    Verify,
    Sample,
}

fn default_trials() -> usize {
    1
}
fn default_level() -> f64 {
    DEFAULT_LEVEL
}
fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}
fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    /// Data model for the density-ratio auxiliary in `test`.
    #[serde(default)]
    pub alternative: Option<ModelSpec>,
    #[serde(default)]
    pub aux: Option<AuxSpec>,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub methods: Vec<MethodSpec>,
    #[serde(default)]
    pub nu: Vec<f64>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_bootstrap", rename = "B", alias = "bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Verification checks to run; empty means all.
    #[serde(default)]
    pub checks: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(bad) = self.nu.iter().find(|v| !v.is_finite()) {
            return Err(Error::Config(format!("perturbation levels must be finite, got {bad}")));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if self.bootstrap == 0 || self.permutations == 0 {
            return Err(Error::Config("bootstrap and permutation counts must be positive".into()));
        }
        if let Bandwidth::Fixed(s) = self.kernel.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("bandwidth must be positive, got {s}")));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model.as_ref().ok_or_else(|| Error::Config("config has no model".into()))
    }
}
