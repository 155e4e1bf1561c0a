//! Entry points behind the command-line subcommands. Each takes a parsed
//! [`ExperimentConfig`] and returns data; file handling lives in the binary.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::auxiliary::Auxiliary;
use crate::config::{AuxSpec, ExperimentConfig};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::experiment::DataSource;
use crate::gof::{ksd_test, TestResult};
use crate::sampling::RngStream;
use crate::stein::SteinKernelSpec;
use crate::verify::{run_suite, VerifyReport};

pub use crate::experiment::{run_power, run_type1};

/// Result of `test`, with the Stein kernel matrix for optional export.
#[derive(Debug, Clone)]
pub struct TestRun {
    pub result: TestResult,
    pub gram: DMatrix<f64>,
}

fn test_aux(cfg: &ExperimentConfig, q: &Arc<crate::model::DensityModel>, data: &DMatrix<f64>) -> Result<Auxiliary> {
    let spec = match (&cfg.aux, q.domain()) {
        (Some(a), _) => *a,
        (None, Domain::FullSpace { .. }) => AuxSpec::One,
        (None, other) => {
            return Err(Error::Config(format!("config must choose an auxiliary for a model on {other}")));
        }
    };
    let p = match (&spec, &cfg.alternative) {
        (AuxSpec::DensityRatio, Some(alt)) => Some(Arc::new(alt.build(0.0)?)),
        _ => None,
    };
    spec.build(q, p.as_ref(), Some(data))
}

/// Goodness-of-fit test of the configured model on `data`.
pub fn run_test(cfg: &ExperimentConfig, data: &DMatrix<f64>) -> Result<TestRun> {
    let q = Arc::new(cfg.model()?.build(0.0)?);
    if data.ncols() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: q.dim(),
            got: data.ncols(),
        });
    }
    for r in 0..data.nrows() {
        let row: Vec<f64> = data.row(r).iter().copied().collect();
        q.domain().check(&row).map_err(|e| e.at_row(r))?;
    }
    let aux = test_aux(cfg, &q, data)?;
    let spec = SteinKernelSpec::new(q, cfg.kernel.build(data)?, aux)?;
    let gram = spec.gram_matrix(data)?;
    let result = ksd_test(&spec, data, cfg.level, cfg.bootstrap, cfg.seed)?;
    Ok(TestRun { result, gram })
}

/// `n[0]` draws from the configured model at perturbation `nu[0]` (default 0),
/// from stream `(seed, 0)`.
pub fn run_sample(cfg: &ExperimentConfig) -> Result<DMatrix<f64>> {
    let n = *cfg
        .n
        .first()
        .ok_or_else(|| Error::Config("sample needs a sample size in 'n'".into()))?;
    let nu = cfg.nu.first().copied().unwrap_or(0.0);
    let source = DataSource::for_setting(cfg.model()?, nu)?;
    source.draw(n, &mut RngStream::new(cfg.seed, 0).rng())
}

/// The certification suite restricted to `cfg.checks`.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    run_suite(&cfg.checks, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn boundary_row_is_named() {
        let c = cfg(r#"{"model": {"family": "dirichlet", "alpha": [0.5, 0.5, 0.5]}, "aux": {"aux": "mindist"}}"#);
        let data = DMatrix::from_row_slice(3, 2, &[0.2, 0.3, 0.0, 0.5, 0.4, 0.4]);
        match run_test(&c, &data) {
            Err(e @ Error::AtRow { row: 1, .. }) => assert!(e.is_input_error()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn full_space_defaults_to_langevin() {
        let c = cfg(
            r#"{"model": {"family": "gaussian", "mean": [0], "covariance": [[1]], "domain": {"kind": "full_space", "dim": 1}},
                "B": 50, "seed": 9}"#,
        );
        let data = DMatrix::from_column_slice(5, 1, &[-0.5, 0.1, 0.7, 1.2, -1.9]);
        let a = run_test(&c, &data).unwrap();
        assert_eq!(a.result.n, 5);
        assert_eq!(a.result, run_test(&c, &data).unwrap().result);
        let ball = cfg(r#"{"model": {"family": "truncated_gaussian_ball", "dim": 1}}"#);
        assert!(matches!(run_test(&ball, &DMatrix::from_element(2, 1, 0.1)), Err(Error::Config(_))));
    }

    #[test]
    fn sampling_uses_first_entries() {
        let c = cfg(r#"{"model": {"family": "dirichlet_simplex", "parts": 4}, "n": [7, 100], "nu": [0.3]}"#);
        assert_eq!(run_sample(&c).unwrap().shape(), (7, 3));
        assert!(run_sample(&cfg(r#"{"model": {"family": "dirichlet_simplex", "parts": 4}}"#)).is_err());
    }
}
