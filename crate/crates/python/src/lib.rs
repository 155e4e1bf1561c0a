//! Python bindings: models, auxiliary functions, the Stein and MMD tests, the
//! experiment tables and the certification suite. Samples cross the boundary
//! as lists of rows.

use std::sync::Arc;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sfksd::auxiliary::{
    aux_ball_power, aux_constant_one, aux_density_ratio, aux_mirror_negentropy, aux_simplex_geomean,
    aux_simplex_mindist, optimality_residual,
};
use sfksd::config::{ExperimentConfig, ModelSpec};
use sfksd::experiment::{run_power, run_type1, DataSource};
use sfksd::kernel::{median_heuristic, rbf};
use sfksd::linalg::{from_rows, rows};
use sfksd::model::{make_dirichlet_chart, make_gaussian, make_gaussian_mixture};
use sfksd::{Auxiliary, DensityModel, Domain, RngStream, SteinKernelSpec};

fn to_py(e: sfksd::Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn matrix(points: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    if let Some(r) = points.iter().position(|p| p.len() != dim) {
        return Err(PyValueError::new_err(format!("row {r} has {} entries, expected {dim}", points[r].len())));
    }
    Ok(from_rows(points, dim))
}

fn square(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("covariance must be a square list of rows"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn domain(kind: &str, dim: usize) -> PyResult<Domain> {
    match kind {
        "full_space" => Domain::full_space(dim),
        "unit_ball" => Domain::unit_ball(dim),
        other => return Err(PyValueError::new_err(format!("unknown domain '{other}' (full_space or unit_ball)"))),
    }
    .map_err(to_py)
}

/// Unnormalised density with its score and support.
#[pyclass(name = "Model", frozen)]
#[derive(Clone)]
struct PyModel(Arc<DensityModel>);

#[pymethods]
impl PyModel {
    /// Gaussian on `domain` ("full_space" or "unit_ball").
    #[staticmethod]
    #[pyo3(signature = (mean, covariance, domain="full_space"))]
    fn gaussian(mean: Vec<f64>, covariance: Vec<Vec<f64>>, domain: &str) -> PyResult<Self> {
        let d = self::domain(domain, mean.len())?;
        Ok(PyModel(Arc::new(make_gaussian(&mean, &square(covariance)?, d).map_err(to_py)?)))
    }

    #[staticmethod]
    #[pyo3(signature = (weights, means, covariances, domain="full_space"))]
    fn gaussian_mixture(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<Vec<f64>>>,
        domain: &str,
    ) -> PyResult<Self> {
        let d = self::domain(domain, means.first().map_or(0, Vec::len))?;
        let covs = covariances.into_iter().map(square).collect::<PyResult<Vec<_>>>()?;
        Ok(PyModel(Arc::new(make_gaussian_mixture(&weights, &means, &covs, d).map_err(to_py)?)))
    }

    /// Dirichlet in the chart of its first `len(alpha) - 1` parts.
    #[staticmethod]
    fn dirichlet(alpha: Vec<f64>) -> PyResult<Self> {
        Ok(PyModel(Arc::new(make_dirichlet_chart(&alpha).map_err(to_py)?)))
    }

    /// Model from a JSON model spec, e.g. `{"family": "truncated_mixture_ball", "dim": 3}`.
    #[staticmethod]
    #[pyo3(signature = (spec, nu=0.0))]
    fn from_json(spec: &str, nu: f64) -> PyResult<Self> {
        let spec: ModelSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyModel(Arc::new(spec.build(nu).map_err(to_py)?)))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn log_density_unnorm(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.domain().check(&x).map_err(to_py)?;
        Ok(self.0.log_density_unnorm(&x))
    }

    fn score(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.domain().check(&x).map_err(to_py)?;
        Ok(self.0.score(&x))
    }

    /// `n` draws from stream `(seed, 0)`.
    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let x = DataSource::Model(self.0.clone())
            .draw(n, &mut RngStream::new(seed, 0).rng())
            .map_err(to_py)?;
        Ok(rows(&x))
    }

    fn __repr__(&self) -> String {
        format!("Model(dim={}, domain={})", self.0.dim(), self.0.domain())
    }
}

/// Auxiliary (standardisation) function.
#[pyclass(name = "Aux", frozen)]
#[derive(Clone)]
struct PyAux(Auxiliary);

#[pymethods]
impl PyAux {
    #[staticmethod]
    fn constant_one(dim: usize) -> PyResult<Self> {
        Ok(PyAux(aux_constant_one(dim).map_err(to_py)?.into()))
    }

    #[staticmethod]
    fn ball_power(p: f64, dim: usize) -> PyResult<Self> {
        Ok(PyAux(aux_ball_power(p, dim).map_err(to_py)?.into()))
    }

    #[staticmethod]
    fn geomean(parts: usize) -> PyResult<Self> {
        Ok(PyAux(aux_simplex_geomean(parts).map_err(to_py)?.into()))
    }

    #[staticmethod]
    fn mindist(parts: usize) -> PyResult<Self> {
        Ok(PyAux(aux_simplex_mindist(parts).map_err(to_py)?.into()))
    }

    #[staticmethod]
    fn mirror(parts: usize) -> PyResult<Self> {
        Ok(PyAux(aux_mirror_negentropy(parts).map_err(to_py)?.into()))
    }

    /// Self-normalised `q/p`; `samples` are draws from `p`.
    #[staticmethod]
    fn density_ratio(q: &PyModel, p: &PyModel, samples: Vec<Vec<f64>>) -> PyResult<Self> {
        let aux = aux_density_ratio(q.0.clone(), p.0.clone(), &matrix(&samples)?).map_err(to_py)?;
        Ok(PyAux(aux.into()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// Values at `x`: `{"g", "div"}` for diagonal and `{"g", "col_div"}` for
    /// matrix auxiliaries (`g` as a list of rows).
    fn evaluate<'py>(&self, py: Python<'py>, x: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        match &self.0 {
            Auxiliary::Diagonal(a) => {
                let v = a.evaluate(&x).map_err(to_py)?;
                out.set_item("g", v.g)?;
                out.set_item("div", v.div)?;
            }
            Auxiliary::Matrix(a) => {
                let v = a.evaluate(&x).map_err(to_py)?;
                out.set_item("g", rows(&v.g))?;
                out.set_item("col_div", v.col_div)?;
            }
        }
        Ok(out)
    }

    /// Mean and standard error of `g_i ∂_i log q` under `samples`.
    fn optimality_residual(&self, q: &PyModel, samples: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        match &self.0 {
            Auxiliary::Diagonal(a) => optimality_residual(a, &q.0, &matrix(&samples)?).map_err(to_py),
            Auxiliary::Matrix(_) => Err(PyValueError::new_err("optimality residual needs a diagonal auxiliary")),
        }
    }
}

fn test_result_dict<'py>(py: Python<'py>, r: &sfksd::TestResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("statistic", r.statistic)?;
    d.set_item("threshold", r.threshold)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("reject", r.reject)?;
    d.set_item("n", r.n)?;
    d.set_item("B", r.bootstrap_draws)?;
    d.set_item("seed", r.seed)?;
    Ok(d)
}

fn bandwidth_for(samples: &DMatrix<f64>, bandwidth: Option<f64>) -> PyResult<f64> {
    match bandwidth {
        Some(b) => Ok(b),
        None => median_heuristic(samples).map_err(to_py),
    }
}

fn stein_spec(model: &PyModel, aux: &PyAux, x: &DMatrix<f64>, bandwidth: Option<f64>) -> PyResult<SteinKernelSpec> {
    let k = rbf(bandwidth_for(x, bandwidth)?).map_err(to_py)?;
    SteinKernelSpec::new(model.0.clone(), k, aux.0.clone()).map_err(to_py)
}

/// Stein discrepancy test of `samples` against `model`; the squared RBF
/// bandwidth defaults to the median heuristic.
#[pyfunction]
#[pyo3(signature = (model, aux, samples, level=0.01, bootstrap=300, seed=0, bandwidth=None))]
#[allow(clippy::too_many_arguments)]
fn ksd_test<'py>(
    py: Python<'py>,
    model: &PyModel,
    aux: &PyAux,
    samples: Vec<Vec<f64>>,
    level: f64,
    bootstrap: usize,
    seed: u64,
    bandwidth: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let x = matrix(&samples)?;
    let spec = stein_spec(model, aux, &x, bandwidth)?;
    let r = py.detach(|| sfksd::gof::ksd_test(&spec, &x, level, bootstrap, seed)).map_err(to_py)?;
    test_result_dict(py, &r)
}

/// Stein kernel matrix over the rows of `samples`.
#[pyfunction]
#[pyo3(signature = (model, aux, samples, bandwidth=None))]
fn stein_kernel_matrix(
    model: &PyModel,
    aux: &PyAux,
    samples: Vec<Vec<f64>>,
    bandwidth: Option<f64>,
) -> PyResult<Vec<Vec<f64>>> {
    let x = matrix(&samples)?;
    let h = stein_spec(model, aux, &x, bandwidth)?.gram_matrix(&x).map_err(to_py)?;
    Ok(rows(&h))
}

/// Permutation MMD two-sample test; the bandwidth defaults to the median
/// heuristic on the pooled sample.
#[pyfunction]
#[pyo3(signature = (x, y, level=0.01, permutations=200, seed=0, bandwidth=None))]
fn mmd_test<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    level: f64,
    permutations: usize,
    seed: u64,
    bandwidth: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let (x, y) = (matrix(&x)?, matrix(&y)?);
    let pooled = from_rows(&rows(&x).into_iter().chain(rows(&y)).collect::<Vec<_>>(), x.ncols());
    let k = rbf(bandwidth_for(&pooled, bandwidth)?).map_err(to_py)?;
    let r = py.detach(|| sfksd::gof::mmd_test(&x, &y, &k, level, permutations, seed)).map_err(to_py)?;
    test_result_dict(py, &r)
}

fn config(text: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_json(text).map_err(to_py)
}

/// Power table (CSV text) for a JSON experiment config.
#[pyfunction]
fn power(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = config(config_json)?;
    py.detach(|| run_power(&cfg).and_then(|t| t.to_csv())).map_err(to_py)
}

/// Null rejection table (CSV text) for a JSON experiment config.
#[pyfunction]
fn type1(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = config(config_json)?;
    py.detach(|| run_type1(&cfg).and_then(|t| t.to_csv())).map_err(to_py)
}

/// Certification suite report as JSON text; all checks when `checks` is empty.
#[pyfunction]
#[pyo3(signature = (checks=Vec::new(), seed=0))]
fn verify(py: Python<'_>, checks: Vec<String>, seed: u64) -> PyResult<String> {
    let report = py.detach(|| sfksd::verify::run_suite(&checks, seed)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn sfksd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyAux>()?;
    m.add_function(wrap_pyfunction!(ksd_test, m)?)?;
    m.add_function(wrap_pyfunction!(stein_kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(mmd_test, m)?)?;
    m.add_function(wrap_pyfunction!(power, m)?)?;
    m.add_function(wrap_pyfunction!(type1, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("check_names", sfksd::verify::check_names())?;
    Ok(())
}
