//! Python bindings for `cmclab`.
//!
//! Reports are returned as plain Python objects (dicts and lists) decoded
//! from their JSON form, so they match the CLI output field for field.

use cmclab::cli::{diagnose as run_diagnose, parse_suite, DiagnoseConfig};
use cmclab::kolmogorov::{route_agreement, TransitionField, MAGNUS_GUARD};
use cmclab::linalg::to_rows;
use cmclab::oracle::{verify_all, DiscreteScenario};
use cmclab::simulate::{build_weighted_ensemble, sample_factor, WeightedEnsemble};
use cmclab::{Error, Scenario};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_object<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A validated continuous-time scenario.
#[pyclass(name = "Scenario", module = "pycmclab", frozen)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Scenario::from_json(text).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Scenario::load(path).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn states(&self) -> usize {
        self.inner.states
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    /// Grid node times `t_0 .. t_K`.
    fn nodes(&self) -> Vec<f64> {
        self.inner.grid().nodes().collect()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Copy with every off-diagonal intensity multiplied by `scale`.
    fn with_intensity_scale(&self, scale: f64) -> Self {
        Self { inner: self.inner.with_intensity_scale(scale) }
    }

    fn __repr__(&self) -> String {
        format!("Scenario(name={:?}, states={}, steps={})", self.inner.name, self.inner.states, self.inner.steps)
    }
}

/// Paths simulated under the reference measure with their weights.
#[pyclass(name = "WeightedEnsemble", module = "pycmclab", frozen)]
struct PyEnsemble {
    inner: WeightedEnsemble,
}

#[pymethods]
impl PyEnsemble {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn states(&self) -> usize {
        self.inner.states
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    fn ess(&self) -> f64 {
        self.inner.ess()
    }

    fn weight_stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_object(py, &self.inner.weight_stats())
    }

    /// Chain state (0-based) of every path at time `t`.
    fn states_at(&self, t: f64) -> Vec<usize> {
        self.inner.paths.iter().map(|p| p.chain.state_at(t)).collect()
    }

    /// Jumps of one path as `(time, from, to)`.
    fn jumps(&self, index: usize) -> PyResult<Vec<(f64, usize, usize)>> {
        let p = self.inner.paths.get(index).ok_or_else(|| PyValueError::new_err("path index out of range"))?;
        Ok(p.chain.jumps().iter().map(|j| (j.time, j.from, j.to)).collect())
    }

    /// Weighted mean of `1{X_t = y}` for every state `y`.
    fn marginal(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.inner.states];
        for p in &self.inner.paths {
            out[p.chain.state_at(t)] += p.weight;
        }
        let n = self.inner.len().max(1) as f64;
        out.iter().map(|v| v / n).collect()
    }
}

/// Simulates `n` weighted paths.
#[pyfunction]
fn simulate(scenario: &PyScenario, n: usize, seed: u64) -> PyResult<PyEnsemble> {
    build_weighted_ensemble(&scenario.inner, n, seed).map(|inner| PyEnsemble { inner }).map_err(to_py)
}

/// `P(s,t)` along one sampled factor path; `s` and `t` must be grid nodes.
#[pyfunction]
fn transition_matrix(scenario: &PyScenario, seed: u64, s: f64, t: f64) -> PyResult<Vec<Vec<f64>>> {
    let sc = &scenario.inner;
    let grid = sc.grid();
    let factor = sample_factor(&sc.factor, &grid, seed).map_err(to_py)?;
    let field = TransitionField::build(&sc.intensity, &factor, &grid).map_err(to_py)?;
    field.p_at(s, t).map(|p| to_rows(&p)).map_err(to_py)
}

/// Field invariants and route agreement for one sampled factor path.
#[pyfunction]
fn field_report<'py>(py: Python<'py>, scenario: &PyScenario, seed: u64, s: f64, t: f64) -> PyResult<Bound<'py, PyAny>> {
    let sc = &scenario.inner;
    let grid = sc.grid();
    let factor = sample_factor(&sc.factor, &grid, seed).map_err(to_py)?;
    let field = TransitionField::build(&sc.intensity, &factor, &grid).map_err(to_py)?;
    let routes = route_agreement(&sc.intensity, &factor, &grid, s, t, MAGNUS_GUARD).map_err(to_py)?;
    let report = serde_json::json!({
        "invariants": field.invariants(),
        "chapman_kolmogorov": field.chapman_kolmogorov_error(),
        "routes": routes,
    });
    to_object(py, &report)
}

/// Martingale and conditional Markov diagnostics; `suite` is a comma list
/// of `m,k,l,n,cmc` or `all`.
#[pyfunction]
#[pyo3(signature = (scenario, ensemble, suite = "all", intensity_scale = 1.0))]
fn diagnose<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    ensemble: &PyEnsemble,
    suite: &str,
    intensity_scale: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let suite = parse_suite(suite).map_err(to_py)?;
    let cfg = DiagnoseConfig::for_scenario(&scenario.inner);
    let reports =
        run_diagnose(&scenario.inner, &ensemble.inner, &suite, intensity_scale, &cfg).map_err(to_py)?;
    let pass = reports.pass();
    to_object(py, &serde_json::json!({"reports": reports, "pass": pass}))
}

/// Exact discrete-time oracle on a scenario file or JSON string.
#[pyfunction]
fn oracle<'py>(py: Python<'py>, source: &str) -> PyResult<Bound<'py, PyAny>> {
    let sc = if source.trim_start().starts_with('{') {
        DiscreteScenario::from_json(source)
    } else {
        DiscreteScenario::load(source)
    }
    .map_err(to_py)?;
    to_object(py, &verify_all(&sc).map_err(to_py)?)
}

#[pymodule]
fn pycmclab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(transition_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(field_report, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
