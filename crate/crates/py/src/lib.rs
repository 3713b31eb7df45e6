//! Python bindings. Structured results cross the boundary as JSON and come
//! back as plain dicts and lists.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;
use winding_core::covmodel::{CovarianceModel, ModelSpec};
use winding_core::gauss_algebra::{quadrant_expectation as closed_form, quadrant_expectation_series, QuadrantCorr};
use winding_core::harness::{moments_summary, run, ExperimentConfig, ExperimentKind, RunOptions};
use winding_core::moments::{expectation_rate as rate, integral_i as integral, QuadratureSpec};
use winding_core::pathgen::{Backend, GridSpec, PathSampler, SamplerOptions};
use winding_core::winding::count_xy;

create_exception!(windlab, WindlabError, PyValueError);

fn err(e: winding_core::Error) -> PyErr {
    WindlabError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| WindlabError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn model(spec: &str) -> PyResult<CovarianceModel> {
    CovarianceModel::from_spec(&ModelSpec::from_json(spec).map_err(err)?).map_err(err)
}

/// `E[N_W([0,T])]/T` for a model given as a JSON spec.
#[pyfunction]
fn expectation_rate(spec: &str) -> PyResult<f64> {
    rate(&model(spec)?).map_err(err)
}

/// `I = ∫_0^∞ g1 g2` for an independent model.
#[pyfunction]
fn integral_i(spec: &str) -> PyResult<f64> {
    Ok(integral(&model(spec)?, &QuadratureSpec::default()).map_err(err)?.value)
}

/// Every available theoretical moment of a model at the given horizons.
#[pyfunction]
#[pyo3(signature = (spec, horizons = vec![1.0]))]
fn moments<'py>(py: Python<'py>, spec: &str, horizons: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let parsed = ModelSpec::from_json(spec).map_err(err)?;
    let cfg = ExperimentConfig::new(ExperimentKind::Variance, parsed, horizons, 0.01, 1, 0);
    let summary = moments_summary(&model(spec)?, &cfg);
    to_py(py, &summary)
}

/// `E[X1 X2 1{X3>0} 1{X4>0}]` for a standard Gaussian 4-vector; with
/// `order`, the truncated diagram series instead of the closed form.
#[pyfunction]
#[pyo3(signature = (rho12, rho13, rho14, rho23, rho24, rho34, order = None))]
#[allow(clippy::too_many_arguments)]
fn quadrant_expectation(
    rho12: f64,
    rho13: f64,
    rho14: f64,
    rho23: f64,
    rho24: f64,
    rho34: f64,
    order: Option<u32>,
) -> PyResult<f64> {
    let c = QuadrantCorr::new(rho12, rho13, rho14, rho23, rho24, rho34).map_err(err)?;
    match order {
        Some(q) => quadrant_expectation_series(&c, q),
        None => closed_form(&c),
    }
    .map_err(err)
}

/// One sample path on `[0, horizon]`: dict with `t`, `x1`, `x2`.
#[pyfunction]
#[pyo3(signature = (spec, horizon, dt, seed, replication = 0, backend = "spectral"))]
fn sample_path<'py>(
    py: Python<'py>,
    spec: &str,
    horizon: f64,
    dt: f64,
    seed: u64,
    replication: u64,
    backend: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let backend: Backend = backend.parse().map_err(err)?;
    let grid = GridSpec::from_step(horizon, dt).map_err(err)?;
    let sampler = PathSampler::new(&model(spec)?, grid, backend, SamplerOptions::default()).map_err(err)?;
    let path = sampler.sample(seed, replication);
    let out = PyDict::new(py);
    out.set_item("t", path.grid.times())?;
    out.set_item("x1", path.x1)?;
    out.set_item("x2", path.x2)?;
    Ok(out)
}

/// Winding of the polyline through `(x1[i], x2[i])`.
#[pyfunction]
fn count_windings<'py>(py: Python<'py>, x1: Vec<f64>, x2: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &count_xy(&x1, &x2).map_err(err)?)
}

/// Run an experiment from its JSON configuration and return the report.
#[pyfunction]
#[pyo3(signature = (config, workers = None))]
fn run_experiment<'py>(py: Python<'py>, config: &str, workers: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let report = py.detach(|| run(&cfg, RunOptions { workers })).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn windlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WindlabError", m.py().get_type::<WindlabError>())?;
    m.add_function(wrap_pyfunction!(expectation_rate, m)?)?;
    m.add_function(wrap_pyfunction!(integral_i, m)?)?;
    m.add_function(wrap_pyfunction!(moments, m)?)?;
    m.add_function(wrap_pyfunction!(quadrant_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(sample_path, m)?)?;
    m.add_function(wrap_pyfunction!(count_windings, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
