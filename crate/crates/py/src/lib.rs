//! Python bindings. Structured reports come back as plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use vortex_tunnel::harness::{self, Scenario};
use vortex_tunnel::observables::{self, RunOptions, SamplingSpec};
use vortex_tunnel::{adiabatic, instanton, make_pulse};

fn err(e: vortex_tunnel::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serialize to JSON text; the Python side turns it into a dict.
pub fn to_json<T: Serialize>(v: &T) -> Result<String, vortex_tunnel::Error> {
    Ok(serde_json::to_string(v)?)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = to_json(v).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "SimulationParams", from_py_object)]
#[derive(Clone)]
struct PySimulationParams {
    inner: vortex_tunnel::SimulationParams,
}

#[pymethods]
impl PySimulationParams {
    #[new]
    #[pyo3(signature = (l_x, l_y, n_kx, n_ky, t_start, t_end, m0=1.0, c1=1.0, tol=1e-10))]
    #[allow(clippy::too_many_arguments)]
    fn new(l_x: f64, l_y: f64, n_kx: usize, n_ky: usize, t_start: f64, t_end: f64, m0: f64, c1: f64, tol: f64) -> PyResult<Self> {
        let mut p = vortex_tunnel::SimulationParams::new(l_x, l_y, n_kx, n_ky, t_start, t_end);
        p.m0 = m0;
        p.c1 = c1;
        p.tol = tol;
        p.validate().map_err(err)?;
        Ok(Self { inner: p })
    }

    #[getter]
    fn l_x(&self) -> f64 {
        self.inner.l_x
    }
    #[getter]
    fn l_y(&self) -> f64 {
        self.inner.l_y
    }
    #[getter]
    fn mode_count(&self) -> usize {
        self.inner.mode_count()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("SimulationParams(l_x={}, l_y={}, n_kx={}, n_ky={}, t=[{}, {}])", p.l_x, p.l_y, p.n_kx, p.n_ky, p.t_start, p.t_end)
    }
}

#[pyclass(name = "PulseProfile", from_py_object)]
#[derive(Clone)]
struct PyPulse {
    inner: vortex_tunnel::PulseProfile,
}

#[pymethods]
impl PyPulse {
    #[new]
    #[pyo3(signature = (shape, m0, e_max, m_min, t_p, t_center=0.0, m_offset=0.0))]
    fn new(shape: &str, m0: f64, e_max: f64, m_min: f64, t_p: f64, t_center: f64, m_offset: f64) -> PyResult<Self> {
        let p = make_pulse(shape, m0, e_max, m_min, t_p, t_center).map_err(err)?.with_m_offset(m_offset);
        p.validate().map_err(err)?;
        Ok(Self { inner: p })
    }

    /// (e_tilde, e_dot, m, m_dot) at t.
    fn evaluate(&self, t: f64) -> (f64, f64, f64, f64) {
        let s = self.inner.evaluate(t);
        (s.e_tilde, s.e_dot, s.m, s.m_dot)
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner).map_err(err)
    }
}

#[pyclass(name = "RunResult", skip_from_py_object)]
struct PyRunResult {
    inner: observables::RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }
    #[getter]
    fn j_x(&self) -> Vec<f64> {
        self.inner.j_x.clone()
    }
    #[getter]
    fn n_total(&self) -> Vec<f64> {
        self.inner.n_total.clone()
    }
    #[getter]
    fn e_tilde(&self) -> Vec<f64> {
        self.inner.e_tilde.clone()
    }
    #[getter]
    fn m_of_t(&self) -> Vec<f64> {
        self.inner.m_of_t.clone()
    }
    #[getter]
    fn n_transported(&self) -> f64 {
        self.inner.n_transported
    }
    #[getter]
    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.diagnostics)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(err)?;
        Ok(String::from_utf8_lossy(&buf).into_owned())
    }
}

/// Evolve the vacuum through the pulse.
#[pyfunction]
#[pyo3(signature = (params, pulse, per_period=40, per_tp=400))]
fn run(py: Python<'_>, params: &PySimulationParams, pulse: &PyPulse, per_period: usize, per_tp: usize) -> PyResult<PyRunResult> {
    let opts = RunOptions { sampling: SamplingSpec { per_period, per_tp }, ..Default::default() };
    let (p, q) = (params.inner.clone(), pulse.inner.clone());
    let r = py.detach(move || observables::run(&p, &q, &opts)).map_err(err)?;
    Ok(PyRunResult { inner: r })
}

#[pyfunction]
fn predicted_transport(pulse: &PyPulse, params: &PySimulationParams) -> f64 {
    adiabatic::predicted_transport(&pulse.inner, &params.inner).value
}

#[pyfunction]
fn adiabaticity_margin(pulse: &PyPulse, params: &PySimulationParams) -> f64 {
    adiabatic::adiabaticity_margin(&pulse.inner, &params.inner)
}

#[pyfunction]
fn lattice_sum(b: f64) -> PyResult<f64> {
    adiabatic::lattice_sum(b).ok_or_else(|| PyValueError::new_err("b must be positive"))
}

#[pyfunction]
#[pyo3(signature = (m_freq, l_x, c1=1.0))]
fn saddle<'py>(py: Python<'py>, m_freq: f64, l_x: f64, c1: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &instanton::saddle(m_freq, l_x, c1).map_err(err)?)
}

/// Condition report for the film described by an estimate config (JSON text; empty for the reference film).
#[pyfunction]
#[pyo3(signature = (config="{}"))]
fn estimate<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg: harness::EstimateConfig = harness::parse_config(config).map_err(err)?;
    to_py(py, &harness::run_estimate(&cfg).map_err(err)?)
}

/// Run a scenario (JSON text), optionally writing the output files; returns the summary.
#[pyfunction]
#[pyo3(signature = (config, out=None))]
fn simulate<'py>(py: Python<'py>, config: &str, out: Option<std::path::PathBuf>) -> PyResult<Bound<'py, PyAny>> {
    let s = Scenario::from_json(config).map_err(err)?;
    let (_, summary) = py.detach(|| harness::run_simulate(&s, out.as_deref())).map_err(err)?;
    to_py(py, &summary)
}

#[pyfunction]
#[pyo3(signature = (suite="all"))]
fn verify<'py>(py: Python<'py>, suite: &str) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| harness::run_verify(suite)).map_err(err)?;
    to_py(py, &r)
}

#[pymodule]
#[pyo3(name = "vortex_tunnel")]
fn vortex_tunnel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimulationParams>()?;
    m.add_class::<PyPulse>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_transport, m)?)?;
    m.add_function(wrap_pyfunction!(adiabaticity_margin, m)?)?;
    m.add_function(wrap_pyfunction!(lattice_sum, m)?)?;
    m.add_function(wrap_pyfunction!(saddle, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
