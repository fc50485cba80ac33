//! Python bindings: a `Model` (mesh, parameters and closure) with tendency,
//! closure, diagnostics and time-integration methods, plus the dispersion
//! helpers and the configuration-driven commands.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use splitfem_core::cli_io::{self, RunConfig};
use splitfem_core::diagnostics::DiagnosticsRecord;
use splitfem_core::dispersion;
use splitfem_core::dynamics::RhsEvaluator;
use splitfem_core::integrators::{run_simulation, Scheme, TimeConfig};
use splitfem_core::testcases::{self, TestCase, TestCaseConfig};
use splitfem_core::{ClosureSpec, Error, Mesh, ModelParams, State};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config(_) | Error::Validation(_) => PyValueError::new_err(err.to_string()),
        Error::Io(_) => PyOSError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn state(u: Vec<f64>, v: Vec<f64>, h: Vec<f64>) -> PyResult<State> {
    State::new(u, v, h).map_err(to_py)
}

fn record_dict<'py>(py: Python<'py>, r: &DiagnosticsRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", r.t)?;
    d.set_item("energy", r.energy)?;
    d.set_item("mass_e", r.mass_e)?;
    d.set_item("mass_n", r.mass_n)?;
    d.set_item("total_pv", r.total_pv)?;
    d.set_item("enstrophy", r.enstrophy)?;
    d.set_item("energy_half", r.energy_half)?;
    Ok(d)
}

type Nodal = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// Split finite-element model on a uniform periodic mesh.
///
/// ```python
/// m = Model(129, closure="gp1-gp0")
/// u, v, h = m.initial_state("tc1")
/// du, dv, dh = m.rhs(u, v, h)
/// ```
#[pyclass]
struct Model {
    ev: RhsEvaluator,
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (n, length=1.0, g=1.0, f=10.0, h_mean=1.0, closure="avg-avg"))]
    fn new(n: usize, length: f64, g: f64, f: f64, h_mean: f64, closure: &str) -> PyResult<Self> {
        let spec: ClosureSpec = closure.parse().map_err(to_py)?;
        let mesh = Mesh::uniform(n, length).map_err(to_py)?;
        spec.check_mesh(&mesh).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let ev = RhsEvaluator::new(mesh, ModelParams { g, f, h_mean }, spec).map_err(to_py)?;
        Ok(Model { ev })
    }

    #[getter]
    fn n(&self) -> usize {
        self.ev.mesh().n()
    }

    #[getter]
    fn closure(&self) -> String {
        self.ev.spec().label()
    }

    #[getter]
    fn node_x(&self) -> Vec<f64> {
        self.ev.mesh().node_x().to_vec()
    }

    #[getter]
    fn element_x(&self) -> Vec<f64> {
        self.ev.mesh().element_midpoints()
    }

    /// Default time step of the closure on this mesh.
    fn default_dt(&self) -> PyResult<f64> {
        dispersion::default_dt(self.ev.spec(), self.ev.mesh(), *self.ev.params()).map_err(to_py)
    }

    /// Element coefficients `(u, v, h)` of a named test case ("tc1", "tc2", "tc3").
    #[pyo3(signature = (case="tc1", amplitude=None, width=None, center=None, balance_fraction=None))]
    fn initial_state(
        &self,
        case: &str,
        amplitude: Option<f64>,
        width: Option<f64>,
        center: Option<f64>,
        balance_fraction: Option<f64>,
    ) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let case: TestCase = case.parse().map_err(to_py)?;
        let d = case.default_config();
        let cfg = TestCaseConfig {
            amplitude: amplitude.unwrap_or(d.amplitude),
            width: width.unwrap_or(d.width),
            center: center.unwrap_or(d.center),
            balance_fraction: balance_fraction.unwrap_or(d.balance_fraction),
        };
        let s = testcases::initial_state(case, &cfg, self.ev.params(), self.ev.mesh()).map_err(to_py)?;
        Ok((s.u.into_vec(), s.v.into_vec(), s.h.into_vec()))
    }

    /// Tendencies `(du, dv, dh)`.
    fn rhs(&mut self, u: Vec<f64>, v: Vec<f64>, h: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let t = self.ev.rhs(&state(u, v, h)?).map_err(to_py)?;
        Ok((t.du.into_vec(), t.dv.into_vec(), t.dh.into_vec()))
    }

    /// Nodal fields `(h0, u0, v0, q)` of a state.
    fn nodal(&mut self, u: Vec<f64>, v: Vec<f64>, h: Vec<f64>) -> PyResult<Nodal> {
        self.ev.rhs(&state(u, v, h)?).map_err(to_py)?;
        let (h0, u0, v0, q) = self.ev.nodal();
        Ok((h0.to_vec(), u0.to_vec(), v0.to_vec(), q.to_vec()))
    }

    /// Energy, Casimirs and enstrophy of a state.
    fn diagnostics<'py>(&self, py: Python<'py>, u: Vec<f64>, v: Vec<f64>, h: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let s = state(u, v, h)?;
        let r =
            DiagnosticsRecord::compute(0.0, &s, self.ev.spec(), self.ev.mesh(), self.ev.operators(), self.ev.params())
                .map_err(to_py)?;
        record_dict(py, &r)
    }

    /// Integrates to `t_end`; returns the final state and the diagnostics series.
    #[pyo3(signature = (u, v, h, t_end, dt=None, scheme="rk4", sample_every=1))]
    #[allow(clippy::too_many_arguments)]
    fn run<'py>(
        &mut self,
        py: Python<'py>,
        u: Vec<f64>,
        v: Vec<f64>,
        h: Vec<f64>,
        t_end: f64,
        dt: Option<f64>,
        scheme: &str,
        sample_every: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let init = state(u, v, h)?;
        let dt = match dt {
            Some(dt) => dt,
            None => self.default_dt()?,
        };
        let time = match scheme {
            "rk4" => TimeConfig::rk4(dt),
            "implicit_midpoint" => TimeConfig { scheme: Scheme::ImplicitMidpoint, ..TimeConfig::rk4(dt) },
            other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
        };
        let out = run_simulation(&mut self.ev, &init, &time, t_end, sample_every).map_err(to_py)?;
        let steps = out.steps;
        let samples = out.into_result().map_err(to_py)?;
        let last = samples.last().expect("initial sample").state.clone();
        let d = PyDict::new(py);
        d.set_item("steps", steps)?;
        d.set_item("dt", dt)?;
        d.set_item("u", last.u.into_vec())?;
        d.set_item("v", last.v.into_vec())?;
        d.set_item("h", last.h.into_vec())?;
        let series = samples.iter().map(|s| record_dict(py, &s.diagnostics)).collect::<PyResult<Vec<_>>>()?;
        d.set_item("diagnostics", series)?;
        Ok(d)
    }
}

/// `√(gH) sin(k dx) / dx`.
#[pyfunction]
fn dispersion_avg_analytic(k: f64, g: f64, h_mean: f64, dx: f64) -> f64 {
    dispersion::dispersion_avg_analytic(k, g, h_mean, dx)
}

/// Measured frequencies of modes `0..=n/2` for a closure spec on a uniform mesh.
#[pyfunction]
#[pyo3(signature = (closure, n, length=1.0, g=1.0, h_mean=1.0))]
fn dispersion_curve(closure: &str, n: usize, length: f64, g: f64, h_mean: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let spec: ClosureSpec = closure.parse().map_err(to_py)?;
    let mesh = Mesh::uniform(n, length).map_err(to_py)?;
    let curve = dispersion::measured_curve(spec, &mesh, g, h_mean).map_err(to_py)?;
    Ok(curve.iter().map(|s| (s.k, s.omega)).unzip())
}

/// Runs a JSON configuration as `splitfem-rsw run` does; returns the
/// diagnostics file path.
#[pyfunction]
#[pyo3(signature = (config, overrides=Vec::new()))]
fn run_config(config: PathBuf, overrides: Vec<String>) -> PyResult<PathBuf> {
    let cfg = RunConfig::load(&config, &overrides).map_err(to_py)?;
    Ok(cli_io::cmd_run(&cfg).map_err(to_py)?.diag_path)
}

#[pymodule]
fn splitfem(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(dispersion_avg_analytic, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
