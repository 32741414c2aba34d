//! Python bindings: curves, r-curvature, flow runs, the traveling wave and
//! the acceptance driver.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use rflow_core::flow::{run, RunOptions, StepControls};
use rflow_core::rcurv::{kappa_f, kappa_r, RCurvatureSample, SmoothingSpec};
use rflow_core::reproduce::{reproduce as reproduce_all, Constants, Group};
use rflow_core::scenario::{run_scenario as run_core, Scenario};
use rflow_core::shapes::AnalyticSet;
use rflow_core::wave::{build_h_star, measure_wave, WaveProfile};
use rflow_core::{CurveFamily, Error, PlanarCurve, Point2};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_json(v: &impl serde::Serialize) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Closed simple polygon, counter-clockwise.
#[pyclass(name = "Curve", module = "rflow")]
#[derive(Clone)]
struct PyCurve {
    inner: PlanarCurve,
}

#[pymethods]
impl PyCurve {
    #[new]
    fn new(points: Vec<(f64, f64)>) -> PyResult<Self> {
        let v = points.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
        Ok(PyCurve { inner: PlanarCurve::new(v).map_err(py_err)? })
    }

    /// Samples an analytic set given as a JSON descriptor, e.g.
    /// `{"kind": "circle", "radius": 1.0}`.
    #[staticmethod]
    #[pyo3(signature = (descriptor, n, window=None))]
    fn from_shape(descriptor: &str, n: usize, window: Option<f64>) -> PyResult<Self> {
        let set: AnalyticSet = serde_json::from_str(descriptor).map_err(|e| PyValueError::new_err(e.to_string()))?;
        set.validate().map_err(py_err)?;
        Ok(PyCurve { inner: set.discretize(n, window).map_err(py_err)? })
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|p| (p.x, p.y)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn perimeter(&self) -> f64 {
        self.inner.perimeter()
    }

    fn curvature(&self) -> Vec<f64> {
        self.inner.curvature()
    }

    fn kappa_r(&self, r: f64) -> PyResult<Vec<KappaSample>> {
        Ok(kappa_r(&self.inner, r).map_err(py_err)?.into_iter().map(KappaSample::from).collect())
    }

    #[pyo3(signature = (index, r, delta, nodes=32))]
    fn kappa_f(&self, index: usize, r: f64, delta: f64, nodes: usize) -> PyResult<f64> {
        let spec = SmoothingSpec::new(r, delta, nodes).map_err(py_err)?;
        kappa_f(&self.inner, index, &spec).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Curve({} vertices, area {:.6e})", self.inner.len(), self.inner.area())
    }
}

#[pyclass(module = "rflow", get_all)]
#[derive(Clone)]
struct KappaSample {
    vertex_index: usize,
    kappa: f64,
    ext_ball_fits: bool,
    int_ball_fits: bool,
    kappa_r_plus: f64,
    kappa_r_minus: f64,
    kappa_r: f64,
}

impl From<RCurvatureSample> for KappaSample {
    fn from(s: RCurvatureSample) -> Self {
        KappaSample {
            vertex_index: s.vertex_index,
            kappa: s.kappa,
            ext_ball_fits: s.ext_ball_fits,
            int_ball_fits: s.int_ball_fits,
            kappa_r_plus: s.kappa_r_plus,
            kappa_r_minus: s.kappa_r_minus,
            kappa_r: s.kappa_r,
        }
    }
}

#[pyclass(module = "rflow", get_all)]
struct FlowResult {
    time: f64,
    steps: usize,
    /// `(time, kind)` pairs.
    events: Vec<(f64, String)>,
    curves: Vec<PyCurve>,
}

/// Evolves the curves by the r-curvature flow with default controls.
#[pyfunction]
#[pyo3(signature = (curves, r, t_max, target_vertices=None))]
fn run_flow(curves: Vec<PyCurve>, r: f64, t_max: f64, target_vertices: Option<usize>) -> PyResult<FlowResult> {
    let family = CurveFamily::new(curves.into_iter().map(|c| c.inner).collect()).map_err(py_err)?;
    let n = target_vertices.unwrap_or_else(|| family.vertex_count());
    let controls = StepControls::auto(&family, n);
    let traj = run(family, r, &controls, &RunOptions::new(t_max, 0)).map_err(py_err)?;
    Ok(FlowResult {
        time: traj.final_state.time,
        steps: traj.final_state.step_count,
        events: traj.events.iter().map(|e| (e.time, e.kind.as_str().to_string())).collect(),
        curves: traj.final_state.curves().iter().map(|c| PyCurve { inner: c.clone() }).collect(),
    })
}

/// The glued traveling wave of unit speed for `r > 1`.
#[pyclass(name = "Wave", module = "rflow")]
struct PyWave {
    inner: WaveProfile,
}

#[pymethods]
impl PyWave {
    #[new]
    fn new(r: f64) -> PyResult<Self> {
        Ok(PyWave { inner: build_h_star(r).map_err(py_err)? })
    }

    #[getter]
    fn r(&self) -> f64 {
        self.inner.r
    }

    #[getter]
    fn ell(&self) -> f64 {
        self.inner.ell
    }

    #[getter]
    fn x_r(&self) -> f64 {
        self.inner.x_r
    }

    #[getter]
    fn x_tilde_r(&self) -> f64 {
        self.inner.x_tilde_r
    }

    fn half_domain(&self) -> f64 {
        self.inner.half_domain()
    }

    /// `h(x)`, or None outside the domain.
    fn h(&self, x: f64) -> Option<f64> {
        self.inner.h_star(x).map(|v| v.0)
    }

    fn phi(&self, x: f64) -> f64 {
        self.inner.phi_at(x)
    }

    /// Validation measurements as a JSON string.
    #[pyo3(signature = (n_check=2000))]
    fn report(&self, n_check: usize) -> PyResult<String> {
        to_json(&measure_wave(&self.inner, n_check).map_err(py_err)?)
    }
}

/// Runs a scenario file into `out`; returns the run report as JSON.
#[pyfunction]
#[pyo3(signature = (path, out, svg=false))]
fn run_scenario(path: &str, out: &str, svg: bool) -> PyResult<String> {
    let sc = Scenario::load(Path::new(path)).map_err(py_err)?;
    to_json(&run_core(&sc, Path::new(out), svg).map_err(py_err)?)
}

/// Acceptance criteria of the given groups; `(id, name, pass, measured)` rows.
#[pyfunction]
#[pyo3(signature = (only=Vec::new()))]
fn reproduce(only: Vec<String>) -> PyResult<Vec<(u8, String, bool, String)>> {
    let groups = only.iter().map(|g| Group::parse(g)).collect::<Result<Vec<_>, _>>().map_err(py_err)?;
    Ok(reproduce_all(&groups, &Constants::default(), |_| {}).into_iter().map(|r| (r.id, r.name, r.pass, r.measured)).collect())
}

#[pymodule]
fn rflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCurve>()?;
    m.add_class::<KappaSample>()?;
    m.add_class::<FlowResult>()?;
    m.add_class::<PyWave>()?;
    m.add_function(wrap_pyfunction!(run_flow, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    Ok(())
}
