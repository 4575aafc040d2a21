//! Python bindings. Results come back as plain dicts and lists decoded from
//! the same canonical JSON the command-line tool writes.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use serde_json::json;

use trajspace::holo::{self, BoundaryData, VerifyOptions};
use trajspace::localmodel;
use trajspace::render::canonical_json;
use trajspace::strata;
use trajspace::tracer::{self, Omega};
use trajspace::tspace;

create_exception!(trajspace_py, TrajspaceError, PyException);
create_exception!(trajspace_py, OrderViolation, TrajspaceError);

fn err(e: trajspace::Error) -> PyErr {
    match e {
        trajspace::Error::OrderViolation(m) => OrderViolation::new_err(m),
        trajspace::Error::Expr(_) | trajspace::Error::InvalidScene(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => TrajspaceError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = canonical_json(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Expression", module = "trajspace_py", frozen)]
struct PyExpression(trajspace::Expression);

#[pymethods]
impl PyExpression {
    #[new]
    fn new(text: &str, dimension: usize) -> PyResult<Self> {
        trajspace::expr::parse(text, dimension)
            .map(PyExpression)
            .map_err(|e| err(e.into()))
    }

    fn eval(&self, point: Vec<f64>) -> PyResult<f64> {
        self.0.eval(&point).map_err(|e| err(e.into()))
    }

    fn differentiate(&self, var: usize) -> Self {
        PyExpression(self.0.differentiate(var))
    }

    fn simplify(&self) -> Self {
        PyExpression(self.0.simplify())
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expression({:?})", self.0.to_string())
    }
}

#[pyclass(name = "Scene", module = "trajspace_py", frozen)]
struct PyScene(trajspace::Scene);

#[pymethods]
impl PyScene {
    #[staticmethod]
    fn from_path(path: &str) -> PyResult<Self> {
        trajspace::Scene::from_path(path).map(PyScene).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        trajspace::Scene::from_json_str(text).map(PyScene).map_err(err)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    #[getter]
    fn name(&self) -> Option<String> {
        self.0.name().map(str::to_owned)
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &trajspace::validate(&self.0))
    }

    /// `[z, L_v z, ..., L_v^(order) z]` as printed expressions.
    fn lie_tower(&self, order: usize) -> Vec<String> {
        self.0.lie_tower(order).iter().map(|e| e.to_string()).collect()
    }

    fn classify<'py>(&self, py: Python<'py>, point: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &strata::classify(&self.0, &point).map_err(err)?)
    }

    fn trace<'py>(&self, py: Python<'py>, seed: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &tracer::trace(&self.0, &seed).map_err(err)?)
    }

    /// Quotient complex with fiber statistics, filtration levels and Betti
    /// numbers (planar scenes). Spatial scenes use `samples` shell samples.
    #[pyo3(signature = (samples = 2000, seed = 0))]
    fn complex<'py>(&self, py: Python<'py>, samples: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let cx = if self.0.dimension() == 2 {
            tspace::build_complex_2d(&self.0)
        } else {
            tspace::build_complex_3d(&self.0, samples, seed)
        }
        .map_err(err)?;
        let filtration: Vec<_> = (1..=cx.dimension).map(|k| tspace::filtration(&cx, k)).collect();
        let doc = json!({
            "complex": cx,
            "vertices": cx.vertex_count(),
            "edges": cx.edge_count(),
            "fibers": tspace::fiber_statistics(&cx),
            "filtration": filtration,
            "betti": tspace::betti(&cx).ok(),
            "dot": tspace::to_dot(&cx),
        });
        to_py(py, &doc)
    }

    /// Boundary data in its JSON wire format.
    #[pyo3(signature = (density = 96, strict = false))]
    fn extract_boundary_data(&self, density: usize, strict: bool) -> PyResult<String> {
        holo::extract_boundary_data(&self.0, density, strict)
            .and_then(|d| d.to_json())
            .map_err(err)
    }
}

#[pyfunction]
fn reconstruct<'py>(py: Python<'py>, data: &str) -> PyResult<Bound<'py, PyAny>> {
    let data = BoundaryData::from_json(data).map_err(err)?;
    to_py(py, &holo::reconstruct(&data).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (scene, data, probes = 10_000))]
fn verify<'py>(py: Python<'py>, scene: &PyScene, data: &str, probes: usize) -> PyResult<Bound<'py, PyAny>> {
    let data = BoundaryData::from_json(data).map_err(err)?;
    let rec = holo::reconstruct(&data).map_err(err)?;
    let opts = VerifyOptions {
        probes,
        ..VerifyOptions::default()
    };
    to_py(py, &holo::verify_reconstruction(&scene.0, &data, &rec, opts).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (word, truncate = true, epsilon = localmodel::EPSILON))]
fn roundtrip<'py>(py: Python<'py>, word: Vec<usize>, truncate: bool, epsilon: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &localmodel::roundtrip(&Omega(word), truncate, epsilon).map_err(err)?)
}

/// Runs the command-line tool in-process and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    trajspace::cli::run(std::iter::once("trajspace".to_string()).chain(args))
}

#[pymodule]
fn trajspace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpression>()?;
    m.add_class::<PyScene>()?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(roundtrip, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("TrajspaceError", m.py().get_type::<TrajspaceError>())?;
    m.add("OrderViolation", m.py().get_type::<OrderViolation>())?;
    Ok(())
}
