//! Python bindings. Matrices cross the boundary as lists of rows.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use h2reduce::balanced::{self, BtMethod};
use h2reduce::linalg::Mat;
use h2reduce::lti::{self, HinfOptions};
use h2reduce::manifold;
use h2reduce::models;
use h2reduce::objective::{build_data_from_state_space, eval_f};
use h2reduce::pipeline::{self, Method, ReduceOptions};
use h2reduce::structured;

fn to_py_err(e: h2reduce::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

fn mat(name: &str, rows: Vec<Vec<f64>>) -> PyResult<Mat> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err(format!("{name}: rows have different lengths")));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Continuous-time model `ẋ = Ax + Bu`, `y = Cx`.
#[pyclass(name = "StateSpace", module = "h2reduce", frozen, from_py_object)]
#[derive(Clone)]
struct PyStateSpace {
    inner: lti::StateSpace,
}

#[pymethods]
impl PyStateSpace {
    #[new]
    fn new(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, c: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = lti::StateSpace::new(mat("A", a)?, mat("B", b)?, mat("C", c)?).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.a)
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.b)
    }

    #[getter]
    fn c(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.c)
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    #[getter]
    fn inputs(&self) -> usize {
        self.inner.inputs()
    }

    #[getter]
    fn outputs(&self) -> usize {
        self.inner.outputs()
    }

    fn is_stable(&self) -> bool {
        self.inner.is_stable()
    }

    /// Transfer matrix at `s = iω` as a list of rows of complex numbers.
    fn transfer(&self, omega: f64) -> PyResult<Vec<Vec<nalgebra::Complex<f64>>>> {
        let g = lti::transfer_eval(&self.inner, omega).map_err(to_py_err)?;
        Ok(g.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "StateSpace(order={}, inputs={}, outputs={})",
            self.inner.order(),
            self.inner.inputs(),
            self.inner.outputs()
        )
    }
}

/// Reduced model `(J, R, B, C)` with `J` skew-symmetric and `R` positive definite.
#[pyclass(name = "ManifoldPoint", module = "h2reduce", frozen, from_py_object)]
#[derive(Clone)]
struct PyManifoldPoint {
    inner: manifold::ManifoldPoint,
}

#[pymethods]
impl PyManifoldPoint {
    #[new]
    fn new(j: Vec<Vec<f64>>, r: Vec<Vec<f64>>, b: Vec<Vec<f64>>, c: Vec<Vec<f64>>) -> PyResult<Self> {
        let inner = manifold::ManifoldPoint::new(mat("J", j)?, mat("R", r)?, mat("B", b)?, mat("C", c)?)
            .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn j(&self) -> Vec<Vec<f64>> {
        rows(self.inner.j())
    }

    #[getter]
    fn r(&self) -> Vec<Vec<f64>> {
        rows(self.inner.r())
    }

    #[getter]
    fn b(&self) -> Vec<Vec<f64>> {
        rows(self.inner.b())
    }

    #[getter]
    fn c(&self) -> Vec<Vec<f64>> {
        rows(self.inner.c())
    }

    #[getter]
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn to_state_space(&self) -> PyResult<PyStateSpace> {
        let inner = structured::point_to_state_space(&self.inner).map_err(to_py_err)?;
        Ok(PyStateSpace { inner })
    }

    fn __repr__(&self) -> String {
        format!("ManifoldPoint(order={})", self.inner.order())
    }
}

#[pyclass(name = "RunReport", module = "h2reduce", frozen, get_all)]
struct PyRunReport {
    method: String,
    r: usize,
    h2_error: f64,
    hinf_error: f64,
    sigma_next: f64,
    grad_norm_final: f64,
    iterations: usize,
    wall_time_s: f64,
}

#[pymethods]
impl PyRunReport {
    fn __repr__(&self) -> String {
        format!(
            "RunReport(method={:?}, r={}, h2_error={:.6e}, hinf_error={:.6e}, iterations={})",
            self.method, self.r, self.h2_error, self.hinf_error, self.iterations
        )
    }
}

/// Mass-spring-damper chain with `n` states.
#[pyfunction]
fn gen_msd(n: usize) -> PyResult<PyStateSpace> {
    let (inner, _) = models::gen_msd(n).map_err(to_py_err)?;
    Ok(PyStateSpace { inner })
}

/// Published order-4 reduction of `gen_msd(50)`.
#[pyfunction]
fn reference_r4_point() -> PyManifoldPoint {
    PyManifoldPoint { inner: models::reference_r4_point() }
}

#[pyfunction]
fn load_system(path: &str) -> PyResult<PyStateSpace> {
    let inner = models::load_system(path).map_err(to_py_err)?;
    Ok(PyStateSpace { inner })
}

#[pyfunction]
fn save_system(sys: &PyStateSpace, path: &str) -> PyResult<()> {
    models::save_system(&sys.inner, path).map_err(to_py_err)
}

#[pyfunction]
fn h2_norm(sys: &PyStateSpace) -> PyResult<f64> {
    lti::h2_norm(&sys.inner).map_err(to_py_err)
}

#[pyfunction]
fn h2_error(full: &PyStateSpace, reduced: &PyStateSpace) -> PyResult<f64> {
    lti::h2_error_norm(&full.inner, &reduced.inner).map_err(to_py_err)
}

/// Peak gain and the frequency where it is attained.
#[pyfunction]
#[pyo3(signature = (sys, tol = 1e-6))]
fn hinf_norm(sys: &PyStateSpace, tol: f64) -> PyResult<(f64, f64)> {
    let n = lti::hinf_norm(&sys.inner, HinfOptions { tol, grid_only: false }).map_err(to_py_err)?;
    Ok((n.value, n.omega))
}

#[pyfunction]
fn hankel_singular_values(sys: &PyStateSpace) -> PyResult<Vec<f64>> {
    Ok(lti::hankel_singular_values(&sys.inner).map_err(to_py_err)?.0)
}

/// Balanced reduction; `method` is "matchdc" or "truncate".
#[pyfunction]
#[pyo3(signature = (sys, r, method = "matchdc"))]
fn bt_reduce(sys: &PyStateSpace, r: usize, method: &str) -> PyResult<PyStateSpace> {
    let method: BtMethod = method.parse().map_err(to_py_err)?;
    let bt = balanced::bt_reduce(&sys.inner, r, method).map_err(to_py_err)?;
    Ok(PyStateSpace { inner: bt.reduced })
}

/// Squared H² error between `full` and the reduced model at `point`.
#[pyfunction]
fn objective(full: &PyStateSpace, point: &PyManifoldPoint) -> PyResult<f64> {
    let data = build_data_from_state_space(&full.inner).map_err(to_py_err)?;
    Ok(eval_f(&data, &point.inner).map_err(to_py_err)?.0)
}

/// Reduces `full` to order `r` by "bt" or "riemannian" (trust region from BT).
#[pyfunction]
#[pyo3(signature = (full, r, method = "riemannian", max_iters = None, grad_tol = None, init = None))]
fn reduce(
    full: &PyStateSpace,
    r: usize,
    method: &str,
    max_iters: Option<usize>,
    grad_tol: Option<f64>,
    init: Option<PyManifoldPoint>,
) -> PyResult<(PyManifoldPoint, PyRunReport)> {
    let method: Method = method.parse().map_err(to_py_err)?;
    let mut opts = ReduceOptions::new(r, method);
    if let Some(k) = max_iters {
        opts.trust_region.max_iters = k;
    }
    opts.trust_region.grad_tol = grad_tol;
    opts.init = init.map(|p| p.inner);
    let red = pipeline::reduce(&full.inner, &opts).map_err(to_py_err)?;
    let rep = red.report;
    Ok((
        PyManifoldPoint { inner: red.point },
        PyRunReport {
            method: rep.method.to_string(),
            r: rep.r,
            h2_error: rep.h2_error,
            hinf_error: rep.hinf_error,
            sigma_next: rep.sigma_next,
            grad_norm_final: rep.grad_norm_final,
            iterations: rep.iterations,
            wall_time_s: rep.wall_time_s,
        },
    ))
}

#[pymodule(name = "h2reduce")]
fn h2reduce_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStateSpace>()?;
    m.add_class::<PyManifoldPoint>()?;
    m.add_class::<PyRunReport>()?;
    m.add_function(wrap_pyfunction!(gen_msd, m)?)?;
    m.add_function(wrap_pyfunction!(reference_r4_point, m)?)?;
    m.add_function(wrap_pyfunction!(load_system, m)?)?;
    m.add_function(wrap_pyfunction!(save_system, m)?)?;
    m.add_function(wrap_pyfunction!(h2_norm, m)?)?;
    m.add_function(wrap_pyfunction!(h2_error, m)?)?;
    m.add_function(wrap_pyfunction!(hinf_norm, m)?)?;
    m.add_function(wrap_pyfunction!(hankel_singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(bt_reduce, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    Ok(())
}
