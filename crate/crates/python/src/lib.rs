//! Python bindings: matrix sign routines, sketches, schedules, the matrix
//! regression problem and the optimizers. Matrices cross the boundary as
//! 2-D float64 numpy arrays.

use lowrank_core::experiments::config::{Experiment, Method, RunConfig};
use lowrank_core::experiments::regression::{build_optimizer, run_method};
use lowrank_core::linalg::{self, NsCoefficients, PolarConfig};
use lowrank_core::optimizers::{self, ScheduleKind};
use lowrank_core::orthogonalize::{self as orth, SafeguardPolicy, SketchSpec};
use lowrank_core::problems::{gen_matrix_regression, MatrixRegressionInstance};
use lowrank_core::{seeded_rng, Matrix, Rng};
use numpy::ndarray::Array2;
use numpy::{IntoPyArray, PyArray2, PyReadonlyArray2};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py_err(e: lowrank_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(a: &PyReadonlyArray2<'_, f64>) -> Matrix {
    let v = a.as_array();
    Matrix::from_fn(v.nrows(), v.ncols(), |i, j| v[[i, j]])
}

fn to_numpy<'py>(py: Python<'py>, m: &Matrix) -> Bound<'py, PyArray2<f64>> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)]).into_pyarray(py)
}

fn polar_from(name: &str, steps: usize) -> PyResult<PolarConfig> {
    match name {
        "exact" | "exact-svd" => Ok(PolarConfig::exact()),
        "newton-schulz" | "ns" => Ok(PolarConfig::newton_schulz(steps)),
        _ => Err(PyValueError::new_err(format!("unknown polar method '{name}'"))),
    }
}

/// `msgn(a) = U V^T` from the reduced SVD.
#[pyfunction]
fn msgn<'py>(py: Python<'py>, a: PyReadonlyArray2<'py, f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let s = linalg::msgn_exact(&to_matrix(&a)).map_err(to_py_err)?;
    Ok(to_numpy(py, &s))
}

#[pyfunction]
#[pyo3(signature = (a, steps = 5, coefficients = "convergent"))]
fn newton_schulz<'py>(
    py: Python<'py>,
    a: PyReadonlyArray2<'py, f64>,
    steps: usize,
    coefficients: &str,
) -> PyResult<Bound<'py, PyArray2<f64>>> {
    let mut cfg = PolarConfig::newton_schulz(steps);
    cfg.coefficients = match coefficients {
        "convergent" => NsCoefficients::CONVERGENT,
        "muon" => NsCoefficients::MUON,
        _ => return Err(PyValueError::new_err(format!("unknown coefficients '{coefficients}'"))),
    };
    let s = linalg::newton_schulz(&to_matrix(&a), &cfg).map_err(to_py_err)?;
    Ok(to_numpy(py, &s))
}

#[pyfunction]
fn nuclear_norm(a: PyReadonlyArray2<'_, f64>) -> f64 {
    linalg::nuclear_norm(&to_matrix(&a))
}

#[pyfunction]
fn singular_values(a: PyReadonlyArray2<'_, f64>) -> Vec<f64> {
    linalg::singular_values(&to_matrix(&a))
}

/// Low-rank sign estimate `Q S` with orthonormal `Q`.
#[pyclass(name = "LowRankSign", module = "lowrank")]
struct PyLowRankSign {
    inner: orth::LowRankSign,
}

#[pymethods]
impl PyLowRankSign {
    #[getter]
    fn q<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        to_numpy(py, &self.inner.q)
    }

    #[getter]
    fn s<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        to_numpy(py, &self.inner.s)
    }

    #[getter]
    fn rank_used(&self) -> usize {
        self.inner.r_used
    }

    /// Certified `||M - Q Q^T M||_*` (or its Frobenius upper bound), if computed.
    #[getter]
    fn residual(&self) -> Option<f64> {
        self.inner.residual.map(|r| r.value)
    }

    fn materialize<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        to_numpy(py, &self.inner.materialize())
    }

    fn __repr__(&self) -> String {
        format!(
            "LowRankSign(shape=({}, {}), rank_used={})",
            self.inner.q.nrows(),
            self.inner.s.ncols(),
            self.inner.r_used
        )
    }
}

fn sketch_spec(method: &str, rank: usize, power_q: usize, polar: &str) -> PyResult<SketchSpec> {
    let spec = match method {
        "gaussian" | "gaussian-sketch" => SketchSpec::gaussian(rank),
        "column" | "column-select" => SketchSpec::column_select(rank),
        "power" | "power-iteration" => SketchSpec::power(rank, power_q),
        _ => return Err(PyValueError::new_err(format!("unknown sketch method '{method}'"))),
    };
    Ok(spec.with_polar(polar_from(polar, 5)?))
}

#[pyfunction]
#[pyo3(signature = (a, rank, method = "gaussian", power_q = 2, polar = "exact", seed = 0))]
fn sketch_sign(
    a: PyReadonlyArray2<'_, f64>,
    rank: usize,
    method: &str,
    power_q: usize,
    polar: &str,
    seed: u64,
) -> PyResult<PyLowRankSign> {
    let spec = sketch_spec(method, rank, power_q, polar)?;
    let inner = orth::sketch_sign(&to_matrix(&a), &spec, &mut seeded_rng(seed)).map_err(to_py_err)?;
    Ok(PyLowRankSign { inner })
}

/// Grow the sketch rank from `r0` until the nuclear residual is at most `delta`.
#[pyfunction]
#[pyo3(signature = (a, delta, r0, polar = "exact", seed = 0))]
fn safeguarded_sketch(
    a: PyReadonlyArray2<'_, f64>,
    delta: f64,
    r0: usize,
    polar: &str,
    seed: u64,
) -> PyResult<PyLowRankSign> {
    let base = sketch_spec("gaussian", r0, 0, polar)?;
    let inner = orth::safeguarded_sketch(&to_matrix(&a), delta, &SafeguardPolicy::new(r0), &base, &mut seeded_rng(seed))
        .map_err(to_py_err)?;
    Ok(PyLowRankSign { inner })
}

/// `(eta, theta, delta)` at step `k`; entries a schedule does not define are `None`.
#[pyfunction]
#[pyo3(signature = (kind, k, alpha = 2.0))]
fn schedule(kind: &str, k: usize, alpha: f64) -> PyResult<(f64, Option<f64>, Option<f64>)> {
    let kind = match kind {
        "fixed-rank-gd" | "lr-gd" => ScheduleKind::FixedRankGd,
        "safeguarded-gd" => ScheduleKind::SafeguardedGd,
        "muon" | "lr-muon" => ScheduleKind::MuonHeavyTail,
        _ => return Err(PyValueError::new_err(format!("unknown schedule '{kind}'"))),
    };
    let s = optimizers::schedule(kind, alpha, k).map_err(to_py_err)?;
    Ok((s.eta, s.theta, s.delta))
}

/// `f(X) = 1/2 ||A X B - C||_F^2` with a prescribed geometric spectrum.
#[pyclass(name = "RegressionInstance", module = "lowrank")]
struct PyRegressionInstance {
    inner: MatrixRegressionInstance,
}

#[pymethods]
impl PyRegressionInstance {
    #[new]
    #[pyo3(signature = (n, p, sv_base = 1.2, noise_scale = 1e-3, seed = 0))]
    fn new(n: usize, p: usize, sv_base: f64, noise_scale: f64, seed: u64) -> PyResult<Self> {
        let inner = gen_matrix_regression(n, p, sv_base, noise_scale, seed).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    fn objective(&self, x: PyReadonlyArray2<'_, f64>) -> PyResult<f64> {
        self.inner.objective(&to_matrix(&x)).map_err(to_py_err)
    }

    fn gradient<'py>(&self, py: Python<'py>, x: PyReadonlyArray2<'py, f64>) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let g = self.inner.gradient(&to_matrix(&x)).map_err(to_py_err)?;
        Ok(to_numpy(py, &g))
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.dims()
    }

    #[getter]
    fn lipschitz_upper(&self) -> f64 {
        self.inner.lipschitz_upper
    }

    #[getter]
    fn a<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        to_numpy(py, &self.inner.a)
    }

    #[getter]
    fn b<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        to_numpy(py, &self.inner.b)
    }

    #[getter]
    fn c<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        to_numpy(py, &self.inner.c)
    }

    #[getter]
    fn x_star<'py>(&self, py: Python<'py>) -> Bound<'py, PyArray2<f64>> {
        to_numpy(py, &self.inner.x_star)
    }
}

/// Benchmark settings from keyword options, using the `bench` key names.
fn run_config(options: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut cfg = RunConfig::new(Experiment::Regression);
    if let Some(opts) = options {
        for (k, v) in opts.iter() {
            let key: String = k.extract()?;
            let value = v.str()?.to_string();
            cfg.set(&key, &value).map_err(to_py_err)?;
        }
    }
    Ok(cfg)
}

fn parse_method(name: &str) -> PyResult<Method> {
    name.parse::<Method>().map_err(to_py_err)
}

/// Stateful optimizer for an `n x n` variable.
#[pyclass(name = "Optimizer", module = "lowrank", unsendable)]
struct PyOptimizer {
    inner: optimizers::Optimizer,
    rng: Rng,
}

#[pymethods]
impl PyOptimizer {
    #[new]
    #[pyo3(signature = (method, n, seed = 0, **options))]
    fn new(method: &str, n: usize, seed: u64, options: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let cfg = run_config(options)?;
        let inner = build_optimizer(parse_method(method)?, &cfg, n).map_err(to_py_err)?;
        Ok(Self {
            inner,
            rng: seeded_rng(seed),
        })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    /// One step; returns `(x_next, rank_used, residual)`.
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        x: PyReadonlyArray2<'py, f64>,
        grad: PyReadonlyArray2<'py, f64>,
    ) -> PyResult<(Bound<'py, PyArray2<f64>>, Option<usize>, Option<f64>)> {
        let (next, report) = self
            .inner
            .step(&to_matrix(&x), &to_matrix(&grad), &mut self.rng)
            .map_err(to_py_err)?;
        Ok((to_numpy(py, &next), report.rank_used, report.residual))
    }
}

/// Run `method` from `X = 0` and return the per-iterate log as columns.
#[pyfunction]
#[pyo3(signature = (method, instance, seed = 0, **options))]
fn run_regression<'py>(
    py: Python<'py>,
    method: &str,
    instance: &PyRegressionInstance,
    seed: u64,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = run_config(options)?;
    let run = run_method(&instance.inner, parse_method(method)?, &cfg, seed).map_err(to_py_err)?;
    let rows = &run.record.rows;
    let out = PyDict::new(py);
    out.set_item("k", rows.iter().map(|r| r.k).collect::<Vec<_>>())?;
    out.set_item("f", rows.iter().map(|r| r.f).collect::<Vec<_>>())?;
    out.set_item("grad_fro", rows.iter().map(|r| r.grad_fro).collect::<Vec<_>>())?;
    out.set_item("grad_nuc", rows.iter().map(|r| r.grad_nuc).collect::<Vec<_>>())?;
    out.set_item("rank_used", rows.iter().map(|r| r.rank_used).collect::<Vec<_>>())?;
    out.set_item("status", run.record.header.status.clone())?;
    out.set_item("x", to_numpy(py, &run.final_x))?;
    Ok(out)
}

#[pymodule]
fn lowrank(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(msgn, m)?)?;
    m.add_function(wrap_pyfunction!(newton_schulz, m)?)?;
    m.add_function(wrap_pyfunction!(nuclear_norm, m)?)?;
    m.add_function(wrap_pyfunction!(singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(sketch_sign, m)?)?;
    m.add_function(wrap_pyfunction!(safeguarded_sketch, m)?)?;
    m.add_function(wrap_pyfunction!(schedule, m)?)?;
    m.add_function(wrap_pyfunction!(run_regression, m)?)?;
    m.add_class::<PyLowRankSign>()?;
    m.add_class::<PyRegressionInstance>()?;
    m.add_class::<PyOptimizer>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
