//! Python bindings. Models, penalizations, clocks and simulation settings
//! are passed as dicts with the same schema as the `lpen` JSON configs.

use lpen::calculus::{hit_prob, hit_prob3};
use lpen::montecarlo::{estimate_weighted, SimConfig};
use lpen::penalization::{expect_exact, expect_gamma_two_point, phi};
use lpen::verify::{run_verify, VerifyConfig};
use lpen::{ClockSpec, HFunction, ModelSpec, PenalizationParams};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn to_py(e: lpen::Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

/// Converts a Python object to `T` through its JSON form; `None` gives the
/// default of an empty object.
fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    let text: String = match obj {
        Some(o) if !o.is_none() => py.import("json")?.call_method1("dumps", (o,))?.extract()?,
        _ => "{}".to_string(),
    };
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn model_from(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<ModelSpec> {
    match obj {
        Some(o) if !o.is_none() => from_py(py, Some(o)),
        _ => Ok(ModelSpec::standard_bm()),
    }
}

/// `h` and the exact calculus built on it for one model.
#[pyclass(name = "HFunction", frozen)]
struct PyHFunction {
    inner: HFunction,
}

#[pymethods]
impl PyHFunction {
    #[new]
    #[pyo3(signature = (model=None))]
    fn new(py: Python<'_>, model: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        Ok(PyHFunction {
            inner: HFunction::new(model_from(py, model)?),
        })
    }

    #[getter]
    fn model<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, self.inner.model())
    }

    fn psi(&self, lam: f64) -> f64 {
        self.inner.model().psi(lam)
    }

    fn h(&self, x: f64) -> PyResult<f64> {
        Ok(self.inner.h_detailed(x).map_err(to_py)?.value)
    }

    fn h_gamma(&self, gamma: f64, x: f64) -> PyResult<f64> {
        self.inner.h_gamma(gamma, x).map_err(to_py)
    }

    fn h_q(&self, q: f64, x: f64) -> PyResult<f64> {
        self.inner.h_q(q, x).map_err(to_py)
    }

    /// `P_x(T_a < T_b)`.
    fn hit_prob(&self, x: f64, a: f64, b: f64) -> PyResult<f64> {
        hit_prob(&self.inner, x, a, b).map_err(to_py)
    }

    /// `P_x(T_a < T_b ∧ T_c)`.
    fn hit_prob3(&self, x: f64, a: f64, b: f64, c: f64) -> PyResult<f64> {
        hit_prob3(&self.inner, x, a, b, c).map_err(to_py)
    }

    /// The martingale density `φ(x)`.
    fn phi(&self, py: Python<'_>, penalization: &Bound<'_, PyAny>, x: f64) -> PyResult<f64> {
        let p: PenalizationParams = from_py(py, Some(penalization))?;
        phi(&self.inner, &p, x).map_err(to_py)
    }

    /// Exact `P_x[Γ_τ]`, or `None` for the exponential clock.
    fn expect(
        &self,
        py: Python<'_>,
        penalization: &Bound<'_, PyAny>,
        clock: &Bound<'_, PyAny>,
        x: f64,
    ) -> PyResult<Option<f64>> {
        let p: PenalizationParams = from_py(py, Some(penalization))?;
        let clock: ClockSpec = from_py(py, Some(clock))?;
        expect_exact(&self.inner, &p, &clock, x).map_err(to_py)
    }

    /// `{"restricted_c", "restricted_d", "total"}` for the clock `T_c ∧ T_{-d}`.
    fn expect_two_point<'py>(
        &self,
        py: Python<'py>,
        penalization: &Bound<'_, PyAny>,
        x: f64,
        c: f64,
        d: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let p: PenalizationParams = from_py(py, Some(penalization))?;
        let e = expect_gamma_two_point(&self.inner, &p, x, c, d).map_err(to_py)?;
        to_dict(py, &e)
    }
}

/// Monte Carlo estimate of `P_x[Γ_τ]` as a dict with mean, std_err, n,
/// truncated_fraction, seed and reliable.
#[pyfunction]
#[pyo3(signature = (penalization, clock, x, model=None, mc=None))]
fn estimate<'py>(
    py: Python<'py>,
    penalization: &Bound<'_, PyAny>,
    clock: &Bound<'_, PyAny>,
    x: f64,
    model: Option<&Bound<'_, PyAny>>,
    mc: Option<&Bound<'_, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let model = model_from(py, model)?;
    let p: PenalizationParams = from_py(py, Some(penalization))?;
    let clock: ClockSpec = from_py(py, Some(clock))?;
    let cfg: SimConfig = from_py(py, mc)?;
    let e = py
        .detach(|| estimate_weighted(&model, &p, &clock, x, &cfg))
        .map_err(to_py)?;
    to_dict(py, &e)
}

/// Runs the acceptance criteria and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (config=None))]
fn verify<'py>(py: Python<'py>, config: Option<&Bound<'_, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: VerifyConfig = from_py(py, config)?;
    let report = py.detach(|| run_verify(&cfg)).map_err(to_py)?;
    to_dict(py, &report)
}

#[pymodule]
fn lpen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHFunction>()?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
