//! Python bindings for `fpb-sim`.
//!
//! States and bases are passed as strings (`"H"`, `"V"`, `"D"`, `"A"`;
//! `"HV"`, `"DA"`), angles in degrees, and outcome vectors as four floats
//! or integers in `(Bob bit, Eve bit)` order `(1,0), (1,1), (0,1), (0,0)`.

use std::fs::File;
use std::path::PathBuf;

use fpb_sim::error_model::{self, N_PARAMS, PARAM_KEYS};
use fpb_sim::fit::{self, FitOptions};
use fpb_sim::montecarlo::{self, RngSeed};
use fpb_sim::probe::{self, Bb84State, ProbeConfig, SiftBasis};
use fpb_sim::{io as fileio, FpbError, OutcomeProbs, Weighting};
use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: FpbError) -> PyErr {
    match err {
        FpbError::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn state(s: &str) -> PyResult<Bb84State> {
    s.parse().map_err(to_py)
}

fn basis(s: &str) -> PyResult<SiftBasis> {
    s.parse().map_err(to_py)
}

fn config(pe: f64) -> PyResult<ProbeConfig> {
    ProbeConfig::new(pe).map_err(to_py)
}

fn weighting(s: &str) -> PyResult<Weighting> {
    match s.to_ascii_lowercase().as_str() {
        "equal" => Ok(Weighting::Equal),
        "counts" => Ok(Weighting::Counts),
        _ => Err(PyValueError::new_err(format!(
            "unknown weighting '{s}' (expected 'equal' or 'counts')"
        ))),
    }
}

fn outcome_probs(p: [f64; 4]) -> PyResult<OutcomeProbs> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(PyValueError::new_err(
            "probabilities must be finite and non-negative",
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(PyValueError::new_err(format!(
            "probabilities sum to {total}, expected 1"
        )));
    }
    Ok(OutcomeProbs(p))
}

/// Ten error-model parameters, exposed in degrees.
#[pyclass(name = "ErrorModelParams", module = "fpb_sim", skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: error_model::ErrorModelParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (
        d_xi=0.0, d_chi=0.0, d_theta_a_h=0.0, d_theta_a_d=0.0, d_theta_a_v=0.0,
        d_theta_a_a=0.0, alpha=0.0, delta=0.0, d_theta_b_hv=0.0, d_theta_b_da=0.0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        d_xi: f64,
        d_chi: f64,
        d_theta_a_h: f64,
        d_theta_a_d: f64,
        d_theta_a_v: f64,
        d_theta_a_a: f64,
        alpha: f64,
        delta: f64,
        d_theta_b_hv: f64,
        d_theta_b_da: f64,
    ) -> PyResult<Self> {
        Self::from_degrees([
            d_xi,
            d_chi,
            d_theta_a_h,
            d_theta_a_d,
            d_theta_a_v,
            d_theta_a_a,
            alpha,
            delta,
            d_theta_b_hv,
            d_theta_b_da,
        ])
    }

    #[staticmethod]
    fn zero() -> Self {
        Self {
            inner: error_model::ErrorModelParams::zero(),
        }
    }

    /// Parameters fitted to the laboratory data set.
    #[staticmethod]
    fn reference_fit() -> Self {
        Self {
            inner: error_model::ErrorModelParams::reference_fit(),
        }
    }

    #[staticmethod]
    fn from_degrees(values: [f64; N_PARAMS]) -> PyResult<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PyValueError::new_err("parameters must be finite"));
        }
        Ok(Self {
            inner: error_model::ErrorModelParams::from_degrees(values),
        })
    }

    fn to_degrees(&self) -> [f64; N_PARAMS] {
        self.inner.to_degrees()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in PARAM_KEYS.iter().zip(self.inner.to_degrees()) {
            d.set_item(*k, v)?;
        }
        Ok(d)
    }

    /// Equivalent parameter set with `alpha >= 0`.
    fn canonical(&self) -> Self {
        Self {
            inner: self.inner.canonical(),
        }
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha.to_degrees()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta.to_degrees()
    }

    fn __repr__(&self) -> String {
        let body: Vec<String> = PARAM_KEYS
            .iter()
            .zip(self.inner.to_degrees())
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("ErrorModelParams({})", body.join(", "))
    }

    fn __eq__(&self, other: PyRef<'_, PyParams>) -> bool {
        self.inner == other.inner
    }
}

/// Coincidence counts for one Alice state, Bob basis and nominal pe.
#[pyclass(name = "CountsRecord", module = "fpb_sim", skip_from_py_object)]
#[derive(Clone)]
struct PyRecord {
    inner: montecarlo::CountsRecord,
}

#[pymethods]
impl PyRecord {
    #[new]
    #[pyo3(signature = (alice, basis, pe, counts, duration_s=None))]
    fn new(
        alice: &str,
        basis: &str,
        pe: f64,
        counts: [u64; 4],
        duration_s: Option<f64>,
    ) -> PyResult<Self> {
        let inner = montecarlo::CountsRecord {
            alice: state(alice)?,
            bob_basis: self::basis(basis)?,
            pe_nominal: pe,
            counts,
            duration_s,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alice(&self) -> &'static str {
        self.inner.alice.as_str()
    }

    #[getter]
    fn basis(&self) -> &'static str {
        self.inner.bob_basis.as_str()
    }

    #[getter]
    fn pe(&self) -> f64 {
        self.inner.pe_nominal
    }

    #[getter]
    fn counts(&self) -> [u64; 4] {
        self.inner.counts
    }

    #[getter]
    fn duration_s(&self) -> Option<f64> {
        self.inner.duration_s
    }

    fn total(&self) -> u64 {
        self.inner.total()
    }

    fn __repr__(&self) -> String {
        let r = &self.inner;
        format!(
            "CountsRecord(alice='{}', basis='{}', pe={}, counts={:?})",
            r.alice, r.bob_basis, r.pe_nominal, r.counts
        )
    }
}

/// Outcome of `fit_parameters`.
#[pyclass(name = "FitResult", module = "fpb_sim", get_all, skip_from_py_object)]
struct PyFitResult {
    params: Py<PyParams>,
    residual: f64,
    evaluations: usize,
    converged: bool,
    warnings: Vec<String>,
}

#[pymethods]
impl PyFitResult {
    fn __repr__(&self, py: Python<'_>) -> String {
        format!(
            "FitResult(converged={}, residual={:e}, evaluations={}, params={})",
            if self.converged { "True" } else { "False" },
            self.residual,
            self.evaluations,
            self.params.borrow(py).__repr__()
        )
    }
}

fn records_of(records: &[PyRef<'_, PyRecord>]) -> Vec<montecarlo::CountsRecord> {
    records.iter().map(|r| r.inner.clone()).collect()
}

/// Closed-form Rényi information of the ideal probe.
#[pyfunction]
fn renyi_closed_form(pe: f64) -> PyResult<f64> {
    probe::renyi_closed_form(pe).map_err(to_py)
}

/// Rényi information computed from the sifted joint distribution.
#[pyfunction]
fn renyi_information(basis: &str, pe: f64) -> PyResult<f64> {
    let dist = probe::sift_joint_distribution(self::basis(basis)?, &config(pe)?).map_err(to_py)?;
    Ok(probe::renyi_information(&dist))
}

/// Joint distribution `P(b, e)` as `[[P(0,0), P(0,1)], [P(1,0), P(1,1)]]`.
#[pyfunction]
fn sift_joint_distribution(basis: &str, pe: f64) -> PyResult<[[f64; 2]; 2]> {
    let dist = probe::sift_joint_distribution(self::basis(basis)?, &config(pe)?).map_err(to_py)?;
    Ok(dist.p)
}

#[pyfunction]
fn error_probability(alice: &str, pe: f64) -> PyResult<f64> {
    Ok(probe::error_probability(state(alice)?, &config(pe)?))
}

/// Two-qubit state after the ideal CNOT, amplitudes indexed `2*control + target`.
#[pyfunction]
fn attack_output(alice: &str, pe: f64) -> PyResult<[Complex64; 4]> {
    Ok(probe::attack_output(state(alice)?, &config(pe)?).0)
}

#[pyfunction]
#[pyo3(signature = (alice, basis, pe, params=None))]
fn predict_outcome_probs(
    alice: &str,
    basis: &str,
    pe: f64,
    params: Option<PyRef<'_, PyParams>>,
) -> PyResult<[f64; 4]> {
    let p = params.map_or_else(error_model::ErrorModelParams::zero, |p| p.inner);
    error_model::predict_outcome_probs(&p, state(alice)?, self::basis(basis)?, &config(pe)?)
        .map(|o| o.0)
        .map_err(to_py)
}

#[pyfunction]
fn model_renyi(params: PyRef<'_, PyParams>, basis: &str, pe: f64) -> PyResult<f64> {
    error_model::model_renyi(&params.inner, self::basis(basis)?, &config(pe)?).map_err(to_py)
}

#[pyfunction]
fn model_sifted_error_rate(params: PyRef<'_, PyParams>, basis: &str, pe: f64) -> PyResult<f64> {
    error_model::model_sifted_error_rate(&params.inner, self::basis(basis)?, &config(pe)?)
        .map_err(to_py)
}

/// Multinomial sample of `n_pairs` events, reproducible for a given seed.
#[pyfunction]
fn simulate_counts(probs: [f64; 4], n_pairs: u64, seed: u64) -> PyResult<[u64; 4]> {
    montecarlo::simulate_counts(&outcome_probs(probs)?, n_pairs, RngSeed(seed)).map_err(to_py)
}

#[pyfunction]
fn noise_free_counts(probs: [f64; 4], n_pairs: u64) -> PyResult<[u64; 4]> {
    Ok(montecarlo::noise_free_counts(
        &outcome_probs(probs)?,
        n_pairs,
    ))
}

#[pyfunction]
fn estimate_probabilities(record: PyRef<'_, PyRecord>) -> PyResult<[f64; 4]> {
    montecarlo::estimate_probabilities(&record.inner)
        .map(|o| o.0)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (records, weighting="equal"))]
fn measured_renyi(records: Vec<PyRef<'_, PyRecord>>, weighting: &str) -> PyResult<f64> {
    montecarlo::measured_renyi(&records_of(&records), self::weighting(weighting)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (records, weighting="equal"))]
fn sifted_error_rate(records: Vec<PyRef<'_, PyRecord>>, weighting: &str) -> PyResult<f64> {
    montecarlo::sifted_error_rate(&records_of(&records), self::weighting(weighting)?).map_err(to_py)
}

/// Least-squares fit of the error model; the GIL is released while it runs.
#[pyfunction]
#[pyo3(signature = (records, init=None, max_evals=50_000, weighting="equal"))]
fn fit_parameters(
    py: Python<'_>,
    records: Vec<PyRef<'_, PyRecord>>,
    init: Option<PyRef<'_, PyParams>>,
    max_evals: usize,
    weighting: &str,
) -> PyResult<PyFitResult> {
    let records = records_of(&records);
    let init = init.map_or_else(error_model::ErrorModelParams::zero, |p| p.inner);
    let options = FitOptions {
        max_evals,
        weighting: self::weighting(weighting)?,
        ..FitOptions::default()
    };
    let result = py
        .detach(|| fit::fit_parameters(&records, &init, &options))
        .map_err(to_py)?;
    Ok(PyFitResult {
        params: Py::new(
            py,
            PyParams {
                inner: result.params,
            },
        )?,
        residual: result.residual,
        evaluations: result.evaluations,
        converged: result.converged,
        warnings: result.warnings,
    })
}

#[pyfunction]
fn read_counts(path: PathBuf) -> PyResult<Vec<PyRecord>> {
    let records = fileio::read_counts(&path).map_err(to_py)?;
    Ok(records
        .into_iter()
        .map(|inner| PyRecord { inner })
        .collect())
}

#[pyfunction]
fn write_counts(path: PathBuf, records: Vec<PyRef<'_, PyRecord>>) -> PyResult<()> {
    let file = File::create(&path).map_err(|e| to_py(e.into()))?;
    fileio::write_counts(file, &records_of(&records)).map_err(to_py)
}

/// Module initializer, also usable to register the module in an embedded interpreter.
#[pymodule]
#[pyo3(name = "fpb_sim")]
pub fn fpb_sim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("PARAM_KEYS", PARAM_KEYS.to_vec())?;
    m.add("CELL_ORDER", error_model::CELL_ORDER.to_vec())?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(renyi_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(renyi_information, m)?)?;
    m.add_function(wrap_pyfunction!(sift_joint_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(error_probability, m)?)?;
    m.add_function(wrap_pyfunction!(attack_output, m)?)?;
    m.add_function(wrap_pyfunction!(predict_outcome_probs, m)?)?;
    m.add_function(wrap_pyfunction!(model_renyi, m)?)?;
    m.add_function(wrap_pyfunction!(model_sifted_error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(noise_free_counts, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(measured_renyi, m)?)?;
    m.add_function(wrap_pyfunction!(sifted_error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(read_counts, m)?)?;
    m.add_function(wrap_pyfunction!(write_counts, m)?)?;
    Ok(())
}
