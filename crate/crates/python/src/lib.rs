//! Python bindings for `mqwalk`.
//!
//! Matrices cross the boundary as nested lists (row-major) of `float` or
//! `complex`; indices stay 1-based as in the Rust API.

use std::path::PathBuf;

use mqwalk::experiment::{run_file, RunOptions};
use mqwalk::monitored::{self, path_sum_table, DEFAULT_EOS_TOL, DEFAULT_PATH_SUM_BUDGET};
use mqwalk::observables::{transition_stats_with_tol, DEFAULT_TAIL_TOL};
use mqwalk::unitary_avg::default_degeneracy_tol;
use mqwalk::{BasisKind, CMatrix};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(mqwalk_py, MqwalkError, PyException);

fn err(e: mqwalk::Error) -> PyErr {
    MqwalkError::new_err(e.to_string())
}

fn rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn real_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn basis_kind(name: &str) -> PyResult<BasisKind> {
    match name {
        "identity" => Ok(BasisKind::Identity),
        "localized" => Ok(BasisKind::Localized),
        "plane_wave" => Ok(BasisKind::PlaneWave),
        other => Err(MqwalkError::new_err(format!(
            "unknown basis {other:?}; expected identity, localized or plane_wave"
        ))),
    }
}

/// Energies plus the overlaps `q[k][j] = <r_k|E_j>` of graph state `k` with
/// energy state `j`.
#[pyclass(name = "SpectralModel", module = "mqwalk_py", frozen)]
struct PySpectralModel {
    inner: mqwalk::SpectralModel,
}

#[pymethods]
impl PySpectralModel {
    #[new]
    #[pyo3(signature = (energies, weights, tol = 1e-10))]
    fn new(energies: Vec<f64>, weights: Vec<Vec<Complex64>>, tol: f64) -> PyResult<Self> {
        let n = weights.len();
        if weights.iter().any(|r| r.len() != n) {
            return Err(MqwalkError::new_err("weights must be a square nested list"));
        }
        let q = CMatrix::from_fn(n, n, |k, j| weights[k][j]);
        let inner = mqwalk::SpectralModel::new(energies, q, tol).map_err(err)?;
        Ok(Self { inner })
    }

    /// Built-in basis with the linear spectrum `E_j = (j - 1) J`.
    #[staticmethod]
    #[pyo3(signature = (basis, n, coupling = 1.0))]
    fn linear(basis: &str, n: usize, coupling: f64) -> PyResult<Self> {
        let inner = mqwalk::SpectralModel::linear(&basis_kind(basis)?, n, coupling).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (basis, energies, tol = 1e-10))]
    fn from_basis(basis: &str, energies: Vec<f64>, tol: f64) -> PyResult<Self> {
        let inner = mqwalk::SpectralModel::from_basis(&basis_kind(basis)?, energies, tol).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energies().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<Complex64>> {
        rows(self.inner.weights())
    }

    fn ipr(&self, k: usize) -> PyResult<f64> {
        self.inner.inverse_participation_ratio(k).map_err(err)
    }

    fn hamiltonian(&self) -> Vec<Vec<Complex64>> {
        rows(&self.inner.hamiltonian_matrix())
    }

    fn unitary(&self, t: f64) -> Vec<Vec<Complex64>> {
        rows(&self.inner.unitary_matrix(t))
    }

    /// Half-step phases `z_k = exp(-i E_k tau / 2)`.
    fn phases(&self, tau: f64) -> Vec<Complex64> {
        self.inner.phase_factors(tau).z.to_vec()
    }

    fn __repr__(&self) -> String {
        format!("SpectralModel(n={})", self.inner.n())
    }
}

#[pyfunction]
fn ipr_localized_closed_form(n: usize, k: usize) -> PyResult<f64> {
    mqwalk::ipr_localized_closed_form(n, k).map_err(err)
}

#[pyfunction]
fn kernel(model: &PySpectralModel, measured: usize) -> PyResult<Vec<Vec<Complex64>>> {
    mqwalk::kernel(&model.inner, measured).map(|k| rows(&k)).map_err(err)
}

#[pyfunction]
fn monitored_matrix(model: &PySpectralModel, measured: usize, tau: f64) -> PyResult<Vec<Vec<Complex64>>> {
    mqwalk::monitored_matrix(&model.inner, measured, tau)
        .map(|op| rows(&op.matrix))
        .map_err(err)
}

/// Eigenvalues of the monitored step, largest modulus first.
#[pyfunction]
fn eigenvalues(model: &PySpectralModel, measured: usize, tau: f64) -> PyResult<Vec<Complex64>> {
    let op = mqwalk::monitored_matrix(&model.inner, measured, tau).map_err(err)?;
    mqwalk::eigenvalues(&op).map_err(err)
}

#[pyfunction]
fn resolvent_pole_residual(model: &PySpectralModel, measured: usize, tau: f64, z: Complex64) -> PyResult<f64> {
    let op = mqwalk::monitored_matrix(&model.inner, measured, tau).map_err(err)?;
    Ok(mqwalk::resolvent_pole_residual(&op, z))
}

/// First-detection amplitudes `phi(1..=m_max)` by the chosen route:
/// `matrix_power`, `projected`, `recursion` or `path_sum`.
#[pyfunction]
#[pyo3(signature = (model, measured, initial, tau, m_max, method = "matrix_power"))]
fn amplitudes(
    model: &PySpectralModel,
    measured: usize,
    initial: usize,
    tau: f64,
    m_max: usize,
    method: &str,
) -> PyResult<Vec<Complex64>> {
    let m = &model.inner;
    let series = match method {
        "matrix_power" => mqwalk::amplitude_matrix_power(m, measured, initial, tau, m_max),
        "projected" => mqwalk::amplitude_projected(m, measured, initial, tau, m_max, DEFAULT_EOS_TOL),
        "recursion" => mqwalk::amplitude_recursion(m, measured, initial, tau, m_max),
        "path_sum" => path_sum_table(m, measured, tau, m_max, DEFAULT_PATH_SUM_BUDGET)
            .and_then(|t| t.series(initial)),
        other => {
            return Err(MqwalkError::new_err(format!(
                "unknown method {other:?}; expected matrix_power, projected, recursion or path_sum"
            )))
        }
    };
    Ok(series.map_err(err)?.values)
}

/// Probabilities, cumulative sums, mean transition times (in time units,
/// `None` while undefined) and the termination step `mf`.
#[pyfunction]
#[pyo3(signature = (model, measured, initial, tau, m_max, tail_tol = DEFAULT_TAIL_TOL))]
fn transition_stats<'py>(
    py: Python<'py>,
    model: &PySpectralModel,
    measured: usize,
    initial: usize,
    tau: f64,
    m_max: usize,
    tail_tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let series = mqwalk::amplitude_matrix_power(&model.inner, measured, initial, tau, m_max).map_err(err)?;
    let stats = transition_stats_with_tol(&series, tail_tol).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("probs", &stats.probs)?;
    d.set_item("cumulative", &stats.cumulative)?;
    d.set_item("mtt", &stats.mtt_curve)?;
    d.set_item("mf", stats.mf)?;
    d.set_item("total_probability", stats.total_probability())?;
    Ok(d)
}

#[pyfunction]
fn detect_eos(model: &PySpectralModel, measured: usize) -> PyResult<Vec<usize>> {
    mqwalk::detect_eos(&model.inner, measured, DEFAULT_EOS_TOL)
        .map(|e| e.indices)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (model, measured, tau, tol = 1e-9))]
fn stationary_states(model: &PySpectralModel, measured: usize, tau: f64, tol: f64) -> PyResult<Vec<usize>> {
    mqwalk::stationary_states(&model.inner, measured, tau, tol).map_err(err)
}

#[pyfunction]
fn equivalence_classes(model: &PySpectralModel, measured: usize, tau: f64) -> PyResult<Vec<Vec<usize>>> {
    monitored::equivalence_classes(&model.inner, measured, tau, DEFAULT_EOS_TOL).map_err(err)
}

/// `grid[M-1][M'-1] = sum_{m <= m_max} |phi[M,M'](m)|^2`.
#[pyfunction]
fn probability_map(model: &PySpectralModel, tau: f64, m_max: usize) -> PyResult<Vec<Vec<f64>>> {
    mqwalk::probability_map(&model.inner, tau, m_max)
        .map(|p| real_rows(&p.grid))
        .map_err(err)
}

#[pyfunction]
fn mtt_matrix(model: &PySpectralModel, tau: f64, m_max: usize) -> PyResult<Vec<Vec<Option<f64>>>> {
    let m = mqwalk::mtt_matrix(&model.inner, tau, m_max).map_err(err)?;
    Ok(m.entries.chunks(m.n).map(<[_]>::to_vec).collect())
}

/// Infinite-time average of `|<r_k|U(t)|r_l>|^2`; `deg_tol` defaults to
/// `1e-9 * max|E|`.
#[pyfunction]
#[pyo3(signature = (model, deg_tol = None))]
fn averaged_matrix(model: &PySpectralModel, deg_tol: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
    let tol = deg_tol.unwrap_or_else(|| default_degeneracy_tol(model.inner.energies()));
    mqwalk::averaged_probability_matrix(&model.inner, tol)
        .map(|a| real_rows(&a.entries))
        .map_err(err)
}

#[pyfunction]
fn ue_transition_closed_form(n: usize, k: usize, l: usize) -> PyResult<f64> {
    mqwalk::ue_transition_closed_form(n, k, l).map_err(err)
}

/// Runs a JSON experiment config; returns `{kind, path, sha256}` per output
/// file and the manifest path.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None, threads = None, verify = false))]
fn run_config<'py>(
    py: Python<'py>,
    config: PathBuf,
    out_dir: Option<PathBuf>,
    threads: Option<usize>,
    verify: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let options = RunOptions {
        out_dir,
        threads,
        verify,
    };
    let report = py.detach(|| run_file(&config, &options)).map_err(err)?;
    let outputs = report
        .outputs
        .iter()
        .map(|o| {
            let d = PyDict::new(py);
            d.set_item("kind", o.kind)?;
            d.set_item("path", &o.path)?;
            d.set_item("sha256", &o.sha256)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("outputs", outputs)?;
    d.set_item("manifest", &report.manifest)?;
    d.set_item("checks", report.checks.iter().map(|c| (c.name.clone(), c.worst, c.passed)).collect::<Vec<_>>())?;
    Ok(d)
}

#[pymodule]
fn mqwalk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectralModel>()?;
    m.add("MqwalkError", m.py().get_type::<MqwalkError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(ipr_localized_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(monitored_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_pole_residual, m)?)?;
    m.add_function(wrap_pyfunction!(amplitudes, m)?)?;
    m.add_function(wrap_pyfunction!(transition_stats, m)?)?;
    m.add_function(wrap_pyfunction!(detect_eos, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_states, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence_classes, m)?)?;
    m.add_function(wrap_pyfunction!(probability_map, m)?)?;
    m.add_function(wrap_pyfunction!(mtt_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(averaged_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(ue_transition_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
