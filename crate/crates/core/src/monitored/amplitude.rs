//! Monitored transition amplitudes `phi[M,M'](m)`, `m = 1..=m_max`.
//!
//! Four routes are provided: iterated products with the monitored step,
//! the same iteration restricted to the non-EOS subspace, the recursion over
//! undetected graph-state amplitudes, and the explicit sum over energy-index
//! paths. The last is exponential in `m` and serves as an oracle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{detect_eos, initial_vector, monitored_matrix, projected_matrix};
use crate::error::{Error, Result};
use crate::spectral::{zero_based, CVector, SpectralModel, C64};

/// Maximum number of path terms the path-sum oracle evaluates by default.
pub const DEFAULT_PATH_SUM_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MatrixPower,
    Recursion,
    PathSum,
    Projected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSeries {
    /// `values[m - 1] = phi(m)`.
    pub values: Vec<C64>,
    pub measured: usize,
    pub initial: usize,
    pub tau: f64,
    pub method: Method,
}

impl AmplitudeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Amplitude at step `m` (1-based).
    pub fn at(&self, m: usize) -> Option<C64> {
        m.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Largest entrywise distance to another series of the same length.
    pub fn max_deviation(&self, other: &AmplitudeSeries) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn check_steps(m_max: usize) -> Result<()> {
    if m_max == 0 {
        return Err(Error::Domain("m_max must be at least 1".into()));
    }
    Ok(())
}

/// Iterates `v <- T v` from `v_l = z_l conj(q[M',l])` and reads out
/// `phi(m) = sum_k q[M,k] z_k v_k`.
pub fn amplitude_matrix_power(
    model: &SpectralModel,
    measured: usize,
    initial: usize,
    tau: f64,
    m_max: usize,
) -> Result<AmplitudeSeries> {
    check_steps(m_max)?;
    let op = monitored_matrix(model, measured, tau)?;
    let z = &op.phases.z;
    let m = measured - 1;
    let q = model.weights();
    let readout = CVector::from_fn(model.n(), |k, _| q[(m, k)] * z[k]);
    let mut state = initial_vector(model, initial, z)?;
    let mut values = Vec::with_capacity(m_max);
    for step in 0..m_max {
        if step > 0 {
            state = &op.matrix * &state;
        }
        values.push(readout.dot(&state));
    }
    Ok(AmplitudeSeries {
        values,
        measured,
        initial,
        tau,
        method: Method::MatrixPower,
    })
}

/// Same iteration as [`amplitude_matrix_power`] on the subspace of energy
/// indices that are not orthogonal to the measured state.
pub fn amplitude_projected(
    model: &SpectralModel,
    measured: usize,
    initial: usize,
    tau: f64,
    m_max: usize,
    eos_tol: f64,
) -> Result<AmplitudeSeries> {
    check_steps(m_max)?;
    let op = monitored_matrix(model, measured, tau)?;
    let eos = detect_eos(model, measured, eos_tol)?;
    let projected = projected_matrix(&op, &eos)?;
    let z = &op.phases.z;
    let full = initial_vector(model, initial, z)?;
    let q = model.weights();
    let m = measured - 1;
    let kept: Vec<usize> = projected.kept.iter().map(|j| j - 1).collect();
    let readout = CVector::from_fn(kept.len(), |a, _| q[(m, kept[a])] * z[kept[a]]);
    let mut state = CVector::from_fn(kept.len(), |a, _| full[kept[a]]);
    let mut values = Vec::with_capacity(m_max);
    for step in 0..m_max {
        if step > 0 {
            state = &projected.matrix * &state;
        }
        values.push(readout.dot(&state));
    }
    Ok(AmplitudeSeries {
        values,
        measured,
        initial,
        tau,
        method: Method::Projected,
    })
}

/// Undetected amplitudes `phi[k,M'](m)` for every graph state `k`, produced by
/// the recursion `phi[.,M'](m) = U(tau) (1 - |r_M><r_M|) phi[.,M'](m-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionTable {
    /// `rows[(m - 1, k - 1)] = phi[k,M'](m)`.
    pub rows: DMatrix<C64>,
    pub measured: usize,
    pub initial: usize,
    pub tau: f64,
}

impl RecursionTable {
    /// Series for graph state `site`; for `site == measured` this is the
    /// detection amplitude.
    pub fn series(&self, site: usize) -> Result<AmplitudeSeries> {
        let k = zero_based(site, self.rows.ncols())?;
        Ok(AmplitudeSeries {
            values: self.rows.column(k).iter().copied().collect(),
            measured: self.measured,
            initial: self.initial,
            tau: self.tau,
            method: Method::Recursion,
        })
    }
}

pub fn recursion_table(
    model: &SpectralModel,
    measured: usize,
    initial: usize,
    tau: f64,
    m_max: usize,
) -> Result<RecursionTable> {
    check_steps(m_max)?;
    let n = model.n();
    let m = zero_based(measured, n)?;
    let i = zero_based(initial, n)?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("measurement interval {tau} must be finite and >= 0")));
    }
    let u = model.unitary_matrix(tau);
    let mut rows = DMatrix::<C64>::zeros(m_max, n);
    let mut current: CVector = u.column(i).into_owned();
    rows.set_row(0, &current.transpose());
    for step in 1..m_max {
        let previous = current;
        // phi[k](m) = sum_{l != M} U[k,l] phi[l](m-1), fixed order in l
        current = CVector::from_fn(n, |k, _| {
            (0..n).filter(|&l| l != m).map(|l| u[(k, l)] * previous[l]).sum()
        });
        rows.set_row(step, &current.transpose());
    }
    Ok(RecursionTable {
        rows,
        measured,
        initial,
        tau,
    })
}

pub fn amplitude_recursion(
    model: &SpectralModel,
    measured: usize,
    initial: usize,
    tau: f64,
    m_max: usize,
) -> Result<AmplitudeSeries> {
    recursion_table(model, measured, initial, tau, m_max)?.series(measured)
}

fn path_terms(n: usize, m: usize) -> u128 {
    (0..m).fold(1u128, |acc, _| acc.saturating_mul(n as u128))
}

/// Path weights `w[i][j] = K[i,j] z_j^2` and the first-step weights
/// `q[M,j] z_j^2`, built directly from the model.
fn path_weights(model: &SpectralModel, measured: usize, tau: f64) -> Result<(Vec<Vec<C64>>, Vec<C64>)> {
    let n = model.n();
    let m = zero_based(measured, n)?;
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("measurement interval {tau} must be finite and >= 0")));
    }
    let q = model.weights();
    let z2: Vec<C64> = model
        .energies()
        .iter()
        .map(|&e| C64::from_polar(1.0, -e * tau))
        .collect();
    let step = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    (C64::new(delta, 0.0) - q[(m, i)].conj() * q[(m, j)]) * z2[j]
                })
                .collect()
        })
        .collect();
    let first = (0..n).map(|j| q[(m, j)] * z2[j]).collect();
    Ok((step, first))
}

fn walk_to_depth(step: &[Vec<C64>], prev: usize, prefix: C64, remaining: usize, acc: &mut [C64]) {
    if remaining == 0 {
        acc[prev] += prefix;
        return;
    }
    for (j, w) in step[prev].iter().enumerate() {
        walk_to_depth(step, j, prefix * w, remaining - 1, acc);
    }
}

/// `phi[M,M'](m)` as the explicit sum over all energy-index paths
/// `(j_1..j_m)` of `z_{j_1}^2 .. z_{j_m}^2 q[M,j_1] K[j_1,j_2] .. K[j_{m-1},j_m] conj(q[M',j_m])`.
/// Refuses when `n^m` exceeds `budget`.
pub fn amplitude_path_sum(
    model: &SpectralModel,
    measured: usize,
    initial: usize,
    tau: f64,
    m: usize,
    budget: u128,
) -> Result<C64> {
    check_steps(m)?;
    let n = model.n();
    let i = zero_based(initial, n)?;
    let required = path_terms(n, m);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let (step, first) = path_weights(model, measured, tau)?;
    let mut acc = vec![C64::new(0.0, 0.0); n];
    for (j, w) in first.iter().enumerate() {
        walk_to_depth(&step, j, *w, m - 1, &mut acc);
    }
    let q = model.weights();
    Ok(acc.iter().enumerate().map(|(j, a)| a * q[(i, j)].conj()).sum())
}

/// Path sums for every initial state and every `m <= m_max` at once.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSumTable {
    /// `values[(m - 1, M' - 1)] = phi[M,M'](m)`.
    pub values: DMatrix<C64>,
    pub measured: usize,
    pub tau: f64,
}

impl PathSumTable {
    pub fn series(&self, initial: usize) -> Result<AmplitudeSeries> {
        let i = zero_based(initial, self.values.ncols())?;
        Ok(AmplitudeSeries {
            values: self.values.column(i).iter().copied().collect(),
            measured: self.measured,
            initial,
            tau: self.tau,
            method: Method::PathSum,
        })
    }
}

fn walk_all_depths(step: &[Vec<C64>], prev: usize, prefix: C64, depth: usize, max_depth: usize, acc: &mut [Vec<C64>]) {
    acc[depth - 1][prev] += prefix;
    if depth == max_depth {
        return;
    }
    for (j, w) in step[prev].iter().enumerate() {
        walk_all_depths(step, j, prefix * w, depth + 1, max_depth, acc);
    }
}

/// Enumerates every path of length up to `m_max` once; the budget applies to
/// the total number of visited paths, `n + n^2 + .. + n^m_max`.
pub fn path_sum_table(
    model: &SpectralModel,
    measured: usize,
    tau: f64,
    m_max: usize,
    budget: u128,
) -> Result<PathSumTable> {
    check_steps(m_max)?;
    let n = model.n();
    let required = (1..=m_max).fold(0u128, |acc, d| acc.saturating_add(path_terms(n, d)));
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let (step, first) = path_weights(model, measured, tau)?;
    let mut acc = vec![vec![C64::new(0.0, 0.0); n]; m_max];
    for (j, w) in first.iter().enumerate() {
        walk_all_depths(&step, j, *w, 1, m_max, &mut acc);
    }
    let q = model.weights();
    let values = DMatrix::from_fn(m_max, n, |d, i| {
        acc[d].iter().enumerate().map(|(j, a)| a * q[(i, j)].conj()).sum()
    });
    Ok(PathSumTable {
        values,
        measured,
        tau,
    })
}
