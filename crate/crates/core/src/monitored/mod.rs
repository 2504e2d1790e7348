//! Monitored evolution: stroboscopic unitary steps interrupted by projective
//! measurements of a single graph state `|r_M>`.
//!
//! In the energy basis the monitored step is `T[k,l] = z_k K[k,l] z_l` with
//! the kernel `K[k,l] = delta_kl - conj(q[M,k]) q[M,l]` and the half-step
//! phases `z_k = exp(-i E_k tau / 2)`.

mod amplitude;
mod spectrum;

pub use amplitude::{
    amplitude_matrix_power, amplitude_path_sum, amplitude_projected, amplitude_recursion,
    path_sum_table, recursion_table, AmplitudeSeries, Method, PathSumTable, RecursionTable,
    DEFAULT_PATH_SUM_BUDGET,
};
pub use spectrum::{eigenvalues, resolvent_pole_residual, EIGEN_MAX_ITERATIONS};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{zero_based, CMatrix, CVector, PhaseVector, SpectralModel, C64};

/// Tolerance on `|q[M,j]|` below which `j` counts as energy-orthogonal.
pub const DEFAULT_EOS_TOL: f64 = 1e-12;
/// Tolerance on `|z_j - z_k|` below which two phases count as degenerate.
pub const DEFAULT_PHASE_TOL: f64 = 1e-9;

pub fn kernel(model: &SpectralModel, measured: usize) -> Result<CMatrix> {
    let n = model.n();
    let m = zero_based(measured, n)?;
    let q = model.weights();
    Ok(CMatrix::from_fn(n, n, |k, l| {
        let delta = if k == l { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        delta - q[(m, k)].conj() * q[(m, l)]
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitoredOperator {
    pub matrix: CMatrix,
    /// Measured graph state, 1-based.
    pub measured_index: usize,
    pub tau: f64,
    pub phases: PhaseVector,
    pub kernel: CMatrix,
}

impl MonitoredOperator {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn monitored_matrix(model: &SpectralModel, measured: usize, tau: f64) -> Result<MonitoredOperator> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("measurement interval {tau} must be finite and >= 0")));
    }
    let kernel = kernel(model, measured)?;
    let phases = model.phase_factors(tau);
    let z = &phases.z;
    let n = model.n();
    let matrix = CMatrix::from_fn(n, n, |k, l| z[k] * kernel[(k, l)] * z[l]);
    Ok(MonitoredOperator {
        matrix,
        measured_index: measured,
        tau,
        phases,
        kernel,
    })
}

/// Energy indices `j` (1-based) with `|q[M,j]| <= tol`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EosSet {
    pub measured_index: usize,
    pub indices: Vec<usize>,
    pub tol: f64,
}

impl EosSet {
    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// Energy indices outside the set, 1-based and ascending.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (1..=n).filter(|j| !self.contains(*j)).collect()
    }
}

pub fn detect_eos(model: &SpectralModel, measured: usize, tol: f64) -> Result<EosSet> {
    let m = zero_based(measured, model.n())?;
    let indices = model
        .weights()
        .row(m)
        .iter()
        .enumerate()
        .filter(|(_, q)| q.norm() <= tol)
        .map(|(j, _)| j + 1)
        .collect();
    Ok(EosSet {
        measured_index: measured,
        indices,
        tol,
    })
}

/// Monitored step restricted to the energy indices outside an EOS set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedOperator {
    pub matrix: CMatrix,
    /// Retained energy indices, 1-based, in matrix order.
    pub kept: Vec<usize>,
    pub measured_index: usize,
}

pub fn projected_matrix(op: &MonitoredOperator, eos: &EosSet) -> Result<ProjectedOperator> {
    if op.measured_index != eos.measured_index {
        return Err(Error::Inconsistent {
            operator: op.measured_index,
            eos: eos.measured_index,
        });
    }
    let kept = eos.complement(op.n());
    let size = kept.len();
    let matrix = CMatrix::from_fn(size, size, |a, b| op.matrix[(kept[a] - 1, kept[b] - 1)]);
    Ok(ProjectedOperator {
        matrix,
        kept,
        measured_index: op.measured_index,
    })
}

/// Energy indices `k` with `z_k^2 = 1` and `q[M,k] = 0`, both within `tol`.
/// Each one carries a non-decaying solution of the amplitude recursion.
pub fn stationary_states(model: &SpectralModel, measured: usize, tau: f64, tol: f64) -> Result<Vec<usize>> {
    let m = zero_based(measured, model.n())?;
    let z2 = model.phase_factors(tau).squared();
    let q = model.weights();
    Ok((0..model.n())
        .filter(|&k| (z2[k] - C64::new(1.0, 0.0)).norm() <= tol && q[(m, k)].norm() <= tol)
        .map(|k| k + 1)
        .collect())
}

/// Initial vector `z_l conj(q[M',l])` of the monitored iteration, in the
/// energy basis.
pub(crate) fn initial_vector(model: &SpectralModel, initial: usize, z: &[C64]) -> Result<CVector> {
    let i = zero_based(initial, model.n())?;
    let q = model.weights();
    Ok(CVector::from_fn(model.n(), |l, _| z[l] * q[(i, l)].conj()))
}

/// True when the initial states `a` and `b` have the same projection onto the
/// energy indices visible from `measured`; their amplitude series then agree.
pub fn equivalence_class_check(
    model: &SpectralModel,
    measured: usize,
    a: usize,
    b: usize,
    tau: f64,
    tol: f64,
) -> Result<bool> {
    if a == measured || b == measured {
        return Err(Error::Precondition(format!(
            "initial states ({a}, {b}) must differ from the measured state {measured}"
        )));
    }
    let n = model.n();
    zero_based(a, n)?;
    zero_based(b, n)?;
    if a == b {
        return Ok(true);
    }
    let eos = detect_eos(model, measured, DEFAULT_EOS_TOL)?;
    let z = model.phase_factors(tau).z;
    let va = initial_vector(model, a, &z)?;
    let vb = initial_vector(model, b, &z)?;
    Ok(eos
        .complement(n)
        .into_iter()
        .all(|l| (va[l - 1] - vb[l - 1]).norm() <= tol))
}

/// Groups the initial states `M' != M` into classes of identical projected
/// initial vectors. Classes and their members are ascending.
pub fn equivalence_classes(model: &SpectralModel, measured: usize, tau: f64, tol: f64) -> Result<Vec<Vec<usize>>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for candidate in (1..=model.n()).filter(|&c| c != measured) {
        let mut placed = false;
        for class in classes.iter_mut() {
            if equivalence_class_check(model, measured, class[0], candidate, tau, tol)? {
                class.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            classes.push(vec![candidate]);
        }
    }
    Ok(classes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateEigenvector {
    pub vector: CVector,
    pub eigenvalue: C64,
    /// `max_i |(T v - lambda v)_i|` for the returned vector.
    pub residual: f64,
}

/// Rescales `v` to unit norm with its first nonzero component real positive.
pub(crate) fn normalize_phase(v: &mut CVector) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    let lead = v.iter().copied().find(|c| c.norm() > 1e-14 * norm).unwrap_or(C64::new(1.0, 0.0));
    let rot = lead.conj() / lead.norm();
    for c in v.iter_mut() {
        *c = *c * rot / norm;
    }
}

/// Eigenvector `alpha e_j + beta e_k` of the monitored step for a degenerate
/// phase pair `z_j = z_k`, eigenvalue `z_k^2`.
///
/// The combination is chosen so that the phase-dressed vector is annihilated
/// by the measurement, `alpha z_j q[M,j] + beta z_k q[M,k] = 0`.
pub fn degenerate_eigenvector(
    model: &SpectralModel,
    measured: usize,
    j: usize,
    k: usize,
    tau: f64,
    phase_tol: f64,
) -> Result<DegenerateEigenvector> {
    let n = model.n();
    let (mi, ji, ki) = (zero_based(measured, n)?, zero_based(j, n)?, zero_based(k, n)?);
    if ji == ki {
        return Err(Error::Precondition(format!("j and k must differ (both {j})")));
    }
    let op = monitored_matrix(model, measured, tau)?;
    let z = &op.phases.z;
    if (z[ji] - z[ki]).norm() > phase_tol {
        return Err(Error::Precondition(format!(
            "phases z_{j} and z_{k} differ by {:e} > {phase_tol:e}",
            (z[ji] - z[ki]).norm()
        )));
    }
    let q = model.weights();
    let pivot = z[ji] * q[(mi, ji)];
    if pivot.norm() <= DEFAULT_EOS_TOL {
        return Err(Error::Domain(format!(
            "q[{measured},{j}] vanishes; index {j} is energy-orthogonal to the measured state"
        )));
    }
    let beta = C64::new(1.0, 0.0);
    let alpha = -beta * z[ki] * q[(mi, ki)] / pivot;
    let mut vector = CVector::zeros(n);
    vector[ji] = alpha;
    vector[ki] = beta;
    normalize_phase(&mut vector);
    let eigenvalue = z[ki] * z[ki];
    let residual = (&op.matrix * &vector - &vector * eigenvalue)
        .iter()
        .fold(0.0f64, |acc, c| acc.max(c.norm()));
    Ok(DegenerateEigenvector {
        vector,
        eigenvalue,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::BasisKind;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().fold(0.0, |a, c| a.max(c.norm()))
    }

    #[test]
    fn kernel_identity_basis() {
        let model = SpectralModel::linear(&BasisKind::Identity, 3, 1.0).unwrap();
        let k = kernel(&model, 1).unwrap();
        let mut want = CMatrix::identity(3, 3);
        want[(0, 0)] = C64::new(0.0, 0.0);
        assert_eq!(k, want);
    }

    #[test]
    fn kernel_is_projector() {
        for basis in [BasisKind::Localized, BasisKind::PlaneWave] {
            let model = SpectralModel::linear(&basis, 10, 1.0).unwrap();
            for m in 1..=10 {
                let k = kernel(&model, m).unwrap();
                assert!(max_abs(&(&k * &k - &k)) <= 1e-12);
            }
        }
    }

    #[test]
    fn kernel_annihilates_measured_row() {
        let model = SpectralModel::linear(&BasisKind::PlaneWave, 7, 1.0).unwrap();
        let k = kernel(&model, 3).unwrap();
        let qm = CVector::from_fn(7, |j, _| model.weights()[(2, j)].conj());
        assert!((k * qm).norm() < 1e-13);
    }

    #[test]
    fn kernel_rejects_bad_index() {
        let model = SpectralModel::linear(&BasisKind::Identity, 3, 1.0).unwrap();
        assert!(matches!(kernel(&model, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(kernel(&model, 4), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn identity_basis_operator_is_diagonal() {
        let model = SpectralModel::linear(&BasisKind::Identity, 4, 1.0).unwrap();
        let op = monitored_matrix(&model, 2, 0.7).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let z2 = op.phases.z[k] * op.phases.z[k];
                let want = if j == k && k != 1 { z2 } else { C64::new(0.0, 0.0) };
                assert!((op.matrix[(j, k)] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn plane_wave_operator_matches_closed_form() {
        let n = 6;
        let m = 4;
        let model = SpectralModel::linear(&BasisKind::PlaneWave, n, 1.0).unwrap();
        let op = monitored_matrix(&model, m, 0.9).unwrap();
        let z = &op.phases.z;
        for k in 0..n {
            for l in 0..n {
                let diag = if k == l { z[k] * z[k] } else { C64::new(0.0, 0.0) };
                let phase = -2.0 * PI * (k as f64 - l as f64) * (m as f64 - 1.0) / n as f64;
                let want = diag - C64::from_polar(1.0, phase) * z[k] * z[l] / n as f64;
                assert!((op.matrix[(k, l)] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_interval_gives_kernel() {
        let model = SpectralModel::linear(&BasisKind::Localized, 5, 1.0).unwrap();
        let op = monitored_matrix(&model, 3, 0.0).unwrap();
        assert_eq!(op.matrix, op.kernel);
        assert!(monitored_matrix(&model, 3, -1.0).is_err());
    }

    #[test]
    fn eos_sets_of_builtin_bases() {
        let loc = SpectralModel::linear(&BasisKind::Localized, 10, 1.0).unwrap();
        assert_eq!(detect_eos(&loc, 5, 1e-12).unwrap().indices, vec![2, 3, 4]);
        let eos10 = detect_eos(&loc, 10, 1e-12).unwrap();
        assert_eq!(eos10.indices, (2..=9).collect::<Vec<_>>());
        assert_eq!(eos10.complement(10), vec![1, 10]);
        let pw = SpectralModel::linear(&BasisKind::PlaneWave, 10, 1.0).unwrap();
        for m in 1..=10 {
            assert!(detect_eos(&pw, m, 1e-12).unwrap().indices.is_empty());
        }
    }

    #[test]
    fn eos_rows_decouple() {
        let loc = SpectralModel::linear(&BasisKind::Localized, 10, 1.0).unwrap();
        let op = monitored_matrix(&loc, 5, 1.0).unwrap();
        for j in [2usize, 3, 4] {
            let z2 = op.phases.z[j - 1] * op.phases.z[j - 1];
            for l in 0..10 {
                let want = if l == j - 1 { z2 } else { C64::new(0.0, 0.0) };
                assert!((op.matrix[(j - 1, l)] - want).norm() < 1e-15);
                assert!((op.matrix[(l, j - 1)] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn strong_localization_two_level_matrix() {
        let n = 10;
        let loc = SpectralModel::linear(&BasisKind::Localized, n, 1.0).unwrap();
        let op = monitored_matrix(&loc, n, 1.0).unwrap();
        let eos = detect_eos(&loc, n, 1e-12).unwrap();
        let p = projected_matrix(&op, &eos).unwrap();
        assert_eq!(p.kept, vec![1, n]);
        let zn = op.phases.z[n - 1];
        let nf = n as f64;
        let off = zn * (nf - 1.0).sqrt() / nf;
        assert!((p.matrix[(0, 0)] - C64::new((nf - 1.0) / nf, 0.0)).norm() < 1e-14);
        assert!((p.matrix[(0, 1)] - off).norm() < 1e-14);
        assert!((p.matrix[(1, 0)] - off).norm() < 1e-14);
        assert!((p.matrix[(1, 1)] - zn * zn / nf).norm() < 1e-14);
    }

    #[test]
    fn projection_with_empty_eos_is_identity_map() {
        let pw = SpectralModel::linear(&BasisKind::PlaneWave, 5, 1.0).unwrap();
        let op = monitored_matrix(&pw, 2, 1.0).unwrap();
        let eos = detect_eos(&pw, 2, 1e-12).unwrap();
        assert_eq!(projected_matrix(&op, &eos).unwrap().matrix, op.matrix);
        let other = detect_eos(&pw, 3, 1e-12).unwrap();
        assert!(matches!(projected_matrix(&op, &other), Err(Error::Inconsistent { .. })));
    }

    #[test]
    fn stationary_state_examples() {
        let loc = SpectralModel::linear(&BasisKind::Localized, 10, 1.0).unwrap();
        assert!(stationary_states(&loc, 5, PI, 1e-12).unwrap().contains(&3));
        let pw = SpectralModel::linear(&BasisKind::PlaneWave, 10, 1.0).unwrap();
        assert!(stationary_states(&pw, 5, 1.0, 1e-12).unwrap().is_empty());
        let id = SpectralModel::linear(&BasisKind::Identity, 6, 1.0).unwrap();
        assert_eq!(stationary_states(&id, 1, 2.0 * PI, 1e-12).unwrap(), vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn equivalence_examples() {
        let loc = SpectralModel::linear(&BasisKind::Localized, 10, 1.0).unwrap();
        for a in 1..=4 {
            for b in 1..=4 {
                assert!(equivalence_class_check(&loc, 5, a, b, 1.0, 1e-12).unwrap());
            }
        }
        let classes = equivalence_classes(&loc, 5, 1.0, 1e-12).unwrap();
        assert_eq!(classes[0], vec![1, 2, 3, 4]);
        let pw = SpectralModel::linear(&BasisKind::PlaneWave, 10, 1.0).unwrap();
        assert!(!equivalence_class_check(&pw, 5, 1, 2, 1.0, 1e-12).unwrap());
        assert!(equivalence_class_check(&pw, 5, 3, 3, 1.0, 1e-12).unwrap());
        assert!(equivalence_class_check(&pw, 5, 5, 3, 1.0, 1e-12).is_err());
    }

    #[test]
    fn degenerate_pair_eigenvector() {
        let tau = 4.0 * PI;
        for basis in [BasisKind::Localized, BasisKind::PlaneWave] {
            let model = SpectralModel::linear(&basis, 10, 1.0).unwrap();
            let d = degenerate_eigenvector(&model, 5, 1, 2, tau, 1e-9).unwrap();
            assert!(d.residual <= 1e-10, "{} residual {}", basis.name(), d.residual);
            assert!((d.eigenvalue.norm() - 1.0).abs() <= 1e-12);
            // Hermitian orthogonality to the phase-dressed measured row
            let z = model.phase_factors(tau).z;
            let overlap: C64 = (0..10)
                .map(|l| z[l] * model.weights()[(4, l)] * d.vector[l])
                .sum();
            assert!(overlap.norm() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_eigenvector_preconditions() {
        let model = SpectralModel::linear(&BasisKind::Localized, 10, 1.0).unwrap();
        assert!(matches!(
            degenerate_eigenvector(&model, 5, 1, 2, 1.0, 1e-9),
            Err(Error::Precondition(_))
        ));
        // q[5,3] = 0: the EOS case
        assert!(matches!(
            degenerate_eigenvector(&model, 5, 3, 1, 4.0 * PI, 1e-9),
            Err(Error::Domain(_))
        ));
    }
}
