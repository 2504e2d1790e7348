use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::spectral::{CMatrix, C64};

use super::MonitoredOperator;

/// Iteration cap for each Schur attempt, per matrix dimension.
pub const EIGEN_MAX_ITERATIONS: usize = 1_000;

/// Deflation thresholds tried in order. Clusters of equal phases (e.g.
/// `z_k^2` repeating with period 4 at `J tau = pi/2`) can stall the shifted
/// QR at machine precision while converging at once with a slightly looser
/// threshold.
const SCHUR_EPS: [f64; 3] = [f64::EPSILON, 1e-14, 1e-13];

/// Eigenvalues of the (non-normal) monitored step, sorted by descending
/// modulus and then by argument.
pub fn eigenvalues(op: &MonitoredOperator) -> Result<Vec<C64>> {
    general_eigenvalues(&op.matrix)
}

pub(crate) fn general_eigenvalues(matrix: &CMatrix) -> Result<Vec<C64>> {
    let n = matrix.nrows();
    if matrix.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Numerical {
            message: format!("non-finite entry in {n}x{n} matrix"),
        });
    }
    let schur = SCHUR_EPS
        .iter()
        .find_map(|&eps| matrix.clone().try_schur(eps, EIGEN_MAX_ITERATIONS * n.max(1)))
        .ok_or_else(|| Error::Numerical {
            message: format!("Schur iteration did not converge for {n}x{n} matrix"),
        })?;
    let (_, t) = schur.unpack();
    let scale = matrix.iter().fold(0.0f64, |m, c| m.max(c.norm())).max(1.0);
    for i in 1..n {
        if t[(i, i - 1)].norm() > 1e-10 * scale {
            return Err(Error::Numerical {
                message: format!(
                    "Schur form not triangular (subdiagonal {:e} at {i}) for {n}x{n} matrix",
                    t[(i, i - 1)].norm()
                ),
            });
        }
    }
    let mut values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    values.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(Ordering::Equal)
            .then(a.arg().partial_cmp(&b.arg()).unwrap_or(Ordering::Equal))
    });
    Ok(values)
}

/// Smallest singular value of `z - T`: the inverse norm of the resolvent.
/// Vanishes exactly at the eigenvalues of `T`, which are the poles of
/// `G(z) = z (z - T)^{-1}`.
pub fn resolvent_pole_residual(op: &MonitoredOperator, z: C64) -> f64 {
    let n = op.n();
    let shifted = CMatrix::from_fn(n, n, |r, c| {
        let diag = if r == c { z } else { C64::new(0.0, 0.0) };
        diag - op.matrix[(r, c)]
    });
    shifted
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |m, s| m.min(*s))
        .max(0.0)
}
