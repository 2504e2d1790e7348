//! Spectral models: energy levels together with the overlaps between graph
//! states and energy eigenstates.
//!
//! Every quantity in the crate is a function of the pair `(energies, weights)`
//! where `weights[(k, j)] = <r_k|E_j>`: row `k` is a graph state, column `j`
//! an energy eigenstate. Public indices are 1-based.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default tolerance for the row/column orthonormality checks.
pub const DEFAULT_ORTHONORMALITY_TOL: f64 = 1e-10;

/// Converts a 1-based index into a 0-based one.
pub(crate) fn zero_based(index: usize, n: usize) -> Result<usize> {
    if index == 0 || index > n {
        Err(Error::IndexOutOfRange { index, n })
    } else {
        Ok(index - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    Identity,
    Localized,
    PlaneWave,
    Custom(CMatrix),
}

impl BasisKind {
    pub fn name(&self) -> &'static str {
        match self {
            BasisKind::Identity => "identity",
            BasisKind::Localized => "localized",
            BasisKind::PlaneWave => "plane_wave",
            BasisKind::Custom(_) => "custom",
        }
    }

    pub fn build(&self, n: usize) -> Result<CMatrix> {
        match self {
            BasisKind::Identity => build_identity_basis(n),
            BasisKind::Localized => build_localized_basis(n),
            BasisKind::PlaneWave => build_plane_wave_basis(n),
            BasisKind::Custom(m) => {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::Shape {
                        expected: format!("{n}x{n}"),
                        got: format!("{}x{}", m.nrows(), m.ncols()),
                    });
                }
                Ok(m.clone())
            }
        }
    }
}

/// Basis with one uniform energy state and `n - 1` states localized on the
/// graph. Row `M` reads `q[M,1] = 1/sqrt(n)` and, for `k > 1`,
/// `0` (k < M), `-(k-1)/sqrt(k(k-1))` (k = M), `1/sqrt(k(k-1))` (k > M).
pub fn build_localized_basis(n: usize) -> Result<CMatrix> {
    if n < 2 {
        return Err(Error::InvalidDimension {
            n,
            reason: "localized basis needs n >= 2",
        });
    }
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    Ok(CMatrix::from_fn(n, n, |row, col| {
        let (m, k) = (row + 1, col + 1);
        let value = if k == 1 {
            inv_sqrt_n
        } else {
            let norm = 1.0 / ((k * (k - 1)) as f64).sqrt();
            match k.cmp(&m) {
                std::cmp::Ordering::Less => 0.0,
                std::cmp::Ordering::Equal => -((k - 1) as f64) * norm,
                std::cmp::Ordering::Greater => norm,
            }
        };
        C64::new(value, 0.0)
    }))
}

/// Discrete Fourier basis, `q[k,j] = exp(2 pi i (k-1)(j-1)/n) / sqrt(n)`.
pub fn build_plane_wave_basis(n: usize) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            n,
            reason: "dimension must be positive",
        });
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMatrix::from_fn(n, n, |k, j| {
        // reduce the exponent mod n first so large n keeps full phase accuracy
        let phase = 2.0 * PI * ((k * j) % n) as f64 / n as f64;
        C64::from_polar(scale, phase)
    }))
}

pub fn build_identity_basis(n: usize) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            n,
            reason: "dimension must be positive",
        });
    }
    Ok(CMatrix::identity(n, n))
}

/// Residuals of the row and column Gram matrices against the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub row_residual: f64,
    pub col_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

fn identity_residual(gram: &CMatrix) -> f64 {
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((gram[(r, c)] - target).norm());
        }
    }
    worst
}

pub fn validate_basis(weights: &CMatrix, tol: f64) -> Result<BasisReport> {
    if weights.nrows() != weights.ncols() {
        return Err(Error::Shape {
            expected: "square matrix".into(),
            got: format!("{}x{}", weights.nrows(), weights.ncols()),
        });
    }
    let row_residual = identity_residual(&(weights * weights.adjoint()));
    let col_residual = identity_residual(&(weights.adjoint() * weights));
    Ok(BasisReport {
        row_residual,
        col_residual,
        tol,
        passed: row_residual <= tol && col_residual <= tol,
    })
}

/// `E_k = J (k - 1)` for `k = 1..=n`.
pub fn linear_spectrum(n: usize, j_coupling: f64) -> Vec<f64> {
    (0..n).map(|k| j_coupling * k as f64).collect()
}

/// Sum of `1/(j^2 (j-1)^2)` for `j = from..=n`; empty when `from > n`.
pub(crate) fn localized_tail(n: usize, from: usize) -> f64 {
    (from.max(2)..=n)
        .map(|j| {
            let j = j as f64;
            1.0 / (j * j * (j - 1.0) * (j - 1.0))
        })
        .sum()
}

/// Closed form of the inverse participation ratio of row `k >= 2` of the
/// localized basis.
pub fn ipr_localized_closed_form(n: usize, k: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidDimension {
            n,
            reason: "localized basis needs n >= 2",
        });
    }
    if k == 1 {
        return Err(Error::Domain(
            "k = 1 is the delocalized row; the closed form holds for k >= 2".into(),
        ));
    }
    zero_based(k, n)?;
    let nf = n as f64;
    let shape = 1.0 - 1.0 / k as f64;
    Ok(1.0 / (nf * nf) + shape * shape + localized_tail(n, k + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector {
    pub z: Vec<C64>,
    pub tau: f64,
}

impl PhaseVector {
    pub fn squared(&self) -> Vec<C64> {
        self.z.iter().map(|z| z * z).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    energies: Vec<f64>,
    weights: CMatrix,
}

impl SpectralModel {
    /// Builds a model after checking that `weights` is unitary within `tol`.
    pub fn new(energies: Vec<f64>, weights: CMatrix, tol: f64) -> Result<Self> {
        let n = energies.len();
        if n == 0 {
            return Err(Error::InvalidDimension {
                n,
                reason: "dimension must be positive",
            });
        }
        if weights.nrows() != n || weights.ncols() != n {
            return Err(Error::Shape {
                expected: format!("{n}x{n}"),
                got: format!("{}x{}", weights.nrows(), weights.ncols()),
            });
        }
        if energies.iter().any(|e| !e.is_finite()) || weights.iter().any(|q| !q.re.is_finite() || !q.im.is_finite()) {
            return Err(Error::Domain("non-finite model entries".into()));
        }
        let report = validate_basis(&weights, tol)?;
        if !report.passed {
            return Err(Error::NonOrthonormal {
                row_residual: report.row_residual,
                col_residual: report.col_residual,
                tol,
            });
        }
        Ok(SpectralModel { energies, weights })
    }

    pub fn from_basis(basis: &BasisKind, energies: Vec<f64>, tol: f64) -> Result<Self> {
        let weights = basis.build(energies.len())?;
        Self::new(energies, weights, tol)
    }

    /// Built-in basis with the linear spectrum `E_k = J (k - 1)`.
    pub fn linear(basis: &BasisKind, n: usize, j_coupling: f64) -> Result<Self> {
        Self::from_basis(basis, linear_spectrum(n, j_coupling), DEFAULT_ORTHONORMALITY_TOL)
    }

    pub fn n(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn weights(&self) -> &CMatrix {
        &self.weights
    }

    /// `q[k,j] = <r_k|E_j>`, both indices 1-based.
    pub fn q(&self, k: usize, j: usize) -> Result<C64> {
        let n = self.n();
        Ok(self.weights[(zero_based(k, n)?, zero_based(j, n)?)])
    }

    pub fn inverse_participation_ratio(&self, k: usize) -> Result<f64> {
        let row = zero_based(k, self.n())?;
        Ok(self
            .weights
            .row(row)
            .iter()
            .map(|q| q.norm_sqr() * q.norm_sqr())
            .sum())
    }

    /// `H[k,l] = sum_j q[k,j] E_j conj(q[l,j])` in the graph basis.
    pub fn hamiltonian_matrix(&self) -> CMatrix {
        self.spectral_sum(|e| C64::new(e, 0.0))
    }

    /// `U(t)[k,l] = sum_j exp(-i E_j t) q[k,j] conj(q[l,j])`.
    pub fn unitary_matrix(&self, t: f64) -> CMatrix {
        self.spectral_sum(|e| C64::from_polar(1.0, -e * t))
    }

    fn spectral_sum(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let n = self.n();
        let diag: Vec<C64> = self.energies.iter().map(|&e| f(e)).collect();
        let mut scaled = self.weights.clone();
        for (j, d) in diag.iter().enumerate() {
            for k in 0..n {
                scaled[(k, j)] *= d;
            }
        }
        scaled * self.weights.adjoint()
    }

    /// `z_k = exp(-i E_k tau / 2)`.
    pub fn phase_factors(&self, tau: f64) -> PhaseVector {
        PhaseVector {
            z: self
                .energies
                .iter()
                .map(|&e| C64::from_polar(1.0, -e * tau / 2.0))
                .collect(),
            tau,
        }
    }
}
