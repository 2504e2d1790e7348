#![allow(dead_code)]

use mqwalk::{CMatrix, SpectralModel, C64};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Unitary from the QR factorization of a matrix with uniform entries.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let raw = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    raw.qr().q()
}

/// Random model with energies spread over `[0, 4)`; non-degenerate with
/// probability one.
pub fn random_model(n: usize, rng: &mut ChaCha8Rng) -> SpectralModel {
    let energies = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
    SpectralModel::new(energies, random_unitary(n, rng), 1e-10).unwrap()
}

/// `exp(-i H t)` by scaling and squaring of a Taylor series; independent of
/// the spectral route used by the library.
pub fn expm_taylor(h: &CMatrix, t: f64) -> CMatrix {
    let n = h.nrows();
    let a = h * C64::new(0.0, -t);
    let norm = a.iter().map(|c| c.norm()).sum::<f64>().max(1e-300);
    let squarings = (norm.log2().ceil().max(0.0) as u32) + 4;
    let scaled = &a / C64::new(2f64.powi(squarings as i32), 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = CMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Hamiltonian in the graph basis, `H = Q diag(E) Q^dagger`.
pub fn hamiltonian(model: &SpectralModel) -> CMatrix {
    let q = model.weights();
    let n = model.n();
    let d = CMatrix::from_fn(n, n, |r, c| {
        if r == c {
            C64::new(model.energies()[r], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    q * d * q.adjoint()
}

/// First-detection amplitudes straight from the definition
/// `<r_M| U (P U)^(m-1) |r_M'>` with `P = 1 - |r_M><r_M|`, all in the graph
/// basis with dense matrix products.
pub fn oracle_amplitudes(model: &SpectralModel, measured: usize, initial: usize, tau: f64, m_max: usize) -> Vec<C64> {
    let n = model.n();
    let u = expm_taylor(&hamiltonian(model), tau);
    let mut p = CMatrix::identity(n, n);
    p[(measured - 1, measured - 1)] = C64::new(0.0, 0.0);
    let pu = &p * &u;
    let mut acc = u.clone();
    let mut out = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        if m > 1 {
            acc = &acc * &pu;
        }
        out.push(acc[(measured - 1, initial - 1)]);
    }
    out
}

pub fn max_dev(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn real_matrix_max(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}
