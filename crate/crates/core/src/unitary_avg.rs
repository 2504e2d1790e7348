//! Long-time averages of the unitary transition probabilities.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{localized_tail, zero_based, SpectralModel, C64};

/// Relative energy tolerance used to decide degeneracy: `1e-9 * max|E|`.
pub fn default_degeneracy_tol(energies: &[f64]) -> f64 {
    1e-9 * energies.iter().fold(0.0f64, |m, e| m.max(e.abs()))
}

/// Partitions energy indices (0-based) into classes of equal energy. Sorted
/// energies closer than `deg_tol` are chained into one class.
pub fn degeneracy_classes(energies: &[f64], deg_tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)));
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NAN;
    for idx in order {
        let e = energies[idx];
        match classes.last_mut() {
            Some(class) if (e - last).abs() <= deg_tol => class.push(idx),
            _ => classes.push(vec![idx]),
        }
        last = e;
    }
    for class in &mut classes {
        class.sort_unstable();
    }
    classes.sort_by_key(|c| c[0]);
    classes
}

fn class_sum(model: &SpectralModel, row_a: usize, row_b: usize, classes: &[Vec<usize>]) -> f64 {
    let q = model.weights();
    classes
        .iter()
        .map(|class| {
            class
                .iter()
                .map(|&j| q[(row_a, j)] * q[(row_b, j)].conj())
                .sum::<C64>()
                .norm_sqr()
        })
        .sum()
}

/// Time-averaged probability `P[k,k2]`; energies within `deg_tol` of each
/// other are summed coherently.
pub fn time_averaged_transition(
    model: &SpectralModel,
    k: usize,
    k2: usize,
    deg_tol: f64,
) -> Result<f64> {
    let n = model.n();
    let (a, b) = (zero_based(k, n)?, zero_based(k2, n)?);
    if !(deg_tol >= 0.0) {
        return Err(Error::Domain(format!("degeneracy tolerance {deg_tol} must be >= 0")));
    }
    let classes = degeneracy_classes(model.energies(), deg_tol);
    Ok(class_sum(model, a, b, &classes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedProbabilityMatrix {
    /// `entries[(k-1, l-1)] = P[k,l]`.
    pub entries: DMatrix<f64>,
    /// Energy indices grouped by degeneracy, 1-based.
    pub degeneracy_classes: Vec<Vec<usize>>,
}

impl AveragedProbabilityMatrix {
    pub fn get(&self, k: usize, l: usize) -> Result<f64> {
        let n = self.entries.nrows();
        Ok(self.entries[(zero_based(k, n)?, zero_based(l, n)?)])
    }
}

pub fn averaged_probability_matrix(model: &SpectralModel, deg_tol: f64) -> Result<AveragedProbabilityMatrix> {
    if !(deg_tol >= 0.0) {
        return Err(Error::Domain(format!("degeneracy tolerance {deg_tol} must be >= 0")));
    }
    let n = model.n();
    let classes = degeneracy_classes(model.energies(), deg_tol);
    let entries = DMatrix::from_fn(n, n, |a, b| class_sum(model, a, b, &classes));
    Ok(AveragedProbabilityMatrix {
        entries,
        degeneracy_classes: classes
            .into_iter()
            .map(|c| c.into_iter().map(|j| j + 1).collect())
            .collect(),
    })
}

/// Closed form of `P[k,l]` for the localized basis, `2 <= k, l`, `k != l`.
/// The arguments are symmetric.
pub fn ue_transition_closed_form(n: usize, k: usize, l: usize) -> Result<f64> {
    zero_based(k, n)?;
    zero_based(l, n)?;
    let (k, l) = if k > l { (l, k) } else { (k, l) };
    if k == l {
        return Err(Error::Domain(format!(
            "diagonal entry ({k},{k}) is the inverse participation ratio"
        )));
    }
    if k == 1 {
        return Err(Error::Domain(
            "transitions from or to state 1 are 1/N and not covered by the closed form".into(),
        ));
    }
    let nf = n as f64;
    if l == n {
        return Ok(2.0 / (nf * nf));
    }
    let lf = l as f64;
    Ok(1.0 / (nf * nf) + 1.0 / (lf * lf) + localized_tail(n, l + 1))
}

/// `max_j |sum_k U(t)[j,k] - 1|`.
pub fn detailed_balance_residual(model: &SpectralModel, t: f64) -> f64 {
    let u = model.unitary_matrix(t);
    u.row_iter()
        .map(|row| (row.iter().sum::<C64>() - C64::new(1.0, 0.0)).norm())
        .fold(0.0, f64::max)
}
