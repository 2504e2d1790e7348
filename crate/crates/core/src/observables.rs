//! Classical quantities derived from monitored amplitudes.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::monitored::{amplitude_matrix_power, equivalence_classes, AmplitudeSeries};
use crate::spectral::{zero_based, SpectralModel};

/// Denominators at or below this value leave the mean transition time
/// undefined.
pub const MTT_UNDERFLOW: f64 = 1e-300;
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionStats {
    pub measured: usize,
    pub initial: usize,
    pub tau: f64,
    /// `|phi(m)|^2`, `m = 1..=horizon`.
    pub probs: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Mean transition time over the first `N` steps, in units of time
    /// (already multiplied by `tau`); `None` where no probability has
    /// accumulated yet.
    pub mtt_curve: Vec<Option<f64>>,
    pub mf: Option<usize>,
    pub tail_tol: f64,
}

impl TransitionStats {
    pub fn horizon(&self) -> usize {
        self.probs.len()
    }

    pub fn defined(&self) -> Vec<bool> {
        self.mtt_curve.iter().map(Option::is_some).collect()
    }

    /// Mean transition time over the whole horizon.
    pub fn final_mtt(&self) -> Option<f64> {
        self.mtt_curve.last().copied().flatten()
    }

    pub fn total_probability(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

pub fn transition_stats(series: &AmplitudeSeries) -> Result<TransitionStats> {
    transition_stats_with_tol(series, DEFAULT_TAIL_TOL)
}

pub fn transition_stats_with_tol(series: &AmplitudeSeries, tail_tol: f64) -> Result<TransitionStats> {
    if series.is_empty() {
        return Err(Error::Domain("empty amplitude series".into()));
    }
    let probs = series.probabilities();
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut mtt_curve = Vec::with_capacity(probs.len());
    let (mut weighted, mut total) = (0.0f64, 0.0f64);
    for (i, p) in probs.iter().enumerate() {
        weighted += i as f64 * p;
        total += p;
        cumulative.push(total);
        mtt_curve.push((total > MTT_UNDERFLOW).then(|| series.tau * weighted / total));
    }
    let mut stats = TransitionStats {
        measured: series.measured,
        initial: series.initial,
        tau: series.tau,
        probs,
        cumulative,
        mtt_curve,
        mf: None,
        tail_tol,
    };
    stats.mf = detect_mf(&stats, tail_tol);
    Ok(stats)
}

/// Smallest `m < horizon` after which every computed amplitude is below
/// `tail_tol` and the remaining probability sums to at most `tail_tol`.
/// `Some(0)` means the whole series is negligible; `None` means the series has
/// not terminated within the horizon.
pub fn detect_mf(stats: &TransitionStats, tail_tol: f64) -> Option<usize> {
    let horizon = stats.probs.len();
    let mut tail_sum = 0.0f64;
    let mut found = None;
    // m runs over horizon-1 ..= 0; the tail of m holds entries m+1..=horizon
    for m in (0..horizon).rev() {
        let p = stats.probs[m];
        tail_sum += p;
        if tail_sum > tail_tol || p.sqrt() > tail_tol {
            break;
        }
        found = Some(m);
    }
    found
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    /// `grid[(M - 1, M' - 1)] = sum_{m <= m_max} |phi[M,M'](m)|^2`.
    pub grid: DMatrix<f64>,
    pub m_max: usize,
    pub tau: f64,
}

impl ProbabilityMap {
    pub fn get(&self, measured: usize, initial: usize) -> Result<f64> {
        let n = self.grid.nrows();
        Ok(self.grid[(zero_based(measured, n)?, zero_based(initial, n)?)])
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.grid.nrows();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.grid[(a, b)] - self.grid[(b, a)]).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    /// Reuse one amplitude series for all initial states with identical
    /// projected initial vectors.
    pub use_equivalence: bool,
    pub equivalence_tol: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            use_equivalence: false,
            equivalence_tol: 0.0,
        }
    }
}

/// Detection-amplitude series for every initial state, for one measured
/// state. Entries are in initial-state order.
fn row_series(
    model: &SpectralModel,
    measured: usize,
    tau: f64,
    m_max: usize,
    options: MapOptions,
) -> Result<Vec<AmplitudeSeries>> {
    let n = model.n();
    let mut out: Vec<Option<AmplitudeSeries>> = vec![None; n];
    if options.use_equivalence {
        for class in equivalence_classes(model, measured, tau, options.equivalence_tol)? {
            let series = amplitude_matrix_power(model, measured, class[0], tau, m_max)?;
            for &member in &class {
                let mut s = series.clone();
                s.initial = member;
                out[member - 1] = Some(s);
            }
        }
    }
    for initial in 1..=n {
        if out[initial - 1].is_none() {
            out[initial - 1] = Some(amplitude_matrix_power(model, measured, initial, tau, m_max)?);
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every initial state filled")).collect())
}

pub fn probability_map(model: &SpectralModel, tau: f64, m_max: usize) -> Result<ProbabilityMap> {
    probability_map_with(model, tau, m_max, MapOptions::default())
}

pub fn probability_map_with(
    model: &SpectralModel,
    tau: f64,
    m_max: usize,
    options: MapOptions,
) -> Result<ProbabilityMap> {
    let n = model.n();
    let rows: Vec<Vec<f64>> = (1..=n)
        .into_par_iter()
        .map(|measured| {
            row_series(model, measured, tau, m_max, options)
                .map(|row| row.iter().map(|s| s.probabilities().iter().sum()).collect())
        })
        .collect::<Result<_>>()?;
    Ok(ProbabilityMap {
        grid: DMatrix::from_fn(n, n, |a, b| rows[a][b]),
        m_max,
        tau,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MttMatrix {
    /// Row-major, `entries[(M - 1) * n + (M' - 1)]`.
    pub entries: Vec<Option<f64>>,
    pub n: usize,
    pub m_max: usize,
    pub tau: f64,
}

impl MttMatrix {
    pub fn get(&self, measured: usize, initial: usize) -> Result<Option<f64>> {
        let a = zero_based(measured, self.n)?;
        let b = zero_based(initial, self.n)?;
        Ok(self.entries[a * self.n + b])
    }
}

/// Mean transition times over `m_max` steps for every pair `(M, M')`.
pub fn mtt_matrix(model: &SpectralModel, tau: f64, m_max: usize) -> Result<MttMatrix> {
    let n = model.n();
    let rows: Vec<Vec<Option<f64>>> = (1..=n)
        .into_par_iter()
        .map(|measured| {
            row_series(model, measured, tau, m_max, MapOptions::default())?
                .iter()
                .map(|s| transition_stats(s).map(|st| st.final_mtt()))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(MttMatrix {
        entries: rows.into_iter().flatten().collect(),
        n,
        m_max,
        tau,
    })
}
