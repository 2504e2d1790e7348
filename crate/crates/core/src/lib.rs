//! Monitored quantum walks on finite graphs.
//!
//! A walk is specified by its energy levels and the overlaps
//! `q[k,j] = <r_k|E_j>` between graph states and energy eigenstates
//! ([`SpectralModel`]). From that pair the crate builds the unitary and
//! monitored evolution operators, computes first-detection amplitudes by
//! several independent routes, and derives localization diagnostics:
//! inverse participation ratios, time-averaged and monitored transition
//! probabilities, and mean transition times.
//!
//! All graph and energy indices in the public API are 1-based and all times
//! are in units of `hbar / J`.

pub mod error;
pub mod experiment;
pub mod monitored;
pub mod observables;
pub mod spectral;
pub mod unitary_avg;

pub use error::{Error, Result};
pub use monitored::{
    amplitude_matrix_power, amplitude_path_sum, amplitude_projected, amplitude_recursion,
    degenerate_eigenvector, detect_eos, eigenvalues, equivalence_class_check, kernel,
    monitored_matrix, projected_matrix, resolvent_pole_residual, stationary_states,
    AmplitudeSeries, EosSet, Method, MonitoredOperator,
};
pub use observables::{
    detect_mf, mtt_matrix, probability_map, transition_stats, ProbabilityMap, TransitionStats,
};
pub use spectral::{
    build_identity_basis, build_localized_basis, build_plane_wave_basis, ipr_localized_closed_form,
    linear_spectrum, validate_basis, BasisKind, BasisReport, CMatrix, PhaseVector, SpectralModel,
    C64,
};
pub use unitary_avg::{
    averaged_probability_matrix, detailed_balance_residual, time_averaged_transition,
    ue_transition_closed_form, AveragedProbabilityMatrix,
};
