//! Config-driven batch runs: a JSON experiment description in, CSV/JSON data
//! files and a checksum manifest out.

mod config;
mod runner;

pub use config::{
    load_config, parse_config, parse_expr, read_basis_csv, BasisSpec, ExperimentConfig, IndexSel,
    OneOrMany, OutputKind, OutputSpec, Scalar, SpectrumSpec, Tolerances,
};
pub use runner::{
    closed_form_residuals, exit_code, run_config, run_file, run_str, verify, with_suffix, Check,
    ClosedForms, RunOptions, RunReport, WrittenOutput, MANIFEST_NAME,
};
