use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{parse_config, BasisSpec, ExperimentConfig, OutputKind, SpectrumSpec};
use crate::error::{Error, Result};
use crate::monitored::{
    amplitude_matrix_power, amplitude_projected, detect_eos, eigenvalues, equivalence_classes,
    kernel, monitored_matrix, path_sum_table, recursion_table, stationary_states, AmplitudeSeries,
    DEFAULT_PATH_SUM_BUDGET, DEFAULT_PHASE_TOL,
};
use crate::observables::{transition_stats_with_tol, TransitionStats};
use crate::spectral::{ipr_localized_closed_form, SpectralModel};
use crate::unitary_avg::{averaged_probability_matrix, ue_transition_closed_form};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Tolerances of the `--verify` checks.
pub const VERIFY_PATH_SUM_TOL: f64 = 1e-10;
pub const VERIFY_RECURSION_TOL: f64 = 1e-9;
pub const VERIFY_CLOSED_FORM_TOL: f64 = 1e-12;
pub const VERIFY_DISK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output paths are resolved against this directory; defaults to the
    /// working directory.
    pub out_dir: Option<PathBuf>,
    /// Size of the worker pool; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub verify: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WrittenOutput {
    pub kind: &'static str,
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub outputs: Vec<WrittenOutput>,
    pub checks: Vec<Check>,
    pub manifest: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact: &'static str,
    version: &'static str,
    config: &'a serde_json::Value,
    outputs: &'a [WrittenOutput],
    checks: &'a [Check],
    timings: Timings,
}

#[derive(Serialize)]
struct Timings {
    setup_seconds: f64,
    verify_seconds: f64,
    total_seconds: f64,
}

/// Process exit status for a failed run: 2 config/schema, 3 basis,
/// 4 numerical or verification, 5 unwritable output.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        Error::NonOrthonormal { .. } | Error::Shape { .. } | Error::InvalidDimension { .. } => 3,
        Error::Output { .. } | Error::Io(_) => 5,
        _ => 4,
    }
}

pub fn run_file(config_path: &Path, options: &RunOptions) -> Result<RunReport> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        Error::config("<file>", format!("cannot read {}: {e}", config_path.display()))
    })?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    run_str(&text, base, options)
}

/// Runs a config given as JSON text; `base_dir` resolves relative basis files.
pub fn run_str(text: &str, base_dir: &Path, options: &RunOptions) -> Result<RunReport> {
    let config = parse_config(text)?;
    let echo: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::config("<json>", e.to_string()))?;
    match options.threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| Error::Numerical {
                    message: format!("cannot start worker pool: {e}"),
                })?;
            pool.install(|| run_config(&config, &echo, base_dir, options))
        }
        None => run_config(&config, &echo, base_dir, options),
    }
}

struct Rendered {
    kind: OutputKind,
    path: PathBuf,
    content: String,
    seconds: f64,
}

pub fn run_config(
    config: &ExperimentConfig,
    echo: &serde_json::Value,
    base_dir: &Path,
    options: &RunOptions,
) -> Result<RunReport> {
    let start = Instant::now();
    let model = config.build_model(base_dir)?;
    let taus = config.taus()?;
    let setup_seconds = start.elapsed().as_secs_f64();

    let verify_start = Instant::now();
    let checks = if options.verify {
        let checks = verify(config, &model, &taus)?;
        if let Some(bad) = checks.iter().find(|c| !c.passed) {
            return Err(Error::Verification(format!(
                "{}: worst deviation {:e} exceeds {:e}",
                bad.name, bad.worst, bad.tol
            )));
        }
        checks
    } else {
        Vec::new()
    };
    let verify_seconds = verify_start.elapsed().as_secs_f64();

    let out_dir = options.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut ctx = Context::new(config, &model);
    let mut rendered = Vec::new();
    for spec in &config.outputs {
        let t0 = Instant::now();
        let base = out_dir.join(&spec.path);
        let files = match spec.kind {
            OutputKind::UnitaryAvg => vec![(base, ctx.unitary_avg()?)],
            OutputKind::Ipr => vec![(base, ctx.ipr()?)],
            kind => {
                let mut files = Vec::new();
                for (i, &tau) in taus.iter().enumerate() {
                    let base = if taus.len() > 1 {
                        with_suffix(&base, &format!("_jtau{}", i + 1))
                    } else {
                        base.clone()
                    };
                    files.extend(ctx.per_tau(kind, tau, &base)?);
                }
                files
            }
        };
        let seconds = t0.elapsed().as_secs_f64();
        for (path, content) in files {
            rendered.push(Rendered {
                kind: spec.kind,
                path,
                content,
                seconds,
            });
        }
    }

    let mut outputs = Vec::with_capacity(rendered.len());
    for r in &rendered {
        write_file(&r.path, &r.content)?;
        outputs.push(WrittenOutput {
            kind: r.kind.name(),
            path: r.path.display().to_string(),
            sha256: hex::encode(Sha256::digest(r.content.as_bytes())),
            bytes: r.content.len(),
            seconds: r.seconds,
        });
    }
    let manifest_path = out_dir.join(MANIFEST_NAME);
    let manifest = Manifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: echo,
        outputs: &outputs,
        checks: &checks,
        timings: Timings {
            setup_seconds,
            verify_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numerical {
        message: format!("cannot serialize manifest: {e}"),
    })?;
    write_file(&manifest_path, &(text + "\n"))?;
    Ok(RunReport {
        outputs,
        checks,
        manifest: manifest_path.display().to_string(),
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let wrap = |source| Error::Output {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(wrap)?;
    }
    std::fs::write(path, content).map_err(wrap)
}

/// `dir/name.ext` -> `dir/name{suffix}.ext`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

/// Shortest decimal that parses back to the same value.
fn num(x: f64) -> Result<String> {
    if x.is_finite() {
        Ok(format!("{x:?}"))
    } else {
        Err(Error::Numerical {
            message: format!("non-finite value {x} in output"),
        })
    }
}

fn opt_num(x: Option<f64>) -> Result<String> {
    x.map_or(Ok("undef".to_string()), num)
}

/// Per-run state; amplitude series are computed once per `tau` and shared
/// between the output kinds that need them.
struct Context<'a> {
    config: &'a ExperimentConfig,
    model: &'a SpectralModel,
    cache: Option<(f64, Vec<TransitionStats>, Vec<AmplitudeSeries>)>,
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig, model: &'a SpectralModel) -> Self {
        Context {
            config,
            model,
            cache: None,
        }
    }

    fn measured(&self) -> Vec<usize> {
        self.config.measured.indices(self.config.n)
    }

    /// Series for every selected pair, measured-major, initial-minor.
    fn series(&mut self, tau: f64) -> Result<(&[TransitionStats], &[AmplitudeSeries])> {
        if self.cache.as_ref().map(|c| c.0) != Some(tau) {
            let model = self.model;
            let m_max = self.config.m_max;
            let initial = self.config.initial.indices(self.config.n);
            let use_eq = self.config.use_equivalence;
            let eq_tol = self.config.tolerances.eos;
            let rows: Vec<Vec<AmplitudeSeries>> = self
                .measured()
                .into_par_iter()
                .map(|m| {
                    let classes = if use_eq {
                        equivalence_classes(model, m, tau, eq_tol)?
                    } else {
                        Vec::new()
                    };
                    let mut row: Vec<AmplitudeSeries> = Vec::with_capacity(initial.len());
                    for &i in &initial {
                        let leader = classes
                            .iter()
                            .find(|c| c.contains(&i))
                            .map(|c| c[0])
                            .filter(|&l| l != i && initial.contains(&l));
                        let reused = leader.and_then(|l| row.iter().find(|s| s.initial == l));
                        let series = match reused {
                            Some(s) => AmplitudeSeries {
                                initial: i,
                                ..s.clone()
                            },
                            None => amplitude_matrix_power(model, m, i, tau, m_max)?,
                        };
                        row.push(series);
                    }
                    Ok(row)
                })
                .collect::<Result<_>>()?;
            let series: Vec<AmplitudeSeries> = rows.into_iter().flatten().collect();
            let tail = self.config.tolerances.tail;
            let stats = series
                .par_iter()
                .map(|s| transition_stats_with_tol(s, tail))
                .collect::<Result<Vec<_>>>()?;
            self.cache = Some((tau, stats, series));
        }
        let (_, stats, series) = self.cache.as_ref().expect("cache filled");
        Ok((stats, series))
    }

    fn per_tau(&mut self, kind: OutputKind, tau: f64, base: &Path) -> Result<Vec<(PathBuf, String)>> {
        match kind {
            OutputKind::ProbabilityMap => {
                let (stats, _) = self.series(tau)?;
                let mut out = String::from("M,Mp,total_prob\n");
                for s in stats {
                    writeln!(out, "{},{},{}", s.measured, s.initial, num(s.total_probability())?).unwrap();
                }
                Ok(vec![(base.to_path_buf(), out)])
            }
            OutputKind::AmplitudeSeries => {
                let (stats, series) = self.series(tau)?;
                let many = stats.len() > 1;
                let mut files = Vec::with_capacity(stats.len());
                for (st, s) in stats.iter().zip(series) {
                    let mut out = String::from("m,re,im,prob,cum_prob,mtt\n");
                    for (idx, phi) in s.values.iter().enumerate() {
                        writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            idx + 1,
                            num(phi.re)?,
                            num(phi.im)?,
                            num(st.probs[idx])?,
                            num(st.cumulative[idx])?,
                            opt_num(st.mtt_curve[idx])?
                        )
                        .unwrap();
                    }
                    let path = if many {
                        with_suffix(base, &format!("_M{}_Mp{}", s.measured, s.initial))
                    } else {
                        base.to_path_buf()
                    };
                    files.push((path, out));
                }
                Ok(files)
            }
            OutputKind::MttCurve => {
                let (stats, _) = self.series(tau)?;
                let mut out = String::from("M,Mp,N,mtt\n");
                for s in stats {
                    for (idx, t) in s.mtt_curve.iter().enumerate() {
                        writeln!(out, "{},{},{},{}", s.measured, s.initial, idx + 1, opt_num(*t)?).unwrap();
                    }
                }
                Ok(vec![(base.to_path_buf(), out)])
            }
            OutputKind::MttMatrix => {
                let (stats, _) = self.series(tau)?;
                let mut out = String::from("M,Mp,mtt\n");
                for s in stats {
                    writeln!(out, "{},{},{}", s.measured, s.initial, opt_num(s.final_mtt())?).unwrap();
                }
                Ok(vec![(base.to_path_buf(), out)])
            }
            OutputKind::Eigenvalues => {
                let measured = self.measured();
                let model = self.model;
                let spectra = measured
                    .par_iter()
                    .map(|&m| eigenvalues(&monitored_matrix(model, m, tau)?))
                    .collect::<Result<Vec<_>>>()?;
                let many = measured.len() > 1;
                let mut files = Vec::with_capacity(measured.len());
                for (m, values) in measured.iter().zip(spectra) {
                    let mut out = String::from("k,re,im,modulus\n");
                    for (k, v) in values.iter().enumerate() {
                        writeln!(out, "{},{},{},{}", k + 1, num(v.re)?, num(v.im)?, num(v.norm())?).unwrap();
                    }
                    let path = if many {
                        with_suffix(base, &format!("_M{m}"))
                    } else {
                        base.to_path_buf()
                    };
                    files.push((path, out));
                }
                Ok(files)
            }
            OutputKind::Diagnostics => {
                let report = self.diagnostics(tau)?;
                let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical {
                    message: format!("cannot serialize diagnostics: {e}"),
                })?;
                Ok(vec![(base.to_path_buf(), text + "\n")])
            }
            OutputKind::UnitaryAvg | OutputKind::Ipr => unreachable!("tau-independent outputs"),
        }
    }

    fn unitary_avg(&self) -> Result<String> {
        let p = averaged_probability_matrix(self.model, self.config.degeneracy_tol())?;
        let n = self.model.n();
        let mut out = String::from("k,l,p_bar\n");
        for k in 0..n {
            for l in 0..n {
                writeln!(out, "{},{},{}", k + 1, l + 1, num(p.entries[(k, l)])?).unwrap();
            }
        }
        Ok(out)
    }

    fn ipr(&self) -> Result<String> {
        let mut out = String::from("k,c_k\n");
        for k in 1..=self.model.n() {
            writeln!(out, "{k},{}", num(self.model.inverse_participation_ratio(k)?)?).unwrap();
        }
        Ok(out)
    }

    fn diagnostics(&mut self, tau: f64) -> Result<Diagnostics> {
        let model = self.model;
        let eos_tol = self.config.tolerances.eos;
        let measured = self.measured();
        let mut sites = measured
            .iter()
            .map(|&m| {
                Ok(SiteDiagnostics {
                    measured: m,
                    eos: detect_eos(model, m, eos_tol)?.indices,
                    stationary: stationary_states(model, m, tau, DEFAULT_PHASE_TOL)?,
                    equivalence_classes: equivalence_classes(model, m, tau, eos_tol)?,
                    spectral_radius: eigenvalues(&monitored_matrix(model, m, tau)?)?
                        .first()
                        .map_or(0.0, |l| l.norm()),
                    transitions: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (stats, _) = self.series(tau)?;
        for st in stats {
            let site = sites
                .iter_mut()
                .find(|s| s.measured == st.measured)
                .expect("stats follow the measured selection");
            site.transitions.push(TransitionDiagnostics {
                initial: st.initial,
                mf: st.mf,
                total_probability: st.total_probability(),
                mtt: st.final_mtt(),
            });
        }
        Ok(Diagnostics {
            n: self.config.n,
            basis: basis_name(&self.config.basis),
            tau,
            horizon: self.config.m_max,
            tail_tol: self.config.tolerances.tail,
            sites,
            closed_forms: closed_form_residuals(self.config, model)?,
        })
    }
}

fn basis_name(spec: &BasisSpec) -> &'static str {
    match spec {
        BasisSpec::Identity => "identity",
        BasisSpec::Localized => "localized",
        BasisSpec::PlaneWave => "plane_wave",
        BasisSpec::Custom { .. } => "custom",
        BasisSpec::CustomFile(_) => "custom_file",
    }
}

#[derive(Debug, Serialize)]
struct Diagnostics {
    n: usize,
    basis: &'static str,
    tau: f64,
    horizon: usize,
    tail_tol: f64,
    sites: Vec<SiteDiagnostics>,
    closed_forms: ClosedForms,
}

#[derive(Debug, Serialize)]
struct SiteDiagnostics {
    measured: usize,
    eos: Vec<usize>,
    stationary: Vec<usize>,
    equivalence_classes: Vec<Vec<usize>>,
    spectral_radius: f64,
    transitions: Vec<TransitionDiagnostics>,
}

#[derive(Debug, Serialize)]
struct TransitionDiagnostics {
    initial: usize,
    mf: Option<usize>,
    total_probability: f64,
    mtt: Option<f64>,
}

/// Maximum deviations from the closed forms that apply to the configured
/// basis; `None` where a form does not apply.
#[derive(Debug, Default, Serialize)]
pub struct ClosedForms {
    pub ipr_localized: Option<f64>,
    pub unitary_avg_localized: Option<f64>,
    pub ipr_plane_wave: Option<f64>,
    pub kernel_idempotence: f64,
}

pub fn closed_form_residuals(config: &ExperimentConfig, model: &SpectralModel) -> Result<ClosedForms> {
    let n = model.n();
    let mut out = ClosedForms::default();
    match config.basis {
        BasisSpec::Localized => {
            let mut worst = 0.0f64;
            for k in 2..=n {
                let c = model.inverse_participation_ratio(k)?;
                worst = worst.max((c - ipr_localized_closed_form(n, k)?).abs());
            }
            out.ipr_localized = Some(worst);
            // the closed form assumes non-degenerate energies
            if matches!(config.spectrum, SpectrumSpec::Linear(_)) {
                let p = averaged_probability_matrix(model, config.degeneracy_tol())?;
                let mut worst = 0.0f64;
                for k in 2..=n {
                    for l in (k + 1)..=n {
                        let want = ue_transition_closed_form(n, k, l)?;
                        worst = worst.max((p.get(k, l)? - want).abs());
                    }
                }
                out.unitary_avg_localized = Some(worst);
            }
        }
        BasisSpec::PlaneWave => {
            let inv = 1.0 / n as f64;
            let mut worst = 0.0f64;
            for k in 1..=n {
                worst = worst.max((model.inverse_participation_ratio(k)? - inv).abs());
            }
            out.ipr_plane_wave = Some(worst);
        }
        _ => {}
    }
    for m in 1..=n {
        let k = kernel(model, m)?;
        out.kernel_idempotence = out.kernel_idempotence.max((&k * &k - &k).iter().fold(0.0f64, |m, c| m.max(c.norm())));
    }
    Ok(out)
}

fn worst_of(a: &AmplitudeSeries, b: &AmplitudeSeries) -> f64 {
    a.max_deviation(b)
}

/// Deepest path-sum horizon that fits the default budget.
fn path_sum_depth(n: usize, m_max: usize) -> usize {
    let mut total = 0u128;
    let mut depth = 0;
    let mut layer = 1u128;
    while depth < m_max {
        layer = layer.saturating_mul(n as u128);
        total = total.saturating_add(layer);
        if total > DEFAULT_PATH_SUM_BUDGET {
            break;
        }
        depth += 1;
    }
    depth
}

/// Cross-checks run by `--verify`: three amplitude routes against each other,
/// the reduced operator, the unit-disk bound and the closed forms.
pub fn verify(config: &ExperimentConfig, model: &SpectralModel, taus: &[f64]) -> Result<Vec<Check>> {
    let n = model.n();
    let measured = config.measured.indices(n);
    let initial = config.initial.indices(n);
    let depth = path_sum_depth(n, config.m_max);
    let eos_tol = config.tolerances.eos;

    let mut path = 0.0f64;
    let mut recursion = 0.0f64;
    let mut projected = 0.0f64;
    let mut radius = 0.0f64;
    for &tau in taus {
        let per_site = measured
            .par_iter()
            .map(|&m| -> Result<(f64, f64, f64, f64)> {
                let table = if depth > 0 {
                    Some(path_sum_table(model, m, tau, depth, DEFAULT_PATH_SUM_BUDGET)?)
                } else {
                    None
                };
                let (mut p, mut r, mut q) = (0.0f64, 0.0f64, 0.0f64);
                for &i in &initial {
                    let direct = amplitude_matrix_power(model, m, i, tau, config.m_max)?;
                    let rec = recursion_table(model, m, i, tau, config.m_max)?.series(m)?;
                    r = r.max(worst_of(&direct, &rec));
                    let proj = amplitude_projected(model, m, i, tau, config.m_max, eos_tol)?;
                    q = q.max(worst_of(&direct, &proj));
                    if let Some(table) = &table {
                        let ps = table.series(i)?;
                        let head = AmplitudeSeries {
                            values: direct.values[..depth].to_vec(),
                            ..direct.clone()
                        };
                        p = p.max(worst_of(&head, &ps));
                    }
                }
                let spectrum = eigenvalues(&monitored_matrix(model, m, tau)?)?;
                let rho = spectrum.first().map_or(0.0, |l| l.norm());
                Ok((p, r, q, rho))
            })
            .collect::<Result<Vec<_>>>()?;
        for (p, r, q, rho) in per_site {
            path = path.max(p);
            recursion = recursion.max(r);
            projected = projected.max(q);
            radius = radius.max(rho);
        }
    }
    let check = |name: String, worst: f64, tol: f64| Check {
        passed: worst <= tol,
        name,
        worst,
        tol,
    };
    let mut checks = vec![
        check(format!("path_sum_vs_matrix_power (m <= {depth})"), path, VERIFY_PATH_SUM_TOL),
        check("recursion_vs_matrix_power".into(), recursion, VERIFY_RECURSION_TOL),
        check("projected_vs_matrix_power".into(), projected, VERIFY_RECURSION_TOL),
        check("spectral_radius_minus_one".into(), (radius - 1.0).max(0.0), VERIFY_DISK_TOL),
    ];
    let forms = closed_form_residuals(config, model)?;
    checks.push(check("kernel_idempotence".into(), forms.kernel_idempotence, VERIFY_CLOSED_FORM_TOL));
    for (name, value) in [
        ("ipr_localized_closed_form", forms.ipr_localized),
        ("unitary_avg_localized_closed_form", forms.unitary_avg_localized),
        ("ipr_plane_wave", forms.ipr_plane_wave),
    ] {
        if let Some(v) = value {
            checks.push(check(name.into(), v, VERIFY_CLOSED_FORM_TOL));
        }
    }
    Ok(checks)
}
