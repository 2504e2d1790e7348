use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monitored::DEFAULT_EOS_TOL;
use crate::observables::DEFAULT_TAIL_TOL;
use crate::spectral::{
    linear_spectrum, BasisKind, CMatrix, SpectralModel, C64, DEFAULT_ORTHONORMALITY_TOL,
};
use crate::unitary_avg::default_degeneracy_tol;

/// A declarative experiment, deserialized from a single JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub basis: BasisSpec,
    pub spectrum: SpectrumSpec,
    pub j_tau: OneOrMany<Scalar>,
    #[serde(default)]
    pub measured: IndexSel,
    #[serde(default)]
    pub initial: IndexSel,
    pub m_max: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub outputs: Vec<OutputSpec>,
    #[serde(default)]
    pub use_equivalence: bool,
    /// Every computation is deterministic; `false` is rejected.
    #[serde(default = "yes")]
    pub seedless: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisSpec {
    Identity,
    Localized,
    PlaneWave,
    /// Inline matrix, `re[k][j]` and optional `im[k][j]`.
    Custom {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
    /// CSV file with `n` rows of `2n` numbers: real parts, then imaginary
    /// parts. Relative paths resolve against the config file.
    CustomFile(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectrumSpec {
    /// `E_j = (j - 1) J`; `j_tau` is then divided by `J` to obtain `tau`.
    Linear(f64),
    /// Explicit energies; `j_tau` is taken as `tau` directly.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// A number literal or an arithmetic expression in `pi`, e.g. `"pi/2+0.002"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn value(&self) -> std::result::Result<f64, String> {
        match self {
            Scalar::Number(x) => Ok(*x),
            Scalar::Expr(s) => parse_expr(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "IndexRaw", into = "IndexRaw")]
pub enum IndexSel {
    #[default]
    All,
    One(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum IndexRaw {
    Index(usize),
    Word(String),
}

impl TryFrom<IndexRaw> for IndexSel {
    type Error = String;

    fn try_from(raw: IndexRaw) -> std::result::Result<Self, String> {
        match raw {
            IndexRaw::Index(i) => Ok(IndexSel::One(i)),
            IndexRaw::Word(w) if w == "all" => Ok(IndexSel::All),
            IndexRaw::Word(w) => Err(format!("expected a 1-based index or \"all\", got {w:?}")),
        }
    }
}

impl From<IndexSel> for IndexRaw {
    fn from(sel: IndexSel) -> Self {
        match sel {
            IndexSel::All => IndexRaw::Word("all".into()),
            IndexSel::One(i) => IndexRaw::Index(i),
        }
    }
}

impl IndexSel {
    pub fn indices(&self, n: usize) -> Vec<usize> {
        match self {
            IndexSel::All => (1..=n).collect(),
            IndexSel::One(i) => vec![*i],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_orthonormality")]
    pub orthonormality: f64,
    #[serde(default = "default_eos")]
    pub eos: f64,
    /// Absolute energy tolerance; defaults to `1e-9 * max|E|`.
    #[serde(default)]
    pub degeneracy: Option<f64>,
    #[serde(default = "default_tail")]
    pub tail: f64,
}

fn default_orthonormality() -> f64 {
    DEFAULT_ORTHONORMALITY_TOL
}
fn default_eos() -> f64 {
    DEFAULT_EOS_TOL
}
fn default_tail() -> f64 {
    DEFAULT_TAIL_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            orthonormality: DEFAULT_ORTHONORMALITY_TOL,
            eos: DEFAULT_EOS_TOL,
            degeneracy: None,
            tail: DEFAULT_TAIL_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    ProbabilityMap,
    AmplitudeSeries,
    Eigenvalues,
    UnitaryAvg,
    Ipr,
    MttCurve,
    MttMatrix,
    Diagnostics,
}

impl OutputKind {
    pub fn name(&self) -> &'static str {
        match self {
            OutputKind::ProbabilityMap => "probability_map",
            OutputKind::AmplitudeSeries => "amplitude_series",
            OutputKind::Eigenvalues => "eigenvalues",
            OutputKind::UnitaryAvg => "unitary_avg",
            OutputKind::Ipr => "ipr",
            OutputKind::MttCurve => "mtt_curve",
            OutputKind::MttMatrix => "mtt_matrix",
            OutputKind::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub kind: OutputKind,
    pub path: PathBuf,
}

/// Parses JSON text into a config, reporting the failing field path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl ExperimentConfig {
    /// Checks the semantic constraints that the JSON schema cannot express.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.m_max == 0 {
            return Err(Error::config("m_max", "must be at least 1"));
        }
        if !self.seedless {
            return Err(Error::config("seedless", "all computations are deterministic; must be true"));
        }
        for (name, sel) in [("measured", self.measured), ("initial", self.initial)] {
            if let IndexSel::One(i) = sel {
                if i == 0 || i > n {
                    return Err(Error::config(name, format!("index {i} outside 1..={n}")));
                }
            }
        }
        let values = self.j_tau.to_vec();
        if values.is_empty() {
            return Err(Error::config("j_tau", "at least one value required"));
        }
        for (i, s) in values.iter().enumerate() {
            let at = match self.j_tau {
                OneOrMany::One(_) => "j_tau".to_string(),
                OneOrMany::Many(_) => format!("j_tau[{i}]"),
            };
            let v = s.value().map_err(|m| Error::config(&at, m))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(at, format!("{v} must be finite and >= 0")));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.orthonormality", Some(t.orthonormality)),
            ("tolerances.eos", Some(t.eos)),
            ("tolerances.degeneracy", t.degeneracy),
            ("tolerances.tail", Some(t.tail)),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::config(name, format!("{v} must be finite and > 0")));
                }
            }
        }
        match &self.spectrum {
            SpectrumSpec::Linear(j) => {
                if !(*j > 0.0) || !j.is_finite() {
                    return Err(Error::config("spectrum.linear", format!("coupling {j} must be finite and > 0")));
                }
            }
            SpectrumSpec::Custom(e) => {
                if e.len() != n {
                    return Err(Error::config("spectrum.custom", format!("expected {n} energies, got {}", e.len())));
                }
                if let Some(i) = e.iter().position(|x| !x.is_finite()) {
                    return Err(Error::config(format!("spectrum.custom[{i}]"), "energy must be finite"));
                }
            }
        }
        if self.outputs.is_empty() {
            return Err(Error::config("outputs", "at least one output required"));
        }
        for (i, a) in self.outputs.iter().enumerate() {
            if a.path.as_os_str().is_empty() {
                return Err(Error::config(format!("outputs[{i}].path"), "empty path"));
            }
            if self.outputs[..i].iter().any(|b| b.path == a.path) {
                return Err(Error::config(format!("outputs[{i}].path"), "duplicate output path"));
            }
        }
        Ok(())
    }

    /// Measurement intervals `tau`, one per `j_tau` entry.
    pub fn taus(&self) -> Result<Vec<f64>> {
        let scale = match self.spectrum {
            SpectrumSpec::Linear(j) => j,
            SpectrumSpec::Custom(_) => 1.0,
        };
        self.j_tau
            .to_vec()
            .iter()
            .map(|s| s.value().map(|v| v / scale).map_err(|m| Error::config("j_tau", m)))
            .collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        match &self.spectrum {
            SpectrumSpec::Linear(j) => linear_spectrum(self.n, *j),
            SpectrumSpec::Custom(e) => e.clone(),
        }
    }

    pub fn degeneracy_tol(&self) -> f64 {
        self.tolerances
            .degeneracy
            .unwrap_or_else(|| default_degeneracy_tol(&self.energies()))
    }

    pub fn basis_kind(&self, base_dir: &Path) -> Result<BasisKind> {
        match &self.basis {
            BasisSpec::Identity => Ok(BasisKind::Identity),
            BasisSpec::Localized => Ok(BasisKind::Localized),
            BasisSpec::PlaneWave => Ok(BasisKind::PlaneWave),
            BasisSpec::Custom { re, im } => {
                custom_matrix(self.n, re, im.as_deref()).map(BasisKind::Custom)
            }
            BasisSpec::CustomFile(path) => {
                let path = base_dir.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    Error::config("basis.custom_file", format!("cannot read {}: {e}", path.display()))
                })?;
                read_basis_csv(self.n, &text).map(BasisKind::Custom)
            }
        }
    }

    pub fn build_model(&self, base_dir: &Path) -> Result<SpectralModel> {
        let basis = self.basis_kind(base_dir)?;
        SpectralModel::from_basis(&basis, self.energies(), self.tolerances.orthonormality)
    }
}

fn custom_matrix(n: usize, re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<CMatrix> {
    let check = |name: &str, rows: &[Vec<f64>]| -> Result<()> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape {
                expected: format!("{n}x{n} basis.custom.{name}"),
                got: format!("{} rows of lengths {:?}", rows.len(), rows.iter().map(Vec::len).collect::<Vec<_>>()),
            });
        }
        Ok(())
    };
    check("re", re)?;
    if let Some(im) = im {
        check("im", im)?;
    }
    Ok(CMatrix::from_fn(n, n, |k, j| {
        C64::new(re[k][j], im.map_or(0.0, |im| im[k][j]))
    }))
}

/// Parses `n` comma-separated rows of `2n` numbers (real parts, then
/// imaginary parts). Blank lines and lines starting with `#` are skipped.
pub fn read_basis_csv(n: usize, text: &str) -> Result<CMatrix> {
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::config("basis.custom_file", format!("line {}: {e}", line_no + 1)))?;
        if values.len() != 2 * n {
            return Err(Error::Shape {
                expected: format!("{} values per row", 2 * n),
                got: format!("{} on line {}", values.len(), line_no + 1),
            });
        }
        re.push(values[..n].to_vec());
        im.push(values[n..].to_vec());
    }
    custom_matrix(n, &re, Some(&im))
}

/// Evaluates `+ - * /`, parentheses, decimal literals and `pi`.
pub fn parse_expr(text: &str) -> std::result::Result<f64, String> {
    let mut p = ExprParser {
        chars: text.chars().filter(|c| !c.is_whitespace()).collect(),
        pos: 0,
    };
    let v = p.sum()?;
    if p.pos != p.chars.len() {
        return Err(format!("unexpected {:?} in expression {text:?}", p.chars[p.pos]));
    }
    Ok(v)
}

struct ExprParser {
    chars: Vec<char>,
    pos: usize,
}

impl ExprParser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn sum(&mut self) -> std::result::Result<f64, String> {
        let mut acc = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.product()?;
            acc = if op == '+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    fn product(&mut self) -> std::result::Result<f64, String> {
        let mut acc = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            acc = if op == '*' { acc * rhs } else { acc / rhs };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> std::result::Result<f64, String> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> std::result::Result<f64, String> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err("missing ')'".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Some('p') => {
                if self.chars.get(self.pos + 1) == Some(&'i') {
                    self.pos += 2;
                    Ok(PI)
                } else {
                    Err("expected `pi`".into())
                }
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while let Some(c) = self.peek() {
                    let exponent_sign = (c == '-' || c == '+')
                        && matches!(self.chars.get(self.pos - 1), Some('e' | 'E'));
                    if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exponent_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let s: String = self.chars[start..self.pos].iter().collect();
                s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"))
            }
            Some(c) => Err(format!("unexpected {c:?}")),
            None => Err("unexpected end of expression".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"n": 10, "basis": "localized", "spectrum": {"linear": 1.0},
        "j_tau": 1, "m_max": 500, "outputs": [{"kind": "probability_map", "path": "map.csv"}]}"#;

    #[test]
    fn expressions() {
        assert_eq!(parse_expr("pi").unwrap(), PI);
        assert_eq!(parse_expr("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_expr("pi/2+0.002").unwrap(), PI / 2.0 + 0.002);
        assert_eq!(parse_expr("4*pi").unwrap(), 4.0 * PI);
        assert_eq!(parse_expr("-(1+2)*3").unwrap(), -9.0);
        assert_eq!(parse_expr("1e-3 + 2").unwrap(), 2.001);
        assert!(parse_expr("pie").is_err());
        assert!(parse_expr("2 +").is_err());
        assert!(parse_expr("(1").is_err());
    }

    #[test]
    fn minimal_config_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.measured, IndexSel::All);
        assert_eq!(c.initial, IndexSel::All);
        assert_eq!(c.taus().unwrap(), vec![1.0]);
        assert_eq!(c.tolerances.eos, DEFAULT_EOS_TOL);
        assert!(c.seedless);
    }

    #[test]
    fn j_tau_list_and_coupling() {
        let text = MINIMAL
            .replace("\"j_tau\": 1", "\"j_tau\": [\"pi/2\", 0.04]")
            .replace("\"linear\": 1.0", "\"linear\": 2.0");
        let c = parse_config(&text).unwrap();
        assert_eq!(c.taus().unwrap(), vec![PI / 4.0, 0.02]);
    }

    fn field_of(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        assert_eq!(field_of(&MINIMAL.replace("\"localized\"", "\"circle\"")), "basis");
        assert_eq!(field_of(&MINIMAL.replace("\"m_max\": 500", "\"m_max\": -1")), "m_max");
        assert_eq!(field_of(&MINIMAL.replace("\"m_max\": 500", "\"m_max\": 0")), "m_max");
        assert_eq!(field_of(&MINIMAL.replace("\"j_tau\": 1", "\"j_tau\": \"tau\"")), "j_tau");
        assert_eq!(
            field_of(&MINIMAL.replace("\"probability_map\"", "\"histogram\"")),
            "outputs[0].kind"
        );
        assert_eq!(
            field_of(&MINIMAL.replace("\"j_tau\": 1", "\"j_tau\": 1, \"measured\": 11")),
            "measured"
        );
        assert_eq!(
            field_of(&MINIMAL.replace("\"j_tau\": 1", "\"j_tau\": 1, \"tolerances\": {\"eos\": 0}")),
            "tolerances.eos"
        );
        assert_eq!(field_of(&MINIMAL.replace("\"n\": 10", "\"n\": 10, \"extra\": 1")), "extra");
    }

    #[test]
    fn custom_basis_csv() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let text = format!("# hadamard\n{h},{h},0,0\n{h},-{h},0,0\n");
        let m = read_basis_csv(2, &text).unwrap();
        assert_eq!(m[(1, 1)], C64::new(-h, 0.0));
        assert!(matches!(read_basis_csv(3, &text), Err(Error::Shape { .. })));
    }
}
