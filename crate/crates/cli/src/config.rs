//! Sectioned TOML run configuration.
//!
//! ```toml
//! command = "rate"          # optional when exactly one command section is present
//!
//! [model]
//! name = "twowell"          # linear | rotation | twowell
//! omega = 1.0
//! beta = 0.3
//!
//! [rate]
//! sigma_step = 0.05
//! ```
//!
//! Every key is checked; unknown keys and duplicate command sections are
//! rejected. Defaults are filled in and listed by [`RunConfig::echo`].

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use thiserror::Error;
use toml::{Table, Value};

use epflow_core::model::DriftModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: parse error at line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid key `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { key: key.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Rate,
    Spectrum,
    Sweep,
    Simulate,
    MgfCheck,
    Admissible,
}

impl CommandKind {
    pub const ALL: [CommandKind; 6] = [
        CommandKind::Rate,
        CommandKind::Spectrum,
        CommandKind::Sweep,
        CommandKind::Simulate,
        CommandKind::MgfCheck,
        CommandKind::Admissible,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Rate => "rate",
            CommandKind::Spectrum => "spectrum",
            CommandKind::Sweep => "sweep",
            CommandKind::Simulate => "simulate",
            CommandKind::MgfCheck => "mgf-check",
            CommandKind::Admissible => "admissible",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Linear { c: Vec<Vec<f64>>, bm: Vec<Vec<f64>> },
    Rotation { omega: f64 },
    TwoWell { omega: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub spec: ModelSpec,
    pub check_radius: f64,
}

impl ModelConfig {
    pub fn build(&self) -> Result<DriftModel, epflow_core::model::ModelError> {
        let model = match &self.spec {
            ModelSpec::Linear { c, bm } => {
                let n = c.len();
                let flat = |m: &Vec<Vec<f64>>| m.iter().flatten().copied().collect::<Vec<_>>();
                DriftModel::linear(DMatrix::from_row_slice(n, n, &flat(c)), DMatrix::from_row_slice(n, n, &flat(bm)))?
            }
            ModelSpec::Rotation { omega } => DriftModel::rotation(*omega),
            ModelSpec::TwoWell { omega, beta } => DriftModel::twowell(*omega, *beta),
        };
        model.with_check_radius(self.check_radius)
    }
}

/// Optional explicit grid; `None` sizes the grid from the ground-state widths.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateParams {
    /// Explicit `(min, max, points)`; `None` uses the default symmetric grid.
    pub alpha_grid: Option<(f64, f64, usize)>,
    pub sigma_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumParams {
    pub alpha: f64,
    pub eps: f64,
    pub grid: Option<GridConfig>,
    pub tol: f64,
    pub max_iter: usize,
    pub eigvec: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub alpha: f64,
    pub eps: Vec<f64>,
    pub margin_widths: f64,
    pub points_per_width: f64,
    pub max_peclet: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Point(Vec<f64>),
    BurnIn { from: Vec<f64>, duration: f64 },
    Mu0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateParams {
    pub eps: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub init: InitSpec,
    /// Amplitude `a` of `g = 1 + a·exp(−|x|²)`; 0 means `g ≡ 1`.
    pub g_amplitude: f64,
    pub alphas: Vec<f64>,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgfCheckParams {
    pub eps: f64,
    pub horizon: f64,
    pub dt_mc: f64,
    pub dt_fk: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub alphas: Vec<f64>,
    pub init: InitSpec,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleParams {
    /// `(k_b, h_b)` panels.
    pub panels: Vec<(f64, f64)>,
    pub alpha_range: (f64, f64),
    pub p_range: (f64, f64),
    pub resolution: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Rate(RateParams),
    Spectrum(SpectrumParams),
    Sweep(SweepParams),
    Simulate(SimulateParams),
    MgfCheck(MgfCheckParams),
    Admissible(AdmissibleParams),
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Rate(_) => CommandKind::Rate,
            Command::Spectrum(_) => CommandKind::Spectrum,
            Command::Sweep(_) => CommandKind::Sweep,
            Command::Simulate(_) => CommandKind::Simulate,
            Command::MgfCheck(_) => CommandKind::MgfCheck,
            Command::Admissible(_) => CommandKind::Admissible,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Absent only for `admissible`, which needs no model.
    pub model: Option<ModelConfig>,
    pub command: Command,
    /// Every effective setting, defaults included, as `(key, value)`.
    pub echo: Vec<(String, String)>,
}

impl RunConfig {
    pub fn model(&self) -> Result<&ModelConfig, ConfigError> {
        self.model.as_ref().ok_or_else(|| invalid("model", "this command needs a [model] section"))
    }
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config_str(&text, &path.display().to_string(), None)
}

/// Parses `text`. When `expected` is given (the command named on the
/// command line) the file may omit the command, but must not name another.
pub fn parse_config_str(text: &str, origin: &str, expected: Option<CommandKind>) -> Result<RunConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        path: origin.to_string(),
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut reader = Reader { echo: Vec::new() };

    for key in table.keys() {
        let known = key == "command" || key == "model" || CommandKind::from_name(key).is_some();
        if !known {
            return Err(invalid(key, "unknown top-level key"));
        }
    }
    let sections: Vec<CommandKind> = CommandKind::ALL.into_iter().filter(|c| table.contains_key(c.name())).collect();
    if sections.len() > 1 {
        let names: Vec<&str> = sections.iter().map(|c| c.name()).collect();
        return Err(invalid(names[1], format!("more than one command section: {}", names.join(", "))));
    }
    let named = match table.get("command") {
        None => None,
        Some(Value::String(s)) => {
            Some(CommandKind::from_name(s).ok_or_else(|| invalid("command", format!("unknown command `{s}`")))?)
        }
        Some(_) => return Err(invalid("command", "must be a string")),
    };
    let mut chosen = None;
    for candidate in [named, sections.first().copied(), expected].into_iter().flatten() {
        match chosen {
            None => chosen = Some(candidate),
            Some(c) if c != candidate => {
                return Err(invalid("command", format!("conflicting commands `{c}` and `{candidate}`")));
            }
            _ => {}
        }
    }
    let kind = chosen.ok_or_else(|| invalid("command", "no command given"))?;
    reader.echo.push(("command".into(), kind.name().into()));

    let model = match table.get("model") {
        Some(Value::Table(t)) => Some(reader.model(t)?),
        Some(_) => return Err(invalid("model", "must be a section")),
        None if kind == CommandKind::Admissible => None,
        None => return Err(invalid("model", "missing [model] section")),
    };
    let empty = Table::new();
    let section = match table.get(kind.name()) {
        Some(Value::Table(t)) => t,
        Some(_) => return Err(invalid(kind.name(), "must be a section")),
        None => &empty,
    };
    let command = reader.command(kind, section, model.as_ref())?;
    Ok(RunConfig { model, command, echo: reader.echo })
}

struct Reader {
    echo: Vec<(String, String)>,
}

fn check_keys(section: &str, t: &Table, allowed: &[&str]) -> Result<(), ConfigError> {
    for key in t.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(invalid(&format!("{section}.{key}"), "unknown key"));
        }
    }
    Ok(())
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(invalid(key, "expected a number")),
    }
}

fn as_f64_list(key: &str, v: &Value) -> Result<Vec<f64>, ConfigError> {
    match v {
        Value::Array(a) => a.iter().map(|x| as_f64(key, x)).collect(),
        _ => Err(invalid(key, "expected an array of numbers")),
    }
}

fn as_matrix(key: &str, v: &Value) -> Result<Vec<Vec<f64>>, ConfigError> {
    let rows = match v {
        Value::Array(a) => a.iter().map(|r| as_f64_list(key, r)).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(invalid(key, "expected an array of rows")),
    };
    let n = rows.len();
    if n == 0 || n > epflow_core::model::MAX_DIM || rows.iter().any(|r| r.len() != n) {
        return Err(invalid(key, "expected a square matrix of size 1 to 3"));
    }
    Ok(rows)
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

impl Reader {
    fn f64(&mut self, sec: &str, t: &Table, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        let full = format!("{sec}.{key}");
        let v = match t.get(key) {
            Some(v) => as_f64(&full, v)?,
            None => default.ok_or_else(|| invalid(&full, "required key missing"))?,
        };
        if !v.is_finite() {
            return Err(invalid(&full, "must be finite"));
        }
        self.echo.push((full, v.to_string()));
        Ok(v)
    }

    fn positive(&mut self, sec: &str, t: &Table, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        let v = self.f64(sec, t, key, default)?;
        if v <= 0.0 {
            return Err(invalid(&format!("{sec}.{key}"), "must be positive"));
        }
        Ok(v)
    }

    fn usize(&mut self, sec: &str, t: &Table, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        let full = format!("{sec}.{key}");
        let v = match t.get(key) {
            Some(Value::Integer(i)) if *i >= 0 => *i as usize,
            Some(_) => return Err(invalid(&full, "expected a nonnegative integer")),
            None => default,
        };
        if v < min {
            return Err(invalid(&full, format!("must be at least {min}")));
        }
        self.echo.push((full, v.to_string()));
        Ok(v)
    }

    fn seed(&mut self, sec: &str, t: &Table) -> Result<u64, ConfigError> {
        let full = format!("{sec}.seed");
        let v = match t.get("seed") {
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(_) => return Err(invalid(&full, "expected a nonnegative integer")),
            None => 0,
        };
        self.echo.push((full, v.to_string()));
        Ok(v)
    }

    fn list(&mut self, sec: &str, t: &Table, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let full = format!("{sec}.{key}");
        let v = match t.get(key) {
            Some(v) => as_f64_list(&full, v)?,
            None => default.to_vec(),
        };
        self.echo.push((full, fmt_list(&v)));
        Ok(v)
    }

    fn bool(&mut self, sec: &str, t: &Table, key: &str, default: bool) -> Result<bool, ConfigError> {
        let full = format!("{sec}.{key}");
        let v = match t.get(key) {
            Some(Value::Boolean(b)) => *b,
            Some(_) => return Err(invalid(&full, "expected true or false")),
            None => default,
        };
        self.echo.push((full, v.to_string()));
        Ok(v)
    }

    fn model(&mut self, t: &Table) -> Result<ModelConfig, ConfigError> {
        let name = match t.get("name") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(invalid("model.name", "expected a string")),
            None => return Err(invalid("model.name", "required key missing")),
        };
        self.echo.push(("model.name".into(), name.clone()));
        let spec = match name.as_str() {
            "linear" => {
                check_keys("model", t, &["name", "c", "bm", "check_radius"])?;
                let c = as_matrix("model.c", t.get("c").ok_or_else(|| invalid("model.c", "required key missing"))?)?;
                let bm = match t.get("bm") {
                    Some(v) => as_matrix("model.bm", v)?,
                    None => vec![vec![0.0; c.len()]; c.len()],
                };
                if bm.len() != c.len() {
                    return Err(invalid("model.bm", "must have the shape of model.c"));
                }
                self.echo.push(("model.c".into(), format!("{c:?}")));
                self.echo.push(("model.bm".into(), format!("{bm:?}")));
                ModelSpec::Linear { c, bm }
            }
            "rotation" => {
                check_keys("model", t, &["name", "omega", "check_radius"])?;
                ModelSpec::Rotation { omega: self.f64("model", t, "omega", Some(1.0))? }
            }
            "twowell" => {
                check_keys("model", t, &["name", "omega", "beta", "check_radius"])?;
                ModelSpec::TwoWell {
                    omega: self.f64("model", t, "omega", Some(1.0))?,
                    beta: self.f64("model", t, "beta", Some(0.0))?,
                }
            }
            other => return Err(invalid("model.name", format!("unknown model `{other}`"))),
        };
        let check_radius = self.positive("model", t, "check_radius", Some(3.0))?;
        let cfg = ModelConfig { spec, check_radius };
        cfg.build().map_err(|e| invalid("model", e.to_string()))?;
        Ok(cfg)
    }

    fn grid(&mut self, sec: &str, t: &Table, dim: usize, default: Option<(f64, f64, usize)>) -> Result<Option<GridConfig>, ConfigError> {
        let present = ["box_lo", "box_hi", "n"].iter().filter(|k| t.contains_key(**k)).count();
        if present == 0 && default.is_none() {
            return Ok(None);
        }
        if present != 0 && present != 3 {
            return Err(invalid(&format!("{sec}.box_lo"), "box_lo, box_hi and n must be given together"));
        }
        let (dlo, dhi, dn) = default.unwrap_or((0.0, 0.0, 0));
        let per_dim = |key: &str, d: f64| -> Result<Vec<f64>, ConfigError> {
            let full = format!("{sec}.{key}");
            match t.get(key) {
                None => Ok(vec![d; dim]),
                Some(Value::Array(_)) => {
                    let v = as_f64_list(&full, &t[key])?;
                    if v.len() != dim {
                        return Err(invalid(&full, format!("expected {dim} values")));
                    }
                    Ok(v)
                }
                Some(v) => Ok(vec![as_f64(&full, v)?; dim]),
            }
        };
        let lo = per_dim("box_lo", dlo)?;
        let hi = per_dim("box_hi", dhi)?;
        let n = match t.get("n") {
            None => vec![dn; dim],
            Some(Value::Integer(i)) if *i > 0 => vec![*i as usize; dim],
            Some(Value::Array(a)) if a.len() == dim => a
                .iter()
                .map(|x| match x {
                    Value::Integer(i) if *i > 0 => Ok(*i as usize),
                    _ => Err(invalid(&format!("{sec}.n"), "expected positive integers")),
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(invalid(&format!("{sec}.n"), format!("expected a positive integer or {dim} of them"))),
        };
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) {
            return Err(invalid(&format!("{sec}.box_hi"), "must exceed box_lo"));
        }
        if let Some(k) = n.iter().find(|&&k| k < epflow_core::spectral::grid::MIN_POINTS) {
            return Err(invalid(&format!("{sec}.n"), format!("{k} points, need at least 32")));
        }
        self.echo.push((format!("{sec}.box_lo"), fmt_list(&lo)));
        self.echo.push((format!("{sec}.box_hi"), fmt_list(&hi)));
        self.echo.push((format!("{sec}.n"), format!("{n:?}")));
        Ok(Some(GridConfig { lo, hi, n }))
    }

    fn init(&mut self, sec: &str, t: &Table, dim: usize, default: &str) -> Result<InitSpec, ConfigError> {
        let kind = match t.get("init") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(invalid(&format!("{sec}.init"), "expected a string")),
            None => default.to_string(),
        };
        self.echo.push((format!("{sec}.init"), kind.clone()));
        let x0 = self.list(sec, t, "x0", &vec![0.0; dim])?;
        if x0.len() != dim {
            return Err(invalid(&format!("{sec}.x0"), format!("expected {dim} coordinates")));
        }
        match kind.as_str() {
            "point" => Ok(InitSpec::Point(x0)),
            "burn_in" => Ok(InitSpec::BurnIn { from: x0, duration: self.f64(sec, t, "burn_in", Some(10.0))? }),
            "mu0" => Ok(InitSpec::Mu0),
            other => Err(invalid(&format!("{sec}.init"), format!("unknown init `{other}` (point | burn_in | mu0)"))),
        }
    }

    fn command(&mut self, kind: CommandKind, t: &Table, model: Option<&ModelConfig>) -> Result<Command, ConfigError> {
        let sec = kind.name();
        let dim = model.and_then(|m| m.build().ok()).map_or(2, |m| m.dim());
        Ok(match kind {
            CommandKind::Rate => {
                check_keys(sec, t, &["alpha_min", "alpha_max", "alpha_points", "sigma_step"])?;
                let explicit = ["alpha_min", "alpha_max", "alpha_points"].iter().filter(|k| t.contains_key(**k)).count();
                let alpha_grid = match explicit {
                    0 => {
                        self.echo.push(("rate.alpha_grid".into(), "default: 201 points symmetric about 1/2 inside the admissible interval".into()));
                        None
                    }
                    3 => {
                        let lo = self.f64(sec, t, "alpha_min", None)?;
                        let hi = self.f64(sec, t, "alpha_max", None)?;
                        let n = self.usize(sec, t, "alpha_points", 201, 3)?;
                        if !(hi > lo) {
                            return Err(invalid("rate.alpha_max", "must exceed alpha_min"));
                        }
                        Some((lo, hi, n))
                    }
                    _ => return Err(invalid("rate.alpha_min", "alpha_min, alpha_max and alpha_points must be given together")),
                };
                Command::Rate(RateParams { alpha_grid, sigma_step: self.positive(sec, t, "sigma_step", Some(0.05))? })
            }
            CommandKind::Spectrum => {
                check_keys(sec, t, &["alpha", "eps", "box_lo", "box_hi", "n", "tol", "max_iter", "eigvec"])?;
                Command::Spectrum(SpectrumParams {
                    alpha: self.f64(sec, t, "alpha", Some(0.5))?,
                    eps: self.positive(sec, t, "eps", Some(0.5))?,
                    grid: self.grid(sec, t, dim, None)?,
                    tol: self.positive(sec, t, "tol", Some(1e-9))?,
                    max_iter: self.usize(sec, t, "max_iter", 400, 1)?,
                    eigvec: self.bool(sec, t, "eigvec", false)?,
                })
            }
            CommandKind::Sweep => {
                check_keys(sec, t, &["alpha", "eps", "margin_widths", "points_per_width", "max_peclet", "tol"])?;
                let alpha = self.f64(sec, t, "alpha", Some(0.25))?;
                let eps = self.list(sec, t, "eps", &[0.4, 0.2, 0.1, 0.05])?;
                if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
                    return Err(invalid("sweep.eps", "must be positive and strictly decreasing"));
                }
                Command::Sweep(SweepParams {
                    alpha,
                    eps,
                    margin_widths: self.positive(sec, t, "margin_widths", Some(6.0))?,
                    points_per_width: self.positive(sec, t, "points_per_width", Some(8.0))?,
                    max_peclet: self.positive(sec, t, "max_peclet", Some(0.9))?,
                    tol: self.positive(sec, t, "tol", Some(1e-9))?,
                })
            }
            CommandKind::Simulate => {
                check_keys(
                    sec,
                    t,
                    &["eps", "dt", "horizon", "n_paths", "seed", "init", "x0", "burn_in", "g_amplitude", "alphas", "histogram_bins"],
                )?;
                let p = SimulateParams {
                    eps: self.positive(sec, t, "eps", Some(0.5))?,
                    dt: self.positive(sec, t, "dt", Some(1e-3))?,
                    horizon: self.positive(sec, t, "horizon", Some(20.0))?,
                    n_paths: self.usize(sec, t, "n_paths", 10_000, 1)?,
                    seed: self.seed(sec, t)?,
                    init: self.init(sec, t, dim, "point")?,
                    g_amplitude: self.f64(sec, t, "g_amplitude", Some(0.0))?,
                    alphas: self.list(sec, t, "alphas", &[0.25, 0.5, 0.75])?,
                    histogram_bins: self.usize(sec, t, "histogram_bins", 40, 1)?,
                };
                if p.dt > p.horizon / 100.0 {
                    return Err(invalid("simulate.dt", "must be at most horizon/100"));
                }
                if p.g_amplitude <= -1.0 {
                    return Err(invalid("simulate.g_amplitude", "g must stay positive (amplitude > -1)"));
                }
                Command::Simulate(p)
            }
            CommandKind::MgfCheck => {
                check_keys(
                    sec,
                    t,
                    &["eps", "horizon", "dt_mc", "dt_fk", "n_paths", "seed", "alphas", "init", "x0", "burn_in", "box_lo", "box_hi", "n"],
                )?;
                let p = MgfCheckParams {
                    eps: self.positive(sec, t, "eps", Some(0.5))?,
                    horizon: self.positive(sec, t, "horizon", Some(2.0))?,
                    dt_mc: self.positive(sec, t, "dt_mc", Some(1e-3))?,
                    dt_fk: self.positive(sec, t, "dt_fk", Some(1e-3))?,
                    n_paths: self.usize(sec, t, "n_paths", 100_000, 2)?,
                    seed: self.seed(sec, t)?,
                    alphas: self.list(sec, t, "alphas", &[0.25, 0.5, 0.75])?,
                    init: self.init(sec, t, dim, "mu0")?,
                    grid: self.grid(sec, t, dim, Some((-6.0, 6.0, 161)))?.expect("default grid"),
                };
                if matches!(p.init, InitSpec::BurnIn { .. }) {
                    return Err(invalid("mgf-check.init", "burn_in has no grid counterpart; use point or mu0"));
                }
                if p.dt_mc > p.horizon / 100.0 {
                    return Err(invalid("mgf-check.dt_mc", "must be at most horizon/100"));
                }
                Command::MgfCheck(p)
            }
            CommandKind::Admissible => {
                check_keys(sec, t, &["k_b", "h_b", "alpha_min", "alpha_max", "p_min", "p_max", "alpha_points", "p_points"])?;
                let k_b = self.list(sec, t, "k_b", &[0.33, 0.33, 0.49])?;
                let h_b = self.list(sec, t, "h_b", &[0.75, 1.5, 1.5])?;
                if k_b.len() != h_b.len() || k_b.is_empty() {
                    return Err(invalid("admissible.h_b", "k_b and h_b must list the same number of panels"));
                }
                if let Some(k) = k_b.iter().find(|k| !(**k >= 0.0 && **k < 0.5)) {
                    return Err(invalid("admissible.k_b", format!("{k} outside [0, 1/2)")));
                }
                if let Some(h) = h_b.iter().find(|h| !(**h >= 0.0)) {
                    return Err(invalid("admissible.h_b", format!("{h} is negative")));
                }
                let alpha_range = (self.f64(sec, t, "alpha_min", Some(-1.0))?, self.f64(sec, t, "alpha_max", Some(2.0))?);
                let p_range = (self.f64(sec, t, "p_min", Some(1.0))?, self.f64(sec, t, "p_max", Some(4.0))?);
                if !(alpha_range.1 > alpha_range.0) || !(p_range.1 > p_range.0) {
                    return Err(invalid("admissible", "ranges must be nonempty"));
                }
                let resolution = (self.usize(sec, t, "alpha_points", 301, 2)?, self.usize(sec, t, "p_points", 301, 2)?);
                Command::Admissible(AdmissibleParams {
                    panels: k_b.into_iter().zip(h_b).collect(),
                    alpha_range,
                    p_range,
                    resolution,
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_rate_config() {
        let cfg = parse_config_str("command = \"rate\"\n[model]\nname = \"rotation\"\nomega = 1\n", "t", None).unwrap();
        assert_eq!(cfg.command, Command::Rate(RateParams { alpha_grid: None, sigma_step: 0.05 }));
        assert!(cfg.echo.iter().any(|(k, _)| k == "rate.alpha_grid"));
    }

    #[test]
    fn duplicate_command_sections_rejected() {
        let text = "[model]\nname = \"rotation\"\n[rate]\n[spectrum]\n";
        assert!(matches!(parse_config_str(text, "t", None), Err(ConfigError::Validation { .. })));
    }

    #[test]
    fn unknown_key_named() {
        let text = "[model]\nname = \"rotation\"\n[spectrum]\nepsilonn = 0.5\n";
        match parse_config_str(text, "t", None) {
            Err(ConfigError::Validation { key, .. }) => assert!(key.contains("epsilonn")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_has_line() {
        let text = "[model]\nname = \"rotation\"\nomega = = 1\n";
        match parse_config_str(text, "t", Some(CommandKind::Rate)) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conflicting_command_rejected() {
        let text = "command = \"rate\"\n[model]\nname = \"rotation\"\n";
        assert!(parse_config_str(text, "t", Some(CommandKind::Sweep)).is_err());
        assert!(parse_config_str(text, "t", Some(CommandKind::Rate)).is_ok());
    }

    #[test]
    fn indefinite_linear_model_rejected() {
        let text = "command = \"rate\"\n[model]\nname = \"linear\"\nc = [[1, 0], [0, -1]]\n";
        assert!(matches!(parse_config_str(text, "t", None), Err(ConfigError::Validation { .. })));
    }
}
