//! TOML run configuration for the sweep driver.
//!
//! ```toml
//! # All quantities are dimensionless: amplitudes in √photons, angles in radians.
//! [grid]
//! n_mean = { start = 0.25, step = 0.25, count = 80 }
//! R = [0.0, 0.05, 0.1]
//! a = [1.0]                 # optional, defaults to [1.0]
//! sign = "both"             # "plus" | "minus" | "both"
//! engines = ["closed"]      # any of "closed", "branch", "fock"
//!
//! [apparatus]               # single-run defaults for `state`, `mi`, `bell`
//! n_mean = 9.0              # or alpha2 = [re, im], alpha3 = [re, im]
//! R = 0.0                   # equal loss in the four coherent-beam arms
//! a = 1.0
//! herald = "D1"
//! engine = "branch"
//! # [apparatus.losses] r12 = 0.0 ... overrides R per location
//!
//! [fock]
//! tail_tolerance = 1e-12    # or cutoff = 16
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Deserialize;

use crate::apparatus::{ApparatusConfig, Engine, Herald, LossProfile};
use crate::closed_form::Sign;
use crate::fock::FockCutoffPolicy;

/// Largest mean photon number the Fock engine accepts in a sweep.
pub const FOCK_SWEEP_MAX_N: f64 = 2.0;
/// Largest number of points a grid axis may expand to.
const MAX_AXIS_LEN: usize = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum Axis {
    List(Vec<f64>),
    Range { start: f64, step: f64, count: usize },
}

impl Axis {
    fn expand(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = match self {
            Axis::List(v) => v.clone(),
            Axis::Range { start, step, count } => {
                if *count > MAX_AXIS_LEN {
                    return Err(ConfigError::invalid(key, format!("{count} points is too many")));
                }
                (0..*count).map(|k| start + step * k as f64).collect()
            }
        };
        if v.is_empty() {
            return Err(ConfigError::invalid(key, "grid is empty"));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(ConfigError::invalid(key, format!("{x} is not finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SignChoice {
    Plus,
    Minus,
    #[default]
    Both,
}

impl SignChoice {
    pub fn signs(self) -> Vec<Sign> {
        match self {
            SignChoice::Plus => vec![Sign::Plus],
            SignChoice::Minus => vec![Sign::Minus],
            SignChoice::Both => vec![Sign::Plus, Sign::Minus],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    Closed,
    Branch,
    Fock,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    n_mean: Axis,
    #[serde(rename = "R")]
    r: Axis,
    a: Option<Axis>,
    #[serde(default)]
    sign: SignChoice,
    engines: Option<Vec<EngineChoice>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LossSection {
    #[serde(default)]
    r12: f64,
    #[serde(default)]
    r13: f64,
    #[serde(default)]
    r22: f64,
    #[serde(default)]
    r23: f64,
    #[serde(default)]
    r32: f64,
    #[serde(default)]
    r33: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
enum HeraldName {
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum EngineName {
    Branch,
    Fock,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApparatusSection {
    n_mean: Option<f64>,
    alpha2: Option<[f64; 2]>,
    alpha3: Option<[f64; 2]>,
    #[serde(rename = "R")]
    r: Option<f64>,
    losses: Option<LossSection>,
    a: Option<f64>,
    herald: Option<HeraldName>,
    engine: Option<EngineName>,
    branch_cap: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FockSection {
    tail_tolerance: Option<f64>,
    cutoff: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    grid: Option<GridSection>,
    apparatus: Option<ApparatusSection>,
    fock: Option<FockSection>,
}

/// Which engines evaluate each grid point. Closed forms are always evaluated
/// where they apply; `branch`/`fock` add simulated (oracle) columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineSet {
    pub closed: bool,
    pub branch: bool,
    pub fock: bool,
}

impl EngineSet {
    pub fn from_choices(choices: &[EngineChoice]) -> Self {
        let mut s = EngineSet::default();
        for c in choices {
            match c {
                EngineChoice::Closed => s.closed = true,
                EngineChoice::Branch => s.branch = true,
                EngineChoice::Fock => s.fock = true,
            }
        }
        s
    }

    /// The engine used for the oracle columns (branch preferred).
    pub fn oracle(&self) -> Option<Engine> {
        if self.branch {
            Some(Engine::Branch)
        } else if self.fock {
            Some(Engine::Fock)
        } else {
            None
        }
    }
}

/// A validated parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub n_mean_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub sign: SignChoice,
    pub engines: EngineSet,
    pub fock_policy: FockCutoffPolicy,
}

impl SweepSpec {
    /// The (n̄, R) surface grid: n̄ = 0.25k for k = 1..80, R = 0.0125k for k = 0..40, a = 1.
    pub fn surface_default() -> Self {
        SweepSpec {
            n_mean_grid: (1..=80).map(|k| 0.25 * k as f64).collect(),
            r_grid: (0..=40).map(|k| 0.0125 * k as f64).collect(),
            a_grid: vec![1.0],
            sign: SignChoice::Both,
            engines: EngineSet {
                closed: true,
                ..Default::default()
            },
            fock_policy: FockCutoffPolicy::default(),
        }
    }

    /// Dephasing grid at three overlaps plus the large-amplitude points used by `validate`.
    pub fn validation_default() -> Self {
        SweepSpec {
            n_mean_grid: vec![0.25, 1.0, 4.0, 9.0],
            r_grid: vec![0.0],
            a_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            sign: SignChoice::Both,
            engines: EngineSet {
                closed: true,
                branch: true,
                fock: true,
            },
            fock_policy: FockCutoffPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, grid) in [("n_mean", &self.n_mean_grid), ("R", &self.r_grid), ("a", &self.a_grid)] {
            if grid.is_empty() {
                return Err(ConfigError::invalid(key, "grid is empty"));
            }
        }
        if let Some(x) = self.n_mean_grid.iter().find(|&&x| !(x >= 0.0 && x.is_finite())) {
            return Err(ConfigError::invalid("n_mean", format!("{x} is negative or not finite")));
        }
        for (key, grid) in [("R", &self.r_grid), ("a", &self.a_grid)] {
            if let Some(x) = grid.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(ConfigError::invalid(key, format!("{x} is outside [0, 1]")));
            }
        }
        if self.engines.fock && !self.engines.branch {
            if let Some(x) = self.n_mean_grid.iter().find(|&&x| x > FOCK_SWEEP_MAX_N) {
                return Err(ConfigError::invalid(
                    "engines",
                    format!("the fock engine needs n_mean <= {FOCK_SWEEP_MAX_N}, grid has {x}"),
                ));
            }
        }
        if !(self.engines.closed || self.engines.branch || self.engines.fock) {
            return Err(ConfigError::invalid("engines", "no engine selected"));
        }
        Ok(())
    }
}

/// Everything a config file can specify.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// The `[grid]` section, if the file has one.
    pub sweep: Option<SweepSpec>,
    pub apparatus: ApparatusConfig,
    pub fock_policy: FockCutoffPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sweep: None,
            apparatus: ApparatusConfig::symmetric(9.0),
            fock_policy: FockCutoffPolicy::default(),
        }
    }
}

fn unit(key: &str, v: f64) -> Result<f64, ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::invalid(key, format!("{v} is outside [0, 1]")))
    }
}

/// Parses and validates configuration text; `origin` labels error messages.
pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut out = RunConfig::default();

    let mut policy = FockCutoffPolicy::default();
    if let Some(f) = file.fock {
        if let Some(t) = f.tail_tolerance {
            if !(t > 0.0 && t < 1.0) {
                return Err(ConfigError::invalid("tail_tolerance", format!("{t} is outside (0, 1)")));
            }
            policy = FockCutoffPolicy::with_tolerance(t);
        }
        if let Some(n) = f.cutoff {
            policy = FockCutoffPolicy::explicit(n);
        }
    }

    if let Some(g) = file.grid {
        let engines = g.engines.unwrap_or_else(|| vec![EngineChoice::Closed]);
        let spec = SweepSpec {
            n_mean_grid: g.n_mean.expand("n_mean")?,
            r_grid: g.r.expand("R")?,
            a_grid: match g.a {
                Some(a) => a.expand("a")?,
                None => vec![1.0],
            },
            sign: g.sign,
            engines: EngineSet::from_choices(&engines),
            fock_policy: policy,
        };
        spec.validate()?;
        out.sweep = Some(spec);
    }
    out.fock_policy = policy;

    let ap = file.apparatus.unwrap_or_default();
    let mut cfg = ApparatusConfig::symmetric(9.0);
    if let Some(n) = ap.n_mean {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(ConfigError::invalid("n_mean", format!("{n} is negative or not finite")));
        }
        cfg = ApparatusConfig::symmetric(n);
    }
    if let Some([re, im]) = ap.alpha2 {
        cfg.alpha2 = Complex64::new(re, im);
    }
    if let Some([re, im]) = ap.alpha3 {
        cfg.alpha3 = Complex64::new(re, im);
    }
    if let Some(r) = ap.r {
        cfg.losses = LossProfile::balanced_field(unit("R", r)?);
    }
    if let Some(l) = ap.losses {
        cfg.losses = LossProfile {
            r12: unit("r12", l.r12)?,
            r13: unit("r13", l.r13)?,
            r22: unit("r22", l.r22)?,
            r23: unit("r23", l.r23)?,
            r32: unit("r32", l.r32)?,
            r33: unit("r33", l.r33)?,
        };
    }
    if let Some(a) = ap.a {
        cfg.env_overlap_a = unit("a", a)?;
    }
    cfg.herald = match ap.herald {
        Some(HeraldName::D2) => Herald::D2,
        _ => Herald::D1,
    };
    cfg.engine = match ap.engine {
        Some(EngineName::Fock) => Engine::Fock,
        _ => Engine::Branch,
    };
    if let Some(cap) = ap.branch_cap {
        cfg.branch_cap = cap;
    }
    cfg.fock_policy = policy;
    cfg.validate()
        .map_err(|e| ConfigError::invalid("apparatus", e.to_string()))?;
    out.apparatus = cfg;
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, path)
}
