//! Command-line driver behind the `qnd-cat` binary.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O error,
//! 3 computation error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{bell_max_oracle, bell_oracle, mutual_information_oracle, span_leakage};
use crate::apparatus::{disturbance_params, run_apparatus, ApparatusConfig, Engine, Herald, LossProfile, OutputState, Side};
use crate::chsh::BellAngles;
use crate::closed_form::{bell_max, herald_probability, mutual_information, spectra, CorrelationVariant, Sign};
use crate::config::{load_config, ConfigError, EngineChoice, EngineSet, RunConfig, SignChoice, SweepSpec};
use crate::error::Error;
use crate::mode::ModeId;
use crate::report::validate;
use crate::sweep::{surface_sweep, write_csv};

#[derive(Debug, Parser)]
#[command(name = "qnd-cat", version, about = "Heralded optical cat states: closed forms, simulation and sweeps")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub engine: Option<EngineChoice>,
    /// Herald sign for single runs (plus = D1); sweep sign otherwise.
    #[arg(long, global = true, value_enum)]
    pub sign: Option<SignArg>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SignArg {
    Plus,
    Minus,
}

impl SignArg {
    fn sign(self) -> Sign {
        match self {
            SignArg::Plus => Sign::Plus,
            SignArg::Minus => Sign::Minus,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize one heralded output state.
    State(PointArgs),
    /// Mutual information between the two output sides.
    Mi(PointArgs),
    /// CHSH maximum and the value at the canonical angles.
    Bell(PointArgs),
    /// Parameter sweep to CSV.
    Surface,
    /// Printed versus corrected closed forms against the simulation.
    Validate {
        /// Also write the long-format comparison table (CSV) here.
        #[arg(long, value_name = "PATH")]
        table: Option<PathBuf>,
    },
}

/// Overrides of the `[apparatus]` section for single runs.
#[derive(Debug, Clone, Default, Args)]
pub struct PointArgs {
    /// Mean photon number |α|² of both coherent beams.
    #[arg(long)]
    pub n_mean: Option<f64>,
    /// Environment overlap a of the photon-arm dephasing.
    #[arg(long = "dephasing", short = 'a')]
    pub a: Option<f64>,
    /// Equal loss reflectivity R in the four coherent-beam arms.
    #[arg(long = "loss", short = 'R')]
    pub r: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Compute(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Io { .. } => 2,
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Compute(_) => 3,
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // A second initialization (e.g. repeated in-process runs) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let text = match &cli.command {
        Command::State(p) => state_text(&point_config(cli, &config, p)?)?,
        Command::Mi(p) => mi_text(&point_config(cli, &config, p)?, cli.engine)?,
        Command::Bell(p) => bell_text(&point_config(cli, &config, p)?, cli.engine)?,
        Command::Surface => {
            let spec = sweep_spec(cli, config.sweep.unwrap_or_else(SweepSpec::surface_default))?;
            let mut buf = Vec::new();
            write_csv(&surface_sweep(&spec), &mut buf).map_err(|e| Error::Resource(e.to_string()))?;
            String::from_utf8(buf).map_err(|e| Error::Resource(e.to_string()))?
        }
        Command::Validate { table } => {
            let mut spec = sweep_spec(cli, config.sweep.unwrap_or_else(SweepSpec::validation_default))?;
            match cli.engine {
                Some(EngineChoice::Closed) => {
                    return Err(CliError::Usage("validate compares against a simulation engine".into()))
                }
                Some(EngineChoice::Branch) => spec.engines.fock = false,
                Some(EngineChoice::Fock) => spec.engines.fock = true,
                None => {}
            }
            spec.engines.closed = true;
            spec.engines.branch = true;
            let report = validate(&spec);
            if let Some(path) = table {
                let mut buf = Vec::new();
                report.write_table(&mut buf).map_err(|e| Error::Resource(e.to_string()))?;
                write_bytes(Some(path), &buf)?;
            }
            report.render_text()
        }
    };
    write_bytes(cli.out.as_deref(), text.as_bytes())
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn sweep_spec(cli: &Cli, mut spec: SweepSpec) -> Result<SweepSpec, CliError> {
    if let Some(s) = cli.sign {
        spec.sign = match s {
            SignArg::Plus => SignChoice::Plus,
            SignArg::Minus => SignChoice::Minus,
        };
    }
    if let Some(e) = cli.engine {
        spec.engines = EngineSet::from_choices(&[EngineChoice::Closed, e]);
    }
    spec.validate()?;
    Ok(spec)
}

fn point_config(cli: &Cli, config: &RunConfig, p: &PointArgs) -> Result<ApparatusConfig, CliError> {
    let mut cfg = config.apparatus.clone();
    let bad = |key: &str, v: f64, why: &str| {
        CliError::Config(ConfigError::Invalid {
            key: key.into(),
            reason: format!("{v} {why}"),
        })
    };
    if let Some(n) = p.n_mean {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(bad("n_mean", n, "is negative or not finite"));
        }
        let keep = cfg.clone();
        cfg = ApparatusConfig::symmetric(n)
            .dephasing(keep.env_overlap_a)
            .losses(keep.losses)
            .herald(keep.herald)
            .engine(keep.engine)
            .fock_policy(keep.fock_policy);
        cfg.branch_cap = keep.branch_cap;
    }
    if let Some(a) = p.a {
        if !(0.0..=1.0).contains(&a) {
            return Err(bad("a", a, "is outside [0, 1]"));
        }
        cfg.env_overlap_a = a;
    }
    if let Some(r) = p.r {
        if !(0.0..=1.0).contains(&r) {
            return Err(bad("R", r, "is outside [0, 1]"));
        }
        cfg.losses = LossProfile::balanced_field(r);
    }
    if let Some(s) = cli.sign {
        cfg.herald = Herald::from_sign(s.sign());
    }
    match cli.engine {
        Some(EngineChoice::Fock) => cfg.engine = Engine::Fock,
        Some(EngineChoice::Branch) => cfg.engine = Engine::Branch,
        _ => {}
    }
    cfg.validate()
        .map_err(|e| CliError::Config(ConfigError::Invalid {
            key: "apparatus".into(),
            reason: e.to_string(),
        }))?;
    Ok(cfg)
}

fn header(cfg: &ApparatusConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "alpha2 = {}  alpha3 = {}  a = {}  herald = {:?}  engine = {:?}",
        cfg.alpha2, cfg.alpha3, cfg.env_overlap_a, cfg.herald, cfg.engine
    );
    let losses: Vec<String> = cfg
        .losses
        .entries()
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(m, r)| format!("R{m} = {r}"))
        .collect();
    if !losses.is_empty() {
        let _ = writeln!(s, "losses: {}", losses.join(", "));
    }
    s
}

fn angles_text(a: &BellAngles) -> String {
    let [t1, t1p, t2, t2p] = a.as_array();
    format!("thI = {t1:.9}  thI' = {t1p:.9}  thII = {t2:.9}  thII' = {t2p:.9}")
}

fn spectrum_text(s: &OutputState, modes: &[ModeId]) -> Result<Vec<f64>, Error> {
    Ok(match s {
        OutputState::Branch(b) => b.spectrum(modes)?.eigenvalues().to_vec(),
        OutputState::Fock(f) => f.keep_only(modes)?.spectrum(),
    })
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", ")
}

fn state_text(cfg: &ApparatusConfig) -> Result<String, CliError> {
    let h = run_apparatus(cfg)?;
    let mut s = header(cfg);
    let _ = writeln!(s, "herald probability = {:.12}", h.herald_prob());
    match h.state() {
        OutputState::Branch(b) => {
            let _ = writeln!(s, "representation: {} coherent branches", b.len());
        }
        OutputState::Fock(f) => {
            let _ = writeln!(s, "representation: Fock ensemble of rank {}, dims {:?}", f.rank(), f.dims());
        }
    }
    if let Ok(p) = disturbance_params(cfg) {
        let _ = writeln!(s, "mu = {:.12}  d = {:.12}", p.mu, p.d);
    }
    let g = spectrum_text(h.state(), &ModeId::OUTPUTS)?;
    let r = spectrum_text(h.state(), &Side::I.modes())?;
    let _ = writeln!(s, "global spectrum: [{}]", fmt_list(&g));
    let _ = writeln!(s, "side I spectrum: [{}]", fmt_list(&r));
    for side in [Side::I, Side::II] {
        let _ = writeln!(s, "span leakage side {side:?} = {:.3e}", span_leakage(&h, side)?);
    }
    Ok(s)
}

fn mi_text(cfg: &ApparatusConfig, engine: Option<EngineChoice>) -> Result<String, CliError> {
    let mut s = header(cfg);
    match disturbance_params(cfg) {
        Ok(p) => {
            let sp = spectra(&p)?;
            let _ = writeln!(s, "mu = {:.12}  d = {:.12}", p.mu, p.d);
            let _ = writeln!(s, "spectrum: p1 = {:.12}  p2 = {:.12}  p1r = {:.12}  p2r = {:.12}", sp.p1, sp.p2, sp.p1r, sp.p2r);
            let _ = writeln!(s, "I_closed = {:.12}", mutual_information(&p)?);
            let _ = writeln!(s, "herald_prob_closed = {:.12}", herald_probability(&p));
        }
        Err(e) if engine == Some(EngineChoice::Closed) => return Err(e.into()),
        Err(e) => {
            let _ = writeln!(s, "closed form: {e}");
        }
    }
    if engine != Some(EngineChoice::Closed) {
        let h = run_apparatus(cfg)?;
        let _ = writeln!(s, "I_oracle = {:.12}", mutual_information_oracle(&h)?);
        let _ = writeln!(s, "herald_prob_oracle = {:.12}", h.herald_prob());
    }
    Ok(s)
}

fn bell_text(cfg: &ApparatusConfig, engine: Option<EngineChoice>) -> Result<String, CliError> {
    let mut s = header(cfg);
    match disturbance_params(cfg) {
        Ok(p) => {
            let (b, angles) = bell_max(&p, CorrelationVariant::Squared)?;
            let _ = writeln!(s, "Bmax_closed = {b:.12}");
            let _ = writeln!(s, "  {}", angles_text(&angles));
        }
        Err(e) if engine == Some(EngineChoice::Closed) => return Err(e.into()),
        Err(e) => {
            let _ = writeln!(s, "closed form: {e}");
        }
    }
    if engine != Some(EngineChoice::Closed) {
        let h = run_apparatus(cfg)?;
        let (b, angles) = bell_max_oracle(&h)?;
        let _ = writeln!(s, "Bmax_oracle = {b:.12}");
        let _ = writeln!(s, "  {}", angles_text(&angles));
        let _ = writeln!(s, "B_oracle(canonical angles) = {:.12}", bell_oracle(&h, &BellAngles::CANONICAL)?);
    }
    Ok(s)
}
