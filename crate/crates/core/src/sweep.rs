//! Parameter sweeps over (n̄, R, a, ±) and the surface CSV format.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::analysis::{bell_max_oracle, mutual_information_oracle};
use crate::apparatus::{disturbance_params, run_apparatus, ApparatusConfig, Herald, LossProfile};
use crate::chsh::BellAngles;
use crate::closed_form::{bell_max, herald_probability, mutual_information, CorrelationVariant, Sign};
use crate::config::SweepSpec;
use crate::error::Error;

pub const CSV_HEADER: [&str; 16] = [
    "n_mean",
    "R",
    "a",
    "sign",
    "mu",
    "d",
    "I_closed",
    "Bmax_closed",
    "thI",
    "thIp",
    "thII",
    "thIIp",
    "I_oracle",
    "Bmax_oracle",
    "herald_prob",
    "status",
];

/// Per-row outcome; errors never abort a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordStatus {
    Ok,
    /// The simulated state left the rotation span, so the oracle Bell value was skipped.
    Leakage,
    Error(String),
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordStatus::Ok => f.write_str("ok"),
            RecordStatus::Leakage => f.write_str("leakage"),
            RecordStatus::Error(m) => write!(f, "error: {m}"),
        }
    }
}

impl RecordStatus {
    fn parse(s: &str) -> Self {
        match s {
            "ok" => RecordStatus::Ok,
            "leakage" => RecordStatus::Leakage,
            other => RecordStatus::Error(other.strip_prefix("error: ").unwrap_or(other).to_string()),
        }
    }
}

/// One grid point of the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceRecord {
    pub n_mean: f64,
    pub r: f64,
    pub a: f64,
    pub sign: Sign,
    pub mu: Option<f64>,
    pub d: Option<f64>,
    pub i_closed: Option<f64>,
    pub bmax_closed: Option<f64>,
    pub bmax_angles: Option<BellAngles>,
    pub i_oracle: Option<f64>,
    pub bmax_oracle: Option<f64>,
    pub herald_prob: Option<f64>,
    pub status: RecordStatus,
}

impl SurfaceRecord {
    fn empty(n_mean: f64, r: f64, a: f64, sign: Sign) -> Self {
        SurfaceRecord {
            n_mean,
            r,
            a,
            sign,
            mu: None,
            d: None,
            i_closed: None,
            bmax_closed: None,
            bmax_angles: None,
            i_oracle: None,
            bmax_oracle: None,
            herald_prob: None,
            status: RecordStatus::Ok,
        }
    }

    fn fail(&mut self, e: &Error) {
        if self.status == RecordStatus::Ok {
            self.status = RecordStatus::Error(e.to_string());
        }
    }
}

/// The apparatus configuration behind one grid point.
pub fn point_config(n_mean: f64, r: f64, a: f64, sign: Sign) -> ApparatusConfig {
    ApparatusConfig::symmetric(n_mean)
        .dephasing(a)
        .losses(LossProfile::balanced_field(r))
        .herald(Herald::from_sign(sign))
}

pub fn evaluate_point(spec: &SweepSpec, n_mean: f64, r: f64, a: f64, sign: Sign) -> SurfaceRecord {
    let mut rec = SurfaceRecord::empty(n_mean, r, a, sign);
    let cfg = point_config(n_mean, r, a, sign).fock_policy(spec.fock_policy);
    if spec.engines.closed {
        closed_columns(&cfg, &mut rec);
    }
    if let Some(engine) = spec.engines.oracle() {
        oracle_columns(&cfg.engine(engine), &mut rec);
    }
    rec
}

fn closed_columns(cfg: &ApparatusConfig, rec: &mut SurfaceRecord) {
    let result = disturbance_params(cfg).and_then(|p| {
        rec.mu = Some(p.mu);
        rec.d = Some(p.d);
        rec.herald_prob = Some(herald_probability(&p));
        rec.i_closed = Some(mutual_information(&p)?);
        let (b, angles) = bell_max(&p, CorrelationVariant::default())?;
        rec.bmax_closed = Some(b);
        rec.bmax_angles = Some(angles);
        Ok(())
    });
    if let Err(e) = result {
        rec.fail(&e);
    }
}

fn oracle_columns(cfg: &ApparatusConfig, rec: &mut SurfaceRecord) {
    let h = match run_apparatus(cfg) {
        Ok(h) => h,
        Err(e) => return rec.fail(&e),
    };
    rec.herald_prob.get_or_insert(h.herald_prob());
    match mutual_information_oracle(&h) {
        Ok(i) => rec.i_oracle = Some(i),
        Err(e) => rec.fail(&e),
    }
    match bell_max_oracle(&h) {
        Ok((b, _)) => rec.bmax_oracle = Some(b),
        Err(Error::UnsupportedRotation { .. }) if rec.status == RecordStatus::Ok => {
            rec.status = RecordStatus::Leakage
        }
        Err(e) => rec.fail(&e),
    }
}

/// Evaluates every grid point in parallel; rows come back sorted by (n̄, R, a, sign).
pub fn surface_sweep(spec: &SweepSpec) -> Vec<SurfaceRecord> {
    let mut points = Vec::new();
    for &n in &spec.n_mean_grid {
        for &r in &spec.r_grid {
            for &a in &spec.a_grid {
                for s in spec.sign.signs() {
                    points.push((n, r, a, s));
                }
            }
        }
    }
    points.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.total_cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    points.dedup();
    points
        .par_iter()
        .map(|&(n, r, a, s)| evaluate_point(spec, n, r, a, s))
        .collect()
}

/// Formats like C's `%.{sig}g`.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format_sig(v, 9)).unwrap_or_default()
}

/// Writes the header and one row per record (LF line endings).
pub fn write_csv<W: Write>(records: &[SurfaceRecord], w: W) -> csv::Result<()> {
    let mut wr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        let angles = r.bmax_angles.map(|a| a.as_array());
        let ang = |k: usize| opt(angles.map(|a| a[k]));
        wr.write_record([
            format_sig(r.n_mean, 9),
            format_sig(r.r, 9),
            format_sig(r.a, 9),
            r.sign.symbol().to_string(),
            opt(r.mu),
            opt(r.d),
            opt(r.i_closed),
            opt(r.bmax_closed),
            ang(0),
            ang(1),
            ang(2),
            ang(3),
            opt(r.i_oracle),
            opt(r.bmax_oracle),
            opt(r.herald_prob),
            r.status.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[SurfaceRecord], path: &Path) -> std::io::Result<()> {
    let f = File::create(path)?;
    write_csv(records, f).map_err(std::io::Error::other)
}

#[derive(Debug, thiserror::Error)]
pub enum CsvParseError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("line {line}: bad value {value:?} in column {column}")]
    Value {
        line: u64,
        column: &'static str,
        value: String,
    },
}

/// Reads records written by [`write_csv`].
pub fn parse_csv<R: Read>(r: R) -> Result<Vec<SurfaceRecord>, CsvParseError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(CsvParseError::Header(header));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<Option<f64>, CsvParseError> {
            let s = &row[k];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| CsvParseError::Value {
                line,
                column: CSV_HEADER[k],
                value: s.to_string(),
            })
        };
        let req = |k: usize| -> Result<f64, CsvParseError> {
            num(k)?.ok_or_else(|| CsvParseError::Value {
                line,
                column: CSV_HEADER[k],
                value: String::new(),
            })
        };
        let sign = match &row[3] {
            "+" => Sign::Plus,
            "-" => Sign::Minus,
            other => {
                return Err(CsvParseError::Value {
                    line,
                    column: "sign",
                    value: other.to_string(),
                })
            }
        };
        let angles = match (num(8)?, num(9)?, num(10)?, num(11)?) {
            (Some(a), Some(b), Some(c), Some(d)) => Some(BellAngles::new(a, b, c, d)),
            _ => None,
        };
        out.push(SurfaceRecord {
            n_mean: req(0)?,
            r: req(1)?,
            a: req(2)?,
            sign,
            mu: num(4)?,
            d: num(5)?,
            i_closed: num(6)?,
            bmax_closed: num(7)?,
            bmax_angles: angles,
            i_oracle: num(12)?,
            bmax_oracle: num(13)?,
            herald_prob: num(14)?,
            status: RecordStatus::parse(&row[15]),
        });
    }
    Ok(out)
}
