//! The (⟨n⟩, R) surface of I and B_max as CSV.
//!
//! `cargo run --release --example surface_sweep -- out.csv [--full]`
//! Without `--full` a coarse version of the default grid is used.

use std::path::PathBuf;

use qnd_cat::config::{SignChoice, SweepSpec};
use qnd_cat::sweep::{emit_csv, surface_sweep, RecordStatus};

fn main() -> std::io::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.iter().find(|a| !a.starts_with("--")).map_or("surface.csv", String::as_str));
    let mut spec = SweepSpec::surface_default();
    spec.sign = SignChoice::Minus;
    if !args.iter().any(|a| a == "--full") {
        spec.n_mean_grid = (1..=20).map(|k| k as f64).collect();
        spec.r_grid = (0..=10).map(|k| 0.05 * k as f64).collect();
    }
    let t = std::time::Instant::now();
    let records = surface_sweep(&spec);
    emit_csv(&records, &out)?;
    let violating = records.iter().filter(|r| r.bmax_closed.is_some_and(|b| b > 2.0)).count();
    let failed = records.iter().filter(|r| r.status != RecordStatus::Ok).count();
    println!(
        "{} points in {:.2?} -> {}; {violating} with B_max > 2, {failed} not ok",
        records.len(),
        t.elapsed(),
        out.display()
    );
    Ok(())
}
