//! Loading a run configuration and sweeping it, as the CLI does.

use std::path::Path;

use qnd_cat::config::parse_config;
use qnd_cat::sweep::{surface_sweep, write_csv};

const CONFIG: &str = r#"
# dimensionless: amplitudes in √photons, angles in radians
[grid]
n_mean = { start = 0.5, step = 0.5, count = 4 }
R = [0.0, 0.1]
a = [0.5, 1.0]
sign = "minus"
engines = ["closed", "branch"]

[apparatus]
n_mean = 2.0
a = 0.8
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config(CONFIG, Path::new("inline.toml"))?;
    println!("apparatus: |α₂|² = {}, a = {}", cfg.apparatus.alpha2.norm_sqr(), cfg.apparatus.env_overlap_a);
    let spec = cfg.sweep.expect("the file has a [grid] section");
    write_csv(&surface_sweep(&spec), std::io::stdout().lock())?;

    let bad = parse_config("[grid]\nn_mean = [1.0]\nR = [1.5]\n", Path::new("bad.toml")).unwrap_err();
    println!("rejected: {bad}");
    Ok(())
}
