//! The undisturbed apparatus at ⟨n⟩ = 9: a four-mode cat with two ebits of
//! mutual information and a near-Tsirelson CHSH violation.

use qnd_cat::analysis::{bell_max_oracle, mutual_information_oracle};
use qnd_cat::apparatus::{run_apparatus, ApparatusConfig, Herald};
use qnd_cat::chsh::BellAngles;

fn main() -> qnd_cat::Result<()> {
    for herald in [Herald::D1, Herald::D2] {
        let h = run_apparatus(&ApparatusConfig::symmetric(9.0).herald(herald))?;
        let i = mutual_information_oracle(&h)?;
        let (b, angles) = bell_max_oracle(&h)?;
        println!("{herald:?}: P(herald) = {:.6}", h.herald_prob());
        println!("  I = {i:.6} nats (2 ln 2 = {:.6})", 2.0 * std::f64::consts::LN_2);
        println!("  B_max = {b:.6} (2√2 = {:.6})", 2.0 * std::f64::consts::SQRT_2);
        println!(
            "  angles {:?}, {:.2e} rad from the canonical set",
            angles.as_array(),
            angles.distance_modulo_symmetry(&BellAngles::CANONICAL)
        );
    }
    Ok(())
}
