//! Which-way dephasing of the photon: closed forms against the simulation,
//! and the large-amplitude laws I(a), B ≈ √2(1 + a).

use qnd_cat::analysis::{bell_max_oracle, mutual_information_oracle};
use qnd_cat::apparatus::{disturbance_params, run_apparatus, ApparatusConfig};
use qnd_cat::closed_form::{asymptotic_decoherence, bell_max, mutual_information, CorrelationVariant};

fn main() -> qnd_cat::Result<()> {
    println!("{:>5} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}", "a", "I_closed", "I_sim", "I_asym", "B_closed", "B_sim", "B_asym");
    for a in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let cfg = ApparatusConfig::symmetric(9.0).dephasing(a);
        let p = disturbance_params(&cfg)?;
        let h = run_apparatus(&cfg)?;
        let (i_asym, b_asym) = asymptotic_decoherence(a);
        println!(
            "{a:>5} {:>10.6} {:>10.6} {i_asym:>10.6} {:>10.6} {:>10.6} {b_asym:>10.6}",
            mutual_information(&p)?,
            mutual_information_oracle(&h)?,
            bell_max(&p, CorrelationVariant::Squared)?.0,
            bell_max_oracle(&h)?.0,
        );
    }
    Ok(())
}
