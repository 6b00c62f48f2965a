//! Without the eraser the photon's path stays recorded: tracing it out leaves
//! the classical mixture of |φ₁⟩ and |φ₂⟩, which cannot violate CHSH.

use qnd_cat::analysis::{bell_max_oracle, mutual_information_oracle};
use qnd_cat::apparatus::{classical_mixture, ApparatusConfig};

fn main() -> qnd_cat::Result<()> {
    for n in [1.0, 4.0, 9.0] {
        let h = classical_mixture(&ApparatusConfig::symmetric(n))?;
        let i = mutual_information_oracle(&h)?;
        let (b, _) = bell_max_oracle(&h)?;
        println!("<n> = {n}: I = {i:.6} (ln 2 = {:.6}), B_max = {b:.6}", std::f64::consts::LN_2);
    }
    Ok(())
}
