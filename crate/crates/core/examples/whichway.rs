//! Tapped light carries which-way information; the optimal unambiguous
//! discrimination failure rate equals the residual coherence d² of the cat.

use num_complex::Complex64;
use qnd_cat::apparatus::{disturbance_params, whichway_probabilities, ApparatusConfig, LossProfile};

fn main() -> qnd_cat::Result<()> {
    let n: f64 = 4.0;
    for r in [0.0, 0.01, 0.05, 0.1, 0.2] {
        let (one, both) = whichway_probabilities(r, Complex64::new(n.sqrt(), 0.0))?;
        let d = disturbance_params(&ApparatusConfig::symmetric(n).losses(LossProfile::balanced_field(r)))?.d;
        println!("R = {r:<5} P?(one tap) = {one:.6}  P?(both) = {both:.6}  d² = {:.6}", d * d);
    }
    Ok(())
}
