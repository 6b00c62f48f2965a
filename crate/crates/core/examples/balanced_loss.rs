//! Losses: equal taps on the four coherent beams decohere the cat like
//! dephasing with a = e^(−2R⟨n⟩); equal photon-arm losses only cost rate.

use num_complex::Complex64;
use qnd_cat::analysis::{bell_max_oracle, bell_oracle, mutual_information_oracle};
use qnd_cat::apparatus::{ideal_cat, run_apparatus, ApparatusConfig, Herald, LossProfile};
use qnd_cat::chsh::BellAngles;
use qnd_cat::closed_form::{asymptotic_loss, Sign};
use qnd_cat::fock::fidelity_with_branch;

fn main() -> qnd_cat::Result<()> {
    let n: f64 = 9.0;
    for rn in [0.0, 0.25, 1.0] {
        let r = rn / n;
        let cfg = ApparatusConfig::symmetric(n).losses(LossProfile::balanced_field(r));
        let h = run_apparatus(&cfg)?;
        // The √2(1 + d) law holds at the canonical angles with the antisymmetric herald;
        // the global optimum 2√(1 + d²) never drops below 2.
        let h2 = run_apparatus(&cfg.herald(Herald::D2))?;
        let (i_asym, b_asym) = asymptotic_loss(r, n);
        println!(
            "R<n> = {rn}: I = {:.6} (asymptotic {i_asym:.6}), B = {:.6} (asymptotic {b_asym:.6}), global B_max = {:.6}",
            mutual_information_oracle(&h)?,
            bell_oracle(&h2, &BellAngles::CANONICAL)?,
            bell_max_oracle(&h)?.0
        );
    }

    let ideal = run_apparatus(&ApparatusConfig::symmetric(n))?;
    let lossy = run_apparatus(&ApparatusConfig::symmetric(n).losses(LossProfile::balanced_photon(0.3)))?;
    let target = ideal_cat(Complex64::new(n.sqrt(), 0.0), Sign::Plus)?;
    println!(
        "photon arms R = 0.3: fidelity with the ideal cat = {:.12}, herald ratio = {:.12}",
        lossy.state().as_branch().unwrap().fidelity_with_pure(&target)?,
        lossy.herald_prob() / ideal.herald_prob()
    );

    // The same comparison in the Fock engine at a small amplitude.
    let small = ApparatusConfig::symmetric(1.0).engine(qnd_cat::apparatus::Engine::Fock);
    let f = run_apparatus(&small.clone().losses(LossProfile::balanced_photon(0.3)))?;
    let g = run_apparatus(&small.engine(qnd_cat::apparatus::Engine::Branch))?;
    println!(
        "Fock engine, <n> = 1: fidelity = {:.12}",
        fidelity_with_branch(f.state().as_fock().unwrap(), g.state().as_branch().unwrap())?
    );
    Ok(())
}
