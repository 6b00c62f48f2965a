//! The exact coherent-branch engine against the truncated Fock-space engine.

use qnd_cat::analysis::{correlation_oracle, mutual_information_oracle};
use qnd_cat::apparatus::{run_apparatus, ApparatusConfig, Engine, Herald};
use qnd_cat::fock::fidelity_with_branch;

fn main() -> qnd_cat::Result<()> {
    for (n, a, herald) in [(0.5, 1.0, Herald::D1), (1.0, 0.6, Herald::D2), (2.0, 0.3, Herald::D1)] {
        let cfg = ApparatusConfig::symmetric(n).dephasing(a).herald(herald);
        let t = std::time::Instant::now();
        let hb = run_apparatus(&cfg)?;
        let hf = run_apparatus(&cfg.clone().engine(Engine::Fock))?;
        let fid = fidelity_with_branch(hf.state().as_fock().unwrap(), hb.state().as_branch().unwrap())?;
        let di = mutual_information_oracle(&hb)? - mutual_information_oracle(&hf)?;
        let dc = correlation_oracle(&hb, 0.3, -0.4)? - correlation_oracle(&hf, 0.3, -0.4)?;
        println!(
            "<n> = {n}, a = {a}, {herald:?}: 1 - F = {:.2e}, ΔI = {di:.2e}, ΔC = {dc:.2e}, dims {:?} ({:.2?})",
            1.0 - fid,
            hf.state().as_fock().unwrap().dims(),
            t.elapsed()
        );
    }
    Ok(())
}
