//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs with a plain `main` so every line is printed even when the run passes.

use std::collections::{HashMap, HashSet, VecDeque};
use std::f64::consts::{LN_2, PI, SQRT_2};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qnd_cat::analysis::{
    bell_max_oracle, bell_oracle, correlation_oracle, mutual_information_oracle, xy_distribution,
};
use qnd_cat::apparatus::{
    classical_mixture, disturbance_params, ideal_cat, run_apparatus, whichway_probabilities, ApparatusConfig,
    Engine, Herald, LossProfile, OutputState,
};
use qnd_cat::branch::{BranchState, ModeContent};
use qnd_cat::chsh::BellAngles;
use qnd_cat::closed_form::{
    asymptotic_decoherence, asymptotic_loss, mutual_information, spectra, DisturbanceParams, Sign,
};
use qnd_cat::config::SweepSpec;
use qnd_cat::fock::{fidelity_with_branch, FockEnsemble};
use qnd_cat::report::{validate, EXACT_TOL};
use qnd_cat::sweep::{surface_sweep, SurfaceRecord};
use qnd_cat::ModeId;

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

const A_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const TSIRELSON: f64 = 2.0 * SQRT_2;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn sorted_desc(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v.resize(len, 0.0);
    v
}

fn ideal_cat_limit() -> Check {
    let t = Instant::now();
    let h = run_apparatus(&ApparatusConfig::symmetric(9.0))?;
    let i = mutual_information_oracle(&h)?;
    let (b, angles) = bell_max_oracle(&h)?;
    let elapsed = t.elapsed();
    let dist = angles.distance_modulo_symmetry(&BellAngles::CANONICAL);
    let ok = (i - 2.0 * LN_2).abs() < 1e-3
        && (b - TSIRELSON).abs() < 5e-3
        && dist < 1e-2
        && elapsed < Duration::from_secs(10);
    Ok((ok, format!("I = {i:.6}, B_max = {b:.6}, angle distance {dist:.1e} rad, {elapsed:.2?}")))
}

fn classical_mixture_limit() -> Check {
    let h = classical_mixture(&ApparatusConfig::symmetric(9.0))?;
    let i = mutual_information_oracle(&h)?;
    let (b, _) = bell_max_oracle(&h)?;
    let ok = (i - LN_2).abs() < 1e-3 && b <= 2.0 + 1e-6;
    Ok((ok, format!("I = {i:.6}, B_max = {b:.6}")))
}

fn dephasing_exact_match() -> Check {
    let (mut worst_spec, mut worst_i) = (0.0f64, 0.0f64);
    let mut points = 0;
    for n in [0.25, 1.0, 4.0] {
        for a in A_GRID {
            for herald in [Herald::D1, Herald::D2] {
                let cfg = ApparatusConfig::symmetric(n).dephasing(a).herald(herald);
                let p = disturbance_params(&cfg)?;
                let h = run_apparatus(&cfg)?;
                let s = h.state().as_branch().ok_or("branch engine expected")?;
                let g = sorted_desc(s.spectrum(&ModeId::OUTPUTS)?.eigenvalues().to_vec(), 2);
                let r = sorted_desc(s.spectrum(&[ModeId::M24, ModeId::M25])?.eigenvalues().to_vec(), 2);
                let cf = spectra(&p)?;
                let g_cf = sorted_desc(vec![cf.p1, cf.p2], 2);
                let r_cf = sorted_desc(vec![cf.p1r, cf.p2r], 2);
                for k in 0..2 {
                    worst_spec = worst_spec.max((g[k] - g_cf[k]).abs()).max((r[k] - r_cf[k]).abs());
                }
                worst_i = worst_i.max((mutual_information_oracle(&h)? - mutual_information(&p)?).abs());
                points += 1;
            }
        }
    }
    let ok = worst_spec <= 1e-10 && worst_i <= 1e-9;
    Ok((ok, format!("{points} points: worst spectrum dev {worst_spec:.1e}, worst I dev {worst_i:.1e}")))
}

fn asymptotics() -> Check {
    let n = 9.0;
    let (mut worst_i, mut worst_b) = (0.0f64, 0.0f64);
    let mut check = |cfg: ApparatusConfig, i_ref: f64, b_ref: f64| -> qnd_cat::Result<()> {
        let i = mutual_information_oracle(&run_apparatus(&cfg)?)?;
        let b = bell_oracle(&run_apparatus(&cfg.herald(Herald::D2))?, &BellAngles::CANONICAL)?;
        worst_i = worst_i.max((i - i_ref).abs());
        worst_b = worst_b.max((b - b_ref).abs());
        Ok(())
    };
    for a in A_GRID {
        let (i_ref, b_ref) = asymptotic_decoherence(a);
        check(ApparatusConfig::symmetric(n).dephasing(a), i_ref, b_ref)?;
    }
    for rn in [0.0, 0.25, 1.0] {
        let r = rn / n;
        let (i_ref, b_ref) = asymptotic_loss(r, n);
        check(ApparatusConfig::symmetric(n).losses(LossProfile::balanced_field(r)), i_ref, b_ref)?;
    }
    let mut worst_ww = 0.0f64;
    for r in [0.0, 0.01, 0.03, 0.1, 0.3] {
        let cfg = ApparatusConfig::symmetric(n).losses(LossProfile::balanced_field(r));
        let d = disturbance_params(&cfg)?.d;
        let (_, both) = whichway_probabilities(r, cfg.alpha2)?;
        worst_ww = worst_ww.max((both - d * d).abs());
    }
    let ok = worst_i <= 5e-3 && worst_b <= 5e-3 && worst_ww <= 1e-12;
    Ok((
        ok,
        format!("worst |ΔI| {worst_i:.1e}, worst |ΔB| {worst_b:.1e} (canonical angles), which-way vs d² {worst_ww:.1e}"),
    ))
}

fn engine_equivalence() -> Check {
    let grid: Vec<f64> = (0..5).map(|k| k as f64 * PI / 8.0).collect();
    let (mut worst_f, mut worst_i, mut worst_c) = (0.0f64, 0.0f64, 0.0f64);
    let configs = [
        ApparatusConfig::symmetric(0.5),
        ApparatusConfig::symmetric(1.0).dephasing(0.6).herald(Herald::D2),
        ApparatusConfig::symmetric(2.0).dephasing(0.3),
        ApparatusConfig::symmetric(1.5).losses(LossProfile::balanced_field(0.2)),
        ApparatusConfig::symmetric(1.0).losses(LossProfile::balanced_photon(0.3)).herald(Herald::D2),
    ];
    for cfg in configs {
        let hb = run_apparatus(&cfg)?;
        let hf = run_apparatus(&cfg.clone().engine(Engine::Fock))?;
        let f = fidelity_with_branch(hf.state().as_fock().ok_or("fock")?, hb.state().as_branch().ok_or("branch")?)?;
        worst_f = worst_f.max(1.0 - f);
        worst_i = worst_i.max((mutual_information_oracle(&hb)? - mutual_information_oracle(&hf)?).abs());
        for &ti in &grid {
            for &tii in &grid {
                worst_c = worst_c.max((correlation_oracle(&hb, ti, tii)? - correlation_oracle(&hf, ti, tii)?).abs());
            }
        }
    }
    let ok = worst_f <= 1e-8 && worst_i <= 1e-6 && worst_c <= 1e-6;
    Ok((ok, format!("worst 1-F {worst_f:.1e}, |ΔI| {worst_i:.1e}, |ΔC| {worst_c:.1e} over 5x5 angles")))
}

fn balanced_photon_loss() -> Check {
    let (mut worst_f, mut worst_p) = (0.0f64, 0.0f64);
    for n in [1.0, 9.0] {
        for herald in [Herald::D1, Herald::D2] {
            let base = ApparatusConfig::symmetric(n).herald(herald);
            let ideal = run_apparatus(&base)?;
            let lossy = run_apparatus(&base.clone().losses(LossProfile::balanced_photon(0.3)))?;
            let target = ideal_cat(base.alpha2, herald.sign())?;
            let f = lossy.state().as_branch().ok_or("branch")?.fidelity_with_pure(&target)?;
            worst_f = worst_f.max(1.0 - f);
            worst_p = worst_p.max((lossy.herald_prob() - 0.7 * ideal.herald_prob()).abs());
        }
    }
    let ok = worst_f <= 1e-9 && worst_p <= 1e-9;
    Ok((ok, format!("worst 1-F {worst_f:.1e}, worst |P - 0.7 P_ideal| {worst_p:.1e}")))
}

fn surface_reproduction() -> Check {
    let spec = SweepSpec::surface_default();
    let t = Instant::now();
    let records = surface_sweep(&spec);
    let elapsed = t.elapsed();
    let errors = records.iter().filter(|r| r.i_closed.is_none() || r.bmax_closed.is_none()).count();

    // Vanishing: I → 0 as n̄ → 0 on the symmetric-herald surface.
    let plus: Vec<&SurfaceRecord> = records.iter().filter(|r| r.sign == Sign::Plus).collect();
    let n_min = spec.n_mean_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let i_small = plus
        .iter()
        .filter(|r| r.n_mean == n_min)
        .filter_map(|r| r.i_closed)
        .fold(0.0, f64::max);
    let i_limit = mutual_information(&DisturbanceParams::new((-1e-4f64).exp(), 1.0, Sign::Plus)?)?;
    let shrinks = plus
        .iter()
        .filter(|r| r.r == 0.0 && r.n_mean <= 2.0)
        .map(|r| r.i_closed.unwrap_or(f64::NAN))
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[0] <= w[1]);
    let vanishing = i_small < 0.2 && i_limit < 1e-3 && shrinks;
    let minus_small = records
        .iter()
        .find(|r| r.sign == Sign::Minus && r.n_mean == n_min && r.r == 0.0)
        .and_then(|r| r.i_closed)
        .unwrap_or(f64::NAN);

    // Violation region: B_max > 2 on a connected region that touches R = 0 and extends to R > 0.
    let mut region = true;
    let mut region_sizes = Vec::new();
    for sign in [Sign::Plus, Sign::Minus] {
        let key = |r: &SurfaceRecord| ((r.n_mean * 1e6).round() as i64, (r.r * 1e6).round() as i64);
        let above: HashMap<(usize, usize), bool> = records
            .iter()
            .filter(|r| r.sign == sign)
            .map(|r| {
                let (kn, kr) = key(r);
                let i = spec.n_mean_grid.iter().position(|&x| (x * 1e6).round() as i64 == kn).unwrap();
                let j = spec.r_grid.iter().position(|&x| (x * 1e6).round() as i64 == kr).unwrap();
                ((i, j), r.bmax_closed.is_some_and(|b| b > 2.0))
            })
            .collect();
        let mut seen: HashSet<(usize, usize)> = above.iter().filter(|(k, &v)| v && k.1 == 0).map(|(k, _)| *k).collect();
        let mut queue: VecDeque<(usize, usize)> = seen.iter().copied().collect();
        while let Some((i, j)) = queue.pop_front() {
            let nbrs = [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)];
            for nb in nbrs {
                if above.get(&nb) == Some(&true) && seen.insert(nb) {
                    queue.push_back(nb);
                }
            }
        }
        let off_axis = seen.iter().filter(|k| k.1 > 0).count();
        region_sizes.push(off_axis);
        region &= off_axis > 0;
    }

    // Monotone: I_closed non-increasing in R along every n̄ line.
    let mut monotone = true;
    for sign in [Sign::Plus, Sign::Minus] {
        for &n in &spec.n_mean_grid {
            let line: Vec<f64> = records
                .iter()
                .filter(|r| r.sign == sign && r.n_mean == n)
                .filter_map(|r| r.i_closed)
                .collect();
            monotone &= line.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        }
    }

    // No spurious violation: where √2(1 + e^(−2R n̄)) < 2 the optimizer must not exceed 2.
    let mut considered = 0;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for r in &records {
        if SQRT_2 * (1.0 + (-2.0 * r.r * r.n_mean).exp()) < 2.0 {
            considered += 1;
            if let Some(b) = r.bmax_closed {
                if b > 2.0 + 1e-6 {
                    violations += 1;
                    worst = worst.max(b);
                }
            }
        }
    }
    let no_spurious = violations == 0;

    let ok = elapsed < Duration::from_secs(300) && errors == 0 && vanishing && region && monotone && no_spurious;
    Ok((
        ok,
        format!(
            "{} points in {elapsed:.1?}; vanishing {} [+: I(n̄={n_min}) = {i_small:.3}, I(n̄=1e-4) = {i_limit:.1e}; -: I = {minus_small:.3}] \
             violation region {} [off-axis cells {region_sizes:?}] monotone {} no-spurious-violation {} [{violations}/{considered} points above 2, max {worst:.4}]",
            records.len(),
            verdict(vanishing),
            verdict(region),
            verdict(monotone),
            verdict(no_spurious),
        ),
    ))
}

fn printed_form_report() -> Check {
    let report = validate(&SweepSpec::validation_default());
    let mut corrected_worst = 0.0f64;
    for fam in ["global spectrum", "reduced spectrum", "mutual information"] {
        let s = report.summary_for(fam, "corrected").ok_or("missing corrected rows")?;
        corrected_worst = corrected_worst.max(s.worst_exact);
    }
    let printed_reduced = report.deviation_at(1.0, 0.5, "printed_reduced").ok_or("missing printed reduced rows")?;
    let printed_sqrt_d = report.deviation_at(1.0, 0.5, "printed_sqrt_d").ok_or("missing printed sqrt-d rows")?;
    let fock_worst = report
        .rows
        .iter()
        .filter(|r| r.variant == "fock")
        .map(|r| r.deviation())
        .fold(0.0, f64::max);
    let verdict = report.n3_verdict();
    let answered = !verdict.starts_with("neither") && !verdict.starts_with("no ");
    let ok = report.errors.is_empty()
        && corrected_worst <= EXACT_TOL
        && printed_reduced > 1e-3
        && printed_sqrt_d > 1e-3
        && fock_worst <= 1e-6
        && answered
        && report.render_text().contains(&verdict);
    Ok((
        ok,
        format!(
            "corrected worst {corrected_worst:.1e}; printed at (μ=e^-1, a=0.5): reduced {printed_reduced:.2e}, sqrt-d {printed_sqrt_d:.2e}; \
             fock rows {fock_worst:.1e}; N3: {verdict}"
        ),
    ))
}

fn random_field(rng: &mut ChaCha8Rng) -> Complex64 {
    // |β|² ≤ 2
    let r = rng.random_range(0.0..2.0f64).sqrt();
    Complex64::from_polar(r, rng.random_range(0.0..2.0 * PI))
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let mut worst_norm = 0.0f64;
    let mut worst_spec_sum = 0.0f64;
    let mut min_eig = f64::INFINITY;
    let mut worst_fock_trace = 0.0f64;
    let mut worst_overlap = 0.0f64;

    // Random circuits on one photon mode and two field modes.
    for _ in 0..40 {
        // Photon in (|0⟩ + |1⟩)/√2 so cross-Kerr and dephasing create mixedness.
        let b22 = ModeContent::Field(random_field(&mut rng));
        let b23 = ModeContent::Field(random_field(&mut rng));
        let with_photon = |k: u8| {
            BranchState::product(&[
                (ModeId::M12, ModeContent::Photon(k)),
                (ModeId::M22, b22.clone()),
                (ModeId::M23, b23.clone()),
            ])
        };
        let mut s = with_photon(0)?.superpose(&with_photon(1)?)?.normalized()?;
        let mut f = FockEnsemble::from_branch_state(&s, &[2, 36, 36])?;
        for _ in 0..4 {
            match rng.random_range(0..5) {
                0 => {
                    let t = rng.random_range(0.0..1.0);
                    s = s.apply_beamsplitter(ModeId::M22, ModeId::M23, t)?;
                    f = f.apply_beamsplitter(ModeId::M22, ModeId::M23, t, None)?;
                }
                1 => {
                    s = s.apply_cross_kerr(ModeId::M12, ModeId::M22)?;
                    f = f.apply_cross_kerr(ModeId::M12, ModeId::M22)?;
                }
                2 => {
                    let phi = rng.random_range(-PI..PI);
                    s = s.apply_phase(ModeId::M23, phi)?;
                    f = f.apply_phase(ModeId::M23, phi)?;
                }
                3 => {
                    let r = rng.random_range(0.0..1.0);
                    s = s.apply_loss(ModeId::M22, r)?;
                    f = f.apply_loss(ModeId::M22, r)?;
                }
                _ => {
                    let a = c(rng.random_range(0.0..1.0));
                    s = s.apply_env_dephasing(ModeId::M12, a)?;
                    f = f.apply_env_dephasing(ModeId::M12, a)?;
                }
            }
            worst_norm = worst_norm.max((s.norm_sqr() - 1.0).abs());
            worst_fock_trace = worst_fock_trace.max((f.trace() - 1.0).abs());
        }
        for keep in [&[ModeId::M12, ModeId::M22, ModeId::M23][..], &[ModeId::M22], &[ModeId::M12, ModeId::M23]] {
            let ev = s.spectrum(keep)?.eigenvalues().to_vec();
            worst_spec_sum = worst_spec_sum.max((ev.iter().sum::<f64>() - 1.0).abs());
            min_eig = min_eig.min(ev.iter().copied().fold(f64::INFINITY, f64::min));
            let fe = f.keep_only(keep)?.spectrum();
            min_eig = min_eig.min(fe.iter().copied().fold(f64::INFINITY, f64::min).max(-1.0));
        }
        worst_overlap = worst_overlap.max(1.0 - fidelity_with_branch(&f, &s)?);
    }

    // Random heralded outputs: detection completeness and the Tsirelson bound.
    let mut worst_total = 0.0f64;
    let mut max_b = 0.0f64;
    let mut max_i = 0.0f64;
    for _ in 0..24 {
        let n = rng.random_range(0.0..6.0);
        let mut cfg = ApparatusConfig::symmetric(n).herald(if rng.random_bool(0.5) { Herald::D1 } else { Herald::D2 });
        if rng.random_bool(0.5) {
            cfg = cfg.dephasing(rng.random_range(0.0..1.0));
        } else {
            cfg = cfg.losses(LossProfile::balanced_field(rng.random_range(0.0..0.5)));
        }
        let h = run_apparatus(&cfg)?;
        for _ in 0..4 {
            let d = xy_distribution(&h, rng.random_range(-PI..PI), rng.random_range(-PI..PI))?;
            worst_total = worst_total.max((d.total() - 1.0).abs());
        }
        max_b = max_b.max(bell_max_oracle(&h)?.0);
        max_i = max_i.max(mutual_information_oracle(&h)?);
        if let OutputState::Branch(s) = h.state() {
            worst_norm = worst_norm.max((s.norm_sqr() - 1.0).abs());
        }
    }

    let ok = worst_norm <= 1e-12
        && worst_fock_trace <= 1e-10
        && worst_spec_sum <= 1e-10
        && min_eig >= -1e-10
        && worst_overlap <= 1e-8
        && worst_total <= 1e-10
        && max_b <= TSIRELSON + 1e-6
        && max_i <= 2.0 * LN_2 + 1e-9;
    Ok((
        ok,
        format!(
            "norm {worst_norm:.1e}, fock trace {worst_fock_trace:.1e}, spectrum sum {worst_spec_sum:.1e}, min eigenvalue {min_eig:.1e}, \
             branch/fock 1-F {worst_overlap:.1e}, XY completeness {worst_total:.1e}, max B {max_b:.6}, max I {max_i:.6}"
        ),
    ))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn main() {
    // Run serially so the timing criteria see a quiet machine.
    let criteria: [(&str, fn() -> Check); 9] = [
        ("ideal cat limit", ideal_cat_limit),
        ("classical mixture", classical_mixture_limit),
        ("dephasing exact match", dephasing_exact_match),
        ("asymptotics", asymptotics),
        ("engine equivalence", engine_equivalence),
        ("balanced photon-arm loss", balanced_photon_loss),
        ("surface sweep reproduction", surface_reproduction),
        ("printed-form arbitration", printed_form_report),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {name} ({:.1?}): {detail}", if ok { "PASS" } else { "FAIL" }, t.elapsed());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
