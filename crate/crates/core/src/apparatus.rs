//! The entangling apparatus end to end: a single photon split over two arms,
//! two coherent-beam Mach–Zehnder interferometers each coupled to one arm by
//! a conditional-π Kerr phase, optional losses and dephasing, and an eraser
//! beam splitter whose detectors herald the output cat state.
//!
//! Both engines run the same step sequence through the [`Circuit`] trait.
//! Mode flow per side (side I shown; side II uses 3x labels and photon 13):
//!
//! ```text
//! 21 = |α₂⟩, 23 = |0⟩ ─BS½─▶ 22, 23 ─Kerr(12,23)─▶ losses ─BS½─▶ 25, 24 ─phase −π/2 on 24
//! ```

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::branch::{Branch, BranchState, ModeContent, Outcome, DEFAULT_BRANCH_CAP};
use crate::closed_form::{DisturbanceParams, Sign};
use crate::error::{check_unit_interval, Error, Result};
use crate::fock::{coherent_amplitudes, fock_basis, FockCutoffPolicy, FockEnsemble};
use crate::mode::ModeId;

/// Which eraser-detector pattern conditions the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Herald {
    /// Click behind mode 14, silence behind 15: the symmetric state.
    D1,
    /// Click behind mode 15, silence behind 14: the antisymmetric state.
    D2,
}

impl Herald {
    pub fn sign(self) -> Sign {
        match self {
            Herald::D1 => Sign::Plus,
            Herald::D2 => Sign::Minus,
        }
    }

    pub fn from_sign(sign: Sign) -> Self {
        match sign {
            Sign::Plus => Herald::D1,
            Sign::Minus => Herald::D2,
        }
    }

    /// (mode that must click, mode that must stay silent).
    fn pattern(self) -> (ModeId, ModeId) {
        match self {
            Herald::D1 => (ModeId::M14, ModeId::M15),
            Herald::D2 => (ModeId::M15, ModeId::M14),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Engine {
    #[default]
    Branch,
    Fock,
}

/// Reflectivities of the auxiliary loss beam splitters, indexed by the mode they tap.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossProfile {
    pub r12: f64,
    pub r13: f64,
    pub r22: f64,
    pub r23: f64,
    pub r32: f64,
    pub r33: f64,
}

impl LossProfile {
    /// Equal reflectivity in all four coherent-beam arms.
    pub fn balanced_field(r: f64) -> Self {
        LossProfile {
            r22: r,
            r23: r,
            r32: r,
            r33: r,
            ..Default::default()
        }
    }

    /// Equal reflectivity in both photon arms.
    pub fn balanced_photon(r: f64) -> Self {
        LossProfile {
            r12: r,
            r13: r,
            ..Default::default()
        }
    }

    pub fn entries(&self) -> [(ModeId, f64); 6] {
        [
            (ModeId::M12, self.r12),
            (ModeId::M13, self.r13),
            (ModeId::M22, self.r22),
            (ModeId::M23, self.r23),
            (ModeId::M32, self.r32),
            (ModeId::M33, self.r33),
        ]
    }

    fn photon_lossless(&self) -> bool {
        self.r12 == 0.0 && self.r13 == 0.0
    }
}

/// Everything that defines one run of the apparatus.
#[derive(Debug, Clone, PartialEq)]
pub struct ApparatusConfig {
    pub alpha2: Complex64,
    pub alpha3: Complex64,
    pub losses: LossProfile,
    /// ⟨e₁|e₂⟩ of the environment coupled to photon arm 12.
    pub env_overlap_a: f64,
    pub herald: Herald,
    pub engine: Engine,
    pub fock_policy: FockCutoffPolicy,
    pub branch_cap: usize,
}

impl ApparatusConfig {
    /// Ideal apparatus with equal real input amplitudes α = √n̄.
    pub fn symmetric(n_mean: f64) -> Self {
        Self::with_alpha(Complex64::new(n_mean.max(0.0).sqrt(), 0.0))
    }

    pub fn with_alpha(alpha: Complex64) -> Self {
        ApparatusConfig {
            alpha2: alpha,
            alpha3: alpha,
            losses: LossProfile::default(),
            env_overlap_a: 1.0,
            herald: Herald::D1,
            engine: Engine::Branch,
            fock_policy: FockCutoffPolicy::default(),
            branch_cap: DEFAULT_BRANCH_CAP,
        }
    }

    pub fn dephasing(mut self, a: f64) -> Self {
        self.env_overlap_a = a;
        self
    }

    pub fn losses(mut self, losses: LossProfile) -> Self {
        self.losses = losses;
        self
    }

    pub fn herald(mut self, herald: Herald) -> Self {
        self.herald = herald;
        self
    }

    pub fn engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn fock_policy(mut self, policy: FockCutoffPolicy) -> Self {
        self.fock_policy = policy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (_, r) in self.losses.entries() {
            check_unit_interval("R", r)?;
        }
        check_unit_interval("a", self.env_overlap_a)?;
        for a in [self.alpha2, self.alpha3] {
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::UnsupportedInput("non-finite input amplitude".into()));
            }
        }
        Ok(())
    }

    /// Mean photon number |α|² when both inputs are equal.
    pub fn symmetric_n_mean(&self) -> Option<f64> {
        ((self.alpha2 - self.alpha3).norm() <= 1e-15).then(|| self.alpha2.norm_sqr())
    }
}

/// The two local parties of the Bell experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Modes 24 and 25.
    I,
    /// Modes 34 and 35.
    II,
}

impl Side {
    pub fn modes(self) -> [ModeId; 2] {
        match self {
            Side::I => [ModeId::M24, ModeId::M25],
            Side::II => [ModeId::M34, ModeId::M35],
        }
    }
}

/// Output state in either engine's representation.
#[derive(Debug, Clone)]
pub enum OutputState {
    Branch(BranchState),
    Fock(FockEnsemble),
}

impl OutputState {
    pub fn modes(&self) -> &[ModeId] {
        match self {
            OutputState::Branch(s) => s.modes(),
            OutputState::Fock(s) => s.modes(),
        }
    }

    pub fn as_branch(&self) -> Option<&BranchState> {
        match self {
            OutputState::Branch(s) => Some(s),
            OutputState::Fock(_) => None,
        }
    }

    pub fn as_fock(&self) -> Option<&FockEnsemble> {
        match self {
            OutputState::Fock(s) => Some(s),
            OutputState::Branch(_) => None,
        }
    }
}

/// Four-mode output (24, 25, 34, 35) with its herald bookkeeping.
#[derive(Debug, Clone)]
pub struct HeraldedState {
    state: OutputState,
    herald_prob: f64,
    herald: Option<Herald>,
    span: [Complex64; 2],
}

impl HeraldedState {
    /// `span` holds the coherent amplitude A of each side's basis {|A,0⟩, |0,A⟩}.
    pub fn new(state: OutputState, herald_prob: f64, herald: Option<Herald>, span: [Complex64; 2]) -> Self {
        HeraldedState {
            state,
            herald_prob,
            herald,
            span,
        }
    }

    pub fn state(&self) -> &OutputState {
        &self.state
    }

    pub fn herald_prob(&self) -> f64 {
        self.herald_prob
    }

    /// `None` for an unconditioned (traced) output.
    pub fn herald(&self) -> Option<Herald> {
        self.herald
    }

    pub fn span_amplitude(&self, side: Side) -> Complex64 {
        match side {
            Side::I => self.span[0],
            Side::II => self.span[1],
        }
    }

    pub fn with_state(&self, state: OutputState) -> Self {
        HeraldedState {
            state,
            ..self.clone()
        }
    }
}

/// The primitive steps the apparatus needs from a simulation engine.
trait Circuit: Sized {
    fn add_field(&self, mode: ModeId, alpha: Complex64, dim: usize) -> Result<Self>;
    fn beamsplitter(&self, m1: ModeId, m2: ModeId, t: f64, out_dims: (usize, usize)) -> Result<Self>;
    fn cross_kerr(&self, photon: ModeId, field: ModeId) -> Result<Self>;
    fn loss(&self, mode: ModeId, r: f64) -> Result<Self>;
    fn dephasing(&self, photon: ModeId, a: f64) -> Result<Self>;
    fn relabel(&self, from: ModeId, to: ModeId) -> Result<Self>;
    fn phase(&self, mode: ModeId, phi: f64) -> Result<Self>;
    fn project(&self, mode: ModeId, outcome: Outcome) -> Result<(Self, f64)>;
    fn trace_out(&self, modes: &[ModeId]) -> Result<Self>;
}

impl Circuit for BranchState {
    fn add_field(&self, mode: ModeId, alpha: Complex64, _dim: usize) -> Result<Self> {
        self.with_mode(mode, ModeContent::Field(alpha))
    }
    fn beamsplitter(&self, m1: ModeId, m2: ModeId, t: f64, _: (usize, usize)) -> Result<Self> {
        self.apply_beamsplitter(m1, m2, t)
    }
    fn cross_kerr(&self, photon: ModeId, field: ModeId) -> Result<Self> {
        self.apply_cross_kerr(photon, field)
    }
    fn loss(&self, mode: ModeId, r: f64) -> Result<Self> {
        self.apply_loss(mode, r)
    }
    fn dephasing(&self, photon: ModeId, a: f64) -> Result<Self> {
        self.apply_env_dephasing(photon, Complex64::new(a, 0.0))
    }
    fn relabel(&self, from: ModeId, to: ModeId) -> Result<Self> {
        BranchState::relabel(self, from, to)
    }
    fn phase(&self, mode: ModeId, phi: f64) -> Result<Self> {
        self.apply_phase(mode, phi)
    }
    fn project(&self, mode: ModeId, outcome: Outcome) -> Result<(Self, f64)> {
        self.project_yes_no(mode, outcome)
    }
    fn trace_out(&self, modes: &[ModeId]) -> Result<Self> {
        BranchState::trace_out(self, modes)
    }
}

impl Circuit for FockEnsemble {
    fn add_field(&self, mode: ModeId, alpha: Complex64, dim: usize) -> Result<Self> {
        let v = coherent_amplitudes(alpha, dim - 1);
        let norm = Complex64::new(v.norm(), 0.0);
        self.with_mode(mode, &(v / norm))
    }
    fn beamsplitter(&self, m1: ModeId, m2: ModeId, t: f64, out_dims: (usize, usize)) -> Result<Self> {
        self.apply_beamsplitter(m1, m2, t, Some(out_dims))
    }
    fn cross_kerr(&self, photon: ModeId, field: ModeId) -> Result<Self> {
        self.apply_cross_kerr(photon, field)
    }
    fn loss(&self, mode: ModeId, r: f64) -> Result<Self> {
        self.apply_loss(mode, r)
    }
    fn dephasing(&self, photon: ModeId, a: f64) -> Result<Self> {
        self.apply_env_dephasing(photon, Complex64::new(a, 0.0))
    }
    fn relabel(&self, from: ModeId, to: ModeId) -> Result<Self> {
        FockEnsemble::relabel(self, from, to)
    }
    fn phase(&self, mode: ModeId, phi: f64) -> Result<Self> {
        self.apply_phase(mode, phi)
    }
    fn project(&self, mode: ModeId, outcome: Outcome) -> Result<(Self, f64)> {
        self.project_yes_no(mode, outcome)
    }
    fn trace_out(&self, modes: &[ModeId]) -> Result<Self> {
        FockEnsemble::trace_out(self, modes)
    }
}

struct SideLayout {
    input: ModeId,
    vacuum: ModeId,
    photon: ModeId,
    mid: ModeId,
    out_from_mid: ModeId,
    out_from_vacuum: ModeId,
    alpha: Complex64,
    r_mid: f64,
    r_vacuum: f64,
}

fn sides(cfg: &ApparatusConfig) -> [SideLayout; 2] {
    [
        SideLayout {
            input: ModeId::M21,
            vacuum: ModeId::M23,
            photon: ModeId::M12,
            mid: ModeId::M22,
            out_from_mid: ModeId::M25,
            out_from_vacuum: ModeId::M24,
            alpha: cfg.alpha2,
            r_mid: cfg.losses.r22,
            r_vacuum: cfg.losses.r23,
        },
        SideLayout {
            input: ModeId::M31,
            vacuum: ModeId::M33,
            photon: ModeId::M13,
            mid: ModeId::M32,
            out_from_mid: ModeId::M35,
            out_from_vacuum: ModeId::M34,
            alpha: cfg.alpha3,
            r_mid: cfg.losses.r32,
            r_vacuum: cfg.losses.r33,
        },
    ]
}

/// Runs everything up to (not including) the eraser; modes 12, 13, 24, 25, 34, 35.
fn premixed<C: Circuit>(cfg: &ApparatusConfig, photons: C) -> Result<C> {
    let mut s = photons.beamsplitter(ModeId::M12, ModeId::M13, 0.5, (2, 2))?;
    if cfg.env_overlap_a < 1.0 {
        s = s.dephasing(ModeId::M12, cfg.env_overlap_a)?;
    }
    for side in sides(cfg) {
        let n = side.alpha.norm_sqr();
        let d_full = cfg.fock_policy.cutoff(n)? + 1;
        let d_half = cfg.fock_policy.cutoff(n / 2.0)? + 1;
        s = s
            .add_field(side.vacuum, Complex64::new(0.0, 0.0), 1)?
            .add_field(side.input, side.alpha, d_full)?
            .beamsplitter(side.input, side.vacuum, 0.5, (d_half, d_half))?
            .relabel(side.input, side.mid)?
            .cross_kerr(side.photon, side.vacuum)?;
        for (m, r) in [(side.mid, side.r_mid), (side.vacuum, side.r_vacuum)] {
            if r > 0.0 {
                s = s.loss(m, r)?;
            }
        }
        s = s
            .beamsplitter(side.mid, side.vacuum, 0.5, (d_full, d_full))?
            .relabel(side.mid, side.out_from_mid)?
            .relabel(side.vacuum, side.out_from_vacuum)?
            .phase(side.out_from_vacuum, -FRAC_PI_2)?;
    }
    for (m, r) in [(ModeId::M12, cfg.losses.r12), (ModeId::M13, cfg.losses.r13)] {
        if r > 0.0 {
            s = s.loss(m, r)?;
        }
    }
    Ok(s)
}

fn heralded<C: Circuit>(cfg: &ApparatusConfig, pre: C) -> Result<(C, f64)> {
    let s = pre
        .beamsplitter(ModeId::M12, ModeId::M13, 0.5, (2, 2))?
        .relabel(ModeId::M12, ModeId::M15)?
        .relabel(ModeId::M13, ModeId::M14)?;
    let (click, silent) = cfg.herald.pattern();
    let (s, p1) = s.project(click, Outcome::Click)?;
    let (s, p2) = s.project(silent, Outcome::Silent)?;
    Ok((s.trace_out(&[ModeId::M15, ModeId::M14])?, p1 * p2))
}

fn span_amplitudes(cfg: &ApparatusConfig) -> [Complex64; 2] {
    let l = &cfg.losses;
    [
        cfg.alpha2 * (1.0 - 0.5 * (l.r22 + l.r23)).sqrt(),
        cfg.alpha3 * (1.0 - 0.5 * (l.r32 + l.r33)).sqrt(),
    ]
}

fn branch_photons(cfg: &ApparatusConfig) -> Result<BranchState> {
    Ok(BranchState::product(&[
        (ModeId::M12, ModeContent::Photon(1)),
        (ModeId::M13, ModeContent::Photon(0)),
    ])?
    .with_cap(cfg.branch_cap))
}

fn fock_photons() -> Result<FockEnsemble> {
    FockEnsemble::product(vec![(ModeId::M12, fock_basis(1, 2)), (ModeId::M13, fock_basis(0, 2))])
}

/// The six-mode state just before the eraser beam splitter.
pub fn build_premixed_state(cfg: &ApparatusConfig) -> Result<OutputState> {
    cfg.validate()?;
    Ok(match cfg.engine {
        Engine::Branch => OutputState::Branch(premixed(cfg, branch_photons(cfg)?)?),
        Engine::Fock => OutputState::Fock(premixed(cfg, fock_photons()?)?),
    })
}

/// Runs the full apparatus and conditions on the configured herald.
pub fn run_apparatus(cfg: &ApparatusConfig) -> Result<HeraldedState> {
    cfg.validate()?;
    let (state, prob) = match cfg.engine {
        Engine::Branch => {
            let (s, p) = heralded(cfg, premixed(cfg, branch_photons(cfg)?)?)?;
            (OutputState::Branch(s), p)
        }
        Engine::Fock => {
            let (s, p) = heralded(cfg, premixed(cfg, fock_photons()?)?)?;
            (OutputState::Fock(s), p)
        }
    };
    Ok(HeraldedState::new(state, prob, Some(cfg.herald), span_amplitudes(cfg)))
}

/// The unconditioned output: the pre-eraser state with the photon modes traced out.
pub fn classical_mixture(cfg: &ApparatusConfig) -> Result<HeraldedState> {
    let photons = [ModeId::M12, ModeId::M13];
    let state = match build_premixed_state(cfg)? {
        OutputState::Branch(s) => OutputState::Branch(s.trace_out(&photons)?),
        OutputState::Fock(s) => OutputState::Fock(s.trace_out(&photons)?),
    };
    Ok(HeraldedState::new(state, 1.0, None, span_amplitudes(cfg)))
}

/// The target output N±(|α,0,0,α⟩ ± |0,α,α,0⟩) on modes (24, 25, 34, 35).
pub fn ideal_cat(alpha: Complex64, sign: Sign) -> Result<BranchState> {
    let f = ModeContent::Field;
    let z = Complex64::new(0.0, 0.0);
    let phi1 = Branch::new(Complex64::new(1.0, 0.0), vec![f(alpha), f(z), f(z), f(alpha)], vec![]);
    let phi2 = Branch::new(Complex64::new(sign.factor(), 0.0), vec![f(z), f(alpha), f(alpha), f(z)], vec![]);
    BranchState::from_parts(ModeId::OUTPUTS.to_vec(), vec![phi1, phi2], DEFAULT_BRANCH_CAP)?.normalized()
}

/// (μ, d, ±) for the two scenarios the closed forms cover: dephasing only,
/// or equal loss in the four coherent-beam arms only.
pub fn disturbance_params(cfg: &ApparatusConfig) -> Result<DisturbanceParams> {
    cfg.validate()?;
    let n = cfg
        .symmetric_n_mean()
        .ok_or_else(|| Error::UnsupportedForClosedForm("unequal input amplitudes".into()))?;
    let l = &cfg.losses;
    if !l.photon_lossless() {
        return Err(Error::UnsupportedForClosedForm("photon-arm losses".into()));
    }
    let r = l.r22;
    if [l.r23, l.r32, l.r33].iter().any(|&x| x != r) {
        return Err(Error::UnsupportedForClosedForm("unequal field-arm losses".into()));
    }
    let a = cfg.env_overlap_a;
    if a < 1.0 && r > 0.0 {
        return Err(Error::UnsupportedForClosedForm(
            "dephasing and loss at the same time".into(),
        ));
    }
    let sign = cfg.herald.sign();
    if r > 0.0 {
        DisturbanceParams::new((-(1.0 - r) * n).exp(), (-2.0 * r * n).exp(), sign)
    } else {
        DisturbanceParams::new((-n).exp(), a, sign)
    }
}

/// Minimum inconclusive probability of discriminating the tapped beams:
/// (one side, both sides) = (e^(−2R|α|²), e^(−4R|α|²)).
pub fn whichway_probabilities(r: f64, alpha: Complex64) -> Result<(f64, f64)> {
    check_unit_interval("R", r)?;
    let per_side = (-2.0 * r * alpha.norm_sqr()).exp();
    Ok((per_side, per_side * per_side))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn fidelity(a: &BranchState, b: &BranchState) -> f64 {
        a.fidelity_with_pure(b).unwrap()
    }

    #[test]
    fn ideal_d1_output_is_the_symmetric_cat() {
        let h = run_apparatus(&ApparatusConfig::symmetric(4.0)).unwrap();
        let s = h.state().as_branch().unwrap();
        assert_eq!(s.modes(), &ModeId::OUTPUTS);
        assert!(fidelity(s, &ideal_cat(c(2.0), Sign::Plus).unwrap()) > 1.0 - 1e-12);
        let mu = (-4.0f64).exp();
        assert!((h.herald_prob() - (1.0 + mu * mu) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn d2_gives_the_antisymmetric_cat() {
        let h = run_apparatus(&ApparatusConfig::symmetric(0.7).herald(Herald::D2)).unwrap();
        let s = h.state().as_branch().unwrap();
        assert!(fidelity(s, &ideal_cat(c(0.7f64.sqrt()), Sign::Minus).unwrap()) > 1.0 - 1e-12);
    }

    #[test]
    fn d2_at_zero_amplitude_is_impossible() {
        let r = run_apparatus(&ApparatusConfig::symmetric(0.0).herald(Herald::D2));
        assert!(matches!(r, Err(Error::HeraldImpossible { .. })));
    }

    #[test]
    fn heralds_are_complementary_without_photon_loss() {
        for a in [1.0, 0.4] {
            let base = ApparatusConfig::symmetric(0.8).dephasing(a);
            let p1 = run_apparatus(&base.clone().herald(Herald::D1)).unwrap().herald_prob();
            let p2 = run_apparatus(&base.herald(Herald::D2)).unwrap().herald_prob();
            assert!((p1 + p2 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn premixed_state_has_the_photon_which_way_structure() {
        let alpha = 1.3;
        let s = match build_premixed_state(&ApparatusConfig::symmetric(alpha * alpha)).unwrap() {
            OutputState::Branch(s) => s,
            _ => unreachable!(),
        };
        assert_eq!(s.len(), 2);
        let f = |x: f64| ModeContent::Field(c(x));
        for b in s.branches() {
            let cs = b.contents();
            assert!((b.coeff().norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            match cs[0] {
                // photon in 12 ↔ φ₂
                ModeContent::Photon(1) => {
                    for (x, y) in cs[2..].iter().zip([f(0.0), f(alpha), f(alpha), f(0.0)]) {
                        assert!(close(x, &y));
                    }
                }
                _ => {
                    for (x, y) in cs[2..].iter().zip([f(alpha), f(0.0), f(0.0), f(alpha)]) {
                        assert!(close(x, &y));
                    }
                }
            }
        }
    }

    fn close(a: &ModeContent, b: &ModeContent) -> bool {
        match (a, b) {
            (ModeContent::Field(x), ModeContent::Field(y)) => (x - y).norm() < 1e-12,
            _ => false,
        }
    }

    #[test]
    fn disturbance_params_examples() {
        let p = disturbance_params(&ApparatusConfig::symmetric(1.0)).unwrap();
        assert!((p.mu - (-1.0f64).exp()).abs() < 1e-15 && p.d == 1.0);
        let p = disturbance_params(&ApparatusConfig::symmetric(100.0).losses(LossProfile::balanced_field(0.01)))
            .unwrap();
        assert!((p.d - (-2.0f64).exp()).abs() < 1e-12);
        assert!((p.mu - (-99.0f64).exp()).abs() < 1e-50);
        let mixed = ApparatusConfig::symmetric(1.0).dephasing(0.5).losses(LossProfile::balanced_field(0.1));
        assert!(matches!(disturbance_params(&mixed), Err(Error::UnsupportedForClosedForm(_))));
        let d2 = disturbance_params(&ApparatusConfig::symmetric(1.0).herald(Herald::D2)).unwrap();
        assert_eq!(d2.sign, Sign::Minus);
    }

    #[test]
    fn whichway_examples() {
        assert_eq!(whichway_probabilities(0.0, c(3.0)).unwrap(), (1.0, 1.0));
        let (p, t) = whichway_probabilities(0.01, c(10.0)).unwrap();
        assert!((p - (-2.0f64).exp()).abs() < 1e-15 && (t - (-4.0f64).exp()).abs() < 1e-15);
        let cfg = ApparatusConfig::symmetric(100.0).losses(LossProfile::balanced_field(0.01));
        let d = disturbance_params(&cfg).unwrap().d;
        assert!((t - d * d).abs() < 1e-12);
        assert!(whichway_probabilities(1.5, c(1.0)).is_err());
    }
}
