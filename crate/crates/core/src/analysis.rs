//! Simulation-side mutual information and Bell experiment on heralded outputs.
//!
//! Each side carries an effective qubit spanned by |A,0⟩ and |0,A⟩. The
//! pseudo-spin rotation is the linear extension of
//! |A,0⟩ → cos θ|A,0⟩ + sin θ|0,A⟩, |0,A⟩ → −sin θ|A,0⟩ + cos θ|0,A⟩
//! followed by one global renormalization (a post-selected map, not a unitary).
//! Local measurements are ideal vacuum/non-vacuum detectors, with
//! X = z₂₄ − z₂₅ and Y = z₃₄ − z₃₅.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;

use crate::apparatus::{HeraldedState, OutputState, Side};
use crate::branch::{Branch, BranchState, ModeContent, Outcome};
use crate::chsh::{self, BellAngles};
use crate::error::{Error, Result};
use crate::fock::{coherent_amplitudes, FockEnsemble};
use crate::linalg::{coherent_overlap, entropy};
use crate::mode::ModeId;

/// Largest weight allowed outside a side's two-vector span before rotating.
pub const LEAKAGE_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// I = S₁ + S₂ − S in nats, sides split as {24,25} | {34,35}.
pub fn mutual_information_oracle(h: &HeraldedState) -> Result<f64> {
    let [a, b] = Side::I.modes();
    let [c, d] = Side::II.modes();
    match h.state() {
        OutputState::Branch(s) => {
            let s12 = s.spectrum(&[a, b, c, d])?.entropy();
            let s1 = s.spectrum(&[a, b])?.entropy();
            let s2 = s.spectrum(&[c, d])?.entropy();
            Ok(s1 + s2 - s12)
        }
        OutputState::Fock(f) => {
            let s12 = f.keep_only(&[a, b, c, d])?.entropy();
            let s1 = entropy(&f.keep_only(&[a, b])?.spectrum());
            let s2 = entropy(&f.keep_only(&[c, d])?.spectrum());
            Ok(s1 + s2 - s12)
        }
    }
}

/// Inverse (pseudo-inverse when degenerate) of the 2×2 Gram matrix [[1, m], [m̄, 1]].
fn gram_inverse(m: Complex64) -> [[Complex64; 2]; 2] {
    let det = 1.0 - m.norm_sqr();
    let one = Complex64::new(1.0, 0.0);
    if det < 1e-12 {
        // Both span vectors coincide (A → 0): split the coordinate evenly.
        let q = one / 4.0;
        return [[q, q * m / m.norm().max(1e-300)], [q * m.conj() / m.norm().max(1e-300), q]];
    }
    [[one / det, -m / det], [-m.conj() / det, one / det]]
}

/// Linear image of the side's span under rotation by θ; `None` θ means the
/// plain span projector. Returns the unnormalized image.
fn branch_image(s: &BranchState, side: Side, amp: Complex64, theta: Option<f64>) -> Result<BranchState> {
    let [m1, m2] = side.modes();
    let (p, q) = (s.position(m1)?, s.position(m2)?);
    let m = coherent_overlap(amp, ZERO) * coherent_overlap(ZERO, amp);
    let gi = gram_inverse(m);
    let (c, sn) = theta.map_or((1.0, 0.0), |t| (t.cos(), t.sin()));
    let u1 = (ModeContent::Field(amp), ModeContent::vacuum_field());
    let u2 = (ModeContent::vacuum_field(), ModeContent::Field(amp));
    let mut out = Vec::with_capacity(2 * s.len());
    for b in s.branches() {
        let (x, y) = match (b.contents()[p], b.contents()[q]) {
            (ModeContent::Field(x), ModeContent::Field(y)) => (x, y),
            _ => return Err(Error::Structural("rotation sides must be field modes".into())),
        };
        let b1 = coherent_overlap(amp, x) * coherent_overlap(ZERO, y);
        let b2 = coherent_overlap(ZERO, x) * coherent_overlap(amp, y);
        let x1 = gi[0][0] * b1 + gi[0][1] * b2;
        let x2 = gi[1][0] * b1 + gi[1][1] * b2;
        for (coef, (f1, f2)) in [(x1 * c - x2 * sn, u1), (x1 * sn + x2 * c, u2)] {
            let mut contents = b.contents().to_vec();
            contents[p] = f1;
            contents[q] = f2;
            out.push(Branch::new(b.coeff() * coef, contents, b.env().to_vec()));
        }
    }
    BranchState::from_parts(s.modes().to_vec(), out, s.cap())
}

fn fock_image(f: &FockEnsemble, side: Side, amp: Complex64, theta: Option<f64>) -> Result<FockEnsemble> {
    let [m1, m2] = side.modes();
    let pos = |m: ModeId| f.modes().iter().position(|&x| x == m);
    let (p, q) = match (pos(m1), pos(m2)) {
        (Some(p), Some(q)) => (p, q),
        _ => return Err(Error::Structural(format!("state lacks the modes of side {side:?}"))),
    };
    let (d1, d2) = (f.dims()[p], f.dims()[q]);
    let coh = |d: usize| {
        let v = coherent_amplitudes(amp, d - 1);
        let n = v.norm();
        v / Complex64::new(n, 0.0)
    };
    let vac = |d: usize| DVector::from_fn(d, |i, _| if i == 0 { Complex64::new(1.0, 0.0) } else { ZERO });
    let u1 = coh(d1).kronecker(&vac(d2));
    let u2 = vac(d1).kronecker(&coh(d2));
    let gi = gram_inverse(u1.dotc(&u2));
    // ⟨w_k| = Σ_l g⁻¹_kl ⟨u_l|  ⇒  |w_k⟩ = Σ_l conj(g⁻¹_kl) |u_l⟩
    let w1 = &u1 * gi[0][0].conj() + &u2 * gi[0][1].conj();
    let w2 = &u1 * gi[1][0].conj() + &u2 * gi[1][1].conj();
    let (c, sn) = theta.map_or((1.0, 0.0), |t| (t.cos(), t.sin()));
    let r1 = &u1 * Complex64::new(c, 0.0) + &u2 * Complex64::new(sn, 0.0);
    let r2 = &u1 * Complex64::new(-sn, 0.0) + &u2 * Complex64::new(c, 0.0);
    f.apply_two_mode_outer(m1, m2, &[(r1, w1), (r2, w2)])
}

fn image(h: &HeraldedState, side: Side, theta: Option<f64>) -> Result<OutputState> {
    let amp = h.span_amplitude(side);
    Ok(match h.state() {
        OutputState::Branch(s) => OutputState::Branch(branch_image(s, side, amp, theta)?),
        OutputState::Fock(f) => OutputState::Fock(fock_image(f, side, amp, theta)?),
    })
}

fn weight(s: &OutputState) -> f64 {
    match s {
        OutputState::Branch(b) => b.norm_sqr(),
        OutputState::Fock(f) => f.trace(),
    }
}

/// Fraction of the state's weight outside the side's span {|A,0⟩, |0,A⟩}.
pub fn span_leakage(h: &HeraldedState, side: Side) -> Result<f64> {
    let inside = weight(&image(h, side, None)?);
    Ok((1.0 - inside / weight(h.state())).max(0.0))
}

/// The unnormalized image under the rotation (its trace is the image norm²).
pub fn rotation_image(h: &HeraldedState, side: Side, theta: f64) -> Result<OutputState> {
    let leakage = span_leakage(h, side)?;
    if leakage > LEAKAGE_TOL {
        return Err(Error::UnsupportedRotation { leakage });
    }
    image(h, side, Some(theta))
}

/// Rotates one side's effective qubit by θ and renormalizes the whole state.
pub fn rotate(h: &HeraldedState, side: Side, theta: f64) -> Result<HeraldedState> {
    let img = rotation_image(h, side, theta)?;
    let state = match img {
        OutputState::Branch(b) => OutputState::Branch(b.normalized()?),
        OutputState::Fock(f) => OutputState::Fock(f.normalized()?),
    };
    Ok(h.with_state(state))
}

/// Joint distribution of X, Y ∈ {−1, 0, 1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XYDistribution {
    /// `probs[x + 1][y + 1]`.
    pub probs: [[f64; 3]; 3],
}

impl XYDistribution {
    pub fn get(&self, x: i8, y: i8) -> f64 {
        self.probs[(x + 1) as usize][(y + 1) as usize]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().flatten().sum()
    }

    /// E[XY].
    pub fn correlation(&self) -> f64 {
        let mut c = 0.0;
        for (i, row) in self.probs.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                c += (i as f64 - 1.0) * (j as f64 - 1.0) * p;
            }
        }
        c
    }

    pub fn marginal_x(&self) -> [f64; 3] {
        self.probs.map(|row| row.iter().sum())
    }

    pub fn marginal_y(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for row in &self.probs {
            for (j, p) in row.iter().enumerate() {
                m[j] += p;
            }
        }
        m
    }

    fn add(&mut self, clicks: [bool; 4], p: f64) {
        let z = |b: bool| b as i8;
        let x = z(clicks[0]) - z(clicks[1]);
        let y = z(clicks[2]) - z(clicks[3]);
        self.probs[(x + 1) as usize][(y + 1) as usize] += p;
    }
}

fn output_positions(modes: &[ModeId]) -> Result<[usize; 4]> {
    let mut out = [0; 4];
    for (k, m) in ModeId::OUTPUTS.iter().enumerate() {
        out[k] = modes
            .iter()
            .position(|x| x == m)
            .ok_or_else(|| Error::Structural(format!("state lacks output mode {m}")))?;
    }
    Ok(out)
}

/// Unnormalized detection weights of all (X, Y) outcomes.
fn raw_distribution(state: &OutputState) -> Result<XYDistribution> {
    let pos = output_positions(state.modes())?;
    let mut dist = XYDistribution { probs: [[0.0; 3]; 3] };
    match state {
        OutputState::Branch(s) => {
            for pattern in 0..16u8 {
                let clicks = [0, 1, 2, 3].map(|k| pattern >> k & 1 == 1);
                let mut outcomes = vec![None; s.modes().len()];
                for k in 0..4 {
                    outcomes[pos[k]] = Some(if clicks[k] { Outcome::Click } else { Outcome::Silent });
                }
                dist.add(clicks, s.detection_probability(&outcomes));
            }
        }
        OutputState::Fock(f) => {
            f.for_each_occupation(|occ, w| dist.add(pos.map(|p| occ[p] > 0), w));
        }
    }
    Ok(dist)
}

/// Detection statistics without any rotation.
pub fn detection_distribution(state: &OutputState) -> Result<XYDistribution> {
    let mut dist = raw_distribution(state)?;
    let norm = weight(state);
    for p in dist.probs.iter_mut().flatten() {
        *p /= norm;
    }
    Ok(dist)
}

/// Rotates side I by θI and side II by θII, then detects all four outputs.
pub fn xy_distribution(h: &HeraldedState, theta_i: f64, theta_ii: f64) -> Result<XYDistribution> {
    let h1 = rotate(h, Side::I, theta_i)?;
    let h2 = rotate(&h1, Side::II, theta_ii)?;
    detection_distribution(h2.state())
}

/// C(θI, θII) = Σ X·Y p(X, Y).
pub fn correlation_oracle(h: &HeraldedState, theta_i: f64, theta_ii: f64) -> Result<f64> {
    Ok(xy_distribution(h, theta_i, theta_ii)?.correlation())
}

pub fn bell_oracle(h: &HeraldedState, angles: &BellAngles) -> Result<f64> {
    chsh::chsh_value(&|a, b| correlation_oracle(h, a, b), angles)
}

/// C(θI, θII) as an exact ratio of two bilinear forms in (1, cos 2θ, sin 2θ).
///
/// Each rotation is linear in (cos θ, sin θ), so every unnormalized detection
/// weight is quadratic in them on each side; nine samples fix both forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSurface {
    numerator: Matrix3<f64>,
    norm: Matrix3<f64>,
}

fn harmonics(theta: f64) -> Vector3<f64> {
    Vector3::new(1.0, (2.0 * theta).cos(), (2.0 * theta).sin())
}

impl CorrelationSurface {
    pub fn fit(h: &HeraldedState) -> Result<Self> {
        span_leakage_check(h)?;
        let samples = [0.0, PI / 3.0, 2.0 * PI / 3.0];
        let mut num = Matrix3::zeros();
        let mut den = Matrix3::zeros();
        for (k, &ti) in samples.iter().enumerate() {
            let hi = h.with_state(image(h, Side::I, Some(ti))?);
            for (l, &tii) in samples.iter().enumerate() {
                let img = image(&hi, Side::II, Some(tii))?;
                num[(k, l)] = raw_distribution(&img)?.correlation();
                den[(k, l)] = weight(&img);
            }
        }
        let f = Matrix3::from_rows(&samples.map(|t| harmonics(t).transpose()));
        let fi = f
            .try_inverse()
            .ok_or_else(|| Error::InternalConsistency("singular harmonic sample matrix".into()))?;
        Ok(CorrelationSurface {
            numerator: fi * num * fi.transpose(),
            norm: fi * den * fi.transpose(),
        })
    }

    pub fn correlation(&self, theta_i: f64, theta_ii: f64) -> f64 {
        let (u, v) = (harmonics(theta_i), harmonics(theta_ii));
        u.dot(&(self.numerator * v)) / u.dot(&(self.norm * v))
    }
}

/// Global CHSH maximum of the simulated state (same search as the closed form).
pub fn bell_max_oracle(h: &HeraldedState) -> Result<(f64, BellAngles)> {
    let surface = CorrelationSurface::fit(h)?;
    chsh::maximize(|a, b| Ok(surface.correlation(a, b)))
}

fn span_leakage_check(h: &HeraldedState) -> Result<()> {
    for side in [Side::I, Side::II] {
        let leakage = span_leakage(h, side)?;
        if leakage > LEAKAGE_TOL {
            return Err(Error::UnsupportedRotation { leakage });
        }
    }
    Ok(())
}
