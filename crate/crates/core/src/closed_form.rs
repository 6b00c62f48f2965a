//! Closed-form expressions for the heralded cat states: normalizations,
//! spectra, mutual information, correlation functions, CHSH maxima and the
//! large-amplitude asymptotics.
//!
//! Everything is parametrized by [`DisturbanceParams`]: μ is the overlap of
//! the two coherent components on one side, d the residual coherence between
//! the two branches, and the sign selects the herald.

use std::f64::consts::{LN_2, SQRT_2};
use std::fmt;

use num_complex::Complex64;

use crate::chsh::{self, BellAngles};
use crate::error::{Error, Result};

/// Symmetric (+) or antisymmetric (−) heralded superposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// (μ, d, ±).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceParams {
    pub mu: f64,
    pub d: f64,
    pub sign: Sign,
}

impl DisturbanceParams {
    pub fn new(mu: f64, d: f64, sign: Sign) -> Result<Self> {
        for (name, v) in [("mu", mu), ("d", d)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    domain: "[0, 1]",
                });
            }
        }
        let p = DisturbanceParams { mu, d, sign };
        if p.denominator() <= 0.0 {
            return Err(Error::Domain {
                name: "mu",
                value: mu,
                domain: "mu^2 d < 1 for the antisymmetric state",
            });
        }
        Ok(p)
    }

    /// 1 ± μ²d.
    fn denominator(&self) -> f64 {
        1.0 + self.sign.factor() * self.mu * self.mu * self.d
    }

    /// Normalization N±² = 1/(2(1 ± μ²d)) of the disturbed state.
    pub fn norm_sqr(&self) -> f64 {
        0.5 / self.denominator()
    }
}

/// N± = [2 ± 2e^(−2|α|²)]^(−1/2).
pub fn norm_n(alpha: Complex64, sign: Sign) -> Result<f64> {
    let den = 2.0 + 2.0 * sign.factor() * (-2.0 * alpha.norm_sqr()).exp();
    if den <= 0.0 {
        return Err(Error::Divergence(format!(
            "N{sign} diverges at |alpha|^2 = {}",
            alpha.norm_sqr()
        )));
    }
    Ok(den.powf(-0.5))
}

/// M± = [1 ± e^(−|α|²) sin 2θ]^(−1/2).
pub fn norm_m(alpha: Complex64, theta: f64, sign: Sign) -> Result<f64> {
    let den = 1.0 + sign.factor() * (-alpha.norm_sqr()).exp() * (2.0 * theta).sin();
    if den <= 0.0 {
        return Err(Error::Divergence(format!("M{sign} diverges at theta = {theta}")));
    }
    Ok(den.powf(-0.5))
}

/// Probability of the herald selecting the ± state: (1 ± μ²d)/2.
pub fn herald_probability(p: &DisturbanceParams) -> f64 {
    0.5 * p.denominator()
}

/// Global (p1, p2) and one-side reduced (p1r, p2r) eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPair {
    pub p1: f64,
    pub p2: f64,
    pub p1r: f64,
    pub p2r: f64,
}

pub fn spectra(p: &DisturbanceParams) -> Result<SpectrumPair> {
    let s = p.sign.factor();
    let (mu, d) = (p.mu, p.d);
    let den = 2.0 * p.denominator();
    Ok(SpectrumPair {
        p1: (1.0 + s * d) * (1.0 + mu * mu) / den,
        p2: (1.0 - s * d) * (1.0 - mu * mu) / den,
        p1r: (1.0 + s * mu * d) * (1.0 + mu) / den,
        p2r: (1.0 - s * mu * d) * (1.0 - mu) / den,
    })
}

/// Spectra with the reduced denominators as printed, 2(1 ± μd). Not trace-one
/// in general; kept for the comparison report.
pub fn spectra_printed(p: &DisturbanceParams) -> SpectrumPair {
    let s = p.sign.factor();
    let (mu, d) = (p.mu, p.d);
    let den = 2.0 * p.denominator();
    let den_r = 2.0 * (1.0 + s * mu * d);
    SpectrumPair {
        p1: (1.0 + s * d) * (1.0 + mu * mu) / den,
        p2: (1.0 - s * d) * (1.0 - mu * mu) / den,
        p1r: (1.0 + s * mu * d) * (1.0 + mu) / den_r,
        p2r: (1.0 - s * mu * d) * (1.0 - mu) / den_r,
    }
}

/// The dephasing coherence as printed, √(1 − a²).
pub fn printed_dephasing_d(a: f64) -> f64 {
    (1.0 - a * a).max(0.0).sqrt()
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// I = p1 ln p1 + p2 ln p2 − 2(p1r ln p1r + p2r ln p2r), in nats.
pub fn mutual_information(p: &DisturbanceParams) -> Result<f64> {
    Ok(mutual_information_of(&spectra(p)?))
}

pub fn mutual_information_of(s: &SpectrumPair) -> f64 {
    xlnx(s.p1) + xlnx(s.p2) - 2.0 * (xlnx(s.p1r) + xlnx(s.p2r))
}

/// Which square-root factor enters N₃.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CorrelationVariant {
    /// 1/√((1 − μ² sin²2θI)(1 − μ² sin²2θII)).
    #[default]
    Squared,
    /// 1/√((1 − μ sin²2θI)(1 − μ sin²2θII)), as printed.
    Printed,
}

impl fmt::Display for CorrelationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationVariant::Squared => "squared",
            CorrelationVariant::Printed => "printed",
        })
    }
}

const CLAMP: f64 = 1.0 + 1e-9;

/// C± = N±²((N₁+N₂) cos2θI cos2θII ∓ 2dN₃ sin2θI sin2θII), clamped to ±(1 + 1e-9).
pub fn correlation(
    theta_i: f64,
    theta_ii: f64,
    p: &DisturbanceParams,
    variant: CorrelationVariant,
) -> Result<f64> {
    let (s1, c1) = (2.0 * theta_i).sin_cos();
    let (s2, c2) = (2.0 * theta_ii).sin_cos();
    let mu = p.mu;
    let f1 = (1.0 + mu * s1) * (1.0 - mu * s2);
    let f2 = (1.0 - mu * s1) * (1.0 + mu * s2);
    let m3 = match variant {
        CorrelationVariant::Squared => mu * mu,
        CorrelationVariant::Printed => mu,
    };
    let f3 = (1.0 - m3 * s1 * s1) * (1.0 - m3 * s2 * s2);
    if f1 <= 0.0 || f2 <= 0.0 || f3 <= 0.0 {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            domain: "mu < 1 for correlation functions",
        });
    }
    let (n1, n2, n3) = (1.0 / f1, 1.0 / f2, 1.0 / f3.sqrt());
    let c = p.norm_sqr() * ((n1 + n2) * c1 * c2 - p.sign.factor() * 2.0 * p.d * n3 * s1 * s2);
    Ok(c.clamp(-CLAMP, CLAMP))
}

/// |C(θI,θII) + C(θI,θII′) + C(θI′,θII) − C(θI′,θII′)|.
pub fn bell_factor(
    angles: &BellAngles,
    p: &DisturbanceParams,
    variant: CorrelationVariant,
) -> Result<f64> {
    chsh::chsh_value(&|a, b| correlation(a, b, p, variant), angles)
}

/// Global CHSH maximum of the closed-form correlation.
pub fn bell_max(p: &DisturbanceParams, variant: CorrelationVariant) -> Result<(f64, BellAngles)> {
    // Validate the domain once so grid errors cannot hide behind the optimizer.
    correlation(0.0, 0.0, p, variant)?;
    chsh::maximize(|a, b| correlation(a, b, p, variant))
}

/// (I, B_max) for large amplitudes with residual coherence `a`.
pub fn asymptotic_decoherence(a: f64) -> (f64, f64) {
    let i = 2.0 * LN_2 + xlnx((1.0 + a) / 2.0) + xlnx((1.0 - a) / 2.0);
    (i, SQRT_2 * (1.0 + a))
}

/// Balanced field-arm losses: the decoherence asymptotics with a → e^(−2R n̄).
pub fn asymptotic_loss(r: f64, n_mean: f64) -> (f64, f64) {
    asymptotic_decoherence((-2.0 * r * n_mean).exp())
}
