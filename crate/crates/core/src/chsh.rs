//! Deterministic CHSH angle optimization shared by the closed-form and the
//! simulated correlation functions.
//!
//! Correlations here depend on the angles only through 2θ, so each angle is
//! π-periodic and the search runs over [0, π)⁴: a 64-point grid per angle,
//! then coordinate refinement with step halving down to 1e-10 rad.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use rayon::prelude::*;

use crate::error::Result;

const GRID: usize = 64;
const FINAL_STEP: f64 = 1e-10;
const MAX_MOVES: usize = 100_000;

/// The four analyzer angles of a CHSH experiment, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellAngles {
    pub theta_i: f64,
    pub theta_i_prime: f64,
    pub theta_ii: f64,
    pub theta_ii_prime: f64,
}

impl BellAngles {
    /// The textbook optimum for the singlet-like correlation cos(2θI − 2θII).
    pub const CANONICAL: BellAngles = BellAngles {
        theta_i: 0.0,
        theta_i_prime: FRAC_PI_4,
        theta_ii: FRAC_PI_8,
        theta_ii_prime: -FRAC_PI_8,
    };

    pub fn new(theta_i: f64, theta_i_prime: f64, theta_ii: f64, theta_ii_prime: f64) -> Self {
        BellAngles {
            theta_i,
            theta_i_prime,
            theta_ii,
            theta_ii_prime,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.theta_i, self.theta_i_prime, self.theta_ii, self.theta_ii_prime]
    }

    fn from_array(a: [f64; 4]) -> Self {
        BellAngles::new(a[0], a[1], a[2], a[3])
    }

    /// Each angle reduced modulo π into (−π/2, π/2].
    pub fn reduced(&self) -> Self {
        Self::from_array(self.as_array().map(wrap_half_pi))
    }

    /// Largest per-angle distance (mod π) to `target` after allowing every
    /// symmetry of the CHSH combination and a common rotation of all four angles.
    pub fn distance_modulo_symmetry(&self, target: &BellAngles) -> f64 {
        symmetry_orbit(self)
            .iter()
            .map(|o| shifted_distance(o, target))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Maps x to (−π/2, π/2] modulo π.
pub fn wrap_half_pi(x: f64) -> f64 {
    let mut y = x.rem_euclid(PI);
    if y > FRAC_PI_2 {
        y -= PI;
    }
    y
}

/// |C(a,b) + C(a,b′) + C(a′,b) − C(a′,b′)|.
pub fn chsh_value<F>(corr: &F, angles: &BellAngles) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let [a, ap, b, bp] = angles.as_array();
    Ok((corr(a, b)? + corr(a, bp)? + corr(ap, b)? - corr(ap, bp)?).abs())
}

/// Global maximum of the CHSH value over the four angles.
pub fn maximize<F>(corr: F) -> Result<(f64, BellAngles)>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    let step = PI / GRID as f64;
    let rows: Vec<Vec<f64>> = (0..GRID)
        .into_par_iter()
        .map(|i| {
            (0..GRID)
                .map(|j| corr(i as f64 * step, j as f64 * step))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    // For fixed (a, a′) the best (b, b′) decouple: B = |u_b + v_b′| with
    // u = C(a,·) + C(a′,·) and v = C(a,·) − C(a′,·).
    let mut best = (f64::NEG_INFINITY, [0usize; 4]);
    for a in 0..GRID {
        for ap in 0..GRID {
            let (mut umax, mut umin, mut vmax, mut vmin) = ((f64::NEG_INFINITY, 0), (f64::INFINITY, 0), (f64::NEG_INFINITY, 0), (f64::INFINITY, 0));
            for j in 0..GRID {
                let u = rows[a][j] + rows[ap][j];
                let v = rows[a][j] - rows[ap][j];
                if u > umax.0 {
                    umax = (u, j);
                }
                if u < umin.0 {
                    umin = (u, j);
                }
                if v > vmax.0 {
                    vmax = (v, j);
                }
                if v < vmin.0 {
                    vmin = (v, j);
                }
            }
            let hi = umax.0 + vmax.0;
            let lo = -(umin.0 + vmin.0);
            let cand = if hi >= lo {
                (hi, [a, ap, umax.1, vmax.1])
            } else {
                (lo, [a, ap, umin.1, vmin.1])
            };
            if cand.0 > best.0 {
                best = cand;
            }
        }
    }

    let mut x = best.1.map(|k| k as f64 * step);
    let mut value = chsh_value(&corr, &BellAngles::from_array(x))?;
    let mut h = step;
    let mut moves = 0;
    while h >= FINAL_STEP && moves < MAX_MOVES {
        let mut improved = false;
        for k in 0..4 {
            for dir in [1.0, -1.0] {
                let mut y = x;
                y[k] += dir * h;
                let v = chsh_value(&corr, &BellAngles::from_array(y))?;
                if v > value {
                    x = y;
                    value = v;
                    improved = true;
                    moves += 1;
                    break;
                }
            }
        }
        // Expand after progress so narrow ridges are followed quickly.
        h = if improved { (2.0 * h).min(step) } else { h / 2.0 };
    }
    Ok((value, BellAngles::from_array(x).reduced()))
}

fn symmetry_orbit(start: &BellAngles) -> Vec<[f64; 4]> {
    type Gen = fn([f64; 4]) -> [f64; 4];
    let gens: [Gen; 6] = [
        // b ↔ b′ with a′ shifted by π/2
        |[a, ap, b, bp]| [a, ap + FRAC_PI_2, bp, b],
        // a ↔ a′ with b′ shifted by π/2
        |[a, ap, b, bp]| [ap, a, b, bp + FRAC_PI_2],
        |[a, ap, b, bp]| [a + FRAC_PI_2, ap + FRAC_PI_2, b, bp],
        |[a, ap, b, bp]| [a, ap, b + FRAC_PI_2, bp + FRAC_PI_2],
        // mirror of side II (maps the symmetric to the antisymmetric herald)
        |[a, ap, b, bp]| [a, ap, -b, -bp],
        // global reflection
        |[a, ap, b, bp]| [-a, -ap, -b, -bp],
    ];
    let key = |x: &[f64; 4]| x.map(|v| (wrap_half_pi(v) * 1e6).round() as i64);
    let first = start.reduced().as_array();
    let mut seen = HashSet::from([key(&first)]);
    let mut orbit = vec![first];
    let mut i = 0;
    while i < orbit.len() {
        let cur = orbit[i];
        for g in gens {
            let next = g(cur).map(wrap_half_pi);
            if seen.insert(key(&next)) {
                orbit.push(next);
            }
        }
        i += 1;
    }
    orbit
}

/// min over a common shift δ of max_k dist_π(x_k − t_k − δ).
fn shifted_distance(x: &[f64; 4], target: &BellAngles) -> f64 {
    let t = target.as_array();
    let e: Vec<f64> = (0..4).map(|k| (x[k] - t[k]).rem_euclid(PI)).collect();
    let mut best = f64::INFINITY;
    for &start in &e {
        // Unwrap the others onto [start, start + π) and centre the span.
        let hi = e
            .iter()
            .map(|&v| if v < start { v + PI } else { v })
            .fold(start, f64::max);
        let delta = 0.5 * (start + hi);
        let worst = e
            .iter()
            .map(|&v| wrap_half_pi(v - delta).abs())
            .fold(0.0, f64::max);
        best = best.min(worst);
    }
    best
}
