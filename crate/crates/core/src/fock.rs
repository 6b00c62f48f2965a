//! Truncated Fock-space simulator used as an independent oracle for the
//! branch calculus.
//!
//! States are kept as low-rank ensembles ρ = Σ_k |v_k⟩⟨v_k| of dense
//! vectors over a row-major tensor product (last mode fastest). Channels are
//! applied through Kraus operators extracted from explicit unitaries acting
//! on an ancilla, and the member list is re-orthogonalized through its Gram
//! matrix after each channel, so the rank stays at the physical rank of the
//! state rather than growing with every loss.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::branch::{BranchState, ModeContent, Outcome};
use crate::error::{check_unit_interval, Error, Result};
use crate::linalg::{entropy, hermitian_eigen, hermitize, max_abs, trace_norm};
use crate::mode::{ModeId, ModeKind};

pub const MAX_CUTOFF: usize = 1024;
pub const MAX_MEAN_PHOTONS: f64 = 36.0;
const MIN_CUTOFF: usize = 4;
/// Norm lost to truncation by a unitary before it is treated as an error.
pub const TRUNCATION_TOL: f64 = 1e-8;
/// Ensemble members below this fraction of the largest weight are dropped.
const RANK_TOL: f64 = 1e-12;
/// Largest Hilbert-space dimension for which a dense density is built.
pub const MAX_DENSE_DIM: usize = 4096;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// How many Fock levels to keep for a coherent amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FockCutoffPolicy {
    pub explicit_cutoff: Option<usize>,
    pub tail_tolerance: f64,
}

impl Default for FockCutoffPolicy {
    fn default() -> Self {
        FockCutoffPolicy {
            explicit_cutoff: None,
            tail_tolerance: 1e-12,
        }
    }
}

impl FockCutoffPolicy {
    pub fn with_tolerance(tail_tolerance: f64) -> Self {
        FockCutoffPolicy {
            explicit_cutoff: None,
            tail_tolerance,
        }
    }

    pub fn explicit(n_max: usize) -> Self {
        FockCutoffPolicy {
            explicit_cutoff: Some(n_max),
            ..Default::default()
        }
    }

    /// Highest kept photon number for a Poisson distribution of the given mean.
    pub fn cutoff(&self, mean: f64) -> Result<usize> {
        if !(0.0..=MAX_MEAN_PHOTONS).contains(&mean) {
            return Err(Error::Domain {
                name: "|alpha|^2",
                value: mean,
                domain: "[0, 36] for the Fock engine",
            });
        }
        if let Some(n) = self.explicit_cutoff {
            if n > MAX_CUTOFF {
                return Err(Error::Resource(format!("cutoff {n} exceeds {MAX_CUTOFF}")));
            }
            return Ok(n);
        }
        let tail = poisson_tails(mean, MAX_CUTOFF + 1);
        (MIN_CUTOFF..=MAX_CUTOFF)
            .find(|&n| tail[n + 1] <= self.tail_tolerance)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "no cutoff up to {MAX_CUTOFF} reaches tail {:e}",
                    self.tail_tolerance
                ))
            })
    }
}

/// tail[n] = P(N ≥ n) for N ~ Poisson(mean), n = 0..=len.
fn poisson_tails(mean: f64, len: usize) -> Vec<f64> {
    let mut p = vec![0.0; len + 2];
    let mut term = (-mean).exp();
    for (k, slot) in p.iter_mut().enumerate() {
        *slot = term;
        term *= mean / (k + 1) as f64;
    }
    let mut tail = vec![0.0; len + 2];
    let mut acc = 0.0;
    for k in (0..len + 2).rev() {
        acc += p[k];
        tail[k] = acc;
    }
    tail
}

/// Exact coherent-state amplitudes e^(−|α|²/2) αⁿ/√n! for n = 0..=n_max (not renormalized).
pub fn coherent_amplitudes(alpha: Complex64, n_max: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(n_max + 1);
    let mut term = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..=n_max {
        v[n] = term;
        term *= alpha / ((n + 1) as f64).sqrt();
    }
    v
}

/// Normalized truncated coherent state.
pub fn coherent_vector(alpha: Complex64, policy: &FockCutoffPolicy) -> Result<DVector<Complex64>> {
    let n_max = policy.cutoff(alpha.norm_sqr())?;
    let v = coherent_amplitudes(alpha, n_max);
    let norm = v.norm();
    Ok(v / Complex64::new(norm, 0.0))
}

pub fn fock_basis(n: usize, dim: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(dim);
    v[n] = ONE;
    v
}

/// Two-mode beam-splitter unitary restricted to each total-photon block N:
/// U_N[k′, k] = ⟨k′, N−k′| exp(iθ(a†b + ab†)) |k, N−k⟩ with cos θ = √t.
fn beamsplitter_blocks(transmittance: f64, n_total_max: usize) -> Vec<DMatrix<Complex64>> {
    let theta = transmittance.sqrt().clamp(-1.0, 1.0).acos();
    (0..=n_total_max)
        .map(|n| {
            let mut h = DMatrix::<f64>::zeros(n + 1, n + 1);
            for k in 0..n {
                let x = (((k + 1) * (n - k)) as f64).sqrt();
                h[(k + 1, k)] = x;
                h[(k, k + 1)] = x;
            }
            let eig = SymmetricEigen::new(h);
            let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
            let phases = DMatrix::from_diagonal(
                &eig.eigenvalues.map(|l| Complex64::from_polar(1.0, theta * l)),
            );
            &v * phases * v.transpose()
        })
        .collect()
}

/// Kraus operators ⟨l|_anc U_BS |·⟩|0⟩_anc of a beam splitter of reflectivity
/// `r` onto a vacuum ancilla, for a mode of dimension `dim`.
pub fn loss_kraus(r: f64, dim: usize) -> Vec<DMatrix<Complex64>> {
    let blocks = beamsplitter_blocks(1.0 - r, dim.saturating_sub(1));
    (0..dim)
        .map(|l| {
            let mut k = DMatrix::zeros(dim, dim);
            for n in l..dim {
                k[(n - l, n)] = blocks[n][(n - l, n)];
            }
            k
        })
        .filter(|k| k.iter().any(|z| z.norm() > 0.0))
        .collect()
}

/// Kraus operators of a photon mode coupled to a qubit environment by the
/// controlled unitary |0⟩|g⟩ → |0⟩|e₁⟩, |1⟩|g⟩ → |1⟩|e₂⟩, with
/// |e₁⟩ = |0⟩, |e₂⟩ = a|0⟩ + √(1−|a|²)|1⟩.
pub fn dephasing_kraus(a: Complex64) -> Vec<DMatrix<Complex64>> {
    let b = Complex64::new((1.0 - a.norm_sqr()).max(0.0).sqrt(), 0.0);
    // rotation taking |0⟩ to |e₂⟩
    let rot = DMatrix::from_row_slice(2, 2, &[a, -b.conj(), b, a.conj()]);
    // controlled unitary on photon ⊗ ancilla, photon index major
    let mut u = DMatrix::<Complex64>::zeros(4, 4);
    u[(0, 0)] = ONE;
    u[(1, 1)] = ONE;
    for i in 0..2 {
        for j in 0..2 {
            u[(2 + i, 2 + j)] = rot[(i, j)];
        }
    }
    (0..2)
        .map(|anc| {
            let mut k = DMatrix::zeros(2, 2);
            for out in 0..2 {
                for inp in 0..2 {
                    k[(out, inp)] = u[(2 * out + anc, 2 * inp)];
                }
            }
            k
        })
        .collect()
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Applies a (possibly rectangular) single-mode operator to one tensor factor.
fn apply_local_vec(
    v: &DVector<Complex64>,
    dims: &[usize],
    pos: usize,
    op: &DMatrix<Complex64>,
) -> DVector<Complex64> {
    let outer: usize = dims[..pos].iter().product();
    let inner: usize = dims[pos + 1..].iter().product();
    let (d_out, d_in) = (op.nrows(), op.ncols());
    let mut out = DVector::zeros(outer * d_out * inner);
    for o in 0..outer {
        for r in 0..d_out {
            for c in 0..d_in {
                let a = op[(r, c)];
                if a == ZERO {
                    continue;
                }
                let src = (o * d_in + c) * inner;
                let dst = (o * d_out + r) * inner;
                for i in 0..inner {
                    out[dst + i] += a * v[src + i];
                }
            }
        }
    }
    out
}

/// Flat offsets of all index combinations of the modes at `positions`.
fn mode_offsets(dims: &[usize], strides: &[usize], positions: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &p in positions {
        out = out
            .iter()
            .flat_map(|&a| (0..dims[p]).map(move |k| a + k * strides[p]))
            .collect();
    }
    out
}

/// Enumerates flat offsets (for two stride sets) of all multi-indices in
/// which the modes `skip` are fixed at zero.
fn base_offsets(dims: &[usize], skip: &[usize], s_in: &[usize], s_out: &[usize]) -> Vec<(usize, usize)> {
    let free: Vec<usize> = (0..dims.len()).filter(|i| !skip.contains(i)).collect();
    let mut out = vec![(0usize, 0usize)];
    for &m in &free {
        let mut next = Vec::with_capacity(out.len() * dims[m]);
        for &(a, b) in &out {
            for k in 0..dims[m] {
                next.push((a + k * s_in[m], b + k * s_out[m]));
            }
        }
        out = next;
    }
    out
}

/// Density operator over a set of truncated modes.
#[derive(Debug, Clone)]
pub struct FockDensity {
    modes: Vec<ModeId>,
    dims: Vec<usize>,
    data: DMatrix<Complex64>,
}

impl FockDensity {
    pub fn new(modes: Vec<ModeId>, dims: Vec<usize>, data: DMatrix<Complex64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if modes.len() != dims.len() || data.nrows() != n || data.ncols() != n {
            return Err(Error::Structural("density dimensions do not match its modes".into()));
        }
        let skew = max_abs(&(&data - data.adjoint()));
        if skew > 1e-12 * max_abs(&data).max(1.0) {
            return Err(Error::InternalConsistency(format!(
                "density is not Hermitian (deviation {skew:e})"
            )));
        }
        Ok(FockDensity {
            modes,
            dims,
            data: hermitize(&data),
        })
    }

    pub fn from_vector(modes: Vec<ModeId>, dims: Vec<usize>, v: &DVector<Complex64>) -> Result<Self> {
        Self::new(modes, dims, v * v.adjoint())
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.data * &self.data).trace().re / (self.trace() * self.trace())
    }

    fn position(&self, m: ModeId) -> Result<usize> {
        self.modes
            .iter()
            .position(|&x| x == m)
            .ok_or_else(|| Error::Structural(format!("mode {m} is not part of the density")))
    }

    /// Eigenvalues of ρ/tr ρ, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let tr = self.trace();
        let ev: Vec<f64> = hermitian_eigen(&self.data).0.into_iter().map(|x| x / tr).collect();
        if let Some(&min) = ev.first() {
            if min < -1e-10 {
                return Err(Error::InternalConsistency(format!(
                    "density has negative eigenvalue {min:e}"
                )));
            }
        }
        Ok(ev)
    }

    /// Von Neumann entropy of ρ/tr ρ in nats.
    pub fn entropy(&self) -> Result<f64> {
        Ok(entropy(&self.eigenvalues()?))
    }

    pub fn partial_trace(&self, keep: &[ModeId]) -> Result<FockDensity> {
        if keep.is_empty() {
            return Err(Error::Structural("partial trace must keep at least one mode".into()));
        }
        let kp: Vec<usize> = keep.iter().map(|&m| self.position(m)).collect::<Result<_>>()?;
        let rp: Vec<usize> = (0..self.modes.len()).filter(|i| !kp.contains(i)).collect();
        let s = strides(&self.dims);
        let ko = mode_offsets(&self.dims, &s, &kp);
        let ro = mode_offsets(&self.dims, &s, &rp);
        let n = ko.len();
        let mut out = DMatrix::zeros(n, n);
        for (i, &a) in ko.iter().enumerate() {
            for (j, &b) in ko.iter().enumerate() {
                out[(i, j)] = ro.iter().map(|&r| self.data[(a + r, b + r)]).sum();
            }
        }
        FockDensity::new(
            kp.iter().map(|&p| self.modes[p]).collect(),
            kp.iter().map(|&p| self.dims[p]).collect(),
            out,
        )
    }

    /// Beam-splitter loss of reflectivity `r` on one mode, ancilla traced.
    pub fn loss_channel(&self, mode: ModeId, r: f64) -> Result<FockDensity> {
        check_unit_interval("R", r)?;
        let p = self.position(mode)?;
        let n = self.data.nrows();
        let mut out = DMatrix::zeros(n, n);
        for k in loss_kraus(r, self.dims[p]) {
            // K ρ K† built column by column, then row by row through the adjoint.
            let mut left = DMatrix::zeros(n, n);
            for c in 0..n {
                let col = apply_local_vec(&self.data.column(c).into_owned(), &self.dims, p, &k);
                left.set_column(c, &col);
            }
            let left_adj = left.adjoint();
            let mut full = DMatrix::zeros(n, n);
            for c in 0..n {
                let col = apply_local_vec(&left_adj.column(c).into_owned(), &self.dims, p, &k);
                full.set_column(c, &col);
            }
            out += full.adjoint();
        }
        FockDensity::new(self.modes.clone(), self.dims.clone(), out)
    }
}

/// Mixed state ρ = Σ_k |v_k⟩⟨v_k| over truncated modes (unnormalized members).
#[derive(Debug, Clone)]
pub struct FockEnsemble {
    modes: Vec<ModeId>,
    dims: Vec<usize>,
    members: Vec<DVector<Complex64>>,
}

impl FockEnsemble {
    /// Pure product state.
    pub fn product(factors: Vec<(ModeId, DVector<Complex64>)>) -> Result<Self> {
        let mut modes = Vec::new();
        let mut dims = Vec::new();
        let mut v = DVector::from_element(1, ONE);
        for (m, f) in factors {
            if modes.contains(&m) {
                return Err(Error::Structural(format!("mode {m} listed twice")));
            }
            modes.push(m);
            dims.push(f.len());
            v = v.kronecker(&f);
        }
        Ok(FockEnsemble {
            modes,
            dims,
            members: vec![v],
        })
    }

    /// Tensors a new mode in the pure state `v` onto every member.
    pub fn with_mode(&self, mode: ModeId, v: &DVector<Complex64>) -> Result<Self> {
        if self.modes.contains(&mode) {
            return Err(Error::Structural(format!("mode {mode} already present")));
        }
        let mut out = self.clone();
        out.modes.push(mode);
        out.dims.push(v.len());
        for m in &mut out.members {
            *m = m.kronecker(v);
        }
        Ok(out)
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn members(&self) -> &[DVector<Complex64>] {
        &self.members
    }

    pub fn rank(&self) -> usize {
        self.members.len()
    }

    pub fn trace(&self) -> f64 {
        self.members.iter().map(|v| v.norm_squared()).sum()
    }

    fn position(&self, m: ModeId) -> Result<usize> {
        self.modes
            .iter()
            .position(|&x| x == m)
            .ok_or_else(|| Error::Structural(format!("mode {m} is not part of the state")))
    }

    fn map_members(&self, dims: Vec<usize>, f: impl Fn(&DVector<Complex64>) -> DVector<Complex64>) -> Self {
        FockEnsemble {
            modes: self.modes.clone(),
            dims,
            members: self.members.iter().map(f).collect(),
        }
    }

    fn check_norm(&self, before: f64) -> Result<()> {
        let lost = before - self.trace();
        if lost.abs() > TRUNCATION_TOL * before.max(1e-300) {
            return Err(Error::Truncation { lost });
        }
        Ok(())
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::InternalConsistency(format!("cannot normalize trace {tr}")));
        }
        let s = Complex64::new(1.0 / tr.sqrt(), 0.0);
        Ok(self.map_members(self.dims.clone(), |v| v * s))
    }

    pub fn relabel(&self, from: ModeId, to: ModeId) -> Result<Self> {
        let p = self.position(from)?;
        if from != to && self.modes.contains(&to) {
            return Err(Error::Structural(format!("mode {to} already present")));
        }
        if from.kind() != to.kind() {
            return Err(Error::Structural(format!("cannot relabel {from} as {to}")));
        }
        let mut out = self.clone();
        out.modes[p] = to;
        Ok(out)
    }

    /// Applies a single-mode linear map (rows = new dimension).
    pub fn apply_local(&self, mode: ModeId, op: &DMatrix<Complex64>) -> Result<Self> {
        let p = self.position(mode)?;
        if op.ncols() != self.dims[p] {
            return Err(Error::Structural(format!(
                "operator on {mode} expects dimension {}, mode has {}",
                op.ncols(),
                self.dims[p]
            )));
        }
        let mut dims = self.dims.clone();
        dims[p] = op.nrows();
        Ok(self.map_members(dims, |v| apply_local_vec(v, &self.dims, p, op)))
    }

    /// Changes the number of kept levels of one mode (zero padding or truncation).
    pub fn resize_mode(&self, mode: ModeId, dim: usize) -> Result<Self> {
        let p = self.position(mode)?;
        let op = DMatrix::from_fn(dim, self.dims[p], |r, c| if r == c { ONE } else { ZERO });
        let before = self.trace();
        let out = self.apply_local(mode, &op)?;
        out.check_norm(before)?;
        Ok(out)
    }

    /// Applies Σ_j K_j ρ K_j† on one mode and re-compresses the ensemble.
    pub fn apply_kraus(&self, mode: ModeId, ops: &[DMatrix<Complex64>]) -> Result<Self> {
        let p = self.position(mode)?;
        let mut members = Vec::with_capacity(self.members.len() * ops.len());
        let mut dims = self.dims.clone();
        for k in ops {
            dims[p] = k.nrows();
            for v in &self.members {
                members.push(apply_local_vec(v, &self.dims, p, k));
            }
        }
        Ok(FockEnsemble {
            modes: self.modes.clone(),
            dims,
            members,
        }
        .compress())
    }

    /// Beam splitter with the symmetric convention; output dimensions may
    /// differ from input dimensions (norm loss beyond tolerance is an error).
    pub fn apply_beamsplitter(
        &self,
        m1: ModeId,
        m2: ModeId,
        transmittance: f64,
        out_dims: Option<(usize, usize)>,
    ) -> Result<Self> {
        check_unit_interval("transmittance", transmittance)?;
        let (p, q) = (self.position(m1)?, self.position(m2)?);
        if p == q {
            return Err(Error::Structural("beam splitter needs two distinct modes".into()));
        }
        let (d1, d2) = (self.dims[p], self.dims[q]);
        let (o1, o2) = out_dims.unwrap_or((d1, d2));
        let blocks = beamsplitter_blocks(transmittance, d1 + d2 - 2);
        let mut new_dims = self.dims.clone();
        new_dims[p] = o1;
        new_dims[q] = o2;
        let (s_in, s_out) = (strides(&self.dims), strides(&new_dims));
        let bases = base_offsets(&self.dims, &[p, q], &s_in, &s_out);
        let total_out: usize = new_dims.iter().product();
        let before = self.trace();
        let members = self
            .members
            .iter()
            .map(|v| {
                let mut out = DVector::zeros(total_out);
                for &(bi, bo) in &bases {
                    for (n, u) in blocks.iter().enumerate() {
                        let k_lo = n.saturating_sub(d2 - 1);
                        let k_hi = n.min(d1 - 1);
                        if k_lo > k_hi {
                            continue;
                        }
                        let ko_lo = n.saturating_sub(o2 - 1);
                        let ko_hi = n.min(o1 - 1);
                        if ko_lo > ko_hi {
                            continue;
                        }
                        for ko in ko_lo..=ko_hi {
                            let mut acc = ZERO;
                            for k in k_lo..=k_hi {
                                acc += u[(ko, k)] * v[bi + k * s_in[p] + (n - k) * s_in[q]];
                            }
                            out[bo + ko * s_out[p] + (n - ko) * s_out[q]] = acc;
                        }
                    }
                }
                out
            })
            .collect();
        let out = FockEnsemble {
            modes: self.modes.clone(),
            dims: new_dims,
            members,
        };
        out.check_norm(before)?;
        Ok(out)
    }

    /// exp(iπ n̂_photon n̂_field).
    pub fn apply_cross_kerr(&self, photon_mode: ModeId, field_mode: ModeId) -> Result<Self> {
        if photon_mode.kind() != ModeKind::Photon || field_mode.kind() != ModeKind::Field {
            return Err(Error::Structural("cross-Kerr needs (photon, field) modes".into()));
        }
        let (p, q) = (self.position(photon_mode)?, self.position(field_mode)?);
        let s = strides(&self.dims);
        let (dp, dq) = (self.dims[p], self.dims[q]);
        Ok(self.map_members(self.dims.clone(), |v| {
            let mut out = v.clone();
            for (i, z) in out.iter_mut().enumerate() {
                let n1 = (i / s[p]) % dp;
                let n2 = (i / s[q]) % dq;
                if (n1 * n2) % 2 == 1 {
                    *z = -*z;
                }
            }
            out
        }))
    }

    pub fn apply_phase(&self, mode: ModeId, phi: f64) -> Result<Self> {
        let p = self.position(mode)?;
        let op = DMatrix::from_fn(self.dims[p], self.dims[p], |r, c| {
            if r == c {
                Complex64::from_polar(1.0, phi * r as f64)
            } else {
                ZERO
            }
        });
        self.apply_local(mode, &op)
    }

    pub fn apply_loss(&self, mode: ModeId, r: f64) -> Result<Self> {
        check_unit_interval("R", r)?;
        let p = self.position(mode)?;
        if r == 0.0 {
            return Ok(self.clone());
        }
        self.apply_kraus(mode, &loss_kraus(r, self.dims[p]))
    }

    pub fn apply_env_dephasing(&self, photon_mode: ModeId, a: Complex64) -> Result<Self> {
        let p = self.position(photon_mode)?;
        if self.dims[p] != 2 || photon_mode.kind() != ModeKind::Photon {
            return Err(Error::Structural("dephasing acts on 0/1 photon modes".into()));
        }
        if a.norm() > 1.0 + 1e-15 {
            return Err(Error::Domain {
                name: "overlap_a",
                value: a.norm(),
                domain: "|a| <= 1",
            });
        }
        self.apply_kraus(photon_mode, &dephasing_kraus(a))
    }

    /// Applies Σ_k |ket_k⟩⟨bra_k| on the joint space of two modes
    /// (joint index n₁·d₂ + n₂); the map need not be unitary.
    pub fn apply_two_mode_outer(
        &self,
        m1: ModeId,
        m2: ModeId,
        terms: &[(DVector<Complex64>, DVector<Complex64>)],
    ) -> Result<Self> {
        let (p, q) = (self.position(m1)?, self.position(m2)?);
        if p == q {
            return Err(Error::Structural("two-mode map needs two distinct modes".into()));
        }
        let joint = self.dims[p] * self.dims[q];
        if terms.iter().any(|(k, b)| k.len() != joint || b.len() != joint) {
            return Err(Error::Structural(format!("two-mode map must act on dimension {joint}")));
        }
        let s = strides(&self.dims);
        let ko = mode_offsets(&self.dims, &s, &[p, q]);
        let rest: Vec<usize> = (0..self.modes.len()).filter(|&i| i != p && i != q).collect();
        let ro = mode_offsets(&self.dims, &s, &rest);
        Ok(self.map_members(self.dims.clone(), |v| {
            let mut out = DVector::zeros(v.len());
            let mut local = DVector::zeros(joint);
            for &r in &ro {
                for (i, &k) in ko.iter().enumerate() {
                    local[i] = v[k + r];
                }
                for (ket, bra) in terms {
                    let c = bra.dotc(&local);
                    if c == ZERO {
                        continue;
                    }
                    for (i, &k) in ko.iter().enumerate() {
                        out[k + r] += c * ket[i];
                    }
                }
            }
            out
        }))
    }

    /// Probability weight of every multi-index, visited as (occupations, |amplitude|²) summed over members.
    pub fn for_each_occupation(&self, mut f: impl FnMut(&[usize], f64)) {
        let s = strides(&self.dims);
        let mut occ = vec![0usize; self.dims.len()];
        for v in &self.members {
            for (idx, z) in v.iter().enumerate() {
                let w = z.norm_sqr();
                if w == 0.0 {
                    continue;
                }
                for (k, o) in occ.iter_mut().enumerate() {
                    *o = (idx / s[k]) % self.dims[k];
                }
                f(&occ, w);
            }
        }
    }

    /// Ideal vacuum / non-vacuum detection; returns the renormalized state and probability.
    pub fn project_yes_no(&self, mode: ModeId, outcome: Outcome) -> Result<(Self, f64)> {
        let p = self.position(mode)?;
        let d = self.dims[p];
        let op = DMatrix::from_fn(d, d, |r, c| match (outcome, r == c, r) {
            (Outcome::Silent, true, 0) => ONE,
            (Outcome::Click, true, r) if r > 0 => ONE,
            _ => ZERO,
        });
        let before = self.trace();
        let out = self.apply_local(mode, &op)?;
        let prob = out.trace() / before;
        if !(prob >= crate::branch::HERALD_MIN_PROB) {
            return Err(Error::HeraldImpossible { prob });
        }
        Ok((out.normalized()?, prob))
    }

    /// Partial trace over `modes`.
    pub fn trace_out(&self, modes: &[ModeId]) -> Result<Self> {
        let mut cur = self.clone();
        for &m in modes {
            let p = cur.position(m)?;
            let d = cur.dims[p];
            let mut members = Vec::with_capacity(cur.members.len() * d);
            for n in 0..d {
                let bra = DMatrix::from_fn(1, d, |_, c| if c == n { ONE } else { ZERO });
                for v in &cur.members {
                    members.push(apply_local_vec(v, &cur.dims, p, &bra));
                }
            }
            let mut dims = cur.dims.clone();
            dims.remove(p);
            let mut modes = cur.modes.clone();
            modes.remove(p);
            cur = FockEnsemble { modes, dims, members }.compress();
        }
        Ok(cur)
    }

    pub fn keep_only(&self, keep: &[ModeId]) -> Result<Self> {
        for &m in keep {
            self.position(m)?;
        }
        let drop: Vec<ModeId> = self.modes.iter().copied().filter(|m| !keep.contains(m)).collect();
        self.trace_out(&drop)
    }

    fn gram(&self) -> DMatrix<Complex64> {
        let m = self.members.len();
        DMatrix::from_fn(m, m, |i, j| self.members[i].dotc(&self.members[j]))
    }

    /// Re-expresses the ensemble in its orthogonal eigen-members, dropping
    /// weights below RANK_TOL of the largest.
    pub fn compress(&self) -> Self {
        if self.members.len() <= 1 {
            return self.clone();
        }
        let (vals, vecs) = hermitian_eigen(&self.gram());
        let top = vals.last().copied().unwrap_or(0.0);
        let mut members = Vec::new();
        for (j, &l) in vals.iter().enumerate().rev() {
            if l <= RANK_TOL * top || l <= 0.0 {
                continue;
            }
            let mut w = DVector::zeros(self.members[0].len());
            for (i, v) in self.members.iter().enumerate() {
                w.axpy(vecs[(i, j)], v, ONE);
            }
            members.push(w);
        }
        FockEnsemble {
            modes: self.modes.clone(),
            dims: self.dims.clone(),
            members,
        }
    }

    /// Normalized nonzero eigenvalues of ρ, descending.
    pub fn spectrum(&self) -> Vec<f64> {
        let tr = self.trace();
        let mut ev: Vec<f64> = hermitian_eigen(&self.gram())
            .0
            .into_iter()
            .map(|l| (l / tr).max(0.0))
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.spectrum())
    }

    /// Reduced density on `keep` (small subsystems only).
    pub fn reduced_density(&self, keep: &[ModeId]) -> Result<FockDensity> {
        let kp: Vec<usize> = keep.iter().map(|&m| self.position(m)).collect::<Result<_>>()?;
        let kd: Vec<usize> = kp.iter().map(|&p| self.dims[p]).collect();
        let n: usize = kd.iter().product();
        if n > MAX_DENSE_DIM {
            return Err(Error::Resource(format!("reduced density of dimension {n}")));
        }
        // Permute each member into (kept, rest) order and accumulate M M†.
        let s = strides(&self.dims);
        let rp: Vec<usize> = (0..self.modes.len()).filter(|i| !kp.contains(i)).collect();
        let ko = mode_offsets(&self.dims, &s, &kp);
        let ro = mode_offsets(&self.dims, &s, &rp);
        let mut rho = DMatrix::zeros(n, n);
        for v in &self.members {
            let m = DMatrix::from_fn(n, ro.len(), |i, j| v[ko[i] + ro[j]]);
            rho += &m * m.adjoint();
        }
        FockDensity::new(kp.iter().map(|&p| self.modes[p]).collect(), kd, rho)
    }

    pub fn to_density(&self) -> Result<FockDensity> {
        let modes = self.modes.clone();
        self.reduced_density(&modes)
    }

    /// Uhlmann fidelity F = ‖A†B‖₁² / (tr ρ tr σ) for ρ = AA†, σ = BB†.
    pub fn fidelity(&self, other: &FockEnsemble) -> Result<f64> {
        if self.modes != other.modes || self.dims != other.dims {
            return Err(Error::Structural("fidelity between differently shaped states".into()));
        }
        let overlap = DMatrix::from_fn(self.members.len(), other.members.len(), |i, j| {
            self.members[i].dotc(&other.members[j])
        });
        let t = trace_norm(&overlap);
        Ok(t * t / (self.trace() * other.trace()))
    }

    /// Expands a branch state in the Fock basis with the given per-mode dimensions.
    pub fn from_branch_state(s: &BranchState, dims: &[usize]) -> Result<Self> {
        if dims.len() != s.modes().len() {
            return Err(Error::Structural("one dimension per mode required".into()));
        }
        let kets: Vec<DVector<Complex64>> = s
            .branches()
            .iter()
            .map(|b| {
                let mut v = DVector::from_element(1, ONE);
                for (c, &d) in b.contents().iter().zip(dims) {
                    let f = match *c {
                        ModeContent::Photon(n) => fock_basis(n as usize, d),
                        ModeContent::Field(x) => coherent_amplitudes(x, d - 1),
                    };
                    v = v.kronecker(&f);
                }
                v
            })
            .collect();
        let keep = vec![true; s.modes().len()];
        let (w, _) = s.density_in_branch_basis(&keep);
        let (vals, vecs) = hermitian_eigen(&hermitize(&w));
        let top = vals.last().copied().unwrap_or(0.0).max(0.0);
        let mut members = Vec::new();
        for (j, &l) in vals.iter().enumerate().rev() {
            if l <= RANK_TOL * top || l <= 0.0 {
                continue;
            }
            let mut m = DVector::zeros(kets[0].len());
            for (i, k) in kets.iter().enumerate() {
                m.axpy(vecs[(i, j)] * l.sqrt(), k, ONE);
            }
            members.push(m);
        }
        Ok(FockEnsemble {
            modes: s.modes().to_vec(),
            dims: dims.to_vec(),
            members,
        })
    }
}

/// Fidelity between a Fock-engine state and a branch state over the same modes.
pub fn fidelity_with_branch(fock: &FockEnsemble, s: &BranchState) -> Result<f64> {
    if fock.modes() != s.modes() {
        return Err(Error::Structural("fidelity between different mode sets".into()));
    }
    let expanded = FockEnsemble::from_branch_state(s, fock.dims())?;
    fock.fidelity(&expanded)
}
