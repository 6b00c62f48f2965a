//! Exact multimode states as finite superpositions of product branches.
//!
//! Every branch is a product of coherent states (field modes) and 0/1 photon
//! occupations (photon modes), multiplied by a list of environment factors.
//! Linear optics, the conditional-π Kerr coupling and beam-splitter loss all
//! map such products to such products, so no Fock truncation is ever needed:
//! inner products are evaluated analytically from coherent overlaps.
//!
//! The environment is never expanded in a basis. Each channel appends one
//! factor to every branch and only pairwise overlaps of factors with the same
//! position are ever evaluated.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{check_unit_interval, Error, Result};
use crate::linalg::{
    coherent_overlap, entropy, general_eigenvalues, hermitian_eigen, hermitian_eigenvalues,
    psd_sqrt,
};
use crate::mode::{ModeId, ModeKind};

pub const DEFAULT_BRANCH_CAP: usize = 4096;

/// Amplitudes closer than this are treated as the same coherent state when merging.
const MERGE_TOL: f64 = 1e-14;
/// Smallest Gram eigenvalue for which the Hermitian cross-check route is run.
const LOWDIN_MIN_GRAM: f64 = 1e-10;
/// Outcome probabilities below this cannot be conditioned on.
pub const HERALD_MIN_PROB: f64 = 1e-15;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Content of one mode in one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeContent {
    Photon(u8),
    Field(Complex64),
}

impl ModeContent {
    pub fn vacuum_field() -> Self {
        ModeContent::Field(ZERO)
    }

    fn kind(&self) -> ModeKind {
        match self {
            ModeContent::Photon(_) => ModeKind::Photon,
            ModeContent::Field(_) => ModeKind::Field,
        }
    }

    fn overlap(&self, other: &Self) -> Result<Complex64> {
        match (self, other) {
            (ModeContent::Photon(a), ModeContent::Photon(b)) => {
                Ok(if a == b { ONE } else { ZERO })
            }
            (ModeContent::Field(a), ModeContent::Field(b)) => Ok(coherent_overlap(*a, *b)),
            _ => Err(Error::Structural("photon mode paired with field mode".into())),
        }
    }

    /// ⟨self|0⟩⟨0|other⟩.
    fn vacuum_projection(&self, other: &Self) -> Complex64 {
        self.vacuum_amplitude().conj() * other.vacuum_amplitude()
    }

    /// ⟨0|self⟩.
    fn vacuum_amplitude(&self) -> Complex64 {
        match self {
            ModeContent::Photon(0) => ONE,
            ModeContent::Photon(_) => ZERO,
            ModeContent::Field(b) => Complex64::new((-b.norm_sqr() / 2.0).exp(), 0.0),
        }
    }

    fn approx_eq(&self, other: &Self) -> bool {
        match (self, other) {
            (ModeContent::Photon(a), ModeContent::Photon(b)) => a == b,
            (ModeContent::Field(a), ModeContent::Field(b)) => (a - b).norm() <= MERGE_TOL,
            _ => false,
        }
    }
}

/// One environment factor attached to a branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvFactor {
    /// Coherent state of a tapped beam or of a traced-out field mode.
    Field(Complex64),
    /// Occupation of a traced-out photon mode or of a photon-loss ancilla.
    Photon(u8),
    /// Environment state e₁ (`excited == false`) or e₂ of a dephasing
    /// interaction with ⟨e₁|e₂⟩ = `overlap`.
    Dephasing { overlap: Complex64, excited: bool },
}

impl EnvFactor {
    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &Self) -> Result<Complex64> {
        match (self, other) {
            (EnvFactor::Field(a), EnvFactor::Field(b)) => Ok(coherent_overlap(*a, *b)),
            (EnvFactor::Photon(a), EnvFactor::Photon(b)) => Ok(if a == b { ONE } else { ZERO }),
            (
                EnvFactor::Dephasing { overlap, excited: x },
                EnvFactor::Dephasing { excited: y, .. },
            ) => Ok(match (x, y) {
                (false, true) => *overlap,
                (true, false) => overlap.conj(),
                _ => ONE,
            }),
            _ => Err(Error::Structural(
                "environment factors of different channels paired".into(),
            )),
        }
    }

    fn approx_eq(&self, other: &Self) -> bool {
        match (self, other) {
            (EnvFactor::Field(a), EnvFactor::Field(b)) => (a - b).norm() <= MERGE_TOL,
            (EnvFactor::Photon(a), EnvFactor::Photon(b)) => a == b,
            (
                EnvFactor::Dephasing { excited: x, .. },
                EnvFactor::Dephasing { excited: y, .. },
            ) => x == y,
            _ => false,
        }
    }
}

/// A product branch: coefficient × ⊗ mode contents × ⊗ environment factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    coeff: Complex64,
    modes: Vec<ModeContent>,
    env: Vec<EnvFactor>,
}

impl Branch {
    pub fn new(coeff: Complex64, modes: Vec<ModeContent>, env: Vec<EnvFactor>) -> Self {
        Branch { coeff, modes, env }
    }

    pub fn coeff(&self) -> Complex64 {
        self.coeff
    }

    pub fn contents(&self) -> &[ModeContent] {
        &self.modes
    }

    pub fn env(&self) -> &[EnvFactor] {
        &self.env
    }

    fn check_compatible(&self, other: &Branch) -> Result<()> {
        if self.modes.len() != other.modes.len()
            || self.modes.iter().zip(&other.modes).any(|(a, b)| a.kind() != b.kind())
        {
            return Err(Error::Structural("branches have different mode sets".into()));
        }
        if self.env.len() != other.env.len() {
            return Err(Error::Structural(
                "branches have different environment histories".into(),
            ));
        }
        Ok(())
    }

    /// ⟨self|other⟩ including coefficients and environment overlaps.
    pub fn overlap(&self, other: &Branch) -> Result<Complex64> {
        self.check_compatible(other)?;
        let mut acc = self.coeff.conj() * other.coeff;
        for (a, b) in self.modes.iter().zip(&other.modes) {
            acc *= a.overlap(b)?;
        }
        for (a, b) in self.env.iter().zip(&other.env) {
            acc *= a.overlap(b)?;
        }
        Ok(acc)
    }

    fn env_overlap(&self, other: &Branch) -> Complex64 {
        self.env
            .iter()
            .zip(&other.env)
            .map(|(a, b)| a.overlap(b).unwrap_or(ZERO))
            .product()
    }

    fn same_vector(&self, other: &Branch) -> bool {
        self.modes.len() == other.modes.len()
            && self.env.len() == other.env.len()
            && self.modes.iter().zip(&other.modes).all(|(a, b)| a.approx_eq(b))
            && self.env.iter().zip(&other.env).all(|(a, b)| a.approx_eq(b))
    }

    fn with(&self, coeff: Complex64, pos: usize, content: ModeContent) -> Branch {
        let mut b = self.clone();
        b.coeff = coeff;
        b.modes[pos] = content;
        b
    }
}

/// Conjugate-symmetric branch inner product ⟨b1|b2⟩.
pub fn branch_overlap(b1: &Branch, b2: &Branch) -> Result<Complex64> {
    b1.overlap(b2)
}

/// Yes/no detector outcome on a single mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Click,
    Silent,
}

/// Eigenvalues of a (reduced) density operator, sorted descending.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSpectrum {
    eigenvalues: Vec<f64>,
}

impl GramSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Von Neumann entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.eigenvalues)
    }
}

/// Superposition of product branches over an ordered set of modes.
#[derive(Debug, Clone)]
pub struct BranchState {
    modes: Vec<ModeId>,
    branches: Vec<Branch>,
    cap: usize,
}

impl BranchState {
    /// Single-branch product state with coefficient 1.
    pub fn product(contents: &[(ModeId, ModeContent)]) -> Result<Self> {
        let mut modes = Vec::with_capacity(contents.len());
        let mut values = Vec::with_capacity(contents.len());
        for &(m, c) in contents {
            if modes.contains(&m) {
                return Err(Error::Structural(format!("mode {m} listed twice")));
            }
            match (m.kind(), c) {
                (ModeKind::Photon, ModeContent::Photon(n)) if n <= 1 => {}
                (ModeKind::Field, ModeContent::Field(_)) => {}
                _ => {
                    return Err(Error::Structural(format!(
                        "content {c:?} does not fit mode {m}"
                    )))
                }
            }
            modes.push(m);
            values.push(c);
        }
        Ok(BranchState {
            modes,
            branches: vec![Branch::new(ONE, values, Vec::new())],
            cap: DEFAULT_BRANCH_CAP,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn modes(&self) -> &[ModeId] {
        &self.modes
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn position(&self, mode: ModeId) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == mode)
            .ok_or_else(|| Error::Structural(format!("mode {mode} is not part of the state")))
    }

    /// Rebuilds a state from raw branches, merging duplicates and enforcing the cap.
    pub(crate) fn from_parts(modes: Vec<ModeId>, branches: Vec<Branch>, cap: usize) -> Result<Self> {
        let mut merged: Vec<Branch> = Vec::with_capacity(branches.len());
        for b in branches {
            if b.coeff == ZERO {
                continue;
            }
            match merged.iter_mut().find(|m| m.same_vector(&b)) {
                Some(m) => m.coeff += b.coeff,
                None => merged.push(b),
            }
        }
        merged.retain(|b| b.coeff.norm() > 1e-300);
        if merged.len() > cap {
            return Err(Error::BranchCap {
                count: merged.len(),
                cap,
            });
        }
        Ok(BranchState {
            modes,
            branches: merged,
            cap,
        })
    }

    fn rebuild(&self, branches: Vec<Branch>) -> Result<Self> {
        Self::from_parts(self.modes.clone(), branches, self.cap)
    }

    /// ⟨self|other⟩ for states over the same modes and environment history.
    pub fn inner(&self, other: &BranchState) -> Result<Complex64> {
        if self.modes != other.modes {
            return Err(Error::Structural("states have different mode sets".into()));
        }
        let mut acc = ZERO;
        for a in &self.branches {
            for b in &other.branches {
                acc += a.overlap(b)?;
            }
        }
        Ok(acc)
    }

    /// Squared norm (trace of the system + environment state).
    pub fn norm_sqr(&self) -> f64 {
        let mut acc = 0.0;
        for (i, a) in self.branches.iter().enumerate() {
            acc += a.overlap(a).map(|z| z.re).unwrap_or(0.0);
            for b in &self.branches[i + 1..] {
                acc += 2.0 * a.overlap(b).map(|z| z.re).unwrap_or(0.0);
            }
        }
        acc
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for b in &mut out.branches {
            b.coeff *= factor;
        }
        out
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InternalConsistency(format!(
                "cannot normalize a state of squared norm {n}"
            )));
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// Coherent superposition `self + other` (same modes and environment history).
    pub fn superpose(&self, other: &BranchState) -> Result<Self> {
        if self.modes != other.modes {
            return Err(Error::Structural("states have different mode sets".into()));
        }
        let mut all = self.branches.clone();
        all.extend(other.branches.iter().cloned());
        self.rebuild(all)
    }

    /// Adds a new mode in the same content on every branch (tensor product).
    pub fn with_mode(&self, mode: ModeId, content: ModeContent) -> Result<Self> {
        if self.modes.contains(&mode) {
            return Err(Error::Structural(format!("mode {mode} already present")));
        }
        if mode.kind() != content.kind() {
            return Err(Error::Structural(format!("content {content:?} does not fit mode {mode}")));
        }
        let mut out = self.clone();
        out.modes.push(mode);
        for b in &mut out.branches {
            b.modes.push(content);
        }
        Ok(out)
    }

    /// Renames a mode; both labels must be of the same kind.
    pub fn relabel(&self, from: ModeId, to: ModeId) -> Result<Self> {
        let pos = self.position(from)?;
        if from != to && self.modes.contains(&to) {
            return Err(Error::Structural(format!("mode {to} already present")));
        }
        if from.kind() != to.kind() {
            return Err(Error::Structural(format!(
                "cannot relabel {from} as {to}: different mode kinds"
            )));
        }
        let mut out = self.clone();
        out.modes[pos] = to;
        Ok(out)
    }

    /// Two-port beam splitter with amplitude matrix (√t, i√(1−t); i√(1−t), √t).
    pub fn apply_beamsplitter(&self, m1: ModeId, m2: ModeId, transmittance: f64) -> Result<Self> {
        check_unit_interval("transmittance", transmittance)?;
        if m1 == m2 {
            return Err(Error::Structural("beam splitter needs two distinct modes".into()));
        }
        let (p1, p2) = (self.position(m1)?, self.position(m2)?);
        if m1.kind() != m2.kind() {
            return Err(Error::UnsupportedInput(
                "beam splitter between a photon mode and a field mode".into(),
            ));
        }
        let tt = transmittance.sqrt();
        let rr = (1.0 - transmittance).sqrt();
        let cross = I * rr;
        let mut out = Vec::with_capacity(self.branches.len() * 2);
        for b in &self.branches {
            match (b.modes[p1], b.modes[p2]) {
                (ModeContent::Field(x), ModeContent::Field(y)) => {
                    let mut nb = b.clone();
                    nb.modes[p1] = ModeContent::Field(x * tt + cross * y);
                    nb.modes[p2] = ModeContent::Field(cross * x + y * tt);
                    out.push(nb);
                }
                (ModeContent::Photon(n1), ModeContent::Photon(n2)) => match (n1, n2) {
                    (0, 0) => out.push(b.clone()),
                    (1, 0) | (0, 1) => {
                        let (stay, hop) = if n1 == 1 { (p1, p2) } else { (p2, p1) };
                        if tt > 0.0 {
                            out.push(b.clone().with_coeff(b.coeff * tt));
                        }
                        if rr > 0.0 {
                            let mut nb = b.with(b.coeff * cross, stay, ModeContent::Photon(0));
                            nb.modes[hop] = ModeContent::Photon(1);
                            out.push(nb);
                        }
                    }
                    _ => {
                        return Err(Error::UnsupportedInput(format!(
                            "two photons across modes {m1} and {m2}"
                        )))
                    }
                },
                _ => unreachable!("mode kinds are fixed per label"),
            }
        }
        self.rebuild(out)
    }

    /// Conditional π phase: the field amplitude flips sign in branches where
    /// the photon mode is occupied.
    pub fn apply_cross_kerr(&self, photon_mode: ModeId, field_mode: ModeId) -> Result<Self> {
        if photon_mode.kind() != ModeKind::Photon || field_mode.kind() != ModeKind::Field {
            return Err(Error::Structural(format!(
                "cross-Kerr needs (photon, field) modes, got ({photon_mode}, {field_mode})"
            )));
        }
        let (pp, pf) = (self.position(photon_mode)?, self.position(field_mode)?);
        let mut out = self.clone();
        for b in &mut out.branches {
            if let (ModeContent::Photon(1), ModeContent::Field(x)) = (b.modes[pp], b.modes[pf]) {
                b.modes[pf] = ModeContent::Field(-x);
            }
        }
        Ok(out)
    }

    /// Phase shifter e^{iφ n̂} on one mode.
    pub fn apply_phase(&self, mode: ModeId, phi: f64) -> Result<Self> {
        let p = self.position(mode)?;
        let phase = Complex64::from_polar(1.0, phi);
        let mut out = self.clone();
        for b in &mut out.branches {
            match b.modes[p] {
                ModeContent::Field(x) => b.modes[p] = ModeContent::Field(x * phase),
                ModeContent::Photon(1) => b.coeff *= phase,
                ModeContent::Photon(_) => {}
            }
        }
        Ok(out)
    }

    /// Beam-splitter loss of reflectivity `r` into an unmonitored environment mode.
    pub fn apply_loss(&self, mode: ModeId, r: f64) -> Result<Self> {
        check_unit_interval("R", r)?;
        let p = self.position(mode)?;
        let keep = (1.0 - r).sqrt();
        let tap = r.sqrt();
        let mut out = Vec::with_capacity(self.branches.len() * 2);
        for b in &self.branches {
            match b.modes[p] {
                ModeContent::Field(x) => {
                    let mut nb = b.with(b.coeff, p, ModeContent::Field(x * keep));
                    nb.env.push(EnvFactor::Field(x * tap));
                    out.push(nb);
                }
                ModeContent::Photon(0) => {
                    let mut nb = b.clone();
                    nb.env.push(EnvFactor::Photon(0));
                    out.push(nb);
                }
                ModeContent::Photon(_) => {
                    if keep > 0.0 {
                        let mut nb = b.clone().with_coeff(b.coeff * keep);
                        nb.env.push(EnvFactor::Photon(0));
                        out.push(nb);
                    }
                    if tap > 0.0 {
                        let mut nb = b.with(b.coeff * tap, p, ModeContent::Photon(0));
                        nb.env.push(EnvFactor::Photon(1));
                        out.push(nb);
                    }
                }
            }
        }
        self.rebuild(out)
    }

    /// Couples a photon mode to an environment: |0⟩|g⟩ → |0⟩|e₁⟩, |1⟩|g⟩ → |1⟩|e₂⟩
    /// with ⟨e₁|e₂⟩ = `overlap_a`.
    pub fn apply_env_dephasing(&self, photon_mode: ModeId, overlap_a: Complex64) -> Result<Self> {
        if photon_mode.kind() != ModeKind::Photon {
            return Err(Error::Structural(format!(
                "dephasing acts on photon modes, got {photon_mode}"
            )));
        }
        if overlap_a.norm() > 1.0 + 1e-15 {
            return Err(Error::Domain {
                name: "overlap_a",
                value: overlap_a.norm(),
                domain: "|a| <= 1",
            });
        }
        let p = self.position(photon_mode)?;
        let mut out = self.clone();
        for b in &mut out.branches {
            let excited = matches!(b.modes[p], ModeContent::Photon(1));
            b.env.push(EnvFactor::Dephasing {
                overlap: overlap_a,
                excited,
            });
        }
        Ok(out)
    }

    /// Ideal yes/no detection of one mode. Returns the renormalized conditional
    /// state and the outcome probability.
    pub fn project_yes_no(&self, mode: ModeId, outcome: Outcome) -> Result<(Self, f64)> {
        let p = self.position(mode)?;
        let before = self.norm_sqr();
        let mut out = Vec::with_capacity(self.branches.len() * 2);
        for b in &self.branches {
            let vac = b.modes[p].vacuum_amplitude();
            let vacuum = match b.modes[p] {
                ModeContent::Photon(_) => ModeContent::Photon(0),
                ModeContent::Field(_) => ModeContent::vacuum_field(),
            };
            match outcome {
                Outcome::Silent => {
                    if vac != ZERO {
                        out.push(b.with(b.coeff * vac, p, vacuum));
                    }
                }
                Outcome::Click => match b.modes[p] {
                    ModeContent::Photon(0) => {}
                    ModeContent::Photon(_) => out.push(b.clone()),
                    ModeContent::Field(_) => {
                        // (1 − |0⟩⟨0|)|β⟩ = |β⟩ − e^{−|β|²/2}|0⟩
                        out.push(b.clone());
                        out.push(b.with(-b.coeff * vac, p, vacuum));
                    }
                },
            }
        }
        let projected = self.rebuild(out)?;
        let after = projected.norm_sqr().max(0.0);
        let prob = if before > 0.0 { after / before } else { 0.0 };
        if !(prob >= HERALD_MIN_PROB) {
            return Err(Error::HeraldImpossible { prob });
        }
        let renorm = projected.scaled(Complex64::new(1.0 / after.sqrt(), 0.0));
        Ok((renorm, prob))
    }

    /// Moves the given modes into the environment (partial trace).
    pub fn trace_out(&self, modes: &[ModeId]) -> Result<Self> {
        let mut positions = Vec::with_capacity(modes.len());
        for &m in modes {
            positions.push(self.position(m)?);
        }
        let keep: Vec<usize> = (0..self.modes.len()).filter(|i| !positions.contains(i)).collect();
        let branches = self
            .branches
            .iter()
            .map(|b| {
                let mut env = b.env.clone();
                env.extend(positions.iter().map(|&p| match b.modes[p] {
                    ModeContent::Photon(n) => EnvFactor::Photon(n),
                    ModeContent::Field(x) => EnvFactor::Field(x),
                }));
                Branch::new(b.coeff, keep.iter().map(|&p| b.modes[p]).collect(), env)
            })
            .collect();
        Self::from_parts(keep.iter().map(|&p| self.modes[p]).collect(), branches, self.cap)
    }

    /// Keeps only the listed modes, tracing out the rest.
    pub fn keep_only(&self, keep: &[ModeId]) -> Result<Self> {
        for &m in keep {
            self.position(m)?;
        }
        let drop: Vec<ModeId> = self.modes.iter().copied().filter(|m| !keep.contains(m)).collect();
        self.trace_out(&drop)
    }

    /// Coefficient matrix `W` and Gram matrix `G` of the kept-mode branch vectors:
    /// ρ_keep = Σ_ij W_ij |k_i⟩⟨k_j|, G_ij = ⟨k_i|k_j⟩.
    pub(crate) fn density_in_branch_basis(
        &self,
        keep: &[bool],
    ) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let n = self.branches.len();
        let mut w = DMatrix::zeros(n, n);
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let (bi, bj) = (&self.branches[i], &self.branches[j]);
                let mut kept = ONE;
                let mut rest = bj.env_overlap(bi);
                for (p, &k) in keep.iter().enumerate() {
                    let ov = bi.modes[p].overlap(&bj.modes[p]).unwrap_or(ZERO);
                    if k {
                        kept *= ov;
                    } else {
                        rest *= ov.conj();
                    }
                }
                g[(i, j)] = kept;
                w[(i, j)] = bi.coeff * bj.coeff.conj() * rest;
            }
        }
        (w, g)
    }

    /// Spectrum of the reduced density operator on `keep`, computed from the
    /// branch-basis product W·G without any basis expansion.
    pub fn spectrum(&self, keep: &[ModeId]) -> Result<GramSpectrum> {
        if keep.is_empty() {
            return Err(Error::Structural("spectrum needs at least one kept mode".into()));
        }
        let mut mask = vec![false; self.modes.len()];
        for &m in keep {
            mask[self.position(m)?] = true;
        }
        let (w, g) = self.density_in_branch_basis(&mask);
        let wg = &w * &g;
        let trace = wg.trace().re;
        if !(trace > 0.0) {
            return Err(Error::InternalConsistency(format!("state trace is {trace}")));
        }
        let wg = wg / Complex64::new(trace, 0.0);

        let mut values = Vec::with_capacity(wg.nrows());
        for z in general_eigenvalues(&wg) {
            if z.im.abs() > 1e-10 {
                return Err(Error::InternalConsistency(format!(
                    "reduced density has complex eigenvalue {z}"
                )));
            }
            if z.re < -1e-10 || z.re > 1.0 + 1e-10 {
                return Err(Error::InternalConsistency(format!(
                    "reduced density eigenvalue {} outside [0, 1]",
                    z.re
                )));
            }
            values.push(z.re.clamp(0.0, 1.0));
        }
        values.sort_by(|a, b| b.total_cmp(a));

        // Hermitian route G^{1/2} W G^{1/2} as a cross-check when G is well conditioned.
        let gram_min = hermitian_eigenvalues(&g).first().copied().unwrap_or(0.0);
        if gram_min > LOWDIN_MIN_GRAM {
            let root = psd_sqrt(&g);
            let sym = &root * &w * &root / Complex64::new(trace, 0.0);
            let mut check = hermitian_eigen(&sym).0;
            check.sort_by(|a, b| b.total_cmp(a));
            let worst = values
                .iter()
                .zip(&check)
                .map(|(a, b)| (a - b.clamp(0.0, 1.0)).abs())
                .fold(0.0, f64::max);
            if worst > 1e-8 {
                return Err(Error::InternalConsistency(format!(
                    "Gram spectrum routes disagree by {worst:e}"
                )));
            }
        }
        Ok(GramSpectrum { eigenvalues: values })
    }

    /// ⟨ψ|ρ|ψ⟩ / tr ρ for a pure, environment-free reference ψ on the same modes.
    pub fn fidelity_with_pure(&self, psi: &BranchState) -> Result<f64> {
        if self.modes != psi.modes {
            return Err(Error::Structural("states have different mode sets".into()));
        }
        if psi.branches.iter().any(|b| !b.env.is_empty()) {
            return Err(Error::Structural("reference state must be pure".into()));
        }
        let mut proj = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let mut acc = ZERO;
            for r in &psi.branches {
                let mut f = r.coeff.conj();
                for (x, y) in r.modes.iter().zip(&b.modes) {
                    f *= x.overlap(y)?;
                }
                acc += f;
            }
            proj.push(acc);
        }
        let mut num = ZERO;
        for (i, bi) in self.branches.iter().enumerate() {
            for (j, bj) in self.branches.iter().enumerate() {
                num += bi.coeff * bj.coeff.conj() * bj.env_overlap(bi) * proj[i] * proj[j].conj();
            }
        }
        Ok(num.re / (self.norm_sqr() * psi.norm_sqr()))
    }

    /// ⟨b_j| Π |b_i⟩ summed over branch pairs, where Π is a product of
    /// per-mode yes/no projectors (`None` = identity on that mode).
    pub(crate) fn detection_probability(&self, pattern: &[Option<Outcome>]) -> f64 {
        let mut acc = ZERO;
        for bi in &self.branches {
            for bj in &self.branches {
                let mut f = bj.coeff.conj() * bi.coeff * bj.env_overlap(bi);
                for (p, o) in pattern.iter().enumerate() {
                    let (a, b) = (&bj.modes[p], &bi.modes[p]);
                    let full = a.overlap(b).unwrap_or(ZERO);
                    f *= match o {
                        None => full,
                        Some(Outcome::Silent) => a.vacuum_projection(b),
                        Some(Outcome::Click) => full - a.vacuum_projection(b),
                    };
                }
                acc += f;
            }
        }
        acc.re
    }
}

impl Branch {
    fn with_coeff(mut self, coeff: Complex64) -> Branch {
        self.coeff = coeff;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn field(x: f64) -> ModeContent {
        ModeContent::Field(c(x, 0.0))
    }

    fn photon_pair() -> BranchState {
        BranchState::product(&[
            (ModeId::M12, ModeContent::Photon(1)),
            (ModeId::M13, ModeContent::Photon(0)),
        ])
        .unwrap()
    }

    fn phi_pair(alpha: f64, sign: f64) -> BranchState {
        let phi1 = BranchState::product(&[
            (ModeId::M24, field(alpha)),
            (ModeId::M25, field(0.0)),
            (ModeId::M34, field(0.0)),
            (ModeId::M35, field(alpha)),
        ])
        .unwrap();
        let phi2 = BranchState::product(&[
            (ModeId::M24, field(0.0)),
            (ModeId::M25, field(alpha)),
            (ModeId::M34, field(alpha)),
            (ModeId::M35, field(0.0)),
        ])
        .unwrap();
        phi1.superpose(&phi2.scaled(c(sign, 0.0))).unwrap().normalized().unwrap()
    }

    #[test]
    fn identical_branches_overlap_to_one() {
        let s = photon_pair();
        let b = &s.branches()[0];
        assert!((branch_overlap(b, b).unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn coherent_versus_vacuum_overlap() {
        let a = BranchState::product(&[(ModeId::M24, field(1.5)), (ModeId::M25, field(0.2))]).unwrap();
        let b = BranchState::product(&[(ModeId::M24, field(0.0)), (ModeId::M25, field(0.2))]).unwrap();
        let ov = branch_overlap(&a.branches()[0], &b.branches()[0]).unwrap();
        assert!((ov.re - (-1.5f64 * 1.5 / 2.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn cat_components_overlap_is_mu_squared() {
        let alpha = 1.3f64;
        let s = phi_pair(alpha, 1.0);
        let ov = branch_overlap(&s.branches()[0], &s.branches()[1]).unwrap();
        let norm = s.branches()[0].coeff().norm_sqr();
        let mu = (-alpha * alpha).exp();
        assert!((ov.re / norm - mu * mu).abs() < 1e-14);
    }

    #[test]
    fn overlap_is_conjugate_symmetric() {
        let s = photon_pair()
            .apply_beamsplitter(ModeId::M12, ModeId::M13, 0.3)
            .unwrap()
            .apply_env_dephasing(ModeId::M12, c(0.4, 0.3))
            .unwrap();
        let (a, b) = (&s.branches()[0], &s.branches()[1]);
        assert!((a.overlap(b).unwrap() - b.overlap(a).unwrap().conj()).norm() < 1e-15);
    }

    #[test]
    fn mismatched_modes_are_structural_errors() {
        let a = BranchState::product(&[(ModeId::M24, field(1.0))]).unwrap();
        let b = BranchState::product(&[(ModeId::M12, ModeContent::Photon(0))]).unwrap();
        assert!(matches!(
            a.branches()[0].overlap(&b.branches()[0]),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn balanced_splitter_makes_the_single_photon_state() {
        let s = photon_pair().apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5).unwrap();
        assert_eq!(s.len(), 2);
        for b in s.branches() {
            match b.contents() {
                [ModeContent::Photon(1), ModeContent::Photon(0)] => {
                    assert!((b.coeff() - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15)
                }
                [ModeContent::Photon(0), ModeContent::Photon(1)] => {
                    assert!((b.coeff() - c(0.0, FRAC_1_SQRT_2)).norm() < 1e-15)
                }
                other => panic!("unexpected branch {other:?}"),
            }
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_transmittance_is_identity() {
        let s = BranchState::product(&[(ModeId::M22, field(0.7)), (ModeId::M23, ModeContent::Field(c(0.1, -0.2)))])
            .unwrap();
        let t = s.apply_beamsplitter(ModeId::M22, ModeId::M23, 1.0).unwrap();
        assert!((t.inner(&s).unwrap() - ONE).norm() < 1e-15);
        let p = photon_pair().apply_beamsplitter(ModeId::M12, ModeId::M13, 1.0).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn coherent_states_stay_coherent_through_splitter() {
        let beta = c(1.2, 0.4);
        let s = BranchState::product(&[(ModeId::M22, ModeContent::Field(beta)), (ModeId::M23, field(0.0))])
            .unwrap()
            .apply_beamsplitter(ModeId::M22, ModeId::M23, 0.5)
            .unwrap();
        assert_eq!(s.len(), 1);
        let b = &s.branches()[0];
        assert_eq!(b.contents()[0], ModeContent::Field(beta * FRAC_1_SQRT_2));
        let expected = I * beta * FRAC_1_SQRT_2;
        match b.contents()[1] {
            ModeContent::Field(x) => assert!((x - expected).norm() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn two_photons_on_a_splitter_are_rejected() {
        let s = BranchState::product(&[
            (ModeId::M12, ModeContent::Photon(1)),
            (ModeId::M13, ModeContent::Photon(1)),
        ])
        .unwrap();
        assert!(matches!(
            s.apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5),
            Err(Error::UnsupportedInput(_))
        ));
    }

    #[test]
    fn kerr_flips_only_occupied_branches_and_squares_to_identity() {
        let s = photon_pair()
            .apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5)
            .unwrap();
        let s = BranchState::from_parts(
            vec![ModeId::M12, ModeId::M13, ModeId::M23],
            s.branches()
                .iter()
                .map(|b| {
                    let mut m = b.contents().to_vec();
                    m.push(field(0.9));
                    Branch::new(b.coeff(), m, vec![])
                })
                .collect(),
            DEFAULT_BRANCH_CAP,
        )
        .unwrap();
        let k = s.apply_cross_kerr(ModeId::M12, ModeId::M23).unwrap();
        for b in k.branches() {
            let expected = if b.contents()[0] == ModeContent::Photon(1) { -0.9 } else { 0.9 };
            assert_eq!(b.contents()[2], field(expected));
        }
        let kk = k.apply_cross_kerr(ModeId::M12, ModeId::M23).unwrap();
        assert!((kk.inner(&s).unwrap() - ONE).norm() < 1e-14);
        assert!((k.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_changes_nothing() {
        let s = phi_pair(1.0, 1.0);
        let l = s.apply_loss(ModeId::M24, 0.0).unwrap();
        assert!((l.norm_sqr() - 1.0).abs() < 1e-12);
        let a = s.spectrum(&[ModeId::M24, ModeId::M25]).unwrap();
        let b = l.spectrum(&[ModeId::M24, ModeId::M25]).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_on_opposite_amplitudes_leaves_which_way_overlap() {
        let beta = 1.7f64;
        let r = 0.2;
        let plus = BranchState::product(&[(ModeId::M23, field(beta))]).unwrap();
        let minus = BranchState::product(&[(ModeId::M23, field(-beta))]).unwrap();
        let s = plus.superpose(&minus).unwrap().apply_loss(ModeId::M23, r).unwrap();
        let (a, b) = (&s.branches()[0], &s.branches()[1]);
        let env = a.env()[0].overlap(&b.env()[0]).unwrap();
        assert!((env.norm() - (-2.0 * r * beta * beta).exp()).abs() < 1e-14);
        for b in s.branches() {
            match b.contents()[0] {
                ModeContent::Field(x) => assert!((x.norm() - beta * (1.0 - r).sqrt()).abs() < 1e-14),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn full_photon_loss_empties_the_mode() {
        let s = BranchState::product(&[(ModeId::M12, ModeContent::Photon(1))]).unwrap();
        let l = s.apply_loss(ModeId::M12, 1.0).unwrap();
        assert_eq!(l.len(), 1);
        assert_eq!(l.branches()[0].contents()[0], ModeContent::Photon(0));
        let (_, p) = l.project_yes_no(ModeId::M12, Outcome::Silent).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(l.apply_loss(ModeId::M12, 1.5).is_err());
    }

    #[test]
    fn dephasing_with_unit_overlap_is_invisible() {
        let s = photon_pair().apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5).unwrap();
        let d = s.apply_env_dephasing(ModeId::M12, ONE).unwrap();
        let e1 = s.apply_beamsplitter(ModeId::M12, ModeId::M13, 0.3).unwrap();
        let e2 = d.apply_beamsplitter(ModeId::M12, ModeId::M13, 0.3).unwrap();
        let (_, p1) = e1.project_yes_no(ModeId::M12, Outcome::Click).unwrap();
        let (_, p2) = e2.project_yes_no(ModeId::M12, Outcome::Click).unwrap();
        assert!((p1 - p2).abs() < 1e-12);
        assert!(s.apply_env_dephasing(ModeId::M12, c(1.1, 0.0)).is_err());
    }

    #[test]
    fn dephasing_sets_the_interference_visibility() {
        // After a second balanced splitter the click probability is (1 + Re a)/2 … up to sign.
        for a in [0.0, 0.3, 0.8] {
            let s = photon_pair()
                .apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5)
                .unwrap()
                .apply_env_dephasing(ModeId::M12, c(a, 0.0))
                .unwrap()
                .apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5)
                .unwrap();
            let (_, p) = s.project_yes_no(ModeId::M13, Outcome::Click).unwrap();
            assert!((p - (1.0 + a) / 2.0).abs() < 1e-14, "a={a} p={p}");
        }
    }

    #[test]
    fn vacuum_detection_cases() {
        let v = BranchState::product(&[(ModeId::M24, field(0.0))]).unwrap();
        let (s, p) = v.project_yes_no(ModeId::M24, Outcome::Silent).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!((s.inner(&v).unwrap() - ONE).norm() < 1e-15);
        assert!(matches!(
            v.project_yes_no(ModeId::M24, Outcome::Click),
            Err(Error::HeraldImpossible { .. })
        ));

        let beta = 0.8f64;
        let cs = BranchState::product(&[(ModeId::M24, field(beta))]).unwrap();
        let (_, ps) = cs.project_yes_no(ModeId::M24, Outcome::Silent).unwrap();
        let (_, pc) = cs.project_yes_no(ModeId::M24, Outcome::Click).unwrap();
        assert!((ps - (-beta * beta).exp()).abs() < 1e-15);
        assert!((ps + pc - 1.0).abs() < 1e-12);

        let one = BranchState::product(&[(ModeId::M12, ModeContent::Photon(1))]).unwrap();
        let (_, p1) = one.project_yes_no(ModeId::M12, Outcome::Click).unwrap();
        assert_eq!(p1, 1.0);
    }

    #[test]
    fn product_state_spectrum_is_pure() {
        let s = BranchState::product(&[(ModeId::M24, field(1.0)), (ModeId::M34, field(0.5))]).unwrap();
        let sp = s.spectrum(&[ModeId::M24]).unwrap();
        assert!((sp.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!(sp.entropy().abs() < 1e-12);
    }

    #[test]
    fn heralded_cat_reduced_spectrum_matches_two_branch_diagonalization() {
        // Independent route: the reduced state lives in span{u1, u2} with
        // ⟨u1|u2⟩ = μ; diagonalize ρ = N²(|u1⟩⟨u1| + |u2⟩⟨u2|) + μ N²(|u1⟩⟨u2| + h.c.)
        // in the orthonormal basis (u1 ± u2)/√(2(1 ± μ)).
        for alpha in [0.3f64, 0.8, 1.5] {
            let mu = (-alpha * alpha).exp();
            let s = phi_pair(alpha, 1.0);
            let sp = s.spectrum(&[ModeId::M24, ModeId::M25]).unwrap();
            let n2 = 1.0 / (2.0 + 2.0 * mu * mu);
            let plus = n2 * (1.0 + mu) * (1.0 + mu);
            let minus = n2 * (1.0 - mu) * (1.0 - mu);
            assert!((sp.eigenvalues()[0] - plus).abs() < 1e-12);
            assert!((sp.eigenvalues()[1] - minus).abs() < 1e-12);
            let total = s.spectrum(&ModeId::OUTPUTS).unwrap();
            assert!((total.eigenvalues()[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn maximally_entangled_photon_has_ln2_entropy() {
        let s = photon_pair().apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5).unwrap();
        let sp = s.spectrum(&[ModeId::M12]).unwrap();
        assert!((sp.entropy() - LN_2).abs() < 1e-12);
    }

    #[test]
    fn branch_cap_is_enforced() {
        let s = photon_pair().with_cap(1);
        assert!(matches!(
            s.apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5),
            Err(Error::BranchCap { count: 2, cap: 1 })
        ));
    }

    #[test]
    fn tracing_a_photon_mode_keeps_trace() {
        let s = photon_pair().apply_beamsplitter(ModeId::M12, ModeId::M13, 0.5).unwrap();
        let t = s.trace_out(&[ModeId::M13]).unwrap();
        assert_eq!(t.modes(), &[ModeId::M12]);
        assert!((t.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relabel_respects_kinds() {
        let s = photon_pair();
        assert!(s.relabel(ModeId::M12, ModeId::M15).is_ok());
        assert!(s.relabel(ModeId::M12, ModeId::M13).is_err());
        assert!(s.relabel(ModeId::M12, ModeId::M24).is_err());
    }
}
