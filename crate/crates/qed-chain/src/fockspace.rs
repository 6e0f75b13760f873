//! Truncated joint Hilbert space (qubits ⊗ photon Fock ⊗ phonon Fock) and the
//! elementary operators living on it.
//!
//! Basis ordering is fixed: qubit sites first (site 0 most significant), then
//! the photon mode, then phonon modes in declaration order. A flat index is
//! the row-major rank of the occupation tuple, i.e. the last subsystem varies
//! fastest. Qubit occupation 0 is the ground state |α⟩, occupation 1 the
//! excited state |β⟩; `σᶻ` has eigenvalue −1 on |α⟩ and +1 on |β⟩.
//!
//! All types here are immutable after construction and safe to share across
//! threads. Sparse mat-vec accumulates entries sequentially in canonical
//! row-major order, so results are bit-stable run to run.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Default cap on the joint-space dimension; `build_basis` refuses anything
/// larger so a typo in a cutoff fails fast instead of exhausting memory.
pub const DEFAULT_DIM_CAP: usize = 2_000_000;

/// Tolerance used when verifying a claimed Hermitian sparsity pattern.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("qubit site {site} out of range (n_sites = {n_sites})")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("mode index {mode} out of range ({n_modes} modes)")]
    ModeOutOfRange { mode: usize, n_modes: usize },
    #[error("joint dimension {required} exceeds capacity cap {cap}")]
    CapacityExceeded { required: u128, cap: usize },
    #[error("operator/state bases do not match")]
    BasisMismatch,
    #[error("matrix entry index {index} out of range (dim = {dim})")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("operator flagged Hermitian deviates from its adjoint by {max_dev:.3e}")]
    NotHermitian { max_dev: f64 },
    #[error("state vector has zero norm")]
    ZeroNorm,
}

/// Chain boundary condition for the nearest-neighbour exchange term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Two-level qubit chain: per-site transition (angular) frequencies ω_l with
/// splitting E_β − E_α = ħω_l.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitChainSpec {
    pub n_sites: usize,
    pub transition_freqs: Vec<f64>,
    pub boundary: Boundary,
}

impl QubitChainSpec {
    /// Uniform chain, all sites at ω₀.
    pub fn uniform(n_sites: usize, omega0: f64, boundary: Boundary) -> Self {
        Self { n_sites, transition_freqs: vec![omega0; n_sites], boundary }
    }

    pub fn validate(&self) -> Result<(), FockError> {
        if self.n_sites == 0 {
            return Err(FockError::InvalidSpec("n_sites must be >= 1".into()));
        }
        if self.transition_freqs.len() != self.n_sites {
            return Err(FockError::InvalidSpec(format!(
                "transition_freqs length {} != n_sites {}",
                self.transition_freqs.len(),
                self.n_sites
            )));
        }
        if self.transition_freqs.iter().any(|w| !w.is_finite()) {
            return Err(FockError::InvalidSpec("non-finite transition frequency".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Photon,
    Phonon,
}

/// Single bosonic mode truncated at `cutoff` quanta (dimension cutoff + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpec {
    pub frequency: f64,
    pub cutoff: usize,
    pub kind: ModeKind,
}

impl ModeSpec {
    pub fn photon(frequency: f64, cutoff: usize) -> Self {
        Self { frequency, cutoff, kind: ModeKind::Photon }
    }

    pub fn phonon(frequency: f64, cutoff: usize) -> Self {
        Self { frequency, cutoff, kind: ModeKind::Phonon }
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn validate(&self) -> Result<(), FockError> {
        if !self.frequency.is_finite() || self.frequency < 0.0 {
            return Err(FockError::InvalidSpec(format!(
                "mode frequency must be finite and >= 0, got {}",
                self.frequency
            )));
        }
        Ok(())
    }
}

/// Fock-space cutoff for holding a coherent state of mean occupation
/// `n_bar`: at least n̄ + 7√n̄, extended until the truncated Poisson tail
/// mass is below 1e-9 (the 7σ floor alone is not enough at small n̄).
pub fn coherent_cutoff(n_bar: f64) -> usize {
    let mut cutoff = (n_bar + 7.0 * n_bar.sqrt()).ceil() as usize;
    if n_bar == 0.0 {
        return cutoff;
    }
    let mut p = (-n_bar).exp();
    let mut head = p;
    for n in 1..=cutoff {
        p *= n_bar / n as f64;
        head += p;
    }
    while 1.0 - head >= 1e-9 && cutoff < 100_000 {
        cutoff += 1;
        p *= n_bar / cutoff as f64;
        head += p;
    }
    cutoff
}

/// Index map for the joint space. `dims` lists subsystem dimensions in the
/// documented order; the first `n_sites` entries are qubits (each dim 2),
/// followed by the photon mode and then phonon modes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisIndex {
    dims: Vec<usize>,
    n_sites: usize,
    total_dim: usize,
}

impl BasisIndex {
    /// Basis consisting of a single subsystem of dimension `dim`; used for
    /// single-mode factor states and for generic matrices in tests.
    pub fn single(dim: usize) -> Arc<Self> {
        Arc::new(Self { dims: vec![dim], n_sites: 0, total_dim: dim })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Number of bosonic modes (photon + phonons).
    pub fn n_modes(&self) -> usize {
        self.dims.len() - self.n_sites
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Subsystem index of bosonic mode `mode` (0 = photon, 1.. = phonons).
    pub fn mode_subsystem(&self, mode: usize) -> Result<usize, FockError> {
        if mode >= self.n_modes() {
            return Err(FockError::ModeOutOfRange { mode, n_modes: self.n_modes() });
        }
        Ok(self.n_sites + mode)
    }

    /// Product of the dimensions of all subsystems after `subsystem`
    /// (the flat-index stride of that subsystem).
    pub fn stride(&self, subsystem: usize) -> usize {
        self.dims[subsystem + 1..].iter().product()
    }

    /// Flat index of an occupation tuple.
    pub fn rank(&self, occupations: &[usize]) -> usize {
        debug_assert_eq!(occupations.len(), self.dims.len());
        let mut idx = 0;
        for (o, d) in occupations.iter().zip(&self.dims) {
            debug_assert!(o < d);
            idx = idx * d + o;
        }
        idx
    }

    /// Occupation tuple of a flat index.
    pub fn unrank(&self, mut index: usize) -> Vec<usize> {
        debug_assert!(index < self.total_dim);
        let mut occ = vec![0; self.dims.len()];
        for (slot, d) in occ.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        occ
    }

    /// Occupation of a single subsystem at a flat index.
    pub fn occupation_at(&self, index: usize, subsystem: usize) -> usize {
        (index / self.stride(subsystem)) % self.dims[subsystem]
    }
}

/// Build the joint basis for a chain plus one photon mode and any number of
/// phonon modes, enforcing the default capacity cap.
pub fn build_basis(
    chain: &QubitChainSpec,
    photon: &ModeSpec,
    phonons: &[ModeSpec],
) -> Result<Arc<BasisIndex>, FockError> {
    build_basis_capped(chain, photon, phonons, DEFAULT_DIM_CAP)
}

pub fn build_basis_capped(
    chain: &QubitChainSpec,
    photon: &ModeSpec,
    phonons: &[ModeSpec],
    cap: usize,
) -> Result<Arc<BasisIndex>, FockError> {
    chain.validate()?;
    photon.validate()?;
    if photon.kind != ModeKind::Photon {
        return Err(FockError::InvalidSpec("photon slot must have kind photon".into()));
    }
    for ph in phonons {
        ph.validate()?;
        if ph.kind != ModeKind::Phonon {
            return Err(FockError::InvalidSpec("phonon slot must have kind phonon".into()));
        }
    }
    let mut dims = vec![2usize; chain.n_sites];
    dims.push(photon.dim());
    dims.extend(phonons.iter().map(ModeSpec::dim));
    let mut total: u128 = 1;
    for &d in &dims {
        total *= d as u128;
        if total > cap as u128 {
            return Err(FockError::CapacityExceeded { required: total, cap });
        }
    }
    Ok(Arc::new(BasisIndex { dims, n_sites: chain.n_sites, total_dim: total as usize }))
}

/// One stored matrix element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub row: u32,
    pub col: u32,
    pub value: C64,
}

/// Sparse matrix on a [`BasisIndex`], stored as row-major sorted, duplicate-free
/// (row, col, value) triples. `hermitian` is a verified assertion, not a hint.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    basis: Arc<BasisIndex>,
    entries: Vec<Entry>,
    hermitian: bool,
}

impl SparseOperator {
    /// Canonicalize raw triples (sort row-major, merge duplicates, drop exact
    /// zeros) and verify bounds plus the Hermitian claim if made.
    pub fn new(
        basis: Arc<BasisIndex>,
        mut triples: Vec<Entry>,
        hermitian: bool,
    ) -> Result<Self, FockError> {
        let dim = basis.total_dim();
        for e in &triples {
            if e.row as usize >= dim || e.col as usize >= dim {
                return Err(FockError::IndexOutOfRange {
                    index: (e.row.max(e.col)) as usize,
                    dim,
                });
            }
        }
        triples.sort_unstable_by_key(|e| (e.row, e.col));
        let mut entries: Vec<Entry> = Vec::with_capacity(triples.len());
        for e in triples {
            match entries.last_mut() {
                Some(last) if last.row == e.row && last.col == e.col => last.value += e.value,
                _ => entries.push(e),
            }
        }
        entries.retain(|e| e.value != C64::ZERO);
        let op = Self { basis, entries, hermitian };
        if hermitian {
            let dev = op.hermitian_deviation();
            if dev > HERMITIAN_TOL {
                return Err(FockError::NotHermitian { max_dev: dev });
            }
        }
        Ok(op)
    }

    pub fn zero(basis: Arc<BasisIndex>) -> Self {
        Self { basis, entries: Vec::new(), hermitian: true }
    }

    pub fn identity(basis: Arc<BasisIndex>) -> Self {
        let entries = (0..basis.total_dim() as u32)
            .map(|i| Entry { row: i, col: i, value: C64::ONE })
            .collect();
        Self { basis, entries, hermitian: true }
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.basis.total_dim()
    }

    /// Max |H − H†| over all entries.
    pub fn hermitian_deviation(&self) -> f64 {
        let adj = self.adjoint_entries();
        max_abs_entry_diff(&self.entries, &adj)
    }

    fn adjoint_entries(&self) -> Vec<Entry> {
        let mut adj: Vec<Entry> = self
            .entries
            .iter()
            .map(|e| Entry { row: e.col, col: e.row, value: e.value.conj() })
            .collect();
        adj.sort_unstable_by_key(|e| (e.row, e.col));
        adj
    }

    pub fn adjoint(&self) -> Self {
        Self { basis: self.basis.clone(), entries: self.adjoint_entries(), hermitian: self.hermitian }
    }

    pub fn scale(&self, factor: C64) -> Self {
        if factor == C64::ZERO {
            return Self::zero(self.basis.clone());
        }
        let entries = self
            .entries
            .iter()
            .map(|e| Entry { value: e.value * factor, ..*e })
            .collect();
        Self {
            basis: self.basis.clone(),
            entries,
            hermitian: self.hermitian && factor.im == 0.0,
        }
    }

    /// Sorted-merge addition; the result is Hermitian iff both inputs are.
    pub fn add(&self, other: &Self) -> Result<Self, FockError> {
        if self.basis != other.basis {
            return Err(FockError::BasisMismatch);
        }
        let (a, b) = (&self.entries, &other.entries);
        let mut entries = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let take_a = j >= b.len()
                || (i < a.len() && (a[i].row, a[i].col) <= (b[j].row, b[j].col));
            let take_b = i >= a.len()
                || (j < b.len() && (b[j].row, b[j].col) <= (a[i].row, a[i].col));
            if take_a && take_b {
                let v = a[i].value + b[j].value;
                if v != C64::ZERO {
                    entries.push(Entry { row: a[i].row, col: a[i].col, value: v });
                }
                i += 1;
                j += 1;
            } else if take_a {
                entries.push(a[i]);
                i += 1;
            } else {
                entries.push(b[j]);
                j += 1;
            }
        }
        Ok(Self {
            basis: self.basis.clone(),
            entries,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    /// Sparse matrix product (used by composite builders and algebra tests).
    pub fn matmul(&self, other: &Self) -> Result<Self, FockError> {
        if self.basis != other.basis {
            return Err(FockError::BasisMismatch);
        }
        // Row pointer table for `other` so each product row merges in order.
        let dim = self.dim();
        let mut row_start = vec![0usize; dim + 1];
        for e in &other.entries {
            row_start[e.row as usize + 1] += 1;
        }
        for r in 0..dim {
            row_start[r + 1] += row_start[r];
        }
        let mut triples = Vec::new();
        for e in &self.entries {
            let k = e.col as usize;
            for be in &other.entries[row_start[k]..row_start[k + 1]] {
                triples.push(Entry { row: e.row, col: be.col, value: e.value * be.value });
            }
        }
        Self::new(self.basis.clone(), triples, false)
    }

    pub fn commutator(&self, other: &Self) -> Result<Self, FockError> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.add(&ba.scale(C64::from(-1.0)))
    }

    /// Largest |a_ij − b_ij| between two operators on the same basis.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64, FockError> {
        if self.basis != other.basis {
            return Err(FockError::BasisMismatch);
        }
        Ok(max_abs_entry_diff(&self.entries, &other.entries))
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().map(|e| e.value.norm()).fold(0.0, f64::max)
    }

    /// y = A x. Sequential accumulation over the row-major entry list;
    /// deterministic for a fixed operator.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        debug_assert_eq!(x.len(), self.dim());
        let mut y = vec![C64::ZERO; self.dim()];
        for e in &self.entries {
            y[e.row as usize] += e.value * x[e.col as usize];
        }
        y
    }

    /// Dense copy as nalgebra matrix (exact-diagonalization engine, oracles).
    pub fn to_dense(&self) -> nalgebra::DMatrix<C64> {
        let dim = self.dim();
        let mut m = nalgebra::DMatrix::from_element(dim, dim, C64::ZERO);
        for e in &self.entries {
            m[(e.row as usize, e.col as usize)] += e.value;
        }
        m
    }

    /// Textual triple export: header `dim=<total_dim>` then one
    /// `row col re im` line per entry in row-major order.
    pub fn export_triples(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "dim={}", self.dim());
        for e in &self.entries {
            let _ = writeln!(out, "{} {} {:.16e} {:.16e}", e.row, e.col, e.value.re, e.value.im);
        }
        out
    }
}

fn max_abs_entry_diff(a: &[Entry], b: &[Entry]) -> f64 {
    let mut max = 0.0f64;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a =
            j >= b.len() || (i < a.len() && (a[i].row, a[i].col) <= (b[j].row, b[j].col));
        let take_b =
            i >= a.len() || (j < b.len() && (b[j].row, b[j].col) <= (a[i].row, a[i].col));
        let d = if take_a && take_b {
            let d = (a[i].value - b[j].value).norm();
            i += 1;
            j += 1;
            d
        } else if take_a {
            i += 1;
            a[i - 1].value.norm()
        } else {
            j += 1;
            b[j - 1].value.norm()
        };
        max = max.max(d);
    }
    max
}

/// Embed a dense `d×d` matrix acting on one subsystem, identity elsewhere.
/// `local[i][j]` multiplies |i⟩⟨j| on that subsystem.
pub fn embed_local(
    basis: &Arc<BasisIndex>,
    subsystem: usize,
    local: &[Vec<C64>],
    hermitian: bool,
) -> Result<SparseOperator, FockError> {
    let d = basis.dims()[subsystem];
    debug_assert_eq!(local.len(), d);
    let stride = basis.stride(subsystem);
    let outer = basis.total_dim() / (d * stride);
    let mut triples = Vec::new();
    for o in 0..outer {
        let base = o * d * stride;
        for i in 0..d {
            for j in 0..d {
                let v = local[i][j];
                if v == C64::ZERO {
                    continue;
                }
                for inner in 0..stride {
                    triples.push(Entry {
                        row: (base + i * stride + inner) as u32,
                        col: (base + j * stride + inner) as u32,
                        value: v,
                    });
                }
            }
        }
    }
    SparseOperator::new(basis.clone(), triples, hermitian)
}

/// Qubit level labels: |α⟩ is the ground state, |β⟩ the excited state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Ground,
    Excited,
}

impl Level {
    fn occ(self) -> usize {
        match self {
            Level::Ground => 0,
            Level::Excited => 1,
        }
    }
}

/// General two-level transition operator σ^{jm} = |j⟩⟨m| on one site.
pub fn transition_operator(
    basis: &Arc<BasisIndex>,
    site: usize,
    ket: Level,
    bra: Level,
) -> Result<SparseOperator, FockError> {
    if site >= basis.n_sites() {
        return Err(FockError::SiteOutOfRange { site, n_sites: basis.n_sites() });
    }
    let mut local = vec![vec![C64::ZERO; 2]; 2];
    local[ket.occ()][bra.occ()] = C64::ONE;
    embed_local(basis, site, &local, ket == bra)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaKind {
    Plus,
    Minus,
    Z,
}

/// σ⁺ = |β⟩⟨α|, σ⁻ = |α⟩⟨β|, σᶻ = |β⟩⟨β| − |α⟩⟨α| on the given site.
pub fn sigma_operator(
    basis: &Arc<BasisIndex>,
    site: usize,
    kind: SigmaKind,
) -> Result<SparseOperator, FockError> {
    match kind {
        SigmaKind::Plus => transition_operator(basis, site, Level::Excited, Level::Ground),
        SigmaKind::Minus => transition_operator(basis, site, Level::Ground, Level::Excited),
        SigmaKind::Z => {
            if site >= basis.n_sites() {
                return Err(FockError::SiteOutOfRange { site, n_sites: basis.n_sites() });
            }
            let local = vec![
                vec![C64::from(-1.0), C64::ZERO],
                vec![C64::ZERO, C64::from(1.0)],
            ];
            embed_local(basis, site, &local, true)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Create,
    Annihilate,
}

/// Truncated ladder operator on bosonic mode `mode` (0 = photon, 1.. phonons).
/// Creation on the top state gives 0 (hard truncation).
pub fn ladder_operator(
    basis: &Arc<BasisIndex>,
    mode: usize,
    kind: LadderKind,
) -> Result<SparseOperator, FockError> {
    let subsystem = basis.mode_subsystem(mode)?;
    let d = basis.dims()[subsystem];
    let mut local = vec![vec![C64::ZERO; d]; d];
    for n in 1..d {
        let amp = C64::from((n as f64).sqrt());
        match kind {
            // a|n⟩ = √n |n−1⟩
            LadderKind::Annihilate => local[n - 1][n] = amp,
            // a⁺|n−1⟩ = √n |n⟩
            LadderKind::Create => local[n][n - 1] = amp,
        }
    }
    embed_local(basis, subsystem, &local, false)
}

/// Number operator n̂ = a⁺a on a mode (diagonal, exact under truncation).
pub fn number_operator(basis: &Arc<BasisIndex>, mode: usize) -> Result<SparseOperator, FockError> {
    let subsystem = basis.mode_subsystem(mode)?;
    let d = basis.dims()[subsystem];
    let mut local = vec![vec![C64::ZERO; d]; d];
    for (n, row) in local.iter_mut().enumerate() {
        row[n] = C64::from(n as f64);
    }
    embed_local(basis, subsystem, &local, true)
}

/// Complex amplitude vector tagged with its basis. Constructors normalize;
/// [`tensor_apply`] deliberately returns raw (unnormalized) output.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<BasisIndex>,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Normalize and wrap an amplitude vector.
    pub fn new(basis: Arc<BasisIndex>, mut amplitudes: Vec<C64>) -> Result<Self, FockError> {
        debug_assert_eq!(amplitudes.len(), basis.total_dim());
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(FockError::ZeroNorm);
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Ok(Self { basis, amplitudes })
    }

    /// Wrap without normalizing (propagator internals, operator application).
    pub fn from_raw(basis: Arc<BasisIndex>, amplitudes: Vec<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), basis.total_dim());
        Self { basis, amplitudes }
    }

    /// Computational basis state at flat index `index`.
    pub fn basis_state(basis: Arc<BasisIndex>, index: usize) -> Self {
        let mut amplitudes = vec![C64::ZERO; basis.total_dim()];
        amplitudes[index] = C64::ONE;
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<C64, FockError> {
        if self.basis != other.basis {
            return Err(FockError::BasisMismatch);
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |⟨self|other⟩| (overlap magnitude; squares to the usual fidelity).
    pub fn overlap(&self, other: &Self) -> Result<f64, FockError> {
        Ok(self.inner(other)?.norm())
    }
}

fn l2_norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Exact sparse mat-vec; no implicit renormalization.
pub fn tensor_apply(op: &SparseOperator, state: &StateVector) -> Result<StateVector, FockError> {
    if op.basis() != state.basis() {
        return Err(FockError::BasisMismatch);
    }
    Ok(StateVector::from_raw(op.basis().clone(), op.matvec(state.amplitudes())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn chain(n: usize) -> QubitChainSpec {
        QubitChainSpec::uniform(n, 1.0, Boundary::Open)
    }

    #[test]
    fn basis_dims_match_spec_examples() {
        let b = build_basis(&chain(1), &ModeSpec::photon(1.0, 1), &[]).unwrap();
        assert_eq!(b.total_dim(), 4);

        let b = build_basis(&chain(2), &ModeSpec::photon(1.0, 2), &[ModeSpec::phonon(1.0, 1)])
            .unwrap();
        assert_eq!(b.total_dim(), 24);

        let b = build_basis(&chain(1), &ModeSpec::photon(1.0, 120), &[]).unwrap();
        assert_eq!(b.total_dim(), 242);
    }

    #[test]
    fn capacity_cap_is_enforced() {
        let err = build_basis(&chain(2), &ModeSpec::photon(1.0, 2_000_000), &[]).unwrap_err();
        assert!(matches!(err, FockError::CapacityExceeded { .. }));
    }

    #[test]
    fn coherent_cutoff_rule() {
        assert_eq!(coherent_cutoff(50.0), 100);
        assert!(coherent_cutoff(50.0) <= 120);
    }

    #[test]
    fn rank_unrank_roundtrip_exhaustive() {
        let b = build_basis(&chain(2), &ModeSpec::photon(1.0, 3), &[ModeSpec::phonon(0.5, 2)])
            .unwrap();
        for idx in 0..b.total_dim() {
            let occ = b.unrank(idx);
            assert_eq!(b.rank(&occ), idx);
        }
    }

    proptest! {
        #[test]
        fn rank_unrank_roundtrip_sampled(
            n_sites in 1usize..4,
            photon_cut in 0usize..12,
            phonon_cut in 0usize..6,
            seed in 0usize..10_000,
        ) {
            let b = build_basis(
                &chain(n_sites),
                &ModeSpec::photon(1.0, photon_cut),
                &[ModeSpec::phonon(1.0, phonon_cut)],
            ).unwrap();
            let idx = seed % b.total_dim();
            prop_assert_eq!(b.rank(&b.unrank(idx)), idx);
        }
    }

    #[test]
    fn sigma_z_eigenvalues() {
        let b = build_basis(&chain(1), &ModeSpec::photon(1.0, 0), &[]).unwrap();
        let sz = sigma_operator(&b, 0, SigmaKind::Z).unwrap();
        // |α,0⟩ is flat index 0, |β,0⟩ is flat index 1 (photon dim 1).
        let ground = StateVector::basis_state(b.clone(), 0);
        let excited = StateVector::basis_state(b.clone(), 1);
        let g = tensor_apply(&sz, &ground).unwrap();
        let e = tensor_apply(&sz, &excited).unwrap();
        assert_abs_diff_eq!(g.amplitudes()[0].re, -1.0);
        assert_abs_diff_eq!(e.amplitudes()[1].re, 1.0);
    }

    #[test]
    fn sigma_commutator_identity() {
        let b = build_basis(&chain(1), &ModeSpec::photon(1.0, 0), &[]).unwrap();
        let sp = sigma_operator(&b, 0, SigmaKind::Plus).unwrap();
        let sm = sigma_operator(&b, 0, SigmaKind::Minus).unwrap();
        let sz = sigma_operator(&b, 0, SigmaKind::Z).unwrap();
        let comm = sp.commutator(&sm).unwrap();
        assert!(comm.max_abs_diff(&sz).unwrap() < 1e-15);
    }

    #[test]
    fn transition_operator_commutation_rules_all_index_pairs() {
        // [σ^{lm}, σ^{pq}] = σ^{lq} δ_mp − σ^{pm} δ_ql on one site.
        let b = build_basis(&chain(1), &ModeSpec::photon(1.0, 1), &[]).unwrap();
        let levels = [Level::Ground, Level::Excited];
        for &l in &levels {
            for &m in &levels {
                for &p in &levels {
                    for &q in &levels {
                        let lhs = transition_operator(&b, 0, l, m)
                            .unwrap()
                            .commutator(&transition_operator(&b, 0, p, q).unwrap())
                            .unwrap();
                        let mut rhs = SparseOperator::zero(b.clone());
                        if m == p {
                            rhs = rhs.add(&transition_operator(&b, 0, l, q).unwrap()).unwrap();
                        }
                        if q == l {
                            rhs = rhs
                                .add(
                                    &transition_operator(&b, 0, p, m)
                                        .unwrap()
                                        .scale(C64::from(-1.0)),
                                )
                                .unwrap();
                        }
                        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn operators_on_distinct_sites_commute() {
        let b = build_basis(&chain(2), &ModeSpec::photon(1.0, 2), &[ModeSpec::phonon(1.0, 1)])
            .unwrap();
        let ops = [
            sigma_operator(&b, 0, SigmaKind::Plus).unwrap(),
            sigma_operator(&b, 1, SigmaKind::Minus).unwrap(),
            ladder_operator(&b, 0, LadderKind::Create).unwrap(),
            ladder_operator(&b, 1, LadderKind::Annihilate).unwrap(),
        ];
        for i in 0..ops.len() {
            for j in i + 1..ops.len() {
                let c = ops[i].commutator(&ops[j]).unwrap();
                assert!(c.max_abs_entry() < 1e-12, "ops {i},{j} do not commute");
            }
        }
    }

    #[test]
    fn sigma_plus_leaves_other_site_occupations_alone() {
        let b = build_basis(&chain(2), &ModeSpec::photon(1.0, 1), &[]).unwrap();
        let sp0 = sigma_operator(&b, 0, SigmaKind::Plus).unwrap();
        // |α β, n=1⟩: site0 ground, site1 excited, photon 1.
        let idx = b.rank(&[0, 1, 1]);
        let out = tensor_apply(&sp0, &StateVector::basis_state(b.clone(), idx)).unwrap();
        let expect = b.rank(&[1, 1, 1]);
        for (i, amp) in out.amplitudes().iter().enumerate() {
            if i == expect {
                assert_abs_diff_eq!(amp.re, 1.0);
            } else {
                assert_eq!(*amp, C64::ZERO);
            }
        }
    }

    #[test]
    fn ladder_action() {
        let b = build_basis(&chain(1), &ModeSpec::photon(1.0, 5), &[]).unwrap();
        let a = ladder_operator(&b, 0, LadderKind::Annihilate).unwrap();
        let adag = ladder_operator(&b, 0, LadderKind::Create).unwrap();

        // annihilate|0⟩ = 0
        let vac = StateVector::basis_state(b.clone(), b.rank(&[0, 0]));
        let out = tensor_apply(&a, &vac).unwrap();
        assert_abs_diff_eq!(out.norm(), 0.0);

        // a a⁺ |3⟩ = 4 |3⟩
        let n3 = StateVector::basis_state(b.clone(), b.rank(&[0, 3]));
        let out = tensor_apply(&a, &tensor_apply(&adag, &n3).unwrap()).unwrap();
        let got = out.amplitudes()[b.rank(&[0, 3])];
        assert_abs_diff_eq!(got.re, 4.0, epsilon = 1e-14);

        // create on the top state vanishes (hard truncation).
        let top = StateVector::basis_state(b.clone(), b.rank(&[0, 5]));
        assert_abs_diff_eq!(tensor_apply(&adag, &top).unwrap().norm(), 0.0);
    }

    #[test]
    fn ladder_commutator_is_identity_below_cutoff() {
        let cutoff = 6;
        let b = build_basis(&chain(1), &ModeSpec::photon(1.0, cutoff), &[]).unwrap();
        let a = ladder_operator(&b, 0, LadderKind::Annihilate).unwrap();
        let adag = ladder_operator(&b, 0, LadderKind::Create).unwrap();
        let comm = a.commutator(&adag).unwrap();
        for n in 0..cutoff {
            for q in 0..2 {
                let idx = b.rank(&[q, n]);
                let e = StateVector::basis_state(b.clone(), idx);
                let out = tensor_apply(&comm, &e).unwrap();
                assert_abs_diff_eq!(out.amplitudes()[idx].re, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn hermitian_flag_is_verified() {
        let b = BasisIndex::single(2);
        let bad = SparseOperator::new(
            b,
            vec![Entry { row: 0, col: 1, value: C64::ONE }],
            true,
        );
        assert!(matches!(bad, Err(FockError::NotHermitian { .. })));
    }

    #[test]
    fn tensor_apply_identity_and_mismatch() {
        let b = build_basis(&chain(1), &ModeSpec::photon(1.0, 2), &[]).unwrap();
        let id = SparseOperator::identity(b.clone());
        let amps: Vec<C64> = (0..b.total_dim())
            .map(|i| C64::new(i as f64 + 0.3, 0.7 - i as f64))
            .collect();
        let psi = StateVector::new(b.clone(), amps).unwrap();
        let out = tensor_apply(&id, &psi).unwrap();
        for (x, y) in psi.amplitudes().iter().zip(out.amplitudes()) {
            assert_eq!(x, y);
        }

        let other = build_basis(&chain(1), &ModeSpec::photon(1.0, 3), &[]).unwrap();
        let id2 = SparseOperator::identity(other);
        assert!(matches!(tensor_apply(&id2, &psi), Err(FockError::BasisMismatch)));
    }

    proptest! {
        // Random sparse op vs. dense mat-vec oracle.
        #[test]
        fn matvec_matches_dense_oracle(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let dim = rng.gen_range(2usize..=64);
            let basis = BasisIndex::single(dim);
            let nnz = rng.gen_range(1usize..=dim * 4);
            let triples: Vec<Entry> = (0..nnz)
                .map(|_| Entry {
                    row: rng.gen_range(0..dim) as u32,
                    col: rng.gen_range(0..dim) as u32,
                    value: C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                })
                .collect();
            let op = SparseOperator::new(basis.clone(), triples, false).unwrap();
            let x: Vec<C64> = (0..dim)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let y = op.matvec(&x);
            let dense = op.to_dense();
            for r in 0..dim {
                let mut acc = C64::ZERO;
                for c in 0..dim {
                    acc += dense[(r, c)] * x[c];
                }
                prop_assert!((acc - y[r]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn export_triples_format() {
        let b = BasisIndex::single(2);
        let op = SparseOperator::new(
            b,
            vec![
                Entry { row: 1, col: 0, value: C64::new(0.5, -0.25) },
                Entry { row: 0, col: 1, value: C64::new(0.5, 0.25) },
            ],
            true,
        )
        .unwrap();
        let text = op.export_triples();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("dim=2"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0 1 "));
        let second = lines.next().unwrap();
        assert!(second.starts_with("1 0 "));
    }
}
