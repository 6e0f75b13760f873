//! Builders for every term of the chain–photon–phonon Hamiltonian and the
//! assembled total, in the Schrödinger picture with ħ = 1.
//!
//! Terms (all Hermitian by construction):
//!
//! * `H⁰`   — per-site two-level splitting, traceless per site:
//!   Σ_l (ω_l/2) σᶻ_l.
//! * `H^J`  — nearest-neighbour exchange. The model sum
//!   J(σ⁺σ⁻ + σ⁻σ⁺ + ½σᶻσᶻ) carries an explicit "+ H.c."; the conjugate is
//!   added literally, which doubles the already-Hermitian hopping part:
//!   Σ_bonds 2J(σ_n⁺σ_m⁻ + σ_n⁻σ_m⁺) + J σ_nᶻσ_mᶻ. This normalization is a
//!   fixed convention of the crate (see [`EXCHANGE_HC_DOUBLES_HOPPING`]).
//! * `H^F`, `H^Ph` — free fields ω(n̂ + ½) per mode, zero-point term kept.
//! * `H^CF` — qubit–photon coupling. Full form
//!   Σ_l [g_l (σ⁻+σ⁺) â + g_l* (σ⁻+σ⁺) â⁺], or the rotating-wave form
//!   Σ_l [g_l σ⁺ â + g_l* σ⁻ â⁺] when `rwa` is set.
//! * `H^CPh_z` — longitudinal phonon coupling Σ_{l,q} (λᶻ b̂ + λᶻ* b̂⁺) σᶻ_l.
//! * `H^CPh_±` — transverse phonon coupling
//!   Σ_{l,q} [λ± (σ⁻+σ⁺) b̂ + λ±* (σ⁻+σ⁺) b̂⁺] (no RWA applied here).
//!
//! Builders are pure functions of [`SystemSpec`]; they can run concurrently
//! for parameter sweeps.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::fockspace::{
    build_basis, embed_local, ladder_operator, sigma_operator, BasisIndex, Boundary, FockError,
    LadderKind, ModeSpec, QubitChainSpec, SigmaKind, SparseOperator,
};

/// The "+ H.c." in the exchange term is applied literally, doubling the
/// symmetric hopping part rather than halving duplicates.
pub const EXCHANGE_HC_DOUBLES_HOPPING: bool = true;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("invalid couplings: {0}")]
    InvalidCouplings(String),
}

/// All coupling constants of the model. Spatial phases of the dipole coupling
/// are absorbed into the complex phases of the per-site scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    /// Per-site qubit–photon coupling g_l (rad/time).
    pub photon_couplings: Vec<C64>,
    /// Per-(site, mode) longitudinal phonon coupling λᶻ (rad/time).
    pub phonon_z_couplings: Vec<Vec<C64>>,
    /// Per-(site, mode) transverse phonon coupling λ± (rad/time).
    pub phonon_pm_couplings: Vec<Vec<C64>>,
    /// Nearest-neighbour exchange constant J (rad/time).
    pub exchange_j: f64,
    /// Rotating-wave approximation for the photon coupling.
    pub rwa: bool,
}

impl CouplingSpec {
    /// All couplings zero (free chain + free fields).
    pub fn none(n_sites: usize, n_phonons: usize) -> Self {
        Self {
            photon_couplings: vec![C64::ZERO; n_sites],
            phonon_z_couplings: vec![vec![C64::ZERO; n_phonons]; n_sites],
            phonon_pm_couplings: vec![vec![C64::ZERO; n_phonons]; n_sites],
            exchange_j: 0.0,
            rwa: false,
        }
    }

    /// Uniform real photon coupling g on every site, no phonon couplings.
    pub fn uniform_photon(n_sites: usize, n_phonons: usize, g: f64, rwa: bool) -> Self {
        Self {
            photon_couplings: vec![C64::from(g); n_sites],
            rwa,
            ..Self::none(n_sites, n_phonons)
        }
    }

    fn validate(&self, n_sites: usize, n_phonons: usize) -> Result<(), HamiltonianError> {
        let shape_err = |what: &str| {
            Err(HamiltonianError::InvalidCouplings(format!(
                "{what} shape does not match n_sites = {n_sites}, n_phonons = {n_phonons}"
            )))
        };
        if self.photon_couplings.len() != n_sites {
            return shape_err("photon_couplings");
        }
        if self.phonon_z_couplings.len() != n_sites
            || self.phonon_z_couplings.iter().any(|row| row.len() != n_phonons)
        {
            return shape_err("phonon_z_couplings");
        }
        if self.phonon_pm_couplings.len() != n_sites
            || self.phonon_pm_couplings.iter().any(|row| row.len() != n_phonons)
        {
            return shape_err("phonon_pm_couplings");
        }
        let finite = self.photon_couplings.iter().all(|c| c.re.is_finite() && c.im.is_finite())
            && self
                .phonon_z_couplings
                .iter()
                .chain(&self.phonon_pm_couplings)
                .flatten()
                .all(|c| c.re.is_finite() && c.im.is_finite())
            && self.exchange_j.is_finite();
        if !finite {
            return Err(HamiltonianError::InvalidCouplings("non-finite coupling".into()));
        }
        Ok(())
    }
}

/// Full model definition: chain, photon mode, phonon modes, couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub chain: QubitChainSpec,
    pub photon: ModeSpec,
    pub phonons: Vec<ModeSpec>,
    pub couplings: CouplingSpec,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<(), HamiltonianError> {
        self.chain.validate()?;
        self.photon.validate()?;
        for ph in &self.phonons {
            ph.validate()?;
        }
        self.couplings.validate(self.chain.n_sites, self.phonons.len())?;
        Ok(())
    }

    /// Joint basis for this spec (checked against the capacity cap).
    pub fn basis(&self) -> Result<Arc<BasisIndex>, HamiltonianError> {
        self.validate()?;
        Ok(build_basis(&self.chain, &self.photon, &self.phonons)?)
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.chain.n_sites;
        match self.chain.boundary {
            Boundary::Open => (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
            Boundary::Periodic if n > 1 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Boundary::Periodic => Vec::new(),
        }
    }
}

/// H⁰ = Σ_l (ω_l/2) σᶻ_l — diagonal, traceless per site.
pub fn build_h0(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let basis = spec.basis()?;
    let mut h = SparseOperator::zero(basis.clone());
    for (site, &w) in spec.chain.transition_freqs.iter().enumerate() {
        let sz = sigma_operator(&basis, site, SigmaKind::Z)?;
        h = h.add(&sz.scale(C64::from(0.5 * w)))?;
    }
    Ok(h)
}

/// H^J = Σ_bonds [2J(σ_n⁺σ_m⁻ + σ_n⁻σ_m⁺) + J σ_nᶻσ_mᶻ].
pub fn build_hj(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let basis = spec.basis()?;
    let j = spec.couplings.exchange_j;
    let mut h = SparseOperator::zero(basis.clone());
    if j == 0.0 {
        return Ok(h);
    }
    for (n, m) in spec.bonds() {
        let sp_n = sigma_operator(&basis, n, SigmaKind::Plus)?;
        let sm_n = sigma_operator(&basis, n, SigmaKind::Minus)?;
        let sp_m = sigma_operator(&basis, m, SigmaKind::Plus)?;
        let sm_m = sigma_operator(&basis, m, SigmaKind::Minus)?;
        let sz_n = sigma_operator(&basis, n, SigmaKind::Z)?;
        let sz_m = sigma_operator(&basis, m, SigmaKind::Z)?;
        let hop = sp_n.matmul(&sm_m)?.add(&sm_n.matmul(&sp_m)?)?;
        let zz = sz_n.matmul(&sz_m)?;
        h = h
            .add(&hop.scale(C64::from(2.0 * j)))?
            .add(&zz.scale(C64::from(j)))?;
    }
    Ok(h)
}

/// H^F = ω_k (n̂ + ½) on the photon mode.
pub fn build_hf(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let basis = spec.basis()?;
    Ok(free_mode_term(&basis, basis.n_sites(), spec.photon.frequency)?)
}

/// H^Ph = Σ_q ω_q (n̂_q + ½) over phonon modes.
pub fn build_hph(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let basis = spec.basis()?;
    let mut h = SparseOperator::zero(basis.clone());
    for (q, mode) in spec.phonons.iter().enumerate() {
        h = h.add(&free_mode_term(&basis, basis.n_sites() + 1 + q, mode.frequency)?)?;
    }
    Ok(h)
}

fn free_mode_term(
    basis: &Arc<BasisIndex>,
    subsystem: usize,
    omega: f64,
) -> Result<SparseOperator, FockError> {
    let d = basis.dims()[subsystem];
    let mut local = vec![vec![C64::ZERO; d]; d];
    for (n, row) in local.iter_mut().enumerate() {
        row[n] = C64::from(omega * (n as f64 + 0.5));
    }
    embed_local(basis, subsystem, &local, true)
}

/// H^CF — qubit–photon dipole coupling, full or rotating-wave form.
pub fn build_hcf(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let basis = spec.basis()?;
    let a = ladder_operator(&basis, 0, LadderKind::Annihilate)?;
    let adag = ladder_operator(&basis, 0, LadderKind::Create)?;
    let mut h = SparseOperator::zero(basis.clone());
    for (site, &g) in spec.couplings.photon_couplings.iter().enumerate() {
        if g == C64::ZERO {
            continue;
        }
        let sp = sigma_operator(&basis, site, SigmaKind::Plus)?;
        let sm = sigma_operator(&basis, site, SigmaKind::Minus)?;
        let term = if spec.couplings.rwa {
            sp.matmul(&a)?
                .scale(g)
                .add(&sm.matmul(&adag)?.scale(g.conj()))?
        } else {
            let x = sp.add(&sm)?;
            x.matmul(&a)?
                .scale(g)
                .add(&x.matmul(&adag)?.scale(g.conj()))?
        };
        h = h.add(&term)?;
    }
    Ok(h)
}

/// H^CPh_z = Σ_{l,q} (λᶻ b̂_q + λᶻ* b̂_q⁺) σᶻ_l.
pub fn build_hcph_z(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let basis = spec.basis()?;
    let mut h = SparseOperator::zero(basis.clone());
    for (site, row) in spec.couplings.phonon_z_couplings.iter().enumerate() {
        let sz = sigma_operator(&basis, site, SigmaKind::Z)?;
        for (q, &lam) in row.iter().enumerate() {
            if lam == C64::ZERO {
                continue;
            }
            let b = ladder_operator(&basis, 1 + q, LadderKind::Annihilate)?;
            let bdag = ladder_operator(&basis, 1 + q, LadderKind::Create)?;
            let field = b.scale(lam).add(&bdag.scale(lam.conj()))?;
            h = h.add(&field.matmul(&sz)?)?;
        }
    }
    Ok(h)
}

/// H^CPh_± = Σ_{l,q} [λ± (σ⁻+σ⁺) b̂_q + λ±* (σ⁻+σ⁺) b̂_q⁺].
pub fn build_hcph_pm(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let basis = spec.basis()?;
    let mut h = SparseOperator::zero(basis.clone());
    for (site, row) in spec.couplings.phonon_pm_couplings.iter().enumerate() {
        let x = sigma_operator(&basis, site, SigmaKind::Plus)?
            .add(&sigma_operator(&basis, site, SigmaKind::Minus)?)?;
        for (q, &lam) in row.iter().enumerate() {
            if lam == C64::ZERO {
                continue;
            }
            let b = ladder_operator(&basis, 1 + q, LadderKind::Annihilate)?;
            let bdag = ladder_operator(&basis, 1 + q, LadderKind::Create)?;
            let term = x.matmul(&b)?.scale(lam).add(&x.matmul(&bdag)?.scale(lam.conj()))?;
            h = h.add(&term)?;
        }
    }
    Ok(h)
}

/// Total Hamiltonian H⁰ + H^J + H^F + H^CF + H^Ph + H^CPh_z + H^CPh_±,
/// verified Hermitian.
pub fn assemble_total(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let h = build_h0(spec)?
        .add(&build_hj(spec)?)?
        .add(&build_hf(spec)?)?
        .add(&build_hcf(spec)?)?
        .add(&build_hph(spec)?)?
        .add(&build_hcph_z(spec)?)?
        .add(&build_hcph_pm(spec)?)?;
    // Builders compose Hermitian pieces from non-Hermitian factors, so the
    // flag cannot be tracked through matmul; re-verify on the assembled sum.
    let h = SparseOperator::new(h.basis().clone(), h.entries().to_vec(), true)?;
    Ok(h)
}

/// Total excitation number N̂ = Σ_l σ⁺_l σ⁻_l + â⁺â; conserved when the
/// photon coupling is rotating-wave and phonon couplings vanish.
pub fn excitation_number(spec: &SystemSpec) -> Result<SparseOperator, HamiltonianError> {
    let basis = spec.basis()?;
    let mut n = crate::fockspace::number_operator(&basis, 0)?;
    for site in 0..spec.chain.n_sites {
        let sp = sigma_operator(&basis, site, SigmaKind::Plus)?;
        let sm = sigma_operator(&basis, site, SigmaKind::Minus)?;
        n = n.add(&sp.matmul(&sm)?)?;
    }
    Ok(n)
}
