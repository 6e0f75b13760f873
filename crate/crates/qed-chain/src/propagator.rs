//! Time evolution under a sparse Hermitian Hamiltonian (ħ = 1), initial-state
//! preparation, and the analytic single-qubit collapse/revival oracle.
//!
//! Two engines:
//!
//! * `EigenExact` — dense Hermitian eigendecomposition; every sample is
//!   computed directly as ψ(t) = Σ_k e^{−iE_k t}|k⟩⟨k|ψ₀⟩, so there is no
//!   error accumulation in t. Capped at dimension 4096.
//! * `Krylov` — adaptive Lanczos propagator for larger spaces. Each substep
//!   builds an orthonormal Krylov basis once and shrinks the step until the
//!   residual-based local error estimate is below `step_tolerance`.
//!
//! Engines are pure functions of (H, ψ₀, config); a single trajectory is
//! sequential in time with deterministic mat-vec, so identical inputs give
//! identical output bytes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::fockspace::{BasisIndex, FockError, SparseOperator, StateVector};

/// Largest dimension accepted by the dense exact engine.
pub const EXACT_DIM_CAP: usize = 4096;

/// Coherent-state truncation: reject preparations whose Poisson tail mass
/// beyond the cutoff exceeds this.
pub const COHERENT_TAIL_CAP: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PropagatorError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("dimension {dim} too large for the exact engine (cap {cap}); use the krylov engine")]
    DimensionTooLarge { dim: usize, cap: usize },
    #[error(
        "krylov propagation failed to converge at t = {t:.6e} (step {tau:.3e}, estimate {est:.3e} > tolerance {tol:.3e}); increase krylov_dim or step_tolerance"
    )]
    KrylovNonConvergence { t: f64, tau: f64, est: f64, tol: f64 },
    #[error("coherent state with n̄ = {n_bar} leaves tail mass {tail:.3e} beyond cutoff {cutoff}; need cutoff >= {needed}")]
    CoherentTail { n_bar: f64, cutoff: usize, tail: f64, needed: usize },
    #[error("qubit coefficients at site {site} are not normalized (|c1|² + |c2|² = {norm_sqr})")]
    NonNormalizedCoeffs { site: usize, norm_sqr: f64 },
    #[error("operation requires at least one qubit site in the basis")]
    NoQubits,
    #[error("time series channel '{0}' not found")]
    ChannelNotFound(String),
    #[error("time series parse error at line {line}: {msg}")]
    SeriesParse { line: usize, msg: String },
}

/// Propagation engine selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    EigenExact,
    Krylov,
}

/// Sampling grid and engine parameters for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub t_max: f64,
    pub dt_sample: f64,
    pub engine: Engine,
    pub krylov_dim: usize,
    pub step_tolerance: f64,
}

impl EvolutionConfig {
    pub fn new(t_max: f64, dt_sample: f64, engine: Engine) -> Self {
        Self { t_max, dt_sample, engine, krylov_dim: 30, step_tolerance: 1e-10 }
    }

    pub fn validate(&self) -> Result<(), PropagatorError> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(PropagatorError::InvalidConfig("t_max must be > 0".into()));
        }
        if !(self.dt_sample > 0.0) || !self.dt_sample.is_finite() {
            return Err(PropagatorError::InvalidConfig("dt_sample must be > 0".into()));
        }
        if self.krylov_dim < 2 {
            return Err(PropagatorError::InvalidConfig("krylov_dim must be >= 2".into()));
        }
        if !(self.step_tolerance > 0.0) {
            return Err(PropagatorError::InvalidConfig("step_tolerance must be > 0".into()));
        }
        Ok(())
    }

    /// Number of sampling intervals (samples = intervals + 1, including t = 0).
    pub fn n_intervals(&self) -> usize {
        (self.t_max / self.dt_sample + 1e-9).floor() as usize
    }

    pub fn sample_times(&self) -> Vec<f64> {
        (0..=self.n_intervals()).map(|k| k as f64 * self.dt_sample).collect()
    }
}

/// Sampled observable trajectories: a shared time grid plus named channels.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    channels: Vec<(String, Channel)>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>) -> Self {
        debug_assert!(times.windows(2).all(|w| w[1] > w[0]));
        Self { times, channels: Vec::new() }
    }

    pub fn push_real(&mut self, name: impl Into<String>, data: Vec<f64>) {
        debug_assert_eq!(data.len(), self.times.len());
        self.channels.push((name.into(), Channel::Real(data)));
    }

    pub fn push_complex(&mut self, name: impl Into<String>, data: Vec<C64>) {
        debug_assert_eq!(data.len(), self.times.len());
        self.channels.push((name.into(), Channel::Complex(data)));
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|(n, _)| n.as_str())
    }

    pub fn real_channel(&self, name: &str) -> Result<&[f64], PropagatorError> {
        self.channels
            .iter()
            .find_map(|(n, c)| match c {
                Channel::Real(v) if n == name => Some(v.as_slice()),
                _ => None,
            })
            .ok_or_else(|| PropagatorError::ChannelNotFound(name.into()))
    }

    pub fn complex_channel(&self, name: &str) -> Result<&[C64], PropagatorError> {
        self.channels
            .iter()
            .find_map(|(n, c)| match c {
                Channel::Complex(v) if n == name => Some(v.as_slice()),
                _ => None,
            })
            .ok_or_else(|| PropagatorError::ChannelNotFound(name.into()))
    }

    /// CSV export: header `t,<channel>,...` in insertion order, complex
    /// channels split into `<name>_re,<name>_im`, 17-significant-digit floats.
    pub fn to_csv(&self) -> String {
        let mut header = String::from("t");
        for (name, chan) in &self.channels {
            match chan {
                Channel::Real(_) => {
                    header.push(',');
                    header.push_str(name);
                }
                Channel::Complex(_) => {
                    header.push_str(&format!(",{name}_re,{name}_im"));
                }
            }
        }
        let mut out = header;
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            out.push_str(&format!("{t:.16e}"));
            for (_, chan) in &self.channels {
                match chan {
                    Channel::Real(v) => out.push_str(&format!(",{:.16e}", v[k])),
                    Channel::Complex(v) => {
                        out.push_str(&format!(",{:.16e},{:.16e}", v[k].re, v[k].im))
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parse the CSV format written by [`TimeSeries::to_csv`]. Adjacent
    /// `<name>_re,<name>_im` columns are rejoined into one complex channel.
    pub fn from_csv(text: &str) -> Result<Self, PropagatorError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(PropagatorError::SeriesParse { line: 1, msg: "empty file".into() })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"t") {
            return Err(PropagatorError::SeriesParse {
                line: 1,
                msg: "header must start with 't'".into(),
            });
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            let vals = vals.map_err(|e| PropagatorError::SeriesParse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            if vals.len() != cols.len() {
                return Err(PropagatorError::SeriesParse {
                    line: i + 1,
                    msg: format!("expected {} columns, got {}", cols.len(), vals.len()),
                });
            }
            rows.push(vals);
        }
        let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(PropagatorError::SeriesParse {
                line: 0,
                msg: "times not strictly increasing".into(),
            });
        }
        let mut series = TimeSeries::new(times);
        let mut c = 1;
        while c < cols.len() {
            let name = cols[c];
            if let Some(base) = name.strip_suffix("_re") {
                if c + 1 < cols.len() && cols[c + 1] == format!("{base}_im") {
                    let data = rows
                        .iter()
                        .map(|r| C64::new(r[c], r[c + 1]))
                        .collect();
                    series.push_complex(base, data);
                    c += 2;
                    continue;
                }
            }
            series.push_real(name, rows.iter().map(|r| r[c]).collect());
            c += 1;
        }
        Ok(series)
    }
}

/// ⟨ψ|Op|ψ⟩. Real to ~1e-10 when the operator is flagged Hermitian.
pub fn expect(op: &SparseOperator, psi: &StateVector) -> Result<C64, PropagatorError> {
    if op.basis() != psi.basis() {
        return Err(FockError::BasisMismatch.into());
    }
    let hp = op.matvec(psi.amplitudes());
    Ok(psi
        .amplitudes()
        .iter()
        .zip(&hp)
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// Poisson tail mass beyond `cutoff` for mean `n_bar`.
pub fn poisson_tail(n_bar: f64, cutoff: usize) -> f64 {
    if n_bar == 0.0 {
        return 0.0;
    }
    let mut p = (-n_bar).exp();
    let mut head = p;
    for n in 1..=cutoff {
        p *= n_bar / n as f64;
        head += p;
    }
    (1.0 - head).max(0.0)
}

/// Truncated coherent state |α⟩ on bosonic mode `mode` of `basis`, as a state
/// on that single-mode factor. Amplitudes ∝ αⁿ/√(n!), renormalized after
/// truncation; fails if the truncated tail mass exceeds [`COHERENT_TAIL_CAP`].
pub fn coherent_state(
    basis: &Arc<BasisIndex>,
    mode: usize,
    alpha: C64,
) -> Result<StateVector, PropagatorError> {
    let subsystem = basis.mode_subsystem(mode)?;
    let dim = basis.dims()[subsystem];
    let cutoff = dim - 1;
    let n_bar = alpha.norm_sqr();
    let tail = poisson_tail(n_bar, cutoff);
    if tail > COHERENT_TAIL_CAP {
        return Err(PropagatorError::CoherentTail {
            n_bar,
            cutoff,
            tail,
            needed: crate::fockspace::coherent_cutoff(n_bar),
        });
    }
    let mut amps = vec![C64::ZERO; dim];
    amps[0] = C64::ONE;
    for n in 1..dim {
        amps[n] = amps[n - 1] * alpha / C64::from((n as f64).sqrt());
    }
    Ok(StateVector::new(BasisIndex::single(dim), amps)?)
}

/// Fock state |n⟩ on bosonic mode `mode`, as a single-mode factor state.
pub fn fock_state(
    basis: &Arc<BasisIndex>,
    mode: usize,
    n: usize,
) -> Result<StateVector, PropagatorError> {
    let subsystem = basis.mode_subsystem(mode)?;
    let dim = basis.dims()[subsystem];
    if n >= dim {
        return Err(FockError::IndexOutOfRange { index: n, dim }.into());
    }
    Ok(StateVector::basis_state(BasisIndex::single(dim), n))
}

/// Tensor product of per-site qubit states (c1|α⟩ + c2|β⟩), the given photon
/// state and vacuum in every phonon mode.
pub fn product_initial_state(
    basis: &Arc<BasisIndex>,
    qubit_coeffs: &[(C64, C64)],
    field_state: &StateVector,
) -> Result<StateVector, PropagatorError> {
    let n_modes = basis.n_modes();
    let mut mode_states = Vec::with_capacity(n_modes);
    mode_states.push(field_state.clone());
    for mode in 1..n_modes {
        mode_states.push(fock_state(basis, mode, 0)?);
    }
    product_state_with_modes(basis, qubit_coeffs, &mode_states)
}

/// Full tensor product with an explicit state for every bosonic mode.
pub fn product_state_with_modes(
    basis: &Arc<BasisIndex>,
    qubit_coeffs: &[(C64, C64)],
    mode_states: &[StateVector],
) -> Result<StateVector, PropagatorError> {
    let n_sites = basis.n_sites();
    if qubit_coeffs.len() != n_sites {
        return Err(PropagatorError::InvalidConfig(format!(
            "expected {} qubit coefficient pairs, got {}",
            n_sites,
            qubit_coeffs.len()
        )));
    }
    for (site, (c1, c2)) in qubit_coeffs.iter().enumerate() {
        let norm_sqr = c1.norm_sqr() + c2.norm_sqr();
        if (norm_sqr - 1.0).abs() > 1e-9 {
            return Err(PropagatorError::NonNormalizedCoeffs { site, norm_sqr });
        }
    }
    if mode_states.len() != basis.n_modes() {
        return Err(PropagatorError::InvalidConfig(format!(
            "expected {} mode states, got {}",
            basis.n_modes(),
            mode_states.len()
        )));
    }
    let mode_dims: Vec<usize> = basis.dims()[n_sites..].to_vec();
    for (m, st) in mode_states.iter().enumerate() {
        if st.basis().total_dim() != mode_dims[m] {
            return Err(PropagatorError::InvalidConfig(format!(
                "mode state {m} has dimension {}, basis expects {}",
                st.basis().total_dim(),
                mode_dims[m]
            )));
        }
    }
    let modes_size: usize = mode_dims.iter().product();
    let mut amps = vec![C64::ZERO; basis.total_dim()];
    for q_idx in 0..(1usize << n_sites) {
        let mut qc = C64::ONE;
        for (site, (c1, c2)) in qubit_coeffs.iter().enumerate() {
            let bit = (q_idx >> (n_sites - 1 - site)) & 1;
            qc *= if bit == 0 { *c1 } else { *c2 };
        }
        if qc == C64::ZERO {
            continue;
        }
        for m_idx in 0..modes_size {
            let mut mc = C64::ONE;
            let mut rem = m_idx;
            for (d, st) in mode_dims.iter().zip(mode_states).rev() {
                mc *= st.amplitudes()[rem % d];
                rem /= d;
                if mc == C64::ZERO {
                    break;
                }
            }
            if mc != C64::ZERO {
                amps[q_idx * modes_size + m_idx] = qc * mc;
            }
        }
    }
    Ok(StateVector::new(basis.clone(), amps)?)
}

/// Probability that every qubit is in its ground state (summed over all field
/// occupations): Σ_n |⟨α…α, n|ψ⟩|².
pub fn ground_probability(psi: &StateVector) -> Result<f64, PropagatorError> {
    let basis = psi.basis();
    if basis.n_sites() == 0 {
        return Err(PropagatorError::NoQubits);
    }
    let modes_size: usize = basis.dims()[basis.n_sites()..].iter().product();
    Ok(psi.amplitudes()[..modes_size].iter().map(|a| a.norm_sqr()).sum())
}

/// Ground-qubit survival probability for each sampled state.
pub fn survival_probability(samples: &[StateVector]) -> Result<Vec<f64>, PropagatorError> {
    samples.iter().map(ground_probability).collect()
}

/// Stream states through `visit(sample_index, t, ψ(t))` without retaining the
/// whole trajectory. Sample 0 is the initial state.
pub fn evolve_with<F>(
    h: &SparseOperator,
    psi0: &StateVector,
    cfg: &EvolutionConfig,
    mut visit: F,
) -> Result<(), PropagatorError>
where
    F: FnMut(usize, f64, &StateVector),
{
    cfg.validate()?;
    if h.basis() != psi0.basis() {
        return Err(FockError::BasisMismatch.into());
    }
    match cfg.engine {
        Engine::EigenExact => evolve_exact_impl(h, psi0, cfg, &mut visit),
        Engine::Krylov => evolve_krylov_impl(h, psi0, cfg, &mut visit),
    }
}

/// Exact dense-eigendecomposition evolution; returns all samples.
pub fn evolve_exact(
    h: &SparseOperator,
    psi0: &StateVector,
    cfg: &EvolutionConfig,
) -> Result<Vec<StateVector>, PropagatorError> {
    let cfg = EvolutionConfig { engine: Engine::EigenExact, ..cfg.clone() };
    collect_samples(h, psi0, &cfg)
}

/// Adaptive Lanczos evolution; returns all samples.
pub fn evolve_krylov(
    h: &SparseOperator,
    psi0: &StateVector,
    cfg: &EvolutionConfig,
) -> Result<Vec<StateVector>, PropagatorError> {
    let cfg = EvolutionConfig { engine: Engine::Krylov, ..cfg.clone() };
    collect_samples(h, psi0, &cfg)
}

fn collect_samples(
    h: &SparseOperator,
    psi0: &StateVector,
    cfg: &EvolutionConfig,
) -> Result<Vec<StateVector>, PropagatorError> {
    let mut out = Vec::with_capacity(cfg.n_intervals() + 1);
    evolve_with(h, psi0, cfg, |_, _, psi| out.push(psi.clone()))?;
    Ok(out)
}

fn evolve_exact_impl<F>(
    h: &SparseOperator,
    psi0: &StateVector,
    cfg: &EvolutionConfig,
    visit: &mut F,
) -> Result<(), PropagatorError>
where
    F: FnMut(usize, f64, &StateVector),
{
    let dim = h.dim();
    if dim > EXACT_DIM_CAP {
        return Err(PropagatorError::DimensionTooLarge { dim, cap: EXACT_DIM_CAP });
    }
    let eig = h.to_dense().symmetric_eigen();
    let c0 = eig.eigenvectors.adjoint() * DVector::from_column_slice(psi0.amplitudes());
    for k in 0..=cfg.n_intervals() {
        let t = k as f64 * cfg.dt_sample;
        let phased = DVector::from_iterator(
            dim,
            eig.eigenvalues
                .iter()
                .zip(c0.iter())
                .map(|(&e, &c)| C64::from_polar(1.0, -e * t) * c),
        );
        let amps = &eig.eigenvectors * phased;
        let psi = StateVector::from_raw(psi0.basis().clone(), amps.as_slice().to_vec());
        visit(k, t, &psi);
    }
    Ok(())
}

/// One Lanczos decomposition: basis vectors, tridiagonal coefficients and the
/// residual norm β_next used for the local error estimate.
struct LanczosBasis {
    vecs: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    beta_next: f64,
}

fn lanczos_basis(h: &SparseOperator, v0: &[C64], m: usize) -> LanczosBasis {
    let dim = v0.len();
    let mut vecs: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut alpha = Vec::with_capacity(m);
    let mut beta = Vec::with_capacity(m.saturating_sub(1));
    vecs.push(v0.to_vec());
    let mut beta_next = 0.0;
    for j in 0..m {
        let mut w = h.matvec(&vecs[j]);
        let aj: f64 = vecs[j]
            .iter()
            .zip(&w)
            .map(|(v, w)| (v.conj() * w).re)
            .sum();
        alpha.push(aj);
        // Full re-orthogonalization keeps the basis numerically orthonormal.
        for vprev in &vecs {
            let overlap: C64 = vprev.iter().zip(&w).map(|(v, w)| v.conj() * w).sum();
            for (wi, vi) in w.iter_mut().zip(vprev) {
                *wi -= overlap * vi;
            }
        }
        let bj = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let scale = alpha.iter().fold(1.0f64, |acc, a| acc.max(a.abs()));
        if bj <= 1e-14 * scale {
            beta_next = 0.0;
            break;
        }
        if j + 1 == m {
            beta_next = bj;
            break;
        }
        beta.push(bj);
        let mut v = w;
        for x in &mut v {
            *x /= bj;
        }
        debug_assert_eq!(v.len(), dim);
        vecs.push(v);
    }
    LanczosBasis { vecs, alpha, beta, beta_next }
}

/// exp(−iτT) e₁ for the real symmetric tridiagonal T.
fn tridiag_exp_e1(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::from_element(m, m, 0.0f64);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    // w = U exp(−iτΛ) Uᵀ e₁
    let u_row0: Vec<f64> = (0..m).map(|j| eig.eigenvectors[(0, j)]).collect();
    let mut w = vec![C64::ZERO; m];
    for j in 0..m {
        let phase = C64::from_polar(1.0, -eig.eigenvalues[j] * tau);
        let cj = phase * u_row0[j];
        for (i, wi) in w.iter_mut().enumerate() {
            *wi += eig.eigenvectors[(i, j)] * cj;
        }
    }
    w
}

fn evolve_krylov_impl<F>(
    h: &SparseOperator,
    psi0: &StateVector,
    cfg: &EvolutionConfig,
    visit: &mut F,
) -> Result<(), PropagatorError>
where
    F: FnMut(usize, f64, &StateVector),
{
    let mut psi = psi0.amplitudes().to_vec();
    visit(0, 0.0, psi0);
    let tau_min = cfg.dt_sample * 1e-12;
    let mut tau_suggest = cfg.dt_sample;
    for k in 1..=cfg.n_intervals() {
        let mut remaining = cfg.dt_sample;
        while remaining > cfg.dt_sample * 1e-14 {
            let basis = lanczos_basis(h, &psi, cfg.krylov_dim);
            let mut tau = tau_suggest.min(remaining);
            let w = loop {
                let w = tridiag_exp_e1(&basis.alpha, &basis.beta, tau);
                let est = basis.beta_next * w.last().map_or(0.0, |x| x.norm());
                if est <= cfg.step_tolerance {
                    // Leave headroom so the next step starts near this size.
                    tau_suggest = if est < cfg.step_tolerance / 100.0 {
                        (tau * 1.5).min(cfg.dt_sample)
                    } else {
                        tau
                    };
                    break w;
                }
                tau /= 2.0;
                if tau < tau_min {
                    let t = k as f64 * cfg.dt_sample - remaining;
                    return Err(PropagatorError::KrylovNonConvergence {
                        t,
                        tau,
                        est,
                        tol: cfg.step_tolerance,
                    });
                }
            };
            let mut next = vec![C64::ZERO; psi.len()];
            for (wj, vj) in w.iter().zip(&basis.vecs) {
                for (n, v) in next.iter_mut().zip(vj) {
                    *n += wj * v;
                }
            }
            psi = next;
            remaining -= tau;
        }
        let t = k as f64 * cfg.dt_sample;
        let state = StateVector::from_raw(psi0.basis().clone(), psi.clone());
        visit(k, t, &state);
    }
    Ok(())
}

/// Analytic ⟨σᶻ(t)⟩ of the rotating-wave single-qubit model starting from
/// the atomic ground state and a coherent field of mean occupation `n_bar`:
/// at resonance −Σ_n p_n cos(2g√n t); detuned, the generalized Rabi frequency
/// Ω_n = √(Δ² + 4g²n) enters as Σ_n p_n [−1 + (4g²n/Ω_n²)(1 − cos Ω_n t)].
pub fn jcm_sigma_z_analytic(t: f64, n_bar: f64, g: f64, delta: f64) -> f64 {
    let mut p = (-n_bar).exp();
    let mut sum = 0.0;
    let mut n = 0usize;
    loop {
        if n > 0 {
            p *= n_bar / n as f64;
        }
        let four_g2n = 4.0 * g * g * n as f64;
        let contrib = if four_g2n == 0.0 {
            -p
        } else {
            let omega_sqr = delta * delta + four_g2n;
            let frac = four_g2n / omega_sqr;
            p * (-1.0 + frac * (1.0 - (omega_sqr.sqrt() * t).cos()))
        };
        sum += contrib;
        n += 1;
        let done = n as f64 > n_bar + 20.0 * n_bar.sqrt() + 60.0 || (p < 1e-20 && n as f64 > n_bar);
        if done {
            break;
        }
    }
    sum
}

/// First revival time of the collapse/revival cycle, (π/g²)√(Δ² + 4g²n̄);
/// 2π√n̄/g at resonance.
pub fn jcm_revival_time(n_bar: f64, g: f64, delta: f64) -> f64 {
    std::f64::consts::PI / (g * g) * (delta * delta + 4.0 * g * g * n_bar).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{
        number_operator, sigma_operator, Boundary, ModeSpec, QubitChainSpec, SigmaKind,
    };
    use crate::hamiltonian::{assemble_total, CouplingSpec, SystemSpec};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn jcm_spec(n_bar_cutoff: usize, g: f64) -> SystemSpec {
        SystemSpec {
            chain: QubitChainSpec::uniform(1, 1.0, Boundary::Open),
            photon: ModeSpec::photon(1.0, n_bar_cutoff),
            phonons: vec![],
            couplings: CouplingSpec::uniform_photon(1, 0, g, true),
        }
    }

    fn ground_coherent(spec: &SystemSpec, alpha: C64) -> StateVector {
        let basis = spec.basis().unwrap();
        let field = coherent_state(&basis, 0, alpha).unwrap();
        product_initial_state(&basis, &[(C64::ONE, C64::ZERO)], &field).unwrap()
    }

    #[test]
    fn coherent_state_means() {
        let spec = jcm_spec(120, 0.0);
        let basis = spec.basis().unwrap();

        // α = 0 is the vacuum.
        let vac = coherent_state(&basis, 0, C64::ZERO).unwrap();
        assert_abs_diff_eq!(vac.amplitudes()[0].re, 1.0);

        // n̄ = 50 with cutoff 120.
        let psi = ground_coherent(&spec, C64::from(50.0f64.sqrt()));
        let n_op = number_operator(&basis, 0).unwrap();
        let n_mean = expect(&n_op, &psi).unwrap().re;
        assert_abs_diff_eq!(n_mean, 50.0, epsilon = 1e-4);

        // n̄ = 1 with cutoff 25.
        let spec1 = jcm_spec(25, 0.0);
        let psi1 = ground_coherent(&spec1, C64::ONE);
        let basis1 = spec1.basis().unwrap();
        let n1 = expect(&number_operator(&basis1, 0).unwrap(), &psi1).unwrap().re;
        assert_abs_diff_eq!(n1, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn coherent_tail_rejected() {
        let spec = jcm_spec(10, 0.0);
        let basis = spec.basis().unwrap();
        let err = coherent_state(&basis, 0, C64::from(50.0f64.sqrt())).unwrap_err();
        assert!(matches!(err, PropagatorError::CoherentTail { .. }));
    }

    #[test]
    fn product_state_sigma_z_expectations() {
        let spec = jcm_spec(20, 0.0);
        let basis = spec.basis().unwrap();
        let sz = sigma_operator(&basis, 0, SigmaKind::Z).unwrap();

        let ground = ground_coherent(&spec, C64::from(2.0));
        assert_abs_diff_eq!(expect(&sz, &ground).unwrap().re, -1.0, epsilon = 1e-12);

        let half = C64::from(0.5f64.sqrt());
        let field = fock_state(&basis, 0, 0).unwrap();
        let sup = product_initial_state(&basis, &[(half, half)], &field).unwrap();
        assert_abs_diff_eq!(expect(&sz, &sup).unwrap().re, 0.0, epsilon = 1e-12);

        let bad = product_initial_state(&basis, &[(C64::ONE, C64::ONE)], &field);
        assert!(matches!(bad, Err(PropagatorError::NonNormalizedCoeffs { .. })));
    }

    #[test]
    fn exact_engine_preserves_eigenstates() {
        let spec = jcm_spec(3, 0.0);
        let basis = spec.basis().unwrap();
        let h = assemble_total(&spec).unwrap();
        let psi0 = StateVector::basis_state(basis.clone(), basis.rank(&[1, 2]));
        let cfg = EvolutionConfig::new(5.0, 0.5, Engine::EigenExact);
        let samples = evolve_exact(&h, &psi0, &cfg).unwrap();
        for s in &samples {
            // Eigenstate picks up only a global phase.
            assert_abs_diff_eq!(s.overlap(&psi0).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_qubit_phase_convention() {
        // ⟨σ⁺(t)⟩ rotates as e^{+iω₀t} for a free qubit.
        let omega0 = 1.3;
        let spec = SystemSpec {
            chain: QubitChainSpec::uniform(1, omega0, Boundary::Open),
            photon: ModeSpec::photon(1.0, 0),
            phonons: vec![],
            couplings: CouplingSpec::none(1, 0),
        };
        let basis = spec.basis().unwrap();
        let h = assemble_total(&spec).unwrap();
        let half = C64::from(0.5f64.sqrt());
        let field = fock_state(&basis, 0, 0).unwrap();
        let psi0 = product_initial_state(&basis, &[(half, half)], &field).unwrap();
        let sp = sigma_operator(&basis, 0, SigmaKind::Plus).unwrap();
        let cfg = EvolutionConfig::new(4.0, 0.25, Engine::EigenExact);
        let samples = evolve_exact(&h, &psi0, &cfg).unwrap();
        for (k, s) in samples.iter().enumerate() {
            let t = k as f64 * cfg.dt_sample;
            let got = expect(&sp, s).unwrap();
            let want = C64::from(0.5) * C64::from_polar(1.0, omega0 * t);
            assert!((got - want).norm() < 1e-10, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn analytic_matches_exact_engine_small_nbar() {
        let g = 1.0;
        let n_bar: f64 = 3.0;
        let spec = jcm_spec(40, g);
        let basis = spec.basis().unwrap();
        let h = assemble_total(&spec).unwrap();
        let psi0 = ground_coherent(&spec, C64::from(n_bar.sqrt()));
        let sz = sigma_operator(&basis, 0, SigmaKind::Z).unwrap();
        let cfg = EvolutionConfig::new(20.0, 0.05, Engine::EigenExact);
        let mut max_err = 0.0f64;
        evolve_with(&h, &psi0, &cfg, |_, t, psi| {
            let num = expect(&sz, psi).unwrap().re;
            let ana = jcm_sigma_z_analytic(t, n_bar, g, 0.0);
            max_err = max_err.max((num - ana).abs());
        })
        .unwrap();
        assert!(max_err < 1e-8, "max |Δ⟨σᶻ⟩| = {max_err:.3e}");
    }

    #[test]
    fn analytic_t0_and_revival_time() {
        assert_abs_diff_eq!(jcm_sigma_z_analytic(0.0, 50.0, 1.0, 0.0), -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            jcm_revival_time(50.0, 1.0, 0.0),
            2.0 * std::f64::consts::PI * 50.0f64.sqrt(),
            epsilon = 1e-12
        );
        // Δ = 2g√n̄ multiplies the resonant revival time by √2.
        let g = 1.0;
        let n_bar = 50.0;
        let detuned = jcm_revival_time(n_bar, g, 2.0 * g * n_bar.sqrt());
        let resonant = jcm_revival_time(n_bar, g, 0.0);
        assert_abs_diff_eq!(detuned / resonant, 2.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn krylov_constant_under_identity() {
        let basis = BasisIndex::single(16);
        let h = SparseOperator::identity(basis.clone());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let amps: Vec<C64> =
            (0..16).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let psi0 = StateVector::new(basis, amps).unwrap();
        let cfg = EvolutionConfig::new(3.0, 0.5, Engine::Krylov);
        let samples = evolve_krylov(&h, &psi0, &cfg).unwrap();
        for s in &samples {
            assert_abs_diff_eq!(s.overlap(&psi0).unwrap(), 1.0, epsilon = 1e-10);
        }
    }

    fn random_hermitian(dim: usize, seed: u64) -> (SparseOperator, StateVector) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let basis = BasisIndex::single(dim);
        let mut triples = Vec::new();
        for r in 0..dim {
            for c in r..dim {
                if rng.gen_range(0.0..1.0) < 0.2 {
                    let v = if r == c {
                        C64::from(rng.gen_range(-1.0..1.0))
                    } else {
                        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    };
                    triples.push(crate::fockspace::Entry { row: r as u32, col: c as u32, value: v });
                    if r != c {
                        triples.push(crate::fockspace::Entry {
                            row: c as u32,
                            col: r as u32,
                            value: v.conj(),
                        });
                    }
                }
            }
        }
        let h = SparseOperator::new(basis.clone(), triples, true).unwrap();
        let amps: Vec<C64> = (0..dim)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        (h, StateVector::new(basis, amps).unwrap())
    }

    #[test]
    fn krylov_agrees_with_exact_on_random_hermitian() {
        for seed in 0..4 {
            let (h, psi0) = random_hermitian(60, seed);
            let cfg = EvolutionConfig::new(10.0, 1.0, Engine::EigenExact);
            let exact = evolve_exact(&h, &psi0, &cfg).unwrap();
            let krylov = evolve_krylov(&h, &psi0, &cfg).unwrap();
            for (e, k) in exact.iter().zip(&krylov) {
                let fid = e.overlap(k).unwrap();
                assert!(fid >= 1.0 - 1e-8, "fidelity {fid} (seed {seed})");
                assert_abs_diff_eq!(k.norm(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn survival_probability_identity() {
        // survival = (1 − ⟨σᶻ⟩)/2 for one qubit.
        let g = 0.5;
        let spec = jcm_spec(30, g);
        let basis = spec.basis().unwrap();
        let h = assemble_total(&spec).unwrap();
        let psi0 = ground_coherent(&spec, C64::from(2.0));
        let sz = sigma_operator(&basis, 0, SigmaKind::Z).unwrap();
        let cfg = EvolutionConfig::new(8.0, 0.4, Engine::EigenExact);
        let samples = evolve_exact(&h, &psi0, &cfg).unwrap();
        let surv = survival_probability(&samples).unwrap();
        assert_abs_diff_eq!(surv[0], 1.0, epsilon = 1e-12);
        for (s, psi) in surv.iter().zip(&samples) {
            let z = expect(&sz, psi).unwrap().re;
            assert_abs_diff_eq!(*s, (1.0 - z) / 2.0, epsilon = 1e-10);
            assert!(*s >= -1e-12 && *s <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn energy_and_norm_conserved() {
        let spec = jcm_spec(40, 0.7);
        let h = assemble_total(&spec).unwrap();
        let psi0 = ground_coherent(&spec, C64::from(3.0));
        let e0 = expect(&h, &psi0).unwrap().re;
        for engine in [Engine::EigenExact, Engine::Krylov] {
            let cfg = EvolutionConfig::new(10.0, 0.5, engine);
            let samples = collect_samples(&h, &psi0, &cfg).unwrap();
            for s in &samples {
                assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-9);
                let e = expect(&h, s).unwrap().re;
                assert!(((e - e0) / e0).abs() < 1e-8, "engine {engine:?}");
            }
        }
    }

    #[test]
    fn exact_engine_dimension_cap() {
        let basis = BasisIndex::single(EXACT_DIM_CAP + 1);
        let h = SparseOperator::identity(basis.clone());
        let psi0 = StateVector::basis_state(basis, 0);
        let cfg = EvolutionConfig::new(1.0, 0.5, Engine::EigenExact);
        let err = evolve_exact(&h, &psi0, &cfg).unwrap_err();
        assert!(matches!(err, PropagatorError::DimensionTooLarge { .. }));
        assert!(err.to_string().contains("krylov"));
    }

    #[test]
    fn csv_roundtrip() {
        let mut ts = TimeSeries::new(vec![0.0, 0.1, 0.2]);
        ts.push_real("sigma_z_mean", vec![-1.0, -0.5, 0.25]);
        ts.push_complex("mf_a", vec![C64::new(1.0, -2.0); 3]);
        let text = ts.to_csv();
        assert!(text.starts_with("t,sigma_z_mean,mf_a_re,mf_a_im\n"));
        let back = TimeSeries::from_csv(&text).unwrap();
        assert_eq!(back, ts);
    }
}
