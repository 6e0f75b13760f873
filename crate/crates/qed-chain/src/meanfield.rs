//! First-order mean-field closure of the Heisenberg equations of motion:
//! every operator product in the coupled spin/photon/phonon equations is
//! replaced by the product of expectation values, turning the operator system
//! into c-number ODEs for ⟨σ_l∓⟩, ⟨σ_lᶻ⟩, ⟨â⟩ and ⟨b̂_q⟩.
//!
//! With couplings and exchange switched off the spin precesses freely,
//! d⟨σ⁻⟩/dt = −iω₀⟨σ⁻⟩ (the same phase convention as the exact propagator,
//! where ⟨σ⁺(t)⟩ rotates as e^{+iω₀t}), and with a rotating-wave photon
//! coupling the equations reduce to the semiclassical Rabi problem with
//! frequency 2g|⟨â⟩|. Those two limits pin the overall normalization of the
//! vector-product form of the operator equations.
//!
//! The closure keeps each spin pure: the Bloch length 4|⟨σ⁻⟩|² + ⟨σᶻ⟩² is a
//! constant of motion site by site. In particular there is no collapse of
//! Rabi oscillations here — reproducing that distinction against the exact
//! engine is one of the crate's acceptance checks.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::fockspace::Boundary;
use crate::hamiltonian::{HamiltonianError, SystemSpec};
use crate::propagator::TimeSeries;

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error("invalid mean-field config: {0}")]
    InvalidConfig(String),
    #[error("adaptive step underflow at t = {t:.6e} (step {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("state shape does not match system spec")]
    ShapeMismatch,
}

/// Expectation values of the coupled system. `sigma_plus`, `photon_dag` and
/// `phonons_dag` always hold the conjugates of their partners; constructors
/// and the integrator enforce this pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub sigma_minus: Vec<C64>,
    pub sigma_plus: Vec<C64>,
    pub sigma_z: Vec<f64>,
    pub photon: C64,
    pub photon_dag: C64,
    pub phonons: Vec<C64>,
    pub phonons_dag: Vec<C64>,
}

impl MeanFieldState {
    /// Build from the independent components, deriving the conjugate pairs.
    pub fn new(sigma_minus: Vec<C64>, sigma_z: Vec<f64>, photon: C64, phonons: Vec<C64>) -> Self {
        let sigma_plus = sigma_minus.iter().map(C64::conj).collect();
        let phonons_dag = phonons.iter().map(C64::conj).collect();
        Self {
            sigma_plus,
            sigma_minus,
            sigma_z,
            photon_dag: photon.conj(),
            photon,
            phonons,
            phonons_dag,
        }
    }

    /// Product state: per-site qubit amplitudes (c1, c2) on (ground, excited),
    /// photon amplitude ⟨â⟩ = α, phonon amplitudes ⟨b̂_q⟩ = β_q.
    pub fn product(qubit_coeffs: &[(C64, C64)], alpha: C64, betas: &[C64]) -> Self {
        let sigma_minus = qubit_coeffs.iter().map(|(c1, c2)| c1.conj() * c2).collect();
        let sigma_z = qubit_coeffs
            .iter()
            .map(|(c1, c2)| c2.norm_sqr() - c1.norm_sqr())
            .collect();
        Self::new(sigma_minus, sigma_z, alpha, betas.to_vec())
    }

    pub fn n_sites(&self) -> usize {
        self.sigma_minus.len()
    }

    pub fn n_phonons(&self) -> usize {
        self.phonons.len()
    }

    /// 4|⟨σ⁻⟩|² + ⟨σᶻ⟩² of one site; ≤ 1 for physical states and conserved
    /// exactly by the closed equations.
    pub fn bloch_length_sqr(&self, site: usize) -> f64 {
        4.0 * self.sigma_minus[site].norm_sqr() + self.sigma_z[site] * self.sigma_z[site]
    }

    fn matches(&self, spec: &SystemSpec) -> bool {
        self.n_sites() == spec.chain.n_sites && self.n_phonons() == spec.phonons.len()
    }

    fn flatten(&self, out: &mut Vec<f64>) {
        out.clear();
        for s in &self.sigma_minus {
            out.push(s.re);
            out.push(s.im);
        }
        out.extend_from_slice(&self.sigma_z);
        out.push(self.photon.re);
        out.push(self.photon.im);
        for b in &self.phonons {
            out.push(b.re);
            out.push(b.im);
        }
    }

    fn unflatten(flat: &[f64], n_sites: usize, n_phonons: usize) -> Self {
        let mut k = 0;
        let mut take = || {
            let v = flat[k];
            k += 1;
            v
        };
        let sigma_minus: Vec<C64> = (0..n_sites).map(|_| C64::new(take(), take())).collect();
        let sigma_z: Vec<f64> = (0..n_sites).map(|_| take()).collect();
        let photon = C64::new(take(), take());
        let phonons: Vec<C64> = (0..n_phonons).map(|_| C64::new(take(), take())).collect();
        Self::new(sigma_minus, sigma_z, photon, phonons)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    Rk45Adaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldConfig {
    pub integrator: Integrator,
    /// Sampling interval; also the fixed step of the Rk4 integrator.
    pub dt: f64,
    /// Per-step error tolerance of the adaptive integrator.
    pub tolerance: f64,
}

impl MeanFieldConfig {
    pub fn validate(&self) -> Result<(), MeanFieldError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(MeanFieldError::InvalidConfig("dt must be > 0".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(MeanFieldError::InvalidConfig("tolerance must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        Self { integrator: Integrator::Rk45Adaptive, dt: 0.01, tolerance: 1e-10 }
    }
}

fn neighbours(spec: &SystemSpec, l: usize) -> Vec<usize> {
    let n = spec.chain.n_sites;
    let mut nbr = Vec::with_capacity(2);
    match spec.chain.boundary {
        Boundary::Open => {
            if l > 0 {
                nbr.push(l - 1);
            }
            if l + 1 < n {
                nbr.push(l + 1);
            }
        }
        Boundary::Periodic if n > 1 => {
            nbr.push((l + n - 1) % n);
            nbr.push((l + 1) % n);
        }
        Boundary::Periodic => {}
    }
    nbr
}

/// Right-hand side of the closed equations of motion. A pure function; the
/// σ⁺ and daggered-field components are computed from their own mirrored
/// expressions, so derivative conjugation symmetry is a checkable property
/// rather than an assumption.
pub fn mf_rhs(state: &MeanFieldState, spec: &SystemSpec, _t: f64) -> Result<MeanFieldState, MeanFieldError> {
    if !state.matches(spec) {
        return Err(MeanFieldError::ShapeMismatch);
    }
    let n = spec.chain.n_sites;
    let c = &spec.couplings;
    let i = C64::I;
    let j = c.exchange_j;

    let mut d_minus = vec![C64::ZERO; n];
    let mut d_plus = vec![C64::ZERO; n];
    let mut d_z = vec![0.0; n];
    for l in 0..n {
        let s = state.sigma_minus[l];
        let sp = state.sigma_plus[l];
        let z = C64::from(state.sigma_z[l]);
        let w = spec.chain.transition_freqs[l];
        let g = c.photon_couplings[l];

        // Transverse drives: photon (full or rotating-wave) plus λ± phonons.
        let phi_phonon: C64 = c.phonon_pm_couplings[l]
            .iter()
            .zip(state.phonons.iter().zip(&state.phonons_dag))
            .map(|(&lam, (&b, &bd))| lam * b + lam.conj() * bd)
            .sum();
        // Longitudinal phonon field (λᶻ).
        let dz_field: C64 = c.phonon_z_couplings[l]
            .iter()
            .zip(state.phonons.iter().zip(&state.phonons_dag))
            .map(|(&lam, (&b, &bd))| lam * b + lam.conj() * bd)
            .sum();

        let (drive_minus, drive_plus, drive_z) = if c.rwa {
            let u = g * state.photon;
            let ud = g.conj() * state.photon_dag;
            (
                i * (u + phi_phonon) * z,
                -i * (ud + phi_phonon) * z,
                (2.0 * i * (ud * s - u * sp)).re + (2.0 * i * phi_phonon * (s - sp)).re,
            )
        } else {
            let phi = g * state.photon + g.conj() * state.photon_dag + phi_phonon;
            (
                i * phi * z,
                -i * phi * z,
                (2.0 * i * phi * (s - sp)).re,
            )
        };

        let mut ex_minus = C64::ZERO;
        let mut ex_plus = C64::ZERO;
        let mut ex_z = C64::ZERO;
        if j != 0.0 {
            for m in neighbours(spec, l) {
                let zm = C64::from(state.sigma_z[m]);
                ex_minus += z * state.sigma_minus[m] - zm * s;
                ex_plus += z * state.sigma_plus[m] - zm * sp;
                ex_z += s * state.sigma_plus[m] - sp * state.sigma_minus[m];
            }
        }

        d_minus[l] =
            -i * w * s + drive_minus - 2.0 * i * dz_field * s + 2.0 * i * j * ex_minus;
        d_plus[l] = i * w * sp + drive_plus + 2.0 * i * dz_field * sp - 2.0 * i * j * ex_plus;
        d_z[l] = drive_z + (4.0 * i * j * ex_z).re;
    }

    // Photon equation.
    let wk = spec.photon.frequency;
    let mut src_a = C64::ZERO;
    let mut src_ad = C64::ZERO;
    for l in 0..n {
        let g = c.photon_couplings[l];
        if c.rwa {
            src_a += g.conj() * state.sigma_minus[l];
            src_ad += g * state.sigma_plus[l];
        } else {
            let x = state.sigma_minus[l] + state.sigma_plus[l];
            src_a += g.conj() * x;
            src_ad += g * x;
        }
    }
    let d_a = -C64::I * wk * state.photon - C64::I * src_a;
    let d_ad = C64::I * wk * state.photon_dag + C64::I * src_ad;

    // Phonon equations.
    let mut d_b = Vec::with_capacity(state.phonons.len());
    let mut d_bd = Vec::with_capacity(state.phonons.len());
    for (q, mode) in spec.phonons.iter().enumerate() {
        let mut src = C64::ZERO;
        let mut src_d = C64::ZERO;
        for l in 0..n {
            let x = state.sigma_minus[l] + state.sigma_plus[l];
            let z = C64::from(state.sigma_z[l]);
            src += c.phonon_z_couplings[l][q].conj() * z + c.phonon_pm_couplings[l][q].conj() * x;
            src_d += c.phonon_z_couplings[l][q] * z + c.phonon_pm_couplings[l][q] * x;
        }
        d_b.push(-C64::I * mode.frequency * state.phonons[q] - C64::I * src);
        d_bd.push(C64::I * mode.frequency * state.phonons_dag[q] + C64::I * src_d);
    }

    Ok(MeanFieldState {
        sigma_minus: d_minus,
        sigma_plus: d_plus,
        sigma_z: d_z,
        photon: d_a,
        photon_dag: d_ad,
        phonons: d_b,
        phonons_dag: d_bd,
    })
}

fn rhs_flat(
    flat: &[f64],
    spec: &SystemSpec,
    t: f64,
    n_sites: usize,
    n_phonons: usize,
    out: &mut Vec<f64>,
) -> Result<(), MeanFieldError> {
    let state = MeanFieldState::unflatten(flat, n_sites, n_phonons);
    let d = mf_rhs(&state, spec, t)?;
    d.flatten(out);
    Ok(())
}

/// Integrate the closed equations and sample every `cfg.dt`. Channel names
/// carry the `mf_` prefix: `mf_sigma_z_mean`, per-site `mf_sigma_minus_<l>`,
/// `mf_a`, and per-mode `mf_b_<q>`.
pub fn integrate_mf(
    state0: &MeanFieldState,
    spec: &SystemSpec,
    cfg: &MeanFieldConfig,
    t_max: f64,
) -> Result<TimeSeries, MeanFieldError> {
    cfg.validate()?;
    spec.validate()?;
    if !state0.matches(spec) {
        return Err(MeanFieldError::ShapeMismatch);
    }
    if !(t_max > 0.0) {
        return Err(MeanFieldError::InvalidConfig("t_max must be > 0".into()));
    }
    let n_sites = state0.n_sites();
    let n_phonons = state0.n_phonons();
    let n_samples = (t_max / cfg.dt + 1e-9).floor() as usize;

    let mut states = Vec::with_capacity(n_samples + 1);
    states.push(state0.clone());

    let mut y = Vec::new();
    state0.flatten(&mut y);
    let mut scratch = vec![Vec::new(); 8];

    for k in 1..=n_samples {
        let t0 = (k - 1) as f64 * cfg.dt;
        match cfg.integrator {
            Integrator::Rk4 => {
                rk4_step(&mut y, spec, t0, cfg.dt, n_sites, n_phonons, &mut scratch)?;
            }
            Integrator::Rk45Adaptive => {
                rk45_advance(&mut y, spec, t0, cfg.dt, cfg.tolerance, n_sites, n_phonons)?;
            }
        }
        // Re-derive the conjugate pairs from the independent components.
        let state = MeanFieldState::unflatten(&y, n_sites, n_phonons);
        state.flatten(&mut y);
        states.push(state);
    }

    let times: Vec<f64> = (0..=n_samples).map(|k| k as f64 * cfg.dt).collect();
    let mut series = TimeSeries::new(times);
    series.push_real(
        "mf_sigma_z_mean",
        states
            .iter()
            .map(|s| s.sigma_z.iter().sum::<f64>() / n_sites as f64)
            .collect(),
    );
    for l in 0..n_sites {
        series.push_complex(
            format!("mf_sigma_minus_{l}"),
            states.iter().map(|s| s.sigma_minus[l]).collect(),
        );
    }
    series.push_complex("mf_a", states.iter().map(|s| s.photon).collect());
    for q in 0..n_phonons {
        series.push_complex(format!("mf_b_{q}"), states.iter().map(|s| s.phonons[q]).collect());
    }
    Ok(series)
}

fn rk4_step(
    y: &mut Vec<f64>,
    spec: &SystemSpec,
    t: f64,
    h: f64,
    n_sites: usize,
    n_phonons: usize,
    scratch: &mut [Vec<f64>],
) -> Result<(), MeanFieldError> {
    let dim = y.len();
    let (k1, rest) = scratch.split_at_mut(1);
    let (k2, rest) = rest.split_at_mut(1);
    let (k3, rest) = rest.split_at_mut(1);
    let (k4, rest) = rest.split_at_mut(1);
    let tmp = &mut rest[0];
    rhs_flat(y, spec, t, n_sites, n_phonons, &mut k1[0])?;
    stage(tmp, y, &k1[0], h / 2.0);
    rhs_flat(tmp, spec, t + h / 2.0, n_sites, n_phonons, &mut k2[0])?;
    stage(tmp, y, &k2[0], h / 2.0);
    rhs_flat(tmp, spec, t + h / 2.0, n_sites, n_phonons, &mut k3[0])?;
    stage(tmp, y, &k3[0], h);
    rhs_flat(tmp, spec, t + h, n_sites, n_phonons, &mut k4[0])?;
    for i in 0..dim {
        y[i] += h / 6.0 * (k1[0][i] + 2.0 * k2[0][i] + 2.0 * k3[0][i] + k4[0][i]);
    }
    Ok(())
}

fn stage(out: &mut Vec<f64>, y: &[f64], k: &[f64], h: f64) {
    out.clear();
    out.extend(y.iter().zip(k).map(|(yi, ki)| yi + h * ki));
}

// Dormand–Prince 5(4) coefficients.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rk45_advance(
    y: &mut Vec<f64>,
    spec: &SystemSpec,
    t_start: f64,
    span: f64,
    tol: f64,
    n_sites: usize,
    n_phonons: usize,
) -> Result<(), MeanFieldError> {
    let dim = y.len();
    let mut t = 0.0;
    let mut h = span;
    let h_min = span * 1e-14;
    let mut k: Vec<Vec<f64>> = vec![Vec::new(); 7];
    let mut tmp = Vec::new();
    while t < span * (1.0 - 1e-15) {
        h = h.min(span - t);
        rhs_flat(y, spec, t_start + t, n_sites, n_phonons, &mut k[0])?;
        loop {
            for s in 0..6 {
                tmp.clear();
                tmp.extend(y.iter().enumerate().map(|(i, yi)| {
                    let mut acc = *yi;
                    for (j, kj) in k.iter().enumerate().take(s + 1) {
                        if DP_A[s][j] != 0.0 {
                            acc += h * DP_A[s][j] * kj[i];
                        }
                    }
                    acc
                }));
                let mut out = std::mem::take(&mut k[s + 1]);
                rhs_flat(&tmp, spec, t_start + t + DP_C[s] * h, n_sites, n_phonons, &mut out)?;
                k[s + 1] = out;
            }
            let mut err: f64 = 0.0;
            for i in 0..dim {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += (DP_B5[j] - DP_B4[j]) * kj[i];
                }
                let scale = tol * (1.0 + y[i].abs());
                err = err.max((h * e / scale).abs());
            }
            if err <= 1.0 {
                for i in 0..dim {
                    let mut dy = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        if DP_B5[j] != 0.0 {
                            dy += DP_B5[j] * kj[i];
                        }
                    }
                    y[i] += h * dy;
                }
                t += h;
                let grow = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
                h *= grow.clamp(0.2, 5.0);
                break;
            }
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h < h_min {
                return Err(MeanFieldError::StepUnderflow { t: t_start + t, h });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{ModeSpec, QubitChainSpec};
    use crate::hamiltonian::CouplingSpec;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn free_spec(n_sites: usize, omega0: f64) -> SystemSpec {
        SystemSpec {
            chain: QubitChainSpec::uniform(n_sites, omega0, Boundary::Open),
            photon: ModeSpec::photon(omega0, 4),
            phonons: vec![],
            couplings: CouplingSpec::none(n_sites, 0),
        }
    }

    fn superposition_state(n_sites: usize, alpha: C64) -> MeanFieldState {
        let half = C64::from(0.5f64.sqrt());
        MeanFieldState::product(&vec![(half, half); n_sites], alpha, &[])
    }

    #[test]
    fn free_precession_rotation_sign_and_circle() {
        let omega0 = 1.0;
        let spec = free_spec(1, omega0);
        let s0 = superposition_state(1, C64::ZERO);
        // d⟨σ⁻⟩/dt = −iω₀⟨σ⁻⟩, d⟨σᶻ⟩/dt = 0.
        let d = mf_rhs(&s0, &spec, 0.0).unwrap();
        let expect = -C64::I * omega0 * s0.sigma_minus[0];
        assert!((d.sigma_minus[0] - expect).norm() < 1e-15);
        assert_abs_diff_eq!(d.sigma_z[0], 0.0, epsilon = 1e-15);

        let cfg = MeanFieldConfig { dt: 0.5, tolerance: 1e-12, ..Default::default() };
        let series = integrate_mf(&s0, &spec, &cfg, 100.0).unwrap();
        let s = series.complex_channel("mf_sigma_minus_0").unwrap();
        for (k, sk) in s.iter().enumerate() {
            assert_abs_diff_eq!(sk.norm(), 0.5, epsilon = 1e-10);
            let t = series.times[k];
            let want = C64::from(0.5) * C64::from_polar(1.0, -omega0 * t);
            assert!((sk - want).norm() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn derivative_conjugation_symmetry_random_state() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut spec = SystemSpec {
            chain: QubitChainSpec::uniform(3, 1.1, Boundary::Periodic),
            photon: ModeSpec::photon(0.9, 4),
            phonons: vec![ModeSpec::phonon(1.2, 4)],
            couplings: CouplingSpec::none(3, 1),
        };
        spec.couplings.exchange_j = 0.4;
        spec.couplings.photon_couplings =
            (0..3).map(|_| C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))).collect();
        spec.couplings.phonon_z_couplings = (0..3)
            .map(|_| vec![C64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))])
            .collect();
        spec.couplings.phonon_pm_couplings = (0..3)
            .map(|_| vec![C64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3))])
            .collect();
        for rwa in [false, true] {
            spec.couplings.rwa = rwa;
            let state = MeanFieldState::new(
                (0..3).map(|_| C64::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4))).collect(),
                (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                vec![C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))],
            );
            let d = mf_rhs(&state, &spec, 0.0).unwrap();
            for l in 0..3 {
                assert!(
                    (d.sigma_plus[l] - d.sigma_minus[l].conj()).norm() < 1e-13,
                    "site {l}, rwa {rwa}"
                );
            }
            assert!((d.photon_dag - d.photon.conj()).norm() < 1e-13);
            assert!((d.phonons_dag[0] - d.phonons[0].conj()).norm() < 1e-13);
        }
    }

    #[test]
    fn bloch_length_conserved_with_photon_drive() {
        let mut spec = free_spec(1, 1.0);
        spec.couplings = CouplingSpec::uniform_photon(1, 0, 0.2, false);
        let s0 = MeanFieldState::product(&[(C64::ONE, C64::ZERO)], C64::from(3.0), &[]);
        let len0 = s0.bloch_length_sqr(0);
        let cfg = MeanFieldConfig { dt: 0.05, tolerance: 1e-11, ..Default::default() };
        let series = integrate_mf(&s0, &spec, &cfg, 40.0).unwrap();
        let s = series.complex_channel("mf_sigma_minus_0").unwrap();
        let z = series.real_channel("mf_sigma_z_mean").unwrap();
        for (sk, zk) in s.iter().zip(z) {
            let len = 4.0 * sk.norm_sqr() + zk * zk;
            assert_abs_diff_eq!(len, len0, epsilon = 1e-8);
        }
    }

    #[test]
    fn semiclassical_rabi_frequency_and_no_collapse() {
        // n̄ = 100, rotating-wave coupling: Rabi at 2g|⟨â⟩| with no decay.
        let g = 0.25;
        let alpha = C64::from(10.0);
        let mut spec = free_spec(1, 1.0);
        spec.couplings = CouplingSpec::uniform_photon(1, 0, g, true);
        let s0 = MeanFieldState::product(&[(C64::ONE, C64::ZERO)], alpha, &[]);
        let cfg = MeanFieldConfig { dt: 0.002, tolerance: 1e-11, ..Default::default() };
        let t_max = 3.0 / g; // gt ≤ 3
        let series = integrate_mf(&s0, &spec, &cfg, t_max).unwrap();
        let z = series.real_channel("mf_sigma_z_mean").unwrap();

        // Frequency from mean spacing of upward zero crossings.
        let mut crossings = Vec::new();
        for k in 1..z.len() {
            if z[k - 1] < 0.0 && z[k] >= 0.0 {
                let t0 = series.times[k - 1];
                let frac = -z[k - 1] / (z[k] - z[k - 1]);
                crossings.push(t0 + frac * cfg.dt);
            }
        }
        assert!(crossings.len() >= 3);
        let period =
            (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
        let freq = 2.0 * std::f64::consts::PI / period;
        let expected = 2.0 * g * alpha.norm();
        assert!(
            (freq - expected).abs() / expected < 0.02,
            "freq {freq} vs {expected}"
        );

        // Amplitude decays by less than 5% over gt ≤ 3.
        let quarter = z.len() / 4;
        let early_max = z[..quarter].iter().cloned().fold(f64::MIN, f64::max);
        let late_max = z[3 * quarter..].iter().cloned().fold(f64::MIN, f64::max);
        assert!(late_max > 0.95 * early_max, "early {early_max} late {late_max}");
    }

    #[test]
    fn exchange_conserves_total_sigma_z() {
        let mut spec = SystemSpec {
            chain: QubitChainSpec::uniform(3, 1.0, Boundary::Open),
            photon: ModeSpec::photon(1.0, 2),
            phonons: vec![],
            couplings: CouplingSpec::none(3, 0),
        };
        spec.couplings.exchange_j = 0.8;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let coeffs: Vec<(C64, C64)> = (0..3)
            .map(|_| {
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let phase: f64 = rng.gen_range(0.0..6.28);
                (
                    C64::from(theta.cos()),
                    C64::from_polar(theta.sin(), phase),
                )
            })
            .collect();
        let s0 = MeanFieldState::product(&coeffs, C64::ZERO, &[]);
        let z_total0: f64 = s0.sigma_z.iter().sum();
        let cfg = MeanFieldConfig { dt: 0.05, tolerance: 1e-11, ..Default::default() };
        let series = integrate_mf(&s0, &spec, &cfg, 30.0).unwrap();
        let z_mean = series.real_channel("mf_sigma_z_mean").unwrap();
        for zk in z_mean {
            assert_abs_diff_eq!(zk * 3.0, z_total0, epsilon = 1e-8);
        }
    }

    #[test]
    fn rk4_matches_adaptive() {
        let mut spec = free_spec(1, 1.0);
        spec.couplings = CouplingSpec::uniform_photon(1, 0, 0.3, true);
        let s0 = MeanFieldState::product(&[(C64::ONE, C64::ZERO)], C64::from(2.0), &[]);
        let fine = MeanFieldConfig { integrator: Integrator::Rk4, dt: 0.001, tolerance: 1e-9 };
        let adaptive = MeanFieldConfig { dt: 0.1, tolerance: 1e-12, ..Default::default() };
        let a = integrate_mf(&s0, &spec, &fine, 5.0).unwrap();
        let b = integrate_mf(&s0, &spec, &adaptive, 5.0).unwrap();
        let za = a.real_channel("mf_sigma_z_mean").unwrap();
        let zb = b.real_channel("mf_sigma_z_mean").unwrap();
        // Compare on the coarse grid (every 100th fine sample).
        for (k, zbk) in zb.iter().enumerate() {
            assert_abs_diff_eq!(za[k * 100], *zbk, epsilon = 1e-6);
        }
    }

    #[test]
    fn step_underflow_reported() {
        let mut spec = free_spec(1, 1.0);
        spec.couplings = CouplingSpec::uniform_photon(1, 0, 0.3, true);
        let s0 = MeanFieldState::product(&[(C64::ONE, C64::ZERO)], C64::from(2.0), &[]);
        let cfg = MeanFieldConfig { dt: 1.0, tolerance: 5e-324, ..Default::default() };
        let err = integrate_mf(&s0, &spec, &cfg, 2.0).unwrap_err();
        assert!(matches!(err, MeanFieldError::StepUnderflow { .. }));
    }
}
