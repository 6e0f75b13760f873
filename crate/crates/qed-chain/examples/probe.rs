//! Scratch diagnostic for dual-Rabi tuning (not part of the documented set).

use num_complex::Complex64 as C64;
use qed_chain::analytics::extract_rabi_frequencies;
use qed_chain::fockspace::{sigma_operator, Boundary, ModeSpec, QubitChainSpec, SigmaKind};
use qed_chain::hamiltonian::{assemble_total, CouplingSpec, SystemSpec};
use qed_chain::propagator::{
    coherent_state, evolve_with, expect, product_state_with_modes, Engine, EvolutionConfig,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lam: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0.04);
    let n_bar_phonon: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(16.0);
    let t_max: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(400.0);
    let g: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.15);
    let detuning: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(2.5);
    let n_bar_photon: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(2.0);

    let omega0 = 1.0;
    let photon_cutoff = qed_chain::fockspace::coherent_cutoff(n_bar_photon);
    let phonon_cutoff = qed_chain::fockspace::coherent_cutoff(n_bar_phonon);
    let spec = SystemSpec {
        chain: QubitChainSpec::uniform(1, omega0, Boundary::Open),
        photon: ModeSpec::photon(omega0 + detuning, photon_cutoff),
        phonons: vec![ModeSpec::phonon(omega0, phonon_cutoff)],
        couplings: CouplingSpec {
            phonon_pm_couplings: vec![vec![C64::from(lam)]],
            ..CouplingSpec::uniform_photon(1, 1, g, true)
        },
    };
    let basis = spec.basis().unwrap();
    eprintln!("dim = {}", basis.total_dim());
    let h = assemble_total(&spec).unwrap();
    let psi0 = product_state_with_modes(
        &basis,
        &[(C64::ONE, C64::ZERO)],
        &[
            coherent_state(&basis, 0, C64::from(n_bar_photon.sqrt())).unwrap(),
            coherent_state(&basis, 1, C64::from(n_bar_phonon.sqrt())).unwrap(),
        ],
    )
    .unwrap();
    let sz = sigma_operator(&basis, 0, SigmaKind::Z).unwrap();
    let cfg = EvolutionConfig::new(t_max, 0.25, Engine::Krylov);
    let mut times = Vec::new();
    let mut values = Vec::new();
    evolve_with(&h, &psi0, &cfg, |_, t, psi| {
        times.push(t);
        values.push(expect(&sz, psi).unwrap().re);
    })
    .unwrap();

    // Print a decimated trace for eyeballing.
    for (k, (t, v)) in times.iter().zip(&values).enumerate() {
        if k % 8 == 0 {
            println!("TRACE {t:.2} {v:.4}");
        }
    }
    let peaks = extract_rabi_frequencies(&times, &values, 0.002).unwrap();
    println!("top peaks (freq amp):");
    for p in peaks.iter().take(12) {
        println!("PEAK {:.4} {:.4}", p.frequency, p.amplitude);
    }
    println!("semiclassical phonon Rabi = {:.4}", 2.0 * lam * n_bar_phonon.sqrt());
    println!(
        "photon nutation = {:.4}",
        (detuning * detuning + 4.0 * g * g * n_bar_photon).sqrt()
    );
}
