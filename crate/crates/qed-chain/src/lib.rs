//! Cavity-QED dynamics of 1D exchange-coupled qubit chains strongly coupled
//! to a quantized photon mode and quantized phonon modes: collapse/revival
//! simulation, dual photon/phonon Rabi spectroscopy, mean-field comparison,
//! and spectral line fitting.
//!
//! The crate is organized as a library with runnable examples for each major
//! capability, plus one thin `qedchain` binary that drives experiments from
//! TOML config files (`run`, `sweep`, `ingest`).
//!
//! ## Modules
//!
//! - [`fockspace`] — truncated joint Hilbert space and elementary operators.
//! - [`hamiltonian`] — builders for every model term and the assembled total.
//! - [`propagator`] — exact and Krylov time evolution, initial states, the
//!   analytic collapse/revival oracle, time-series export.
//! - [`meanfield`] — c-number equations of motion under the mean-field
//!   closure, for comparison against the exact quantum dynamics.
//! - [`analytics`] — envelope/revival/Rabi extraction and line-shape fits.
//! - [`cli`] + [`config`] — config-file driven experiment runner.
//!
//! ## Examples
//!
//! ```bash
//! cargo run --release -p qed-chain --example collapse_revival
//! cargo run --release -p qed-chain --example dressed_states
//! cargo run --release -p qed-chain --example exchange_chain
//! cargo run --release -p qed-chain --example double_rabi
//! cargo run --release -p qed-chain --example lambda_z_damping
//! cargo run --release -p qed-chain --example mean_field_vs_exact
//! cargo run --release -p qed-chain --example krylov_vs_exact
//! cargo run --release -p qed-chain --example gaussian_line_fit
//! ```
//!
//! Preset experiment configs live in `presets/`:
//!
//! ```bash
//! cargo run --release -p qed-chain -- run presets/jcm_fig2.toml --out out/jcm
//! ```

pub mod analytics;
pub mod cli;
pub mod config;
pub mod fockspace;
pub mod hamiltonian;
pub mod meanfield;
pub mod propagator;
