//! End-to-end experiment driver: parse a configuration file, build the
//! system, propagate, analyze, and write artifacts into the output directory.
//!
//! Artifacts per run: `timeseries.csv` (and `mf_timeseries.csv` when the
//! mean-field section is enabled), one `NN_<kind>.report` file per analysis,
//! and `manifest.txt` (config echo, versions, wall time). The CSV and report
//! files are byte-deterministic for a fixed config and crate version; the
//! manifest carries the wall time and is not.
//!
//! Failures map onto process exit codes: 2 for configuration/schema
//! violations, 3 for capacity limits, 4 for numerical failures; each prints
//! one machine-parsable `error[<kind>]: <reason>` line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64 as C64;

use crate::analytics::{
    self, extract_rabi_frequencies, fit_collapse_envelope, fit_gaussian_envelope, AnalyticsError,
    GaussianLineParams, SpectrumTrace,
};
use crate::config::{
    AnalysisConfig, ExperimentConfig, InitialStateConfig, ModeStateConfig, SyntheticTraceConfig,
};
use crate::fockspace::{sigma_operator, number_operator, BasisIndex, FockError, SigmaKind, SparseOperator, StateVector};
use crate::hamiltonian::{assemble_total, HamiltonianError, SystemSpec};
use crate::meanfield::{integrate_mf, MeanFieldError, MeanFieldState};
use crate::propagator::{
    coherent_state, evolve_with, expect, fock_state, ground_probability,
    product_state_with_modes, Engine, EvolutionConfig, PropagatorError, TimeSeries,
};

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: unparseable or invalid configuration, bad input files, I/O.
    Config(String),
    /// Exit 3: joint-space or truncation capacity exceeded.
    Capacity(String),
    /// Exit 4: numerical failure (non-convergence, step underflow, failed fit).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Capacity(_) => "capacity",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Capacity(m) | CliError::Numeric(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error[{}]: {}", self.kind(), self.message())
    }
}

impl From<FockError> for CliError {
    fn from(e: FockError) -> Self {
        match e {
            FockError::CapacityExceeded { .. } => CliError::Capacity(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<HamiltonianError> for CliError {
    fn from(e: HamiltonianError) -> Self {
        match e {
            HamiltonianError::Fock(f) => f.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PropagatorError> for CliError {
    fn from(e: PropagatorError) -> Self {
        match e {
            PropagatorError::Fock(f) => f.into(),
            PropagatorError::DimensionTooLarge { .. } | PropagatorError::CoherentTail { .. } => {
                CliError::Capacity(e.to_string())
            }
            PropagatorError::KrylovNonConvergence { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<MeanFieldError> for CliError {
    fn from(e: MeanFieldError) -> Self {
        match e {
            MeanFieldError::StepUnderflow { .. } => CliError::Numeric(e.to_string()),
            MeanFieldError::Hamiltonian(h) => h.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        match e {
            AnalyticsError::Parse { .. } | AnalyticsError::NonMonotone { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

/// Engine/seed/output overrides from command-line flags.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub engine: Option<Engine>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// Paths written by a successful run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub timeseries_csv: PathBuf,
    pub mf_timeseries_csv: Option<PathBuf>,
    pub reports: Vec<PathBuf>,
}

/// Observables sampled along a trajectory. Channel order is fixed:
/// `sigma_z_mean`, `photon_number`, `phonon_number_<q>`…, `survival_prob`,
/// `energy`.
struct ChannelRecorder {
    sigma_z_mean: SparseOperator,
    photon_number: SparseOperator,
    phonon_numbers: Vec<SparseOperator>,
    hamiltonian: SparseOperator,
    data: Vec<Vec<f64>>,
}

impl ChannelRecorder {
    fn new(
        spec: &SystemSpec,
        basis: &Arc<BasisIndex>,
        h: &SparseOperator,
    ) -> Result<Self, CliError> {
        let n = spec.chain.n_sites;
        let mut sz_sum = SparseOperator::zero(basis.clone());
        for site in 0..n {
            sz_sum = sz_sum.add(&sigma_operator(basis, site, SigmaKind::Z)?)?;
        }
        let sigma_z_mean = sz_sum.scale(C64::from(1.0 / n as f64));
        let photon_number = number_operator(basis, 0)?;
        let phonon_numbers: Result<Vec<_>, FockError> =
            (0..spec.phonons.len()).map(|q| number_operator(basis, 1 + q)).collect();
        Ok(Self {
            sigma_z_mean,
            photon_number,
            phonon_numbers: phonon_numbers?,
            hamiltonian: h.clone(),
            data: Vec::new(),
        })
    }

    fn record(&mut self, psi: &StateVector) -> Result<(), CliError> {
        let mut row = Vec::with_capacity(4 + self.phonon_numbers.len());
        row.push(expect(&self.sigma_z_mean, psi)?.re);
        row.push(expect(&self.photon_number, psi)?.re);
        for nq in &self.phonon_numbers {
            row.push(expect(nq, psi)?.re);
        }
        row.push(ground_probability(psi)?);
        row.push(expect(&self.hamiltonian, psi)?.re);
        self.data.push(row);
        Ok(())
    }

    fn into_series(self, times: Vec<f64>) -> TimeSeries {
        let n_ph = self.phonon_numbers.len();
        let mut series = TimeSeries::new(times);
        let col = |idx: usize| -> Vec<f64> { self.data.iter().map(|r| r[idx]).collect() };
        series.push_real("sigma_z_mean", col(0));
        series.push_real("photon_number", col(1));
        for q in 0..n_ph {
            series.push_real(format!("phonon_number_{q}"), col(2 + q));
        }
        series.push_real("survival_prob", col(2 + n_ph));
        series.push_real("energy", col(3 + n_ph));
        series
    }
}

fn initial_state(
    spec: &SystemSpec,
    basis: &Arc<BasisIndex>,
    init: &InitialStateConfig,
) -> Result<StateVector, CliError> {
    if init.qubits.len() != spec.chain.n_sites {
        return Err(CliError::Config(format!(
            "initial_state.qubits has {} entries, chain has {} sites",
            init.qubits.len(),
            spec.chain.n_sites
        )));
    }
    if !init.phonons.is_empty() && init.phonons.len() != spec.phonons.len() {
        return Err(CliError::Config(format!(
            "initial_state.phonons has {} entries, system has {} phonon modes",
            init.phonons.len(),
            spec.phonons.len()
        )));
    }
    let coeffs: Result<Vec<(C64, C64)>, String> =
        init.qubits.iter().map(|q| q.coeffs()).collect();
    let coeffs = coeffs.map_err(CliError::Config)?;

    let mut mode_states = Vec::with_capacity(1 + spec.phonons.len());
    mode_states.push(build_mode_state(basis, 0, &init.photon)?);
    for q in 0..spec.phonons.len() {
        let cfg = init.phonons.get(q).unwrap_or(&ModeStateConfig::Vacuum);
        mode_states.push(build_mode_state(basis, 1 + q, cfg)?);
    }
    Ok(product_state_with_modes(basis, &coeffs, &mode_states)?)
}

fn build_mode_state(
    basis: &Arc<BasisIndex>,
    mode: usize,
    cfg: &ModeStateConfig,
) -> Result<StateVector, CliError> {
    let state = match cfg {
        ModeStateConfig::Vacuum => fock_state(basis, mode, 0)?,
        ModeStateConfig::Fock { n } => fock_state(basis, mode, *n)?,
        ModeStateConfig::Coherent { n_bar, phase } => {
            coherent_state(basis, mode, C64::from_polar(n_bar.sqrt(), *phase))?
        }
    };
    Ok(state)
}

/// Propagate one system and return the standard channel set.
fn simulate(
    spec: &SystemSpec,
    init: &InitialStateConfig,
    evo: &EvolutionConfig,
) -> Result<TimeSeries, CliError> {
    let basis = spec.basis()?;
    let h = assemble_total(spec)?;
    let psi0 = initial_state(spec, &basis, init)?;
    let mut recorder = ChannelRecorder::new(spec, &basis, &h)?;
    let mut record_err = None;
    evolve_with(&h, &psi0, evo, |_, _, psi| {
        if record_err.is_none() {
            if let Err(e) = recorder.record(psi) {
                record_err = Some(e);
            }
        }
    })?;
    if let Some(e) = record_err {
        return Err(e);
    }
    Ok(recorder.into_series(evo.sample_times()))
}

/// Run one experiment config file. `config_dir`-relative paths inside the
/// config (e.g. `input_csv`) are resolved against the config file location.
pub fn run_experiment(config_path: &Path, overrides: &RunOverrides) -> Result<RunArtifacts, CliError> {
    let started = Instant::now();
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(CliError::Config)?;
    let config_dir = config_path.parent().unwrap_or_else(|| Path::new("."));

    let out_dir = overrides
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;

    let spec = cfg.system.to_spec().map_err(CliError::Config)?;
    let evo = cfg.evolution.to_config(overrides.engine).map_err(CliError::Config)?;
    let seed = overrides.seed.unwrap_or(0);

    let series = simulate(&spec, &cfg.initial_state, &evo)?;
    let ts_path = out_dir.join("timeseries.csv");
    write_atomic(&ts_path, &series.to_csv())?;

    let mut mf_path = None;
    if let Some(mf) = &cfg.mean_field {
        if mf.enabled {
            let mf_cfg = mf.to_config().map_err(CliError::Config)?;
            let coeffs: Result<Vec<(C64, C64)>, String> =
                cfg.initial_state.qubits.iter().map(|q| q.coeffs()).collect();
            let coeffs = coeffs.map_err(CliError::Config)?;
            let alpha = cfg.initial_state.photon.mean_amplitude();
            let betas: Vec<C64> = (0..spec.phonons.len())
                .map(|q| {
                    cfg.initial_state
                        .phonons
                        .get(q)
                        .map(ModeStateConfig::mean_amplitude)
                        .unwrap_or(C64::ZERO)
                })
                .collect();
            let state0 = MeanFieldState::product(&coeffs, alpha, &betas);
            let mf_series = integrate_mf(&state0, &spec, &mf_cfg, evo.t_max)?;
            let path = out_dir.join("mf_timeseries.csv");
            write_atomic(&path, &mf_series.to_csv())?;
            mf_path = Some(path);
        }
    }

    let mut reports = Vec::new();
    for (idx, analysis) in cfg.analyses.iter().enumerate() {
        let report = run_analysis(analysis, &series, &spec, &cfg, &evo, config_dir, seed)?;
        let path = out_dir.join(format!("{:02}_{}.report", idx + 1, analysis.kind_name()));
        write_atomic(&path, &report)?;
        reports.push(path);
    }

    let manifest = format!(
        "crate=qed-chain\nversion={}\nconfig_path={}\nengine={:?}\nseed={}\nwall_time_ms={}\n--- config ---\n{}",
        env!("CARGO_PKG_VERSION"),
        config_path.display(),
        evo.engine,
        seed,
        started.elapsed().as_millis(),
        text
    );
    write_atomic(&out_dir.join("manifest.txt"), &manifest)?;

    Ok(RunArtifacts {
        output_dir: out_dir,
        timeseries_csv: ts_path,
        mf_timeseries_csv: mf_path,
        reports,
    })
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

fn window_slice<'a>(
    series: &'a TimeSeries,
    channel: &str,
    window: Option<[f64; 2]>,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let values = series.real_channel(channel)?;
    let (t0, t1) = match window {
        Some([a, b]) => (a, b),
        None => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (t, v) in series.times.iter().zip(values) {
        if *t >= t0 && *t <= t1 {
            ts.push(*t);
            vs.push(*v);
        }
    }
    Ok((ts, vs))
}

fn run_analysis(
    analysis: &AnalysisConfig,
    series: &TimeSeries,
    spec: &SystemSpec,
    cfg: &ExperimentConfig,
    evo: &EvolutionConfig,
    config_dir: &Path,
    seed: u64,
) -> Result<String, CliError> {
    match analysis {
        AnalysisConfig::CollapseEnvelope { channel, window, expected_tau } => {
            let (ts, vs) = window_slice(series, channel, *window)?;
            let fit = fit_collapse_envelope(&ts, &vs)?;
            let mut report = fit.to_report();
            if let Some(tau_ref) = expected_tau {
                let tau = fit.param("tau_c").unwrap_or(f64::NAN);
                let _ = writeln!(report, "expected_tau={tau_ref:.16e}");
                let _ = writeln!(report, "tau_rel_dev={:.16e}", (tau - tau_ref) / tau_ref);
            }
            Ok(report)
        }
        AnalysisConfig::RevivalTime { channel, g, n_bar, delta } => {
            let (ts, vs) = window_slice(series, channel, None)?;
            let est = analytics::estimate_revival_time(&ts, &vs)?;
            let mut report = String::new();
            let _ = writeln!(report, "t_revival={:.16e}", est.t_revival);
            let _ = writeln!(report, "peak_height={:.16e}", est.peak_height);
            if let (Some(g), Some(n_bar)) = (g, n_bar) {
                let predicted =
                    crate::propagator::jcm_revival_time(*n_bar, *g, delta.unwrap_or(0.0));
                let _ = writeln!(report, "t_revival_predicted={predicted:.16e}");
                let _ = writeln!(
                    report,
                    "t_revival_rel_dev={:.16e}",
                    (est.t_revival - predicted) / predicted
                );
            }
            report.push_str("--- envelope fit ---\n");
            report.push_str(&est.quality.to_report());
            Ok(report)
        }
        AnalysisConfig::RabiFrequencies { channel, rel_floor, max_peaks } => {
            let (ts, vs) = window_slice(series, channel, None)?;
            let peaks = extract_rabi_frequencies(&ts, &vs, *rel_floor)?;
            let mut report = format!("n_peaks={}\n", peaks.len().min(*max_peaks));
            for (i, p) in peaks.iter().take(*max_peaks).enumerate() {
                let _ = writeln!(report, "peak_{i}_freq={:.16e}", p.frequency);
                let _ = writeln!(report, "peak_{i}_amp={:.16e}", p.amplitude);
            }
            Ok(report)
        }
        AnalysisConfig::PhononRabiLinearity { channel, lambda_pm, secondary_max_freq } => {
            if spec.phonons.is_empty() {
                return Err(CliError::Config(
                    "phonon_rabi_linearity requires at least one phonon mode".into(),
                ));
            }
            let mut freqs = Vec::with_capacity(lambda_pm.len());
            let mut report = String::new();
            for (i, &lam) in lambda_pm.iter().enumerate() {
                let mut swept = spec.clone();
                for row in &mut swept.couplings.phonon_pm_couplings {
                    row.fill(C64::from(lam));
                }
                let sub = simulate(&swept, &cfg.initial_state, evo)?;
                let (ts, vs) = window_slice(&sub, channel, None)?;
                let peaks = extract_rabi_frequencies(&ts, &vs, 0.01)?;
                let secondary = peaks
                    .iter()
                    .find(|p| p.frequency <= *secondary_max_freq)
                    .ok_or_else(|| {
                        CliError::Numeric(format!(
                            "no secondary peak below {secondary_max_freq} rad for lambda_pm = {lam}"
                        ))
                    })?;
                let _ = writeln!(report, "lambda_{i}={lam:.16e}");
                let _ = writeln!(report, "freq_{i}={:.16e}", secondary.frequency);
                let _ = writeln!(report, "amp_{i}={:.16e}", secondary.amplitude);
                freqs.push((lam, secondary.frequency));
            }
            let xs: Vec<f64> = freqs.iter().map(|(l, _)| *l).collect();
            let ys: Vec<f64> = freqs.iter().map(|(_, f)| *f).collect();
            let (slope, intercept, r2) = analytics::linear_ols(&xs, &ys)?;
            let _ = writeln!(report, "slope={slope:.16e}");
            let _ = writeln!(report, "intercept={intercept:.16e}");
            let _ = writeln!(report, "r_squared={r2:.16e}");
            Ok(report)
        }
        AnalysisConfig::RabiAmplitudeDamping { channel, lambda_z } => {
            if spec.phonons.is_empty() {
                return Err(CliError::Config(
                    "rabi_amplitude_damping requires at least one phonon mode".into(),
                ));
            }
            let mut amps = Vec::with_capacity(lambda_z.len());
            let mut report = String::new();
            for (i, &lam) in lambda_z.iter().enumerate() {
                let mut swept = spec.clone();
                for row in &mut swept.couplings.phonon_z_couplings {
                    row.fill(C64::from(lam));
                }
                let sub = simulate(&swept, &cfg.initial_state, evo)?;
                let (ts, vs) = window_slice(&sub, channel, None)?;
                let peaks = extract_rabi_frequencies(&ts, &vs, 0.05)?;
                let amp = peaks.first().map(|p| p.amplitude).unwrap_or(0.0);
                let _ = writeln!(report, "lambda_z_{i}={lam:.16e}");
                let _ = writeln!(report, "amp_{i}={amp:.16e}");
                amps.push(amp);
            }
            let monotone = amps.windows(2).all(|w| w[1] < w[0]);
            let _ = writeln!(report, "monotone_decreasing={}", u8::from(monotone));
            Ok(report)
        }
        AnalysisConfig::GaussianFit { input_csv, has_header, synthetic } => {
            let trace = match (input_csv, synthetic) {
                (Some(path), None) => {
                    let full = config_dir.join(path);
                    let text = fs::read_to_string(&full).map_err(|e| {
                        CliError::Config(format!("cannot read {}: {e}", full.display()))
                    })?;
                    SpectrumTrace::from_two_column_csv(&text, *has_header, path.clone())?
                }
                (None, Some(synth)) => synthetic_trace(synth, seed),
                _ => {
                    return Err(CliError::Config(
                        "gaussian_fit needs exactly one of input_csv or synthetic".into(),
                    ))
                }
            };
            let fit = fit_gaussian_envelope(&trace, None)?;
            let mut report = format!("source={}\nrows={}\n", trace.label, trace.len());
            report.push_str(&fit.to_report());
            Ok(report)
        }
    }
}

fn synthetic_trace(synth: &SyntheticTraceConfig, seed: u64) -> SpectrumTrace {
    let params = GaussianLineParams {
        y0: synth.y0,
        center: synth.center,
        width: synth.width,
        area: synth.area,
    };
    analytics::synthetic_gaussian_trace(
        &params,
        synth.x_min,
        synth.x_max,
        synth.n,
        synth.noise_percent,
        seed,
    )
}

/// Run every config matched by the glob pattern, each in its own thread with
/// an isolated output directory. Returns per-config results in pattern order.
pub fn sweep(
    pattern: &str,
    overrides: &RunOverrides,
) -> Vec<(PathBuf, Result<RunArtifacts, CliError>)> {
    let paths: Vec<PathBuf> = match glob::glob(pattern) {
        Ok(iter) => iter.filter_map(Result::ok).collect(),
        Err(e) => {
            return vec![(
                PathBuf::from(pattern),
                Err(CliError::Config(format!("bad glob pattern: {e}"))),
            )]
        }
    };
    if paths.is_empty() {
        return vec![(
            PathBuf::from(pattern),
            Err(CliError::Config(format!("no configs match '{pattern}'"))),
        )];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|path| {
                let mut ov = overrides.clone();
                if let Some(base) = &overrides.output_dir {
                    let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
                    ov.output_dir = Some(base.join(stem));
                }
                let path = path.clone();
                scope.spawn(move || run_experiment(&path, &ov))
            })
            .collect();
        paths
            .iter()
            .zip(handles)
            .map(|(p, h)| {
                let res = h.join().unwrap_or_else(|_| {
                    Err(CliError::Numeric("worker thread panicked".into()))
                });
                (p.clone(), res)
            })
            .collect()
    })
}

/// Spectrum file format accepted by `ingest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumFormat {
    TwoColumnCsv,
}

/// Parse and validate an external spectrum file, preserving row count and
/// attaching the source path as metadata.
pub fn ingest_spectrum(
    path: &Path,
    _format: SpectrumFormat,
    has_header: bool,
) -> Result<SpectrumTrace, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let trace =
        SpectrumTrace::from_two_column_csv(&text, has_header, path.display().to_string())?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, body).unwrap();
        path
    }

    fn free_qubit_config(out: &Path) -> String {
        format!(
            r#"
output_dir = "{}"

[system]
rwa = true
[system.chain]
n_sites = 1
transition_freqs = [1.0]
[system.photon]
frequency = 1.0
cutoff = 2
[system.couplings]
photon = [0.0]

[initial_state]
qubits = ["ground"]
photon = {{ kind = "vacuum" }}

[evolution]
engine = "eigen_exact"
t_max = 5.0
dt_sample = 0.5
"#,
            out.display()
        )
    }

    #[test]
    fn free_qubit_run_constant_sigma_z() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        let cfg = write_config(tmp.path(), "free.toml", &free_qubit_config(&out));
        let artifacts = run_experiment(&cfg, &RunOverrides::default()).unwrap();
        let csv = fs::read_to_string(&artifacts.timeseries_csv).unwrap();
        let series = TimeSeries::from_csv(&csv).unwrap();
        let z = series.real_channel("sigma_z_mean").unwrap();
        for v in z {
            assert!((v + 1.0).abs() < 1e-12);
        }
        assert!(artifacts.output_dir.join("manifest.txt").exists());
    }

    #[test]
    fn deterministic_csv_bytes() {
        let tmp = tempfile::tempdir().unwrap();
        let out1 = tmp.path().join("a");
        let out2 = tmp.path().join("b");
        let cfg = write_config(tmp.path(), "free.toml", &free_qubit_config(&out1));
        run_experiment(&cfg, &RunOverrides::default()).unwrap();
        run_experiment(
            &cfg,
            &RunOverrides { output_dir: Some(out2.clone()), ..Default::default() },
        )
        .unwrap();
        let a = fs::read(out1.join("timeseries.csv")).unwrap();
        let b = fs::read(out2.join("timeseries.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_config_is_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = write_config(tmp.path(), "bad.toml", "output_dir = 3");
        let err = run_experiment(&cfg, &RunOverrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn capacity_error_exit_code() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        let body = free_qubit_config(&out).replace("cutoff = 2", "cutoff = 3000000");
        let cfg = write_config(tmp.path(), "big.toml", &body);
        let err = run_experiment(&cfg, &RunOverrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }

    #[test]
    fn ingest_round_trip_and_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let ok = tmp.path().join("trace.csv");
        fs::write(&ok, "1.0,2.0\n2.0,2.5\n3.0,2.2\n").unwrap();
        let trace = ingest_spectrum(&ok, SpectrumFormat::TwoColumnCsv, false).unwrap();
        assert_eq!(trace.len(), 3);

        let bad = tmp.path().join("bad.csv");
        fs::write(&bad, "1.0,2.0\nnope,2.5\n").unwrap();
        let err = ingest_spectrum(&bad, SpectrumFormat::TwoColumnCsv, false).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.message().contains("line 2"));
    }

    #[test]
    fn gaussian_fit_analysis_from_file() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("out");
        let params = GaussianLineParams { y0: 52.4, center: 3322.95, width: 0.36, area: 32.0 };
        let trace = analytics::synthetic_gaussian_trace(&params, 3321.0, 3325.0, 201, 0.0, 0);
        fs::write(tmp.path().join("line.csv"), trace.to_two_column_csv()).unwrap();
        let mut body = free_qubit_config(&out);
        body.push_str(
            r#"
[[analyses]]
kind = "gaussian_fit"
input_csv = "line.csv"
"#,
        );
        let cfg = write_config(tmp.path(), "fit.toml", &body);
        let artifacts = run_experiment(&cfg, &RunOverrides::default()).unwrap();
        assert_eq!(artifacts.reports.len(), 1);
        let report = fs::read_to_string(&artifacts.reports[0]).unwrap();
        let hc_line = report.lines().find(|l| l.starts_with("h_c=")).unwrap();
        let hc: f64 = hc_line.trim_start_matches("h_c=").parse().unwrap();
        assert!((hc - 3322.95).abs() < 0.01);
    }

    #[test]
    fn sweep_runs_all_matches() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("sweep_out");
        write_config(tmp.path(), "s1.toml", &free_qubit_config(&tmp.path().join("o1")));
        write_config(tmp.path(), "s2.toml", &free_qubit_config(&tmp.path().join("o2")));
        let pattern = format!("{}/s*.toml", tmp.path().display());
        let results = sweep(
            &pattern,
            &RunOverrides { output_dir: Some(out.clone()), ..Default::default() },
        );
        assert_eq!(results.len(), 2);
        for (_, res) in &results {
            assert!(res.is_ok());
        }
        assert!(out.join("s1").join("timeseries.csv").exists());
        assert!(out.join("s2").join("timeseries.csv").exists());
    }
}
