//! Experiment configuration schema (TOML) and its mapping onto the domain
//! types. Frequencies and couplings are angular (rad per unit time) when
//! given as bare numbers; strings carry an explicit unit suffix, e.g.
//! `"28 kHz"`, `"9.4 GHz"` or `"1.0 rad"` (Hz-family values are multiplied
//! by 2π; the time unit is then seconds). Complex couplings are written as
//! `[re, im]` pairs.
//!
//! Full schema (all sections shown; `[mean_field]`, `[[system.phonons]]` and
//! `[[analyses]]` are optional):
//!
//! ```toml
//! output_dir = "out/run"
//!
//! [system]
//! rwa = true
//!
//! [system.chain]
//! n_sites = 1
//! transition_freqs = [1.0]
//! boundary = "open"            # "open" | "periodic"
//!
//! [system.photon]
//! frequency = 1.0
//! cutoff = 120
//!
//! [[system.phonons]]
//! frequency = 1.0
//! cutoff = 30
//!
//! [system.couplings]
//! photon = [1.0]               # per site: number | "unit string" | [re, im]
//! exchange_j = 0.0
//! phonon_z = [[0.0]]           # [site][mode]
//! phonon_pm = [[0.0]]
//!
//! [initial_state]
//! qubits = ["ground"]          # "ground" | "excited" | { c1 = ..., c2 = ... }
//! photon = { kind = "coherent", n_bar = 50.0, phase = 0.0 }
//! phonons = [{ kind = "vacuum" }]
//!
//! [evolution]
//! engine = "eigen_exact"       # "eigen_exact" | "krylov"
//! t_max = 60.0
//! dt_sample = 0.02
//! krylov_dim = 30              # default 30
//! step_tolerance = 1e-10       # default 1e-10
//!
//! [mean_field]
//! enabled = true
//! integrator = "rk45_adaptive" # "rk4" | "rk45_adaptive"
//! dt = 0.02
//! tolerance = 1e-10
//! ```
//!
//! Analysis requests (`[[analyses]]`, dispatched on `kind`):
//!
//! * `collapse_envelope` — `channel`, optional `window = [t0, t1]`,
//!   optional `expected_tau`.
//! * `revival_time` — `channel`, optional `g`, `n_bar`, `delta` for the
//!   predicted-revival comparison.
//! * `rabi_frequencies` — `channel`, optional `rel_floor`, `max_peaks`.
//! * `phonon_rabi_linearity` — `channel`, `lambda_pm` list,
//!   `secondary_max_freq`; re-runs the system per value.
//! * `rabi_amplitude_damping` — `channel`, `lambda_z` list; re-runs per value.
//! * `gaussian_fit` — `input_csv` (+ `has_header`) or `synthetic`
//!   (`y0/center/width/area/x_min/x_max/n/noise_percent`).

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::fockspace::{Boundary, ModeSpec, QubitChainSpec};
use crate::hamiltonian::{CouplingSpec, SystemSpec};
use crate::meanfield::{Integrator, MeanFieldConfig};
use crate::propagator::{Engine, EvolutionConfig};

/// Frequency-like value: bare number (rad/time) or `"<value> <unit>"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FreqValue {
    Num(f64),
    Text(String),
}

impl FreqValue {
    pub fn angular(&self) -> Result<f64, String> {
        match self {
            FreqValue::Num(v) => Ok(*v),
            FreqValue::Text(s) => parse_frequency(s),
        }
    }
}

fn parse_frequency(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let split = s
        .find(|c: char| c.is_alphabetic())
        .ok_or_else(|| format!("frequency string '{s}' has no unit"))?;
    let (num, unit) = s.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|e| format!("bad frequency value in '{s}': {e}"))?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let factor = match unit.trim() {
        "rad" | "rad/s" => 1.0,
        "Hz" => two_pi,
        "kHz" => two_pi * 1e3,
        "MHz" => two_pi * 1e6,
        "GHz" => two_pi * 1e9,
        other => return Err(format!("unknown frequency unit '{other}'")),
    };
    Ok(value * factor)
}

/// Coupling value: real number, unit string, or `[re, im]` pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CouplingValue {
    Num(f64),
    Text(String),
    Pair([f64; 2]),
}

impl CouplingValue {
    pub fn complex(&self) -> Result<C64, String> {
        match self {
            CouplingValue::Num(v) => Ok(C64::from(*v)),
            CouplingValue::Text(s) => Ok(C64::from(parse_frequency(s)?)),
            CouplingValue::Pair([re, im]) => Ok(C64::new(*re, *im)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_sites: usize,
    pub transition_freqs: Vec<FreqValue>,
    #[serde(default = "default_boundary")]
    pub boundary: String,
}

fn default_boundary() -> String {
    "open".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub frequency: FreqValue,
    pub cutoff: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingsConfig {
    pub photon: Vec<CouplingValue>,
    #[serde(default)]
    pub exchange_j: Option<FreqValue>,
    #[serde(default)]
    pub phonon_z: Vec<Vec<CouplingValue>>,
    #[serde(default)]
    pub phonon_pm: Vec<Vec<CouplingValue>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub rwa: bool,
    pub chain: ChainConfig,
    pub photon: ModeConfig,
    #[serde(default)]
    pub phonons: Vec<ModeConfig>,
    pub couplings: CouplingsConfig,
}

impl SystemConfig {
    pub fn to_spec(&self) -> Result<SystemSpec, String> {
        let boundary = match self.chain.boundary.as_str() {
            "open" => Boundary::Open,
            "periodic" => Boundary::Periodic,
            other => return Err(format!("unknown boundary '{other}'")),
        };
        let freqs: Result<Vec<f64>, String> =
            self.chain.transition_freqs.iter().map(FreqValue::angular).collect();
        let chain = QubitChainSpec {
            n_sites: self.chain.n_sites,
            transition_freqs: freqs?,
            boundary,
        };
        let photon = ModeSpec::photon(self.photon.frequency.angular()?, self.photon.cutoff);
        let phonons: Result<Vec<ModeSpec>, String> = self
            .phonons
            .iter()
            .map(|m| Ok(ModeSpec::phonon(m.frequency.angular()?, m.cutoff)))
            .collect();
        let phonons = phonons?;
        let n_sites = self.chain.n_sites;
        let n_ph = phonons.len();
        let photon_couplings: Result<Vec<C64>, String> =
            self.couplings.photon.iter().map(CouplingValue::complex).collect();
        let grid = |rows: &Vec<Vec<CouplingValue>>, what: &str| -> Result<Vec<Vec<C64>>, String> {
            if rows.is_empty() {
                return Ok(vec![vec![C64::ZERO; n_ph]; n_sites]);
            }
            rows.iter()
                .map(|row| row.iter().map(CouplingValue::complex).collect())
                .collect::<Result<Vec<Vec<C64>>, String>>()
                .and_then(|g| {
                    if g.len() == n_sites && g.iter().all(|r| r.len() == n_ph) {
                        Ok(g)
                    } else {
                        Err(format!("{what} must be a [site][mode] grid of {n_sites}×{n_ph}"))
                    }
                })
        };
        let couplings = CouplingSpec {
            photon_couplings: photon_couplings?,
            phonon_z_couplings: grid(&self.couplings.phonon_z, "phonon_z")?,
            phonon_pm_couplings: grid(&self.couplings.phonon_pm, "phonon_pm")?,
            exchange_j: self
                .couplings
                .exchange_j
                .as_ref()
                .map(FreqValue::angular)
                .transpose()?
                .unwrap_or(0.0),
            rwa: self.rwa,
        };
        let spec = SystemSpec { chain, photon, phonons, couplings };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum QubitStateConfig {
    Named(String),
    Coeffs { c1: CouplingValue, c2: CouplingValue },
}

impl QubitStateConfig {
    pub fn coeffs(&self) -> Result<(C64, C64), String> {
        match self {
            QubitStateConfig::Named(name) => match name.as_str() {
                "ground" => Ok((C64::ONE, C64::ZERO)),
                "excited" => Ok((C64::ZERO, C64::ONE)),
                other => Err(format!("unknown qubit state '{other}'")),
            },
            QubitStateConfig::Coeffs { c1, c2 } => Ok((c1.complex()?, c2.complex()?)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ModeStateConfig {
    #[serde(rename = "vacuum")]
    Vacuum,
    #[serde(rename = "fock")]
    Fock { n: usize },
    #[serde(rename = "coherent")]
    Coherent {
        n_bar: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl ModeStateConfig {
    /// ⟨â⟩ of the configured state (mean-field initial condition).
    pub fn mean_amplitude(&self) -> C64 {
        match self {
            ModeStateConfig::Coherent { n_bar, phase } => C64::from_polar(n_bar.sqrt(), *phase),
            _ => C64::ZERO,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub qubits: Vec<QubitStateConfig>,
    pub photon: ModeStateConfig,
    #[serde(default)]
    pub phonons: Vec<ModeStateConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSection {
    pub engine: String,
    pub t_max: f64,
    pub dt_sample: f64,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_step_tolerance")]
    pub step_tolerance: f64,
}

fn default_krylov_dim() -> usize {
    30
}

fn default_step_tolerance() -> f64 {
    1e-10
}

impl EvolutionSection {
    pub fn to_config(&self, engine_override: Option<Engine>) -> Result<EvolutionConfig, String> {
        let engine = match engine_override {
            Some(e) => e,
            None => match self.engine.as_str() {
                "eigen_exact" => Engine::EigenExact,
                "krylov" => Engine::Krylov,
                other => return Err(format!("unknown engine '{other}'")),
            },
        };
        let cfg = EvolutionConfig {
            t_max: self.t_max,
            dt_sample: self.dt_sample,
            engine,
            krylov_dim: self.krylov_dim,
            step_tolerance: self.step_tolerance,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_integrator")]
    pub integrator: String,
    pub dt: f64,
    #[serde(default = "default_mf_tolerance")]
    pub tolerance: f64,
}

fn default_integrator() -> String {
    "rk45_adaptive".into()
}

fn default_mf_tolerance() -> f64 {
    1e-10
}

impl MeanFieldSection {
    pub fn to_config(&self) -> Result<MeanFieldConfig, String> {
        let integrator = match self.integrator.as_str() {
            "rk4" => Integrator::Rk4,
            "rk45_adaptive" => Integrator::Rk45Adaptive,
            other => return Err(format!("unknown integrator '{other}'")),
        };
        let cfg = MeanFieldConfig { integrator, dt: self.dt, tolerance: self.tolerance };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTraceConfig {
    pub y0: f64,
    pub center: f64,
    pub width: f64,
    pub area: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    #[serde(default)]
    pub noise_percent: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum AnalysisConfig {
    #[serde(rename = "collapse_envelope")]
    CollapseEnvelope {
        channel: String,
        #[serde(default)]
        window: Option<[f64; 2]>,
        #[serde(default)]
        expected_tau: Option<f64>,
    },
    #[serde(rename = "revival_time")]
    RevivalTime {
        channel: String,
        #[serde(default)]
        g: Option<f64>,
        #[serde(default)]
        n_bar: Option<f64>,
        #[serde(default)]
        delta: Option<f64>,
    },
    #[serde(rename = "rabi_frequencies")]
    RabiFrequencies {
        channel: String,
        #[serde(default = "default_rel_floor")]
        rel_floor: f64,
        #[serde(default = "default_max_peaks")]
        max_peaks: usize,
    },
    #[serde(rename = "phonon_rabi_linearity")]
    PhononRabiLinearity {
        channel: String,
        lambda_pm: Vec<f64>,
        secondary_max_freq: f64,
    },
    #[serde(rename = "rabi_amplitude_damping")]
    RabiAmplitudeDamping {
        channel: String,
        lambda_z: Vec<f64>,
    },
    #[serde(rename = "gaussian_fit")]
    GaussianFit {
        #[serde(default)]
        input_csv: Option<String>,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        synthetic: Option<SyntheticTraceConfig>,
    },
}

impl AnalysisConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AnalysisConfig::CollapseEnvelope { .. } => "collapse_envelope",
            AnalysisConfig::RevivalTime { .. } => "revival_time",
            AnalysisConfig::RabiFrequencies { .. } => "rabi_frequencies",
            AnalysisConfig::PhononRabiLinearity { .. } => "phonon_rabi_linearity",
            AnalysisConfig::RabiAmplitudeDamping { .. } => "rabi_amplitude_damping",
            AnalysisConfig::GaussianFit { .. } => "gaussian_fit",
        }
    }
}

fn default_rel_floor() -> f64 {
    0.05
}

fn default_max_peaks() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: String,
    pub system: SystemConfig,
    pub initial_state: InitialStateConfig,
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub mean_field: Option<MeanFieldSection>,
    #[serde(default)]
    pub analyses: Vec<AnalysisConfig>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
