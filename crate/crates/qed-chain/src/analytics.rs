//! Quantitative signature extraction from trajectories and spectra: Gaussian
//! line fits, collapse-envelope fits, revival-time detection, Rabi-frequency
//! extraction and linear splitting fits.
//!
//! The Gaussian line model is
//!
//! ```text
//! y = y₀ + (A/W)·√(2/π)·exp{−2[(x − x_c)/W]²}
//! ```
//!
//! fitted with a damped Gauss–Newton (Levenberg–Marquardt) loop and analytic
//! Jacobian. Collapse envelopes are extracted from local-extrema magnitudes
//! and fitted to a·exp[−½(t/τ_c)²]; the extrema route is deterministic and
//! adequate at the field occupations treated here, but is a documented
//! limitation for very small n̄ where few oscillations fit under the envelope.
//!
//! All functions here are pure and concurrently callable.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("fit did not converge within {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64, best: Box<FitResult> },
    #[error("no collapse detected (fitted time constant {tau:.3e} exceeds the data span)")]
    NoCollapse { tau: f64 },
    #[error("no revival found in window: {0}")]
    NoRevival(String),
    #[error("degenerate abscissa: {0}")]
    DegenerateAbscissa(String),
    #[error("sampling grid is not uniform")]
    NonUniformSampling,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("abscissa not strictly monotone at line {line}")]
    NonMonotone { line: usize },
}

/// A measured spectrum or digitized trace: field (or time) values against
/// signal amplitude, with a free-form source label.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    pub abscissa: Vec<f64>,
    pub ordinate: Vec<f64>,
    pub label: String,
}

impl SpectrumTrace {
    pub fn new(abscissa: Vec<f64>, ordinate: Vec<f64>, label: impl Into<String>) -> Self {
        debug_assert_eq!(abscissa.len(), ordinate.len());
        Self { abscissa, ordinate, label: label.into() }
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }

    /// Parse a two-column `abscissa,ordinate` CSV. With `has_header` the
    /// first line is skipped; otherwise it must parse as numbers.
    pub fn from_two_column_csv(
        text: &str,
        has_header: bool,
        label: impl Into<String>,
    ) -> Result<Self, AnalyticsError> {
        let mut abscissa = Vec::new();
        let mut ordinate = Vec::new();
        let skip = usize::from(has_header);
        for (i, line) in text.lines().enumerate().skip(skip) {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let (a, b) = (cols.next(), cols.next());
            if cols.next().is_some() {
                return Err(AnalyticsError::Parse {
                    line: lineno,
                    msg: "expected exactly two columns".into(),
                });
            }
            let parse = |s: Option<&str>| -> Result<f64, AnalyticsError> {
                s.map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or(AnalyticsError::Parse { line: lineno, msg: "missing column".into() })?
                    .parse()
                    .map_err(|e| AnalyticsError::Parse { line: lineno, msg: format!("{e}") })
            };
            abscissa.push(parse(a)?);
            ordinate.push(parse(b)?);
        }
        if abscissa.len() < 2 {
            return Err(AnalyticsError::InsufficientData { needed: 2, got: abscissa.len() });
        }
        let increasing = abscissa[1] > abscissa[0];
        for (k, w) in abscissa.windows(2).enumerate() {
            let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
            if !ok {
                return Err(AnalyticsError::NonMonotone { line: k + 2 + skip });
            }
        }
        Ok(Self { abscissa, ordinate, label: label.into() })
    }

    pub fn to_two_column_csv(&self) -> String {
        let mut out = String::new();
        for (a, y) in self.abscissa.iter().zip(&self.ordinate) {
            out.push_str(&format!("{a:.16e},{y:.16e}\n"));
        }
        out
    }
}

/// Parameters of the Gaussian line model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLineParams {
    pub y0: f64,
    pub center: f64,
    pub width: f64,
    pub area: f64,
}

impl GaussianLineParams {
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        self.y0
            + self.area / self.width
                * (2.0 / std::f64::consts::PI).sqrt()
                * (-2.0 * u * u).exp()
    }

    /// Peak height above baseline, (A/W)·√(2/π).
    pub fn peak_height(&self) -> f64 {
        self.area / self.width * (2.0 / std::f64::consts::PI).sqrt()
    }
}

/// Synthetic trace of the Gaussian line model on a uniform grid, optionally
/// with Gaussian noise whose σ is `noise_percent` of the peak height.
pub fn synthetic_gaussian_trace(
    params: &GaussianLineParams,
    x_min: f64,
    x_max: f64,
    n: usize,
    noise_percent: f64,
    seed: u64,
) -> SpectrumTrace {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let sigma = noise_percent / 100.0 * params.peak_height();
    let mut abscissa = Vec::with_capacity(n);
    let mut ordinate = Vec::with_capacity(n);
    for k in 0..n {
        let x = x_min + (x_max - x_min) * k as f64 / (n - 1) as f64;
        let noise = if sigma > 0.0 { gaussian_sample(&mut rng) * sigma } else { 0.0 };
        abscissa.push(x);
        ordinate.push(params.eval(x) + noise);
    }
    SpectrumTrace::new(abscissa, ordinate, "synthetic")
}

fn gaussian_sample<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; deterministic for a fixed ChaCha seed.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    GaussianEnvelope,
    CollapseGaussian,
    Linear,
}

impl FitModel {
    pub fn name(&self) -> &'static str {
        match self {
            FitModel::GaussianEnvelope => "gaussian_envelope",
            FitModel::CollapseGaussian => "collapse_gaussian",
            FitModel::Linear => "linear",
        }
    }
}

/// Fitted parameters plus quality metrics. `r_squared` is reported as
/// computed and may be negative for pathological fits.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<(String, f64)>,
    pub rmse: f64,
    pub r_squared: f64,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Flat `key=value` report block.
    pub fn to_report(&self) -> String {
        let mut out = format!("model={}\n", self.model.name());
        for (name, value) in &self.params {
            out.push_str(&format!("{name}={value:.16e}\n"));
        }
        out.push_str(&format!("rmse={:.16e}\n", self.rmse));
        out.push_str(&format!("r_squared={:.16e}\n", self.r_squared));
        out
    }
}

fn quality(residuals: &[f64], observed: &[f64]) -> (f64, f64) {
    let n = residuals.len() as f64;
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = observed.iter().sum::<f64>() / n;
    let ss_tot: f64 = observed.iter().map(|y| (y - mean) * (y - mean)).sum();
    let rmse = (ss_res / n).sqrt();
    let r2 = 1.0 - ss_res / ss_tot.max(1e-300);
    (rmse, r2.min(1.0))
}

/// Damped Gauss–Newton on a residual/Jacobian closure. Returns the best
/// parameters, final cost and whether the convergence test was met.
fn levenberg_marquardt<F>(
    theta0: &[f64],
    mut eval: F,
    max_iter: usize,
) -> (Vec<f64>, f64, bool, usize)
where
    F: FnMut(&[f64], &mut Vec<f64>, &mut Vec<Vec<f64>>),
{
    let p = theta0.len();
    let mut theta = theta0.to_vec();
    let mut r = Vec::new();
    let mut jac: Vec<Vec<f64>> = Vec::new();
    eval(&theta, &mut r, &mut jac);
    let mut cost: f64 = r.iter().map(|x| x * x).sum();
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iters = 0;
    for it in 0..max_iter {
        iters = it + 1;
        // Normal equations J'J δ = −J'r with multiplicative damping.
        let mut jtj = vec![vec![0.0; p]; p];
        let mut jtr = vec![0.0; p];
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..p {
                jtr[a] += row[a] * ri;
                for b in a..p {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                jtj[a][b] = jtj[b][a];
            }
        }
        let mut improved = false;
        for _ in 0..25 {
            let mut m = nalgebra::DMatrix::from_fn(p, p, |a, b| jtj[a][b]);
            for a in 0..p {
                m[(a, a)] += mu * jtj[a][a].max(1e-12);
            }
            let rhs = nalgebra::DVector::from_fn(p, |a, _| -jtr[a]);
            let Some(delta) = m.lu().solve(&rhs) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            let mut r_trial = Vec::new();
            let mut j_trial = Vec::new();
            eval(&trial, &mut r_trial, &mut j_trial);
            let cost_trial: f64 = r_trial.iter().map(|x| x * x).sum();
            if cost_trial.is_finite() && cost_trial < cost {
                let rel_drop = (cost - cost_trial) / cost.max(1e-300);
                let step = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                let scale = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                theta = trial;
                r = r_trial;
                jac = j_trial;
                cost = cost_trial;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if rel_drop < 1e-12 || step < 1e-12 * (1.0 + scale) {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
        if converged {
            break;
        }
        if !improved {
            // Damping saturated: either at a (local) minimum or stuck.
            converged = cost.is_finite();
            break;
        }
    }
    (theta, cost, converged, iters)
}

const GAUSSIAN_FIT_MAX_ITER: usize = 200;

/// Least-squares fit of the Gaussian line model to a trace. Initial values
/// come from baseline/peak/FWHM heuristics unless supplied.
pub fn fit_gaussian_envelope(
    trace: &SpectrumTrace,
    init: Option<GaussianLineParams>,
) -> Result<FitResult, AnalyticsError> {
    if trace.len() < 8 {
        return Err(AnalyticsError::InsufficientData { needed: 8, got: trace.len() });
    }
    let init = init.unwrap_or_else(|| gaussian_init(trace));
    let theta0 = [init.y0, init.center, init.width.abs().max(1e-12), init.area];
    let xs = &trace.abscissa;
    let ys = &trace.ordinate;
    let k = (2.0 / std::f64::consts::PI).sqrt();
    let eval = |theta: &[f64], r: &mut Vec<f64>, jac: &mut Vec<Vec<f64>>| {
        let (y0, xc, w, a) = (theta[0], theta[1], theta[2], theta[3]);
        r.clear();
        jac.clear();
        for (&x, &y) in xs.iter().zip(ys) {
            let u = (x - xc) / w;
            let e = (-2.0 * u * u).exp();
            let model = y0 + a * k / w * e;
            r.push(model - y);
            jac.push(vec![
                1.0,
                4.0 * a * k * u * e / (w * w),
                a * k * e * (4.0 * u * u - 1.0) / (w * w),
                k * e / w,
            ]);
        }
    };
    let (theta, _cost, converged, iters) = levenberg_marquardt(&theta0, eval, GAUSSIAN_FIT_MAX_ITER);
    let fitted = GaussianLineParams {
        y0: theta[0],
        center: theta[1],
        width: theta[2].abs(),
        area: theta[3],
    };
    let residuals: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| fitted.eval(x) - y)
        .collect();
    let (rmse, r2) = quality(&residuals, ys);
    let result = FitResult {
        model: FitModel::GaussianEnvelope,
        params: vec![
            ("y0".into(), fitted.y0),
            ("h_c".into(), fitted.center),
            ("w".into(), fitted.width),
            ("a".into(), fitted.area),
        ],
        rmse,
        r_squared: r2,
    };
    if !converged {
        return Err(AnalyticsError::NonConvergence {
            iterations: iters,
            residual: rmse,
            best: Box::new(result),
        });
    }
    Ok(result)
}

fn gaussian_init(trace: &SpectrumTrace) -> GaussianLineParams {
    let xs = &trace.abscissa;
    let ys = &trace.ordinate;
    let n = ys.len();
    // Baseline from the outer fifth of the trace.
    let edge = (n / 10).max(1);
    let mut edges: Vec<f64> = ys[..edge].iter().chain(&ys[n - edge..]).copied().collect();
    edges.sort_by(f64::total_cmp);
    let y0 = edges[edges.len() / 2];
    let (peak_idx, &peak_y) = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty trace");
    let height = peak_y - y0;
    let half = y0 + height / 2.0;
    let mut left = xs[0];
    for i in (0..peak_idx).rev() {
        if ys[i] <= half {
            left = xs[i];
            break;
        }
    }
    let mut right = xs[n - 1];
    for i in peak_idx..n {
        if ys[i] <= half {
            right = xs[i];
            break;
        }
    }
    let fwhm = (right - left).abs();
    let span = (xs[n - 1] - xs[0]).abs();
    // FWHM = 2√(ln2 / 2) · W ≈ 1.1774 W.
    let width = if fwhm > 0.0 { fwhm / 1.1774 } else { span / 4.0 }.max(span / (n as f64));
    let area = height * width / (2.0 / std::f64::consts::PI).sqrt();
    GaussianLineParams { y0, center: xs[peak_idx], width, area }
}

/// (time, |value|) pairs at the local extrema of an oscillating channel,
/// measured after removing the window mean. Includes t = 0 when the first
/// sample dominates its neighbour.
fn extrema_magnitudes(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let v: Vec<f64> = values.iter().map(|x| x - mean).collect();
    let mut out = Vec::new();
    if v[0].abs() >= v[1].abs() {
        out.push((times[0], v[0].abs()));
    }
    for k in 1..n - 1 {
        let is_max = v[k] > v[k - 1] && v[k] >= v[k + 1];
        let is_min = v[k] < v[k - 1] && v[k] <= v[k + 1];
        if is_max || is_min {
            out.push((times[k], v[k].abs()));
        }
    }
    out
}

/// Fit the collapse envelope a·exp[−½(t/τ_c)²] to the extrema magnitudes of
/// an oscillating channel. Reported parameters: `amplitude`, `tau_c`, the
/// fitted e-folding time `t_efold = √2·τ_c`, and the interpolated time
/// `t_efold_crossing` where the raw envelope first drops below a/e.
pub fn fit_collapse_envelope(times: &[f64], values: &[f64]) -> Result<FitResult, AnalyticsError> {
    let ext = extrema_magnitudes(times, values);
    if ext.len() < 4 {
        return Err(AnalyticsError::InsufficientData { needed: 4, got: ext.len() });
    }
    let max_mag = ext.iter().map(|(_, m)| *m).fold(0.0, f64::max);
    let kept: Vec<(f64, f64)> =
        ext.iter().copied().filter(|(_, m)| *m >= 0.04 * max_mag).collect();
    if kept.len() < 4 {
        return Err(AnalyticsError::InsufficientData { needed: 4, got: kept.len() });
    }
    let span = times[times.len() - 1] - times[0];

    // Log-linear closed form for the initial guess: ln m = ln a − t²/(2τ²).
    let (slope, intercept, _r2) =
        linear_ols(&kept.iter().map(|(t, _)| t * t).collect::<Vec<_>>(),
                   &kept.iter().map(|(_, m)| m.ln()).collect::<Vec<_>>())?;
    if slope >= -1.0 / (2.0 * (5.0 * span) * (5.0 * span)) {
        return Err(AnalyticsError::NoCollapse {
            tau: if slope < 0.0 { (-1.0 / (2.0 * slope)).sqrt() } else { f64::INFINITY },
        });
    }
    let tau0 = (-1.0 / (2.0 * slope)).sqrt();
    let a0 = intercept.exp();

    // Refine in linear space.
    let eval = |theta: &[f64], r: &mut Vec<f64>, jac: &mut Vec<Vec<f64>>| {
        let (a, tau) = (theta[0], theta[1]);
        r.clear();
        jac.clear();
        for &(t, m) in &kept {
            let e = (-0.5 * (t / tau) * (t / tau)).exp();
            r.push(a * e - m);
            jac.push(vec![e, a * e * t * t / (tau * tau * tau)]);
        }
    };
    let (theta, _cost, converged, iters) = levenberg_marquardt(&[a0, tau0], eval, 200);
    let (a, tau) = (theta[0], theta[1].abs());
    if tau > 5.0 * span {
        return Err(AnalyticsError::NoCollapse { tau });
    }
    let residuals: Vec<f64> = kept
        .iter()
        .map(|&(t, m)| a * (-0.5 * (t / tau) * (t / tau)).exp() - m)
        .collect();
    let observed: Vec<f64> = kept.iter().map(|(_, m)| *m).collect();
    let (rmse, r2) = quality(&residuals, &observed);

    // Empirical a/e crossing of the raw envelope (linear interpolation).
    let target = a / std::f64::consts::E;
    let mut crossing = f64::NAN;
    for w in ext.windows(2) {
        let ((t0, m0), (t1, m1)) = (w[0], w[1]);
        if m0 >= target && m1 < target {
            let frac = (m0 - target) / (m0 - m1);
            crossing = t0 + frac * (t1 - t0);
            break;
        }
    }

    let result = FitResult {
        model: FitModel::CollapseGaussian,
        params: vec![
            ("amplitude".into(), a),
            ("tau_c".into(), tau),
            ("t_efold".into(), std::f64::consts::SQRT_2 * tau),
            ("t_efold_crossing".into(), crossing),
            ("n_extrema".into(), kept.len() as f64),
        ],
        rmse,
        r_squared: r2,
    };
    if !converged {
        return Err(AnalyticsError::NonConvergence {
            iterations: iters,
            residual: rmse,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Detected revival: the first post-collapse maximum of the oscillation
/// envelope, located by a Gaussian fit of the revival bump.
#[derive(Debug, Clone, PartialEq)]
pub struct RevivalEstimate {
    pub t_revival: f64,
    pub peak_height: f64,
    pub quality: FitResult,
}

/// Locate the first revival of a collapsed oscillation. The envelope is the
/// smoothed sequence of extrema magnitudes; detection requires it to fall
/// below 20% of its initial value and later recover above 25%. Invariant
/// under constant channel offsets (the window mean is removed first).
pub fn estimate_revival_time(
    times: &[f64],
    values: &[f64],
) -> Result<RevivalEstimate, AnalyticsError> {
    let ext = extrema_magnitudes(times, values);
    if ext.len() < 8 {
        return Err(AnalyticsError::InsufficientData { needed: 8, got: ext.len() });
    }
    let window = (ext.len() / 50).max(2);
    let smoothed: Vec<(f64, f64)> = (0..ext.len())
        .map(|k| {
            let lo = k.saturating_sub(window);
            let hi = (k + window + 1).min(ext.len());
            let avg = ext[lo..hi].iter().map(|(_, m)| m).sum::<f64>() / (hi - lo) as f64;
            (ext[k].0, avg)
        })
        .collect();
    let m_init = smoothed[..window.max(1)]
        .iter()
        .map(|(_, m)| *m)
        .fold(0.0, f64::max);
    let collapse_end = smoothed
        .iter()
        .position(|(_, m)| *m < 0.2 * m_init)
        .ok_or_else(|| AnalyticsError::NoRevival("envelope never collapses".into()))?;
    let tail = &smoothed[collapse_end..];
    let (peak_off, &(t_peak, m_peak)) = tail
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty tail");
    if m_peak < 0.25 * m_init {
        return Err(AnalyticsError::NoRevival(format!(
            "no envelope recovery above 25% of the initial amplitude (max {:.3}%)",
            100.0 * m_peak / m_init
        )));
    }
    if peak_off + window >= tail.len() {
        return Err(AnalyticsError::NoRevival(
            "envelope still rising at the end of the window".into(),
        ));
    }

    // Refine by fitting a Gaussian bump to the revival region of the envelope.
    let lo = collapse_end + peak_off.saturating_sub(3 * window + 2);
    let hi = (collapse_end + peak_off + 3 * window + 2).min(smoothed.len());
    let bump = SpectrumTrace::new(
        smoothed[lo..hi].iter().map(|(t, _)| *t).collect(),
        smoothed[lo..hi].iter().map(|(_, m)| *m).collect(),
        "revival envelope",
    );
    let fit = fit_gaussian_envelope(&bump, None);
    let (t_revival, quality) = match fit {
        Ok(q) => {
            let center = q.param("h_c").unwrap_or(t_peak);
            // Trust the fit only if it lands inside the searched bump.
            if center > bump.abscissa[0] && center < bump.abscissa[bump.len() - 1] {
                (center, q)
            } else {
                (t_peak, q)
            }
        }
        Err(AnalyticsError::NonConvergence { best, .. }) => (t_peak, *best),
        Err(e) => return Err(e),
    };
    Ok(RevivalEstimate { t_revival, peak_height: m_peak, quality })
}

/// One spectral line extracted from a sampled channel: angular frequency and
/// oscillation amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    pub frequency: f64,
    pub amplitude: f64,
}

/// Discrete-Fourier peak detection with Hann windowing, 4× zero padding and
/// quadratic interpolation on the log-magnitude. Returns peaks above
/// `rel_floor` of the strongest one, sorted by amplitude (descending).
/// Frequencies are angular (rad per unit time).
pub fn extract_rabi_frequencies(
    times: &[f64],
    values: &[f64],
    rel_floor: f64,
) -> Result<Vec<SpectralPeak>, AnalyticsError> {
    let n = values.len();
    if n < 64 {
        return Err(AnalyticsError::InsufficientData { needed: 64, got: n });
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1e-300) {
            return Err(AnalyticsError::NonUniformSampling);
        }
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let scale = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if scale < 1e-12 * (1.0 + mean.abs()) {
        return Ok(Vec::new());
    }

    let n_pad = (4 * n).next_power_of_two();
    let mut buf: Vec<C64> = Vec::with_capacity(n_pad);
    let mut window_sum = 0.0;
    for (k, v) in values.iter().enumerate() {
        let w = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos());
        window_sum += w;
        buf.push(C64::from((v - mean) * w));
    }
    buf.resize(n_pad, C64::ZERO);
    rustfft::FftPlanner::new().plan_fft_forward(n_pad).process(&mut buf);

    let half = n_pad / 2;
    let mags: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    let max_mag = mags.iter().copied().fold(0.0, f64::max);
    if max_mag <= 0.0 {
        return Ok(Vec::new());
    }
    let floor = rel_floor * max_mag;
    let mut peaks = Vec::new();
    for k in 3..half - 1 {
        if mags[k] > mags[k - 1] && mags[k] >= mags[k + 1] && mags[k] >= floor {
            // Quadratic interpolation on ln|X|.
            let (lm, l0, lp) = (mags[k - 1].max(1e-300).ln(), mags[k].ln(), mags[k + 1].max(1e-300).ln());
            let denom = lm - 2.0 * l0 + lp;
            let delta: f64 = if denom.abs() > 1e-12 { 0.5 * (lm - lp) / denom } else { 0.0 };
            let delta = delta.clamp(-0.5, 0.5);
            let freq = 2.0 * std::f64::consts::PI * (k as f64 + delta) / (n_pad as f64 * dt);
            let mag_interp = (l0 - 0.25 * (lm - lp) * delta).exp();
            let amplitude = 2.0 * mag_interp / window_sum;
            peaks.push(SpectralPeak { frequency: freq, amplitude });
        }
    }
    peaks.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
    Ok(peaks)
}

/// Ordinary least squares of y on x: (slope, intercept, r²).
pub fn linear_ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64), AnalyticsError> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return Err(AnalyticsError::InsufficientData { needed: 2, got: x.len().min(y.len()) });
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    if sxx <= 0.0 {
        return Err(AnalyticsError::DegenerateAbscissa(
            "zero variance in the independent variable".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| slope * xi + intercept - yi).collect();
    let (_rmse, r2) = quality(&residuals, y);
    Ok((slope, intercept, r2))
}

/// Least-squares line through the inter-line splittings of a resolved
/// multiplet: regresses field_{i+1} − field_i on the left line index.
pub fn fit_linear_splitting(
    line_positions: &[(f64, f64)],
) -> Result<FitResult, AnalyticsError> {
    if line_positions.len() < 3 {
        return Err(AnalyticsError::InsufficientData { needed: 3, got: line_positions.len() });
    }
    let mut xs = Vec::with_capacity(line_positions.len() - 1);
    let mut ys = Vec::with_capacity(line_positions.len() - 1);
    for w in line_positions.windows(2) {
        xs.push(w[0].0);
        ys.push(w[1].1 - w[0].1);
    }
    let (slope, intercept, r2) = linear_ols(&xs, &ys)?;
    let residuals: Vec<f64> =
        xs.iter().zip(&ys).map(|(x, y)| slope * x + intercept - y).collect();
    let (rmse, _) = quality(&residuals, &ys);
    Ok(FitResult {
        model: FitModel::Linear,
        params: vec![
            ("slope".into(), slope),
            ("intercept".into(), intercept),
            ("n_splittings".into(), xs.len() as f64),
        ],
        rmse,
        r_squared: r2,
    })
}
