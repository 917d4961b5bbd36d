//! Bifurcation diagrams over the dissipative coupling and regime labels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beats::{magnitude_spectrum, peaks};
use super::lyapunov::{lyapunov_max_with, LyapunovOptions};
use crate::dynamics::{check_sorted, integrate, IntegratorConfig, TimeSeries};
use crate::error::Result;
use crate::model::{FieldState, SystemParams};

/// `λ_max` above this is chaotic; within `±` this it counts as zero.
pub const LAMBDA_THRESHOLD: f64 = 1e-4;

/// Minimum number of incommensurate spectral peaks for quasi-periodicity.
pub const QUASI_PERIODIC_PEAKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZoneLabel {
    Chaotic,
    QuasiPeriodic,
    Regular,
    FixedPoint,
}

impl ZoneLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ZoneLabel::Chaotic => "chaotic",
            ZoneLabel::QuasiPeriodic => "quasi-periodic",
            ZoneLabel::Regular => "regular",
            ZoneLabel::FixedPoint => "fixed-point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BifurcationOptions {
    pub lyapunov: LyapunovOptions,
    /// Spectral peaks below this fraction of the largest are ignored.
    pub peak_fraction: f64,
    /// An envelope shrinking below this ratio between the first and last
    /// quarter of the record marks a decaying (fixed-point) orbit.
    pub decay_ratio: f64,
}

impl Default for BifurcationOptions {
    fn default() -> Self {
        Self {
            lyapunov: LyapunovOptions::default(),
            peak_fraction: 0.05,
            decay_ratio: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationData {
    pub eta: f64,
    /// Local maxima of `x₁` after the transient cut.
    pub extrema: Vec<f64>,
    pub label: ZoneLabel,
    pub lambda_max: f64,
    pub lyapunov_converged: bool,
    pub spectral_peaks: usize,
    /// Set when the integration at this point failed; the label is then
    /// meaningless.
    pub failure: Option<String>,
}

/// Post-transient local maxima of `x`, by strict 3-point comparison.
pub fn local_maxima(x: &[f64]) -> Vec<f64> {
    x.windows(3).filter(|w| w[1] > w[0] && w[1] >= w[2]).map(|w| w[1]).collect()
}

/// Significant spectral peaks that are not harmonics of the dominant one.
pub fn incommensurate_peaks(x: &[f64], dt: f64, fraction: f64) -> usize {
    if x.len() < 8 {
        return 0;
    }
    let mag = magnitude_spectrum(x);
    let bin = 2.0 * std::f64::consts::PI / (x.len() as f64 * dt);
    let found = peaks(&mag, 1, mag.len(), bin);
    let Some(top) = found.first().copied() else {
        return 0;
    };
    found
        .iter()
        .filter(|p| p.magnitude >= fraction * top.magnitude)
        .filter(|p| {
            let n = (p.frequency / top.frequency).round();
            n < 2.0 || (p.frequency - n * top.frequency).abs() > 2.0 * bin
        })
        .count()
}

/// Ratio of the last-quarter to first-quarter oscillation amplitude.
fn envelope_ratio(x: &[f64]) -> f64 {
    let q = x.len() / 4;
    if q < 2 {
        return 1.0;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let amp = |s: &[f64]| s.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    let first = amp(&x[..q]);
    if first == 0.0 {
        return 0.0;
    }
    amp(&x[x.len() - q..]) / first
}

/// Labels a post-transient record from its Lyapunov exponent, spectrum and
/// envelope.
pub fn classify(x: &[f64], dt: f64, lambda_max: f64, opts: &BifurcationOptions) -> (ZoneLabel, usize) {
    let n_peaks = incommensurate_peaks(x, dt, opts.peak_fraction);
    let label = if lambda_max > LAMBDA_THRESHOLD {
        ZoneLabel::Chaotic
    } else if envelope_ratio(x) < opts.decay_ratio {
        ZoneLabel::FixedPoint
    } else if lambda_max.abs() <= LAMBDA_THRESHOLD && n_peaks >= QUASI_PERIODIC_PEAKS {
        ZoneLabel::QuasiPeriodic
    } else {
        ZoneLabel::Regular
    };
    (label, n_peaks)
}

pub fn bifurcation_diagram(
    template: &SystemParams,
    eta_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<BifurcationData>> {
    bifurcation_diagram_with(template, eta_grid, &crate::dynamics::default_initial_state(), cfg, &BifurcationOptions::default())
}

/// Integrates each `η` from `s0`, drops the transient, and labels the rest.
/// The Lyapunov estimate starts from the state at the transient cut.
pub fn bifurcation_diagram_with(
    template: &SystemParams,
    eta_grid: &[f64],
    s0: &FieldState,
    cfg: &IntegratorConfig,
    opts: &BifurcationOptions,
) -> Result<Vec<BifurcationData>> {
    template.validate()?;
    cfg.validate()?;
    check_sorted(eta_grid, "eta grid")?;
    let cut = cfg.transient_cut();
    Ok(eta_grid
        .par_iter()
        .map(|&eta| {
            let p = template.with_eta(eta);
            let failed = |e: crate::Error| BifurcationData {
                eta,
                extrema: Vec::new(),
                label: ZoneLabel::Regular,
                lambda_max: f64::NAN,
                lyapunov_converged: false,
                spectral_peaks: 0,
                failure: Some(e.to_string()),
            };
            let ts = match integrate(&p, s0, cfg) {
                Ok(ts) => ts,
                Err(e) => return failed(e),
            };
            let start = ts.states[cut];
            let est = match lyapunov_max_with(&p, &start, cfg, &opts.lyapunov) {
                Ok(est) => est,
                Err(e) => return failed(e),
            };
            row(eta, &ts, cut, cfg.sample_stride, est.lambda_max, est.converged, opts)
        })
        .collect())
}

fn row(
    eta: f64,
    ts: &TimeSeries,
    cut: usize,
    dt: f64,
    lambda_max: f64,
    converged: bool,
    opts: &BifurcationOptions,
) -> BifurcationData {
    let x: Vec<f64> = ts.states[cut..].iter().map(|s| s.x(0)).collect();
    let (label, spectral_peaks) = classify(&x, dt, lambda_max, opts);
    let extrema = if label == ZoneLabel::FixedPoint { Vec::new() } else { local_maxima(&x) };
    BifurcationData {
        eta,
        extrema,
        label,
        lambda_max,
        lyapunov_converged: converged,
        spectral_peaks,
        failure: None,
    }
}

/// Number of label changes along the sweep, skipping failed rows.
pub fn transitions(rows: &[BifurcationData]) -> Vec<(ZoneLabel, ZoneLabel)> {
    let labels: Vec<ZoneLabel> = rows.iter().filter(|r| r.failure.is_none()).map(|r| r.label).collect();
    labels.windows(2).filter(|w| w[0] != w[1]).map(|w| (w[0], w[1])).collect()
}
