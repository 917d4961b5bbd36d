//! Windowed periodogram of the resonator displacement and beat detection.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};

/// Minimum number of samples accepted by [`beat_spectrum`].
pub const MIN_SAMPLES: usize = 1 << 14;

/// Secondary peaks below this fraction of the dominant one are ignored.
pub const SECOND_PEAK_FRACTION: f64 = 0.1;

/// Upper edge of the band searched for the envelope beat, in `ω_m`.
pub const ENVELOPE_BAND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Angular frequency in units of `ω_m`.
    pub frequency: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeatReport {
    /// Angular frequency resolution `2π / (N Δt)`.
    pub bin_width: f64,
    pub samples: usize,
    pub primary: Peak,
    pub secondary: Option<Peak>,
    /// Separation of the two dominant peaks (0 if only one).
    pub splitting: f64,
    pub splitting_bins: f64,
    /// Dominant low-band frequency of the squared displacement.
    pub envelope_frequency: f64,
}

/// Hann-windowed magnitude spectrum of a real signal with its mean removed.
/// Returns magnitudes for bins `0..=N/2`.
pub fn magnitude_spectrum(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos();
            Complex::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf[..=n / 2].iter().map(|z| z.norm()).collect()
}

/// Local maxima of `mag` over bins `lo..hi`, sorted by decreasing magnitude,
/// with parabolic sub-bin refinement of the location.
pub(crate) fn peaks(mag: &[f64], lo: usize, hi: usize, bin: f64) -> Vec<Peak> {
    let mut out: Vec<Peak> = (lo.max(1)..hi.min(mag.len() - 1))
        .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])
        .map(|k| {
            let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
            let denom = a - 2.0 * b + c;
            let offset = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            Peak {
                frequency: (k as f64 + offset.clamp(-0.5, 0.5)) * bin,
                magnitude: b,
            }
        })
        .collect();
    out.sort_by(|x, y| y.magnitude.total_cmp(&x.magnitude));
    out
}

/// Dominant spectral peaks of `x₁(t)` and their separation.
pub fn beat_spectrum(ts: &TimeSeries) -> Result<BeatReport> {
    beat_spectrum_of(&ts.x(0), ts.stride().unwrap_or(0.0))
}

/// [`beat_spectrum`] on a raw uniformly sampled signal.
pub fn beat_spectrum_of(signal: &[f64], dt: f64) -> Result<BeatReport> {
    let n = signal.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "beat spectrum needs at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InsufficientData("signal sampling step must be positive".into()));
    }
    let bin = 2.0 * PI / (n as f64 * dt);
    let mag = magnitude_spectrum(signal);
    let found = peaks(&mag, 1, mag.len(), bin);
    let primary = *found
        .first()
        .ok_or_else(|| Error::InsufficientData("signal has no spectral peak".into()))?;
    let secondary = found
        .iter()
        .skip(1)
        .find(|p| p.magnitude >= SECOND_PEAK_FRACTION * primary.magnitude)
        .copied();
    let splitting = secondary.map_or(0.0, |s| (s.frequency - primary.frequency).abs());

    let mean = signal.iter().sum::<f64>() / n as f64;
    let squared: Vec<f64> = signal.iter().map(|v| (v - mean) * (v - mean)).collect();
    let env_mag = magnitude_spectrum(&squared);
    let env_hi = ((ENVELOPE_BAND / bin).floor() as usize).min(env_mag.len());
    let envelope_frequency = peaks(&env_mag, 1, env_hi, bin).first().map_or(0.0, |p| p.frequency);

    Ok(BeatReport {
        bin_width: bin,
        samples: n,
        primary,
        secondary,
        splitting,
        splitting_bins: splitting / bin,
        envelope_frequency,
    })
}
