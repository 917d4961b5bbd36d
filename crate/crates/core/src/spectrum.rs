//! Effective two-mode mechanical model after adiabatic elimination of the
//! cavity fields, its closed-form eigenvalues, and exceptional-point scans.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::check_sorted;
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::steady::{solve_steady, steady_ramp, SteadyState};

/// Which conjugation of the common cavity amplitude enters the cavity-1 and
/// cavity-2 effective rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Conjugation {
    /// `ᾱ*` for resonator 1 and `ᾱ` for resonator 2.
    #[default]
    AsPrinted,
    /// `ᾱ` for both resonators.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveParams {
    /// Real parts of the effective dampings (diagonal entries of `H_eff`).
    pub gamma_eff: [f64; 2],
    pub omega_eff: [f64; 2],
    /// Imaginary parts discarded when projecting onto real rates.
    pub gamma_eff_imag: [f64; 2],
    pub omega_eff_imag: [f64; 2],
    /// Optical damping `Γ = 4|G|²/κ`.
    pub optical_damping: f64,
    /// Optomechanically induced coupling `G = g ᾱ`.
    pub coupling: Complex64,
}

/// Rates of the effective mechanical model at a converged steady state.
///
/// Both cavities share the drive, and the common amplitude `ᾱ` is taken from
/// cavity 1.
pub fn effective_params(p: &SystemParams, ss: &SteadyState) -> Result<EffectiveParams> {
    effective_params_with(p, ss, Conjugation::AsPrinted)
}

pub fn effective_params_with(p: &SystemParams, ss: &SteadyState, conj: Conjugation) -> Result<EffectiveParams> {
    let ss = ss.require_converged()?;
    let alpha = ss.alpha_bar[0];
    Ok(effective_from_amplitude(p, alpha, conj))
}

pub(crate) fn effective_from_amplitude(p: &SystemParams, alpha: Complex64, conj: Conjugation) -> EffectiveParams {
    let sk = p.kappa.sqrt();
    let ain = p.alpha_in;
    let coupling = p.g_m * alpha;
    let gamma_opt = 4.0 * coupling.norm_sqr() / p.kappa;
    let first = match conj {
        Conjugation::AsPrinted => alpha.conj(),
        Conjugation::Symmetric => alpha,
    };
    let eta2 = p.eta * p.eta;
    let g1 = gamma_opt - p.gamma_m - 2.0 * eta2 * ain * (first * sk - ain);
    let g2 = -(gamma_opt + p.gamma_m) + 2.0 * eta2 * ain * (alpha * sk - ain);
    let shift = 0.5 * p.eta * gamma_opt.sqrt();
    let w1 = p.omega_m + shift * (first * sk + ain);
    let w2 = p.omega_m + shift * (alpha * sk + ain);
    EffectiveParams {
        gamma_eff: [g1.re, g2.re],
        omega_eff: [w1.re, w2.re],
        gamma_eff_imag: [g1.im, g2.im],
        omega_eff_imag: [w1.im, w2.im],
        optical_damping: gamma_opt,
        coupling,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveSpectrum {
    pub lambda_plus: Complex64,
    pub lambda_minus: Complex64,
    pub sigma: Complex64,
    /// `[ω₊, ω₋]`, real parts of the eigenvalues.
    pub omega_pm: [f64; 2],
    /// `[γ₊, γ₋]`, imaginary parts of the eigenvalues.
    pub gamma_pm: [f64; 2],
}

impl EffectiveSpectrum {
    fn from_pair(lambda_plus: Complex64, lambda_minus: Complex64, sigma: Complex64) -> Self {
        Self {
            lambda_plus,
            lambda_minus,
            sigma,
            omega_pm: [lambda_plus.re, lambda_minus.re],
            gamma_pm: [lambda_plus.im, lambda_minus.im],
        }
    }

    pub fn frequency_gap(&self) -> f64 {
        (self.omega_pm[0] - self.omega_pm[1]).abs()
    }

    pub fn damping_gap(&self) -> f64 {
        (self.gamma_pm[0] - self.gamma_pm[1]).abs()
    }

    /// Same spectrum with the `±` labels exchanged.
    pub fn swapped(&self) -> Self {
        Self::from_pair(self.lambda_minus, self.lambda_plus, -self.sigma)
    }
}

/// `H_eff` with diagonal `ω_eff^j + iγ_eff^j/2` and off-diagonal `−J_m`.
pub fn effective_hamiltonian(ep: &EffectiveParams, j_m: f64) -> [[Complex64; 2]; 2] {
    let d = |j: usize| Complex64::new(ep.omega_eff[j], 0.5 * ep.gamma_eff[j]);
    let off = Complex64::new(-j_m, 0.0);
    [[d(0), off], [off, d(1)]]
}

/// Closed-form eigenvalues `λ± = (ω¹+ω²)/2 + i(γ¹+γ²)/4 ± σ/4`.
pub fn eigenvalues(ep: &EffectiveParams, j_m: f64) -> EffectiveSpectrum {
    let [w1, w2] = ep.omega_eff;
    let [g1, g2] = ep.gamma_eff;
    let detuning = Complex64::new(2.0 * (w1 - w2), g1 - g2);
    let sigma = (detuning * detuning + 16.0 * j_m * j_m).sqrt();
    let center = Complex64::new(0.5 * (w1 + w2), 0.25 * (g1 + g2));
    EffectiveSpectrum::from_pair(center + 0.25 * sigma, center - 0.25 * sigma, sigma)
}

/// Complex steady amplitude and spectrum at one drive strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub alpha_in: f64,
    pub eta: f64,
    pub steady: SteadyState,
    /// `None` when the steady state did not converge.
    pub effective: Option<EffectiveParams>,
    pub spectrum: Option<EffectiveSpectrum>,
}

impl SpectrumPoint {
    pub fn sigma_abs(&self) -> f64 {
        self.spectrum.map_or(f64::NAN, |s| s.sigma.norm())
    }
}

fn spectrum_at(p: &SystemParams, ss: SteadyState, conj: Conjugation) -> SpectrumPoint {
    let effective = effective_params_with(p, &ss, conj).ok();
    SpectrumPoint {
        alpha_in: p.alpha_in,
        eta: p.eta,
        steady: ss,
        effective,
        spectrum: effective.map(|e| eigenvalues(&e, p.j_m)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpReport {
    pub points: Vec<SpectrumPoint>,
    /// Grid index minimizing `|σ|`.
    pub grid_argmin: usize,
    pub grid_alpha: f64,
    pub grid_sigma_abs: f64,
    /// Golden-section refinement between the neighbours of the grid minimum.
    pub alpha_ep: f64,
    pub at_ep: EffectiveSpectrum,
    /// The minimum sits on the first or last grid point.
    pub boundary_minimum: bool,
}

impl EpReport {
    pub fn frequency_gap(&self) -> f64 {
        self.at_ep.frequency_gap()
    }

    pub fn damping_gap(&self) -> f64 {
        self.at_ep.damping_gap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpScanOptions {
    pub conjugation: Conjugation,
    /// Width of the final golden-section bracket relative to the grid step.
    pub refine_tol: f64,
}

impl Default for EpScanOptions {
    fn default() -> Self {
        Self {
            conjugation: Conjugation::AsPrinted,
            refine_tol: 1e-10,
        }
    }
}

/// Sweeps the drive strength, locates the grid minimum of `|σ|`, and refines
/// it by golden-section search.
pub fn ep_scan(template: &SystemParams, alpha_grid: &[f64]) -> Result<EpReport> {
    ep_scan_with(template, alpha_grid, &EpScanOptions::default())
}

pub fn ep_scan_with(template: &SystemParams, alpha_grid: &[f64], opts: &EpScanOptions) -> Result<EpReport> {
    template.validate()?;
    check_sorted(alpha_grid, "alpha grid")?;
    let ramp = steady_ramp(template, alpha_grid)?;
    let points: Vec<SpectrumPoint> = ramp
        .into_iter()
        .zip(alpha_grid)
        .map(|(ss, &a)| spectrum_at(&template.with_alpha_in(a), ss, opts.conjugation))
        .collect();

    let (grid_argmin, grid_sigma_abs) = points
        .iter()
        .enumerate()
        .filter(|(_, pt)| pt.spectrum.is_some())
        .map(|(i, pt)| (i, pt.sigma_abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::NotConverged("no grid point has a converged steady state".into()))?;
    let boundary_minimum = grid_argmin == 0 || grid_argmin + 1 == points.len();
    if boundary_minimum {
        log::warn!("|sigma| minimum lies on the grid boundary at alpha_in = {}", alpha_grid[grid_argmin]);
    }

    let lo = alpha_grid[grid_argmin.saturating_sub(1)];
    let hi = alpha_grid[(grid_argmin + 1).min(alpha_grid.len() - 1)];
    let seed = points[grid_argmin].steady.state();
    let sigma_at = |a: f64| -> f64 {
        let p = template.with_alpha_in(a);
        solve_steady(&p, Some(&seed))
            .ok()
            .and_then(|ss| effective_params_with(&p, &ss, opts.conjugation).ok())
            .map_or(f64::INFINITY, |e| eigenvalues(&e, p.j_m).sigma.norm())
    };
    let (mut alpha_ep, best) = golden_section(sigma_at, lo, hi, opts.refine_tol * (hi - lo).max(1e-300));
    if best > grid_sigma_abs {
        alpha_ep = alpha_grid[grid_argmin];
    }
    let p_ep = template.with_alpha_in(alpha_ep);
    let ss = solve_steady(&p_ep, Some(&seed))?.require_converged()?;
    let at_ep = eigenvalues(&effective_params_with(&p_ep, &ss, opts.conjugation)?, p_ep.j_m);

    Ok(EpReport {
        grid_alpha: alpha_grid[grid_argmin],
        points,
        grid_argmin,
        grid_sigma_abs,
        alpha_ep,
        at_ep,
        boundary_minimum,
    })
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
/// Returns the best abscissa evaluated and its value.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = if fc < fd { (c, fc) } else { (d, fd) };
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
            if fc < best.1 {
                best = (c, fc);
            }
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
            if fd < best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceRow {
    pub alpha_in: f64,
    pub eta: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub sigma_abs: f64,
    /// Largest discarded imaginary part of the effective rates.
    pub discarded_imag: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpLocusPoint {
    pub eta: f64,
    pub alpha_ep: f64,
    pub sigma_abs: f64,
    pub boundary_minimum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSurface {
    /// Row-major over `(eta, alpha_in)`.
    pub rows: Vec<SurfaceRow>,
    pub locus: Vec<EpLocusPoint>,
}

/// Eigenfrequency and eigendamping surfaces over `(α_in, η)` plus the EP
/// locus `α_EP(η)`.
pub fn eigen_surface(template: &SystemParams, alpha_grid: &[f64], eta_grid: &[f64]) -> Result<EigenSurface> {
    template.validate()?;
    check_sorted(alpha_grid, "alpha grid")?;
    if eta_grid.is_empty() {
        return Err(Error::Config("eta grid is empty".into()));
    }
    let per_eta: Vec<Result<(Vec<SurfaceRow>, EpLocusPoint)>> = eta_grid
        .par_iter()
        .map(|&eta| {
            let p = template.with_eta(eta);
            let report = ep_scan(&p, alpha_grid)?;
            let mut rows = Vec::with_capacity(alpha_grid.len());
            let mut prev: Option<EffectiveSpectrum> = None;
            for pt in &report.points {
                let row = match pt.spectrum {
                    Some(mut s) => {
                        if let Some(prev) = prev {
                            s = match_branches(&prev, s);
                        }
                        prev = Some(s);
                        let e = pt.effective.expect("spectrum implies effective params");
                        let discarded = e
                            .gamma_eff_imag
                            .iter()
                            .chain(&e.omega_eff_imag)
                            .fold(0.0_f64, |m, v| m.max(v.abs()));
                        SurfaceRow {
                            alpha_in: pt.alpha_in,
                            eta,
                            omega_plus: s.omega_pm[0],
                            omega_minus: s.omega_pm[1],
                            gamma_plus: s.gamma_pm[0],
                            gamma_minus: s.gamma_pm[1],
                            sigma_abs: s.sigma.norm(),
                            discarded_imag: discarded,
                            converged: true,
                        }
                    }
                    None => SurfaceRow {
                        alpha_in: pt.alpha_in,
                        eta,
                        omega_plus: f64::NAN,
                        omega_minus: f64::NAN,
                        gamma_plus: f64::NAN,
                        gamma_minus: f64::NAN,
                        sigma_abs: f64::NAN,
                        discarded_imag: f64::NAN,
                        converged: false,
                    },
                };
                rows.push(row);
            }
            let locus = EpLocusPoint {
                eta,
                alpha_ep: report.alpha_ep,
                sigma_abs: report.at_ep.sigma.norm(),
                boundary_minimum: report.boundary_minimum,
            };
            Ok((rows, locus))
        })
        .collect();
    let mut rows = Vec::new();
    let mut locus = Vec::new();
    for r in per_eta {
        let (r, l) = r?;
        rows.extend(r);
        locus.push(l);
    }
    Ok(EigenSurface { rows, locus })
}

/// Relabels `next` so that each branch continues from the nearer eigenvalue
/// of `prev` in the complex plane.
pub fn match_branches(prev: &EffectiveSpectrum, next: EffectiveSpectrum) -> EffectiveSpectrum {
    let keep = (next.lambda_plus - prev.lambda_plus).norm() + (next.lambda_minus - prev.lambda_minus).norm();
    let swap = (next.lambda_plus - prev.lambda_minus).norm() + (next.lambda_minus - prev.lambda_plus).norm();
    if swap < keep {
        next.swapped()
    } else {
        next
    }
}

/// Direct diagonalization of `H_eff` used only for cross-checking.
pub fn eigenvalues_direct(h: &[[Complex64; 2]; 2]) -> [Complex64; 2] {
    let half_trace = 0.5 * (h[0][0] + h[1][1]);
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = (half_trace * half_trace - det).sqrt();
    [half_trace + disc, half_trace - disc]
}
