//! Parameter and state types, plus the mean-field and linearized fluctuation
//! right-hand sides.
//!
//! All rates are expressed in units of the mechanical frequency, so
//! `omega_m == 1` and time is measured in `1/omega_m`. The drive amplitude
//! `alpha_in` carries units of `omega_m^{1/2}`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Number of real degrees of freedom of a [`FieldState`].
pub const STATE_DIM: usize = 8;

/// Physical parameters of the two-cavity system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Cavity detunings `[Δ₁, Δ₂]` (cavity 1 blue, cavity 2 red).
    pub delta: [f64; 2],
    /// Dispersive coupling rate.
    pub g_m: f64,
    /// Dissipative ratio `g_κ / κ` (dimensionless).
    pub eta: f64,
    /// Cavity linewidth.
    pub kappa: f64,
    /// Mechanical damping.
    pub gamma_m: f64,
    /// Phonon hopping rate between the resonators.
    pub j_m: f64,
    /// Drive amplitude, identical for both cavities.
    pub alpha_in: f64,
    /// Normalization anchor, always 1.
    #[serde(default = "unit")]
    pub omega_m: f64,
}

fn unit() -> f64 {
    1.0
}

impl SystemParams {
    /// The blue/red detuned parameter set used for the threshold and EP
    /// studies, with `eta = 0.1 g_m` and the drive switched off.
    pub fn reference() -> Self {
        let g_m = 1.076e-4;
        Self {
            delta: [1.0, -1.0],
            g_m,
            eta: 0.1 * g_m,
            kappa: 7.3e-2,
            gamma_m: 1.076e-5,
            j_m: 4e-4,
            alpha_in: 0.0,
            omega_m: 1.0,
        }
    }

    pub fn with_alpha_in(mut self, alpha_in: f64) -> Self {
        self.alpha_in = alpha_in;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    /// Parameters with the cavity labels exchanged.
    pub fn swapped(mut self) -> Self {
        self.delta.swap(0, 1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.delta[0],
            self.delta[1],
            self.g_m,
            self.eta,
            self.kappa,
            self.gamma_m,
            self.j_m,
            self.alpha_in,
            self.omega_m,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if self.gamma_m < 0.0 {
            return Err(Error::InvalidParams(format!("gamma_m must be >= 0, got {}", self.gamma_m)));
        }
        if self.j_m < 0.0 {
            return Err(Error::InvalidParams(format!("j_m must be >= 0, got {}", self.j_m)));
        }
        if self.alpha_in < 0.0 {
            return Err(Error::InvalidParams(format!("alpha_in must be >= 0, got {}", self.alpha_in)));
        }
        if self.omega_m != 1.0 {
            return Err(Error::InvalidParams(format!(
                "omega_m is the unit of frequency and must equal 1, got {}",
                self.omega_m
            )));
        }
        Ok(())
    }

    fn sqrt_kappa(&self) -> f64 {
        self.kappa.sqrt()
    }

    /// Complex coupling `g_m + i η κ / 2` multiplying the displacement in
    /// the cavity equation.
    fn complex_coupling(&self) -> Complex64 {
        Complex64::new(self.g_m, 0.5 * self.eta * self.kappa)
    }
}

/// Mean-field amplitudes of the two cavities and the two resonators.
///
/// Real layout (see [`FieldState::to_real`]):
/// `[Re α₁, Im α₁, Re α₂, Im α₂, Re β₁, Im β₁, Re β₂, Im β₂]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldState {
    pub alpha: [Complex64; 2],
    pub beta: [Complex64; 2],
}

impl FieldState {
    pub const ZERO: FieldState = FieldState {
        alpha: [Complex64::new(0.0, 0.0); 2],
        beta: [Complex64::new(0.0, 0.0); 2],
    };

    pub fn new(alpha: [Complex64; 2], beta: [Complex64; 2]) -> Self {
        Self { alpha, beta }
    }

    /// Zero state with a small real kick on the first resonator.
    pub fn kicked(beta1: f64) -> Self {
        let mut s = Self::ZERO;
        s.beta[0] = Complex64::new(beta1, 0.0);
        s
    }

    pub fn to_real(&self) -> [f64; STATE_DIM] {
        [
            self.alpha[0].re,
            self.alpha[0].im,
            self.alpha[1].re,
            self.alpha[1].im,
            self.beta[0].re,
            self.beta[0].im,
            self.beta[1].re,
            self.beta[1].im,
        ]
    }

    pub fn from_real(y: &[f64; STATE_DIM]) -> Self {
        Self {
            alpha: [Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])],
            beta: [Complex64::new(y[4], y[5]), Complex64::new(y[6], y[7])],
        }
    }

    /// Unit vector along real coordinate `k` of the layout.
    pub fn unit(k: usize) -> Self {
        let mut y = [0.0; STATE_DIM];
        y[k] = 1.0;
        Self::from_real(&y)
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().chain(&self.beta).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Euclidean norm over the eight real components.
    pub fn norm(&self) -> f64 {
        self.to_real().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest magnitude among the real components.
    pub fn max_abs(&self) -> f64 {
        self.to_real().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Mechanical displacement `x_j = β_j + β_j* = 2 Re β_j`.
    pub fn x(&self, j: usize) -> f64 {
        2.0 * self.beta[j].re
    }

    /// Intracavity photon number `|α_j|²`.
    pub fn photons(&self, j: usize) -> f64 {
        self.alpha[j].norm_sqr()
    }

    pub fn swapped(&self) -> Self {
        Self {
            alpha: [self.alpha[1], self.alpha[0]],
            beta: [self.beta[1], self.beta[0]],
        }
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState(format!("{what} has non-finite components")))
        }
    }
}

impl Add for FieldState {
    type Output = FieldState;
    fn add(self, rhs: FieldState) -> FieldState {
        FieldState {
            alpha: [self.alpha[0] + rhs.alpha[0], self.alpha[1] + rhs.alpha[1]],
            beta: [self.beta[0] + rhs.beta[0], self.beta[1] + rhs.beta[1]],
        }
    }
}

impl Sub for FieldState {
    type Output = FieldState;
    fn sub(self, rhs: FieldState) -> FieldState {
        FieldState {
            alpha: [self.alpha[0] - rhs.alpha[0], self.alpha[1] - rhs.alpha[1]],
            beta: [self.beta[0] - rhs.beta[0], self.beta[1] - rhs.beta[1]],
        }
    }
}

impl Mul<f64> for FieldState {
    type Output = FieldState;
    fn mul(self, k: f64) -> FieldState {
        FieldState {
            alpha: [self.alpha[0] * k, self.alpha[1] * k],
            beta: [self.beta[0] * k, self.beta[1] * k],
        }
    }
}

/// Mean-field time derivative of `s` with noise inputs dropped.
pub fn nonlinear_rhs(p: &SystemParams, s: &FieldState) -> Result<FieldState> {
    s.check("state")?;
    Ok(nonlinear_rhs_unchecked(p, s))
}

/// [`nonlinear_rhs`] without the finiteness check, for integrator inner loops.
#[inline]
pub fn nonlinear_rhs_unchecked(p: &SystemParams, s: &FieldState) -> FieldState {
    let sk = p.sqrt_kappa();
    let coupling = p.complex_coupling();
    let decay = Complex64::new(0.5 * p.gamma_m, p.omega_m);
    let hop = I * p.j_m;

    let mut out = FieldState::ZERO;
    for j in 0..2 {
        let a = s.alpha[j];
        let x = 2.0 * s.beta[j].re;
        let detuning = I * (p.delta[j] + coupling * x) - 0.5 * p.kappa;
        out.alpha[j] = detuning * a + sk * (1.0 + 0.5 * p.eta * x) * p.alpha_in;
        // α* − α = −2i Im α
        let dissipative_force = Complex64::new(0.0, -2.0 * a.im) * (p.eta * sk * p.alpha_in);
        out.beta[j] = -decay * s.beta[j]
            + hop * s.beta[1 - j]
            + dissipative_force
            + I * (p.g_m * a.norm_sqr());
    }
    out
}

/// Linear evolution of the fluctuations `d` about the mean-field point
/// `fixed`.
///
/// This is the exact directional derivative of [`nonlinear_rhs`] at `fixed`,
/// so it is also the Jacobian action used by the steady-state solver and the
/// tangent propagation.
pub fn linearized_rhs(p: &SystemParams, fixed: &FieldState, d: &FieldState) -> Result<FieldState> {
    fixed.check("fixed point")?;
    d.check("fluctuation")?;
    Ok(linearized_rhs_unchecked(p, fixed, d))
}

#[inline]
pub fn linearized_rhs_unchecked(p: &SystemParams, fixed: &FieldState, d: &FieldState) -> FieldState {
    let sk = p.sqrt_kappa();
    let coupling = p.complex_coupling();
    let decay = Complex64::new(0.5 * p.gamma_m, p.omega_m);
    let hop = I * p.j_m;

    let mut out = FieldState::ZERO;
    for j in 0..2 {
        let a = fixed.alpha[j];
        let x = 2.0 * fixed.beta[j].re;
        let da = d.alpha[j];
        // δβ + δβ*
        let dx = 2.0 * d.beta[j].re;
        let dressed = I * (p.delta[j] + coupling * x) - 0.5 * p.kappa;
        let displacement_gain = I * a * coupling + 0.5 * p.eta * sk * p.alpha_in;
        out.alpha[j] = dressed * da + displacement_gain * dx;

        let dissipative = Complex64::new(0.0, -2.0 * da.im) * (p.eta * sk * p.alpha_in);
        let radiation = I * p.g_m * (a.conj() * da + a * da.conj());
        out.beta[j] = -decay * d.beta[j] + hop * d.beta[1 - j] + dissipative + radiation;
    }
    out
}

/// Real 8×8 Jacobian of [`nonlinear_rhs`] at `fixed`, column `k` being the
/// response to the `k`-th unit vector of the real layout.
pub fn jacobian(p: &SystemParams, fixed: &FieldState) -> [[f64; STATE_DIM]; STATE_DIM] {
    let mut cols = [[0.0; STATE_DIM]; STATE_DIM];
    for (k, col) in cols.iter_mut().enumerate() {
        *col = linearized_rhs_unchecked(p, fixed, &FieldState::unit(k)).to_real();
    }
    // transpose to row-major
    let mut rows = [[0.0; STATE_DIM]; STATE_DIM];
    for (r, row) in rows.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = cols[c][r];
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_state_is_fixed_point_without_drive() {
        let p = SystemParams::reference();
        let d = nonlinear_rhs(&p, &FieldState::ZERO).unwrap();
        assert_eq!(d, FieldState::ZERO);
    }

    #[test]
    fn decoupled_linear_decay() {
        let p = SystemParams {
            delta: [1.0, -1.0],
            g_m: 0.0,
            eta: 0.0,
            kappa: 0.073,
            gamma_m: 1e-5,
            j_m: 0.0,
            alpha_in: 0.0,
            omega_m: 1.0,
        };
        let s = FieldState::new([c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0); 2]);
        let d = nonlinear_rhs(&p, &s).unwrap();
        assert!((d.alpha[0] - c(-0.0365, 1.0)).norm() < 1e-15);
        assert_eq!(d.alpha[1], c(0.0, 0.0));
        assert_eq!(d.beta, [c(0.0, 0.0); 2]);
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let p = SystemParams::reference();
        let mut s = FieldState::ZERO;
        s.beta[1] = c(f64::NAN, 0.0);
        assert!(matches!(nonlinear_rhs(&p, &s), Err(Error::InvalidState(_))));
        assert!(matches!(linearized_rhs(&p, &FieldState::ZERO, &s), Err(Error::InvalidState(_))));
    }

    #[test]
    fn linearized_of_zero_is_zero() {
        let p = SystemParams::reference().with_alpha_in(20.0);
        let fixed = FieldState::new([c(1.0, 2.0), c(-0.5, 3.0)], [c(0.1, 0.2), c(0.3, -0.1)]);
        assert_eq!(linearized_rhs(&p, &fixed, &FieldState::ZERO).unwrap(), FieldState::ZERO);
    }

    #[test]
    fn real_layout_round_trip() {
        let s = FieldState::new([c(1.0, 2.0), c(3.0, 4.0)], [c(5.0, 6.0), c(7.0, 8.0)]);
        assert_eq!(s.to_real(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(FieldState::from_real(&s.to_real()), s);
    }

    #[test]
    fn validation_rejects_bad_params() {
        let good = SystemParams::reference();
        assert!(good.validate().is_ok());
        let mut p = good;
        p.kappa = 0.0;
        assert!(p.validate().is_err());
        let mut p = good;
        p.omega_m = 2.0;
        assert!(p.validate().is_err());
        let mut p = good;
        p.alpha_in = -1.0;
        assert!(p.validate().is_err());
        let mut p = good;
        p.j_m = f64::INFINITY;
        assert!(p.validate().is_err());
    }

    #[test]
    fn exchange_symmetry_of_rhs_is_exact() {
        let p = SystemParams::reference().with_alpha_in(37.0);
        let s = FieldState::new([c(1.5, -2.0), c(0.25, 3.5)], [c(0.01, -0.2), c(-0.4, 0.05)]);
        let direct = nonlinear_rhs(&p, &s).unwrap();
        let mirrored = nonlinear_rhs(&p.swapped(), &s.swapped()).unwrap();
        assert_eq!(direct.swapped(), mirrored);
    }
}
