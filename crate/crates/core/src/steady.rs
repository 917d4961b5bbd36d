//! Time-independent mean-field solutions and the sextic amplitude polynomial.
//!
//! The solver works directly on the coupled algebraic steady-state equations
//! with a damped Newton iteration. The sextic in `|ᾱ_j|` is transcribed
//! coefficient by coefficient and only used as a cross-check.

use log::debug;
use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{jacobian, nonlinear_rhs_unchecked, FieldState, SystemParams, STATE_DIM};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Relative step-norm tolerance.
    pub step_tol: f64,
    /// Max-norm residual a solution must reach to be reported as converged.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            step_tol: 1e-12,
            residual_tol: 1e-10,
            max_iter: 200,
            max_halvings: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub alpha_bar: [Complex64; 2],
    pub beta_bar: [Complex64; 2],
    /// Max-norm of the mean-field right-hand side at the solution.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SteadyState {
    pub fn state(&self) -> FieldState {
        FieldState::new(self.alpha_bar, self.beta_bar)
    }

    /// Returns `self` if converged, otherwise a [`Error::NotConverged`].
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged(format!(
                "residual {:e} after {} iterations",
                self.residual, self.iterations
            )))
        }
    }
}

/// Closed-form cavity amplitudes of the decoupled problem (`η = g = 0`).
pub fn decoupled_guess(p: &SystemParams) -> FieldState {
    let sk = p.kappa.sqrt();
    let mut s = FieldState::ZERO;
    for j in 0..2 {
        s.alpha[j] = -(sk * p.alpha_in) / (I * p.delta[j] - 0.5 * p.kappa);
    }
    s
}

/// Mechanical amplitudes that zero the resonator equations for given cavity
/// amplitudes. The resonator equations are linear in `β`, so this is an
/// exact 2×2 solve.
pub fn mechanical_response(p: &SystemParams, alpha: &[Complex64; 2]) -> Result<[Complex64; 2]> {
    let a = Complex64::new(0.5 * p.gamma_m, p.omega_m);
    let hop = I * p.j_m;
    let force = |j: usize| {
        let al: Complex64 = alpha[j];
        Complex64::new(0.0, -2.0 * al.im) * (p.eta * p.kappa.sqrt() * p.alpha_in)
            + I * (p.g_m * al.norm_sqr())
    };
    // a β_j − iJ β_{3−j} = f_j
    let det = a * a + p.j_m * p.j_m;
    if det.norm() < 1e-300 {
        return Err(Error::Domain(
            "mechanical steady-state system is singular (gamma_m = 0 and J_m = omega_m)".into(),
        ));
    }
    let (f1, f2) = (force(0), force(1));
    Ok([(a * f1 + hop * f2) / det, (a * f2 + hop * f1) / det])
}

fn residual_of(p: &SystemParams, s: &FieldState) -> f64 {
    nonlinear_rhs_unchecked(p, s).max_abs()
}

/// Solves the steady-state equations by damped Newton iteration.
///
/// Non-convergence is reported through `converged = false`, never silently.
pub fn solve_steady(p: &SystemParams, guess: Option<&FieldState>) -> Result<SteadyState> {
    solve_steady_with(p, guess, &NewtonConfig::default())
}

pub fn solve_steady_with(
    p: &SystemParams,
    guess: Option<&FieldState>,
    cfg: &NewtonConfig,
) -> Result<SteadyState> {
    p.validate()?;
    if p.alpha_in == 0.0 {
        return Ok(SteadyState {
            alpha_bar: [Complex64::new(0.0, 0.0); 2],
            beta_bar: [Complex64::new(0.0, 0.0); 2],
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let mut s = match guess {
        Some(g) if g.is_finite() => *g,
        Some(_) => return Err(Error::InvalidState("guess has non-finite components".into())),
        None => decoupled_guess(p),
    };
    s.beta = mechanical_response(p, &s.alpha)?;
    let mut res = residual_of(p, &s);
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        if res == 0.0 {
            break;
        }
        iterations += 1;
        let rows = jacobian(p, &s);
        let jac = SMatrix::<f64, STATE_DIM, STATE_DIM>::from_fn(|r, c| rows[r][c]);
        let f = SVector::<f64, STATE_DIM>::from(nonlinear_rhs_unchecked(p, &s).to_real());
        let Some(step) = jac.lu().solve(&(-f)) else {
            debug!("singular Jacobian at iteration {iterations}");
            break;
        };
        let step_state = FieldState::from_real(&step.into());

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let mut trial = s + step_state * lambda;
            trial.beta = mechanical_response(p, &trial.alpha)?;
            let trial_res = residual_of(p, &trial);
            if trial_res.is_finite() && trial_res <= res {
                accepted = Some((trial, trial_res));
                break;
            }
            lambda *= 0.5;
        }
        let Some((next, next_res)) = accepted else {
            debug!("line search stalled at residual {res:e}");
            break;
        };
        let step_norm = (next - s).norm();
        s = next;
        res = next_res;
        if step_norm <= cfg.step_tol * (1.0 + s.norm()) {
            break;
        }
    }

    let converged = res <= cfg.residual_tol;
    if !converged {
        debug!("steady state not converged: residual {res:e} after {iterations} iterations");
    }
    Ok(SteadyState {
        alpha_bar: s.alpha,
        beta_bar: s.beta,
        residual: res,
        iterations,
        converged,
    })
}

/// Steady states along an ascending drive ramp, each seeded from the
/// previous one so the branch connected to the undriven state is followed.
pub fn steady_ramp(template: &SystemParams, alpha_grid: &[f64]) -> Result<Vec<SteadyState>> {
    let mut out = Vec::with_capacity(alpha_grid.len());
    let mut seed: Option<FieldState> = None;
    for &a in alpha_grid {
        let p = template.with_alpha_in(a);
        let mut ss = solve_steady(&p, seed.as_ref())?;
        if !ss.converged && seed.is_some() {
            ss = solve_steady(&p, None)?;
        }
        if ss.converged {
            seed = Some(ss.state());
        }
        out.push(ss);
    }
    Ok(out)
}

/// Coefficients of the sextic in `u = |ᾱ_j|`, transcribed term by term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SexticCoefficients {
    /// Monic coefficients `a_k = b_k / c`; the polynomial is
    /// `u⁶ + a₀u⁵ + a₁u⁴ + a₂u³ + a₃u² + a₄u + a₅`.
    pub a: [f64; 6],
    pub b: [f64; 6],
    pub c: f64,
    pub omega: f64,
}

impl SexticCoefficients {
    /// Coefficients in descending powers, leading 1 included.
    pub fn monic(&self) -> [f64; 7] {
        let mut out = [1.0; 7];
        out[1..].copy_from_slice(&self.a);
        out
    }

    pub fn eval(&self, u: Complex64) -> Complex64 {
        self.monic().iter().fold(Complex64::new(0.0, 0.0), |acc, &k| acc * u + k)
    }

    pub fn scale(&self) -> f64 {
        self.a.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Sextic coefficients for cavity `j` (0 or 1), using that cavity's
/// detuning.
pub fn sextic_coefficients(p: &SystemParams, j: usize) -> Result<SexticCoefficients> {
    if p.g_m <= 0.0 {
        return Err(Error::Domain("sextic requires g_m > 0 (leading coefficient vanishes)".into()));
    }
    let (w, jm, gm) = (p.omega_m, p.j_m, p.gamma_m);
    let omega = (w * w - jm * jm) * (w + jm) / ((jm * jm - w * w).powi(2) + w * gm);
    let (g, eta, kappa, ain, delta) = (p.g_m, p.eta, p.kappa, p.alpha_in, p.delta[j]);
    let sk = kappa.sqrt();
    let ek2 = eta * eta * kappa * kappa + 4.0;
    let lin = 4.0 * delta + eta * kappa * kappa;

    let b0 = -4.0 * g * omega * omega * eta * sk * ain * ek2;
    let b1 = 4.0 * omega * omega * eta * eta * kappa * ain * ek2 - kappa * (g * omega * eta * ain).powi(2)
        + g * omega * lin;
    let b2 = 4.0 * omega * omega * g * (eta * ain).powi(3) * kappa * sk - 2.0 * omega * sk * ain * lin;
    let b3 = 2.0 * omega * eta * kappa * g * ain * ain - (2.0 * omega * kappa).powi(2) * (eta * ain).powi(4)
        + delta * delta
        + kappa * kappa / 4.0;
    let b4 = -4.0 * eta * kappa * ain.powi(3);
    let b5 = -kappa * ain;
    let c = (g * omega).powi(2) * (eta * eta * kappa * kappa + 4.0);
    if c == 0.0 || !c.is_finite() {
        return Err(Error::Domain(format!("degenerate sextic leading coefficient c = {c}")));
    }
    let b = [b0, b1, b2, b3, b4, b5];
    Ok(SexticCoefficients {
        a: b.map(|v| v / c),
        b,
        c,
        omega,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyRoot {
    pub value: Complex64,
    /// Real and positive, so admissible as an amplitude `|ᾱ|`.
    pub physical: bool,
}

/// All roots of a monic polynomial given in descending powers (leading 1
/// omitted), from the eigenvalues of its companion matrix followed by a
/// couple of Newton polishing steps.
pub fn monic_roots(tail: &[f64]) -> Vec<Complex64> {
    let n = tail.len();
    if n == 0 {
        return Vec::new();
    }
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut v = Complex64::new(1.0, 0.0);
        let mut dv = Complex64::new(0.0, 0.0);
        for &k in tail {
            dv = dv * z + v;
            v = v * z + k;
        }
        (v, dv)
    };
    let scale = tail.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    // Cyclic companion matrices (e.g. zⁿ − 1) stall unshifted QR, so fall
    // back to companion matrices of the shifted polynomial p(z + s).
    let shifts = [0.0, 0.1, -0.37, 1.3];
    let raw = shifts
        .iter()
        .find_map(|&s| {
            let shifted = taylor_shift(tail, s * scale.powf(1.0 / n as f64));
            companion_eigenvalues(&shifted)
                .map(|roots| roots.into_iter().map(|z| z + s * scale.powf(1.0 / n as f64)).collect::<Vec<_>>())
        })
        .unwrap_or_default();
    raw.into_iter()
        .map(|z0| {
            let mut z = z0;
            for _ in 0..3 {
                let (v, dv) = eval(z);
                if dv.norm() == 0.0 {
                    break;
                }
                let next = z - v / dv;
                if eval(next).0.norm() < v.norm() {
                    z = next;
                } else {
                    break;
                }
            }
            z
        })
        .collect()
}

fn companion_eigenvalues(tail: &[f64]) -> Option<Vec<Complex64>> {
    let n = tail.len();
    let companion = nalgebra::DMatrix::<f64>::from_fn(n, n, |r, c| {
        if r == 0 {
            -tail[c]
        } else if r == c + 1 {
            1.0
        } else {
            0.0
        }
    });
    let schur = nalgebra::linalg::Schur::try_new(companion, f64::EPSILON, 500)?;
    Some(schur.complex_eigenvalues().iter().copied().collect())
}

/// Coefficients (descending, monic, leading 1 omitted) of `p(z + s)`.
fn taylor_shift(tail: &[f64], s: f64) -> Vec<f64> {
    let mut c: Vec<f64> = std::iter::once(1.0).chain(tail.iter().copied()).collect();
    let n = c.len() - 1;
    // repeated synthetic division by (z − s)
    for k in 0..n {
        for i in 1..=(n - k) {
            c[i] += s * c[i - 1];
        }
    }
    c[1..].to_vec()
}

pub fn sextic_roots(c: &SexticCoefficients) -> Vec<PolyRoot> {
    monic_roots(&c.a)
        .into_iter()
        .map(|value| PolyRoot {
            value,
            physical: value.im.abs() < 1e-8 && value.re > 0.0,
        })
        .collect()
}

/// Agreement report between the Newton solution and the sextic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SexticCrossCheck {
    pub cavity: usize,
    pub amplitude: f64,
    /// `|P(|ᾱ_j|)| / scale`.
    pub relative_residual: f64,
    /// Distance from `|ᾱ_j|` to the nearest physical sextic root, if any.
    pub nearest_physical_root: Option<f64>,
}

pub fn sextic_cross_check(p: &SystemParams, ss: &SteadyState, j: usize) -> Result<SexticCrossCheck> {
    let coeffs = sextic_coefficients(p, j)?;
    let u = ss.alpha_bar[j].norm();
    let relative_residual = coeffs.eval(Complex64::new(u, 0.0)).norm() / coeffs.scale();
    let nearest_physical_root = sextic_roots(&coeffs)
        .iter()
        .filter(|r| r.physical)
        .map(|r| r.value.re)
        .min_by(|a, b| (a - u).abs().total_cmp(&(b - u).abs()));
    let check = SexticCrossCheck {
        cavity: j,
        amplitude: u,
        relative_residual,
        nearest_physical_root,
    };
    log::info!(
        "sextic cross-check cavity {}: |alpha|={:.6e}, rel. residual {:.3e}, nearest physical root {:?}",
        j + 1,
        u,
        relative_residual,
        nearest_physical_root
    );
    Ok(check)
}
