//! Explicit Runge-Kutta kernels on fixed-size real state vectors.
//!
//! Two schemes are provided: the classical fixed-step RK4 and the
//! Dormand-Prince 5(4) embedded pair with PI step-size control and its
//! fourth-order continuous extension.

use crate::error::{Error, Result};

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// One classical RK4 step.
#[inline]
pub fn rk4_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * h, &[(1.0, &k1)]));
    let k3 = f(&axpy(y, 0.5 * h, &[(1.0, &k2)]));
    let k4 = f(&axpy(y, h, &[(1.0, &k3)]));
    axpy(y, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)])
}

fn all_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Describes why `y` is unacceptable: a non-finite entry or one beyond `bound`.
pub fn bound_violation(y: &[f64], bound: f64) -> Option<String> {
    if !y.iter().all(|v| v.is_finite()) {
        return Some("non-finite state".into());
    }
    let m = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (m > bound).then(|| format!("state magnitude {m:e} exceeds divergence bound {bound:e}"))
}

// Dormand-Prince 5(4) tableau. The system is autonomous, so the nodes c_i
// are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub safety: f64,
    /// Largest admissible state component magnitude.
    pub bound: f64,
}

/// Continuous extension of one accepted Dormand-Prince step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        out
    }
}

/// Dormand-Prince integrator state with FSAL derivative caching.
pub struct Dopri5<const N: usize> {
    settings: AdaptiveSettings,
    pub t: f64,
    pub y: [f64; N],
    k1: [f64; N],
    h: f64,
    err_old: f64,
    pub accepted: usize,
    pub rejected: usize,
}

impl<const N: usize> Dopri5<N> {
    pub fn new<F>(f: &F, t0: f64, y0: [f64; N], settings: AdaptiveSettings) -> Self
    where
        F: Fn(&[f64; N]) -> [f64; N],
    {
        let k1 = f(&y0);
        // Step size guess from the scaled norms of the state and slope.
        let scale = |v: f64, y: f64| v / (settings.abs_tol + settings.rel_tol * y.abs());
        let d0 = rms(&y0.map(|v| scale(v, v)));
        let d1 = rms(&std::array::from_fn::<f64, N, _>(|i| scale(k1[i], y0[i])));
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        Self {
            settings,
            t: t0,
            y: y0,
            k1,
            h: h.clamp(settings.min_step, settings.max_step),
            err_old: 1e-4,
            accepted: 0,
            rejected: 0,
        }
    }

    /// Replaces the current state, e.g. after an external renormalization.
    pub fn reset<F>(&mut self, f: &F, y: [f64; N])
    where
        F: Fn(&[f64; N]) -> [f64; N],
    {
        self.k1 = f(&y);
        self.y = y;
    }

    /// Takes one accepted step, not passing `t_limit`, and returns its dense
    /// output.
    pub fn step<F>(&mut self, f: &F, t_limit: f64) -> Result<DenseStep<N>>
    where
        F: Fn(&[f64; N]) -> [f64; N],
    {
        const BETA: f64 = 0.04;
        const EXPO: f64 = 0.2 - BETA * 0.75;
        const FAC_MIN: f64 = 0.2;
        const FAC_MAX: f64 = 10.0;
        let s = self.settings;
        loop {
            let remaining = t_limit - self.t;
            let mut h = self.h.min(s.max_step);
            // stretch a step that would stop just short of the limit
            let last = h >= remaining - 1e-10 * t_limit.abs().max(1.0);
            if last {
                h = remaining;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) || (h < s.min_step && !last) {
                return Err(Error::IntegrationFailure {
                    t_last_good: self.t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
            let y = &self.y;
            let k1 = self.k1;
            let k2 = f(&axpy(y, h, &[(A21, &k1)]));
            let k3 = f(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(&axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(&axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(&axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = axpy(y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(&y_new);

            // max-norm of the scaled local error
            let mut err: f64 = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = s.abs_tol + s.rel_tol * y[i].abs().max(y_new[i].abs());
                err = f64::max(err, (e / sc).abs());
            }
            if !err.is_finite() || !all_finite(&y_new) {
                // Retry with a much smaller step before declaring failure.
                self.h = 0.1 * h;
                self.rejected += 1;
                if self.h <= 1e-14 * self.t.abs().max(1.0) || self.h < s.min_step || !all_finite(&self.y) {
                    return Err(Error::IntegrationFailure {
                        t_last_good: self.t,
                        reason: "non-finite state".into(),
                    });
                }
                continue;
            }

            let fac11 = err.powf(EXPO);
            if err <= 1.0 {
                let fac = (fac11 / self.err_old.powf(BETA) / s.safety).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                self.err_old = err.max(1e-4);
                let mut cont = [[0.0; N]; 5];
                for i in 0..N {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - h * k7[i] - bspl;
                    cont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                if let Some(reason) = bound_violation(&y_new, s.bound) {
                    return Err(Error::IntegrationFailure { t_last_good: self.t, reason });
                }
                let dense = DenseStep { t0: self.t, h, cont };
                self.t = if last { t_limit } else { self.t + h };
                self.y = y_new;
                self.k1 = k7;
                self.accepted += 1;
                // keep the controller's proposal even if this step was clipped
                self.h = if last { self.h } else { h / fac };
                return Ok(dense);
            }
            self.rejected += 1;
            self.h = h / (fac11 / s.safety).min(1.0 / FAC_MIN);
        }
    }
}

fn rms<const N: usize>(v: &[f64; N]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / N as f64).sqrt()
}

/// Advances `y` by `duration` with fixed RK4 steps no longer than `dt`.
pub fn rk4_advance<const N: usize, F>(f: &F, y: [f64; N], duration: f64, dt: f64) -> [f64; N]
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let n = substeps(duration, dt);
    let h = duration / n as f64;
    (0..n).fold(y, |acc, _| rk4_step(f, &acc, h))
}

/// Number of equal substeps of length at most `dt` covering `duration`.
pub fn substeps(duration: f64, dt: f64) -> usize {
    ((duration / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn rk4_is_fourth_order() {
        let exact = [1.0f64.cos(), -1.0f64.sin()];
        let err = |dt: f64| {
            let y = rk4_advance(&oscillator, [1.0, 0.0], 1.0, dt);
            ((y[0] - exact[0]).powi(2) + (y[1] - exact[1]).powi(2)).sqrt()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((14.0..18.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dopri5_meets_tolerance_and_dense_output_is_accurate() {
        let settings = AdaptiveSettings { rel_tol: 1e-10, abs_tol: 1e-12, max_step: 0.5, min_step: 0.0, safety: 0.9, bound: f64::INFINITY };
        let mut solver = Dopri5::new(&oscillator, 0.0, [1.0, 0.0], settings);
        let mut worst: f64 = 0.0;
        while solver.t < 20.0 {
            let step = solver.step(&oscillator, 20.0).unwrap();
            for k in 1..4 {
                let t = step.t0 + step.h * k as f64 / 4.0;
                let y = step.eval(t);
                worst = worst.max((y[0] - t.cos()).abs()).max((y[1] + t.sin()).abs());
            }
        }
        assert_eq!(solver.t, 20.0);
        assert!(worst < 1e-8, "dense output error {worst:e}");
        assert!((solver.y[0] - 20.0f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn substeps_cover_interval() {
        assert_eq!(substeps(1.0, 0.1), 10);
        assert_eq!(substeps(1.0, 0.3), 4);
        assert_eq!(substeps(0.05, 0.1), 1);
    }
}
