//! Time integration of the mean-field equations.

pub mod rk;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{nonlinear_rhs_unchecked, FieldState, SystemParams, STATE_DIM};
use rk::{AdaptiveSettings, Dopri5};

const LOCAL_TOL_FACTOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FixedRk4,
    AdaptiveRk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step for the fixed-step method; rounded down so that it divides
    /// `sample_stride` exactly.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step the adaptive controller may take.
    pub max_step: f64,
    /// The adaptive controller fails rather than step below this.
    pub min_step: f64,
    pub t_end: f64,
    pub sample_stride: f64,
    /// Leading fraction of the record treated as transient by analyses.
    pub transient_fraction: f64,
    /// Integration fails once any state component exceeds this magnitude.
    pub divergence_bound: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::FixedRk4,
            dt: 0.05,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 0.1,
            min_step: 1e-7,
            t_end: 2e5,
            sample_stride: 1.0,
            transient_fraction: 0.5,
            divergence_bound: 1e12,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("integrator.dt must be > 0");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("integrator tolerances must be > 0");
        }
        if !(self.max_step > 0.0) {
            return bad("integrator.max_step must be > 0");
        }
        if !(self.min_step >= 0.0 && self.min_step < self.max_step) {
            return bad("integrator.min_step must be in [0, max_step)");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("integrator.t_end must be > 0");
        }
        if !(self.sample_stride > 0.0 && self.sample_stride <= self.t_end) {
            return bad("integrator.sample_stride must be in (0, t_end]");
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return bad("integrator.transient_fraction must be in [0, 1)");
        }
        if !(self.divergence_bound > 0.0) {
            return bad("integrator.divergence_bound must be > 0");
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.t_end / self.sample_stride + 1e-9).floor() as usize + 1
    }

    /// Index of the first sample kept after dropping the transient.
    pub fn transient_cut(&self) -> usize {
        (self.transient_fraction * (self.samples() - 1) as f64).ceil() as usize
    }

    /// Step-controller settings. The configured tolerances are targets for
    /// the accumulated error over runs of ~10³ time units, so the per-step
    /// tolerance is two decades tighter.
    pub(crate) fn adaptive(&self) -> AdaptiveSettings {
        AdaptiveSettings {
            rel_tol: LOCAL_TOL_FACTOR * self.rel_tol,
            abs_tol: LOCAL_TOL_FACTOR * self.abs_tol,
            max_step: self.max_step,
            min_step: self.min_step,
            safety: 0.9,
            bound: self.divergence_bound,
        }
    }
}

/// Uniformly sampled trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub states: Vec<FieldState>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn stride(&self) -> Option<f64> {
        (self.t.len() >= 2).then(|| self.t[1] - self.t[0])
    }

    pub fn x(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.x(j)).collect()
    }

    pub fn photons(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.photons(j)).collect()
    }

    /// The record with its leading `fraction` dropped.
    pub fn post_transient(&self, fraction: f64) -> TimeSeries {
        let cut = if self.t.len() < 2 {
            0
        } else {
            (fraction * (self.t.len() - 1) as f64).ceil() as usize
        };
        TimeSeries {
            t: self.t[cut..].to_vec(),
            states: self.states[cut..].to_vec(),
        }
    }
}

pub(crate) fn rhs(p: &SystemParams) -> impl Fn(&[f64; STATE_DIM]) -> [f64; STATE_DIM] + '_ {
    move |y| nonlinear_rhs_unchecked(p, &FieldState::from_real(y)).to_real()
}

/// Integrates from `s0` and feeds every output sample `(index, t, state)` to
/// `observe`, without storing the trajectory.
pub fn integrate_observed<O>(p: &SystemParams, s0: &FieldState, cfg: &IntegratorConfig, mut observe: O) -> Result<()>
where
    O: FnMut(usize, f64, &FieldState),
{
    p.validate()?;
    cfg.validate()?;
    if !s0.is_finite() {
        return Err(Error::InvalidState("initial state has non-finite components".into()));
    }
    let f = rhs(p);
    let n = cfg.samples();
    let stride = cfg.sample_stride;
    observe(0, 0.0, s0);
    match cfg.method {
        Method::FixedRk4 => {
            let sub = rk::substeps(stride, cfg.dt);
            let h = stride / sub as f64;
            let mut y = s0.to_real();
            for k in 1..n {
                for _ in 0..sub {
                    y = rk::rk4_step(&f, &y, h);
                }
                check_bounded(&y, cfg.divergence_bound, (k - 1) as f64 * stride)?;
                observe(k, k as f64 * stride, &FieldState::from_real(&y));
            }
        }
        Method::AdaptiveRk45 => {
            let t_final = (n - 1) as f64 * stride;
            let mut solver = Dopri5::new(&f, 0.0, s0.to_real(), cfg.adaptive());
            let mut k = 1;
            while k < n {
                let step = solver.step(&f, t_final)?;
                while k < n && k as f64 * stride <= step.t1() {
                    let tk = k as f64 * stride;
                    let y = if tk == step.t1() { solver.y } else { step.eval(tk) };
                    observe(k, tk, &FieldState::from_real(&y));
                    k += 1;
                }
            }
        }
    }
    Ok(())
}

/// Integrates from `s0` over `[0, t_end]` on the uniform output grid.
pub fn integrate(p: &SystemParams, s0: &FieldState, cfg: &IntegratorConfig) -> Result<TimeSeries> {
    let n = cfg.samples();
    let mut ts = TimeSeries {
        t: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
    };
    integrate_observed(p, s0, cfg, |_, t, s| {
        ts.t.push(t);
        ts.states.push(*s);
    })?;
    Ok(ts)
}

/// Propagates a real state vector through `duration` with the configured
/// method. Used for tangent/neighbour propagation.
pub fn advance(
    p: &SystemParams,
    y: [f64; STATE_DIM],
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<[f64; STATE_DIM]> {
    let f = rhs(p);
    let out = match cfg.method {
        Method::FixedRk4 => {
            let out = rk::rk4_advance(&f, y, duration, cfg.dt);
            check_bounded(&out, cfg.divergence_bound, 0.0)?;
            out
        }
        Method::AdaptiveRk45 => {
            let mut solver = Dopri5::new(&f, 0.0, y, cfg.adaptive());
            while solver.t < duration {
                solver.step(&f, duration)?;
            }
            solver.y
        }
    };
    Ok(out)
}

pub(crate) fn check_bounded(y: &[f64], bound: f64, t_last_good: f64) -> Result<()> {
    match rk::bound_violation(y, bound) {
        None => Ok(()),
        Some(reason) => Err(Error::IntegrationFailure { t_last_good, reason }),
    }
}

/// Default initial condition: empty cavities and resonators at rest. The
/// drive switched on at `t = 0` excites both resonators.
pub fn default_initial_state() -> FieldState {
    FieldState::ZERO
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeRow {
    pub alpha_in: f64,
    pub photon_mean: [f64; 2],
    pub photon_max: [f64; 2],
    pub x_abs_mean: [f64; 2],
    pub x_abs_max: [f64; 2],
    /// Failure description when the integration at this point failed.
    pub failure: Option<String>,
}

/// Post-transient photon-number and displacement statistics over a drive
/// grid.
pub fn amplitude_scan(
    template: &SystemParams,
    alpha_grid: &[f64],
    s0: &FieldState,
    cfg: &IntegratorConfig,
) -> Result<Vec<AmplitudeRow>> {
    template.validate()?;
    cfg.validate()?;
    check_sorted(alpha_grid, "alpha grid")?;
    let cut = cfg.transient_cut();
    Ok(alpha_grid
        .par_iter()
        .map(|&a| {
            let p = template.with_alpha_in(a);
            let mut n = 0usize;
            let mut row = AmplitudeRow {
                alpha_in: a,
                photon_mean: [0.0; 2],
                photon_max: [0.0; 2],
                x_abs_mean: [0.0; 2],
                x_abs_max: [0.0; 2],
                failure: None,
            };
            let res = integrate_observed(&p, s0, cfg, |k, _, s| {
                if k < cut {
                    return;
                }
                n += 1;
                for j in 0..2 {
                    let ph = s.photons(j);
                    let x = s.x(j).abs();
                    row.photon_mean[j] += ph;
                    row.x_abs_mean[j] += x;
                    row.photon_max[j] = row.photon_max[j].max(ph);
                    row.x_abs_max[j] = row.x_abs_max[j].max(x);
                }
            });
            match res {
                Ok(()) => {
                    for j in 0..2 {
                        row.photon_mean[j] /= n.max(1) as f64;
                        row.x_abs_mean[j] /= n.max(1) as f64;
                    }
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            row
        })
        .collect())
}

/// Drive strength at the onset of amplification: the first grid point whose
/// post-transient `max |x₁|` exceeds `factor` times the median over all
/// earlier (sub-threshold) points.
pub fn instability_threshold(rows: &[AmplitudeRow], factor: f64) -> Option<f64> {
    let mut history: Vec<f64> = Vec::new();
    for row in rows {
        if row.failure.is_some() {
            // a blow-up counts as amplification
            if !history.is_empty() {
                return Some(row.alpha_in);
            }
            continue;
        }
        let x = row.x_abs_max[0];
        if !history.is_empty() && x > factor * median(&history) {
            return Some(row.alpha_in);
        }
        history.push(x);
    }
    None
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub(crate) fn check_sorted(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{what} is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{what} has non-finite entries")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{what} must be strictly ascending")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn decoupled() -> SystemParams {
        SystemParams {
            delta: [1.0, -1.0],
            g_m: 0.0,
            eta: 0.0,
            kappa: 0.073,
            gamma_m: 1.076e-5,
            j_m: 0.0,
            alpha_in: 0.0,
            omega_m: 1.0,
        }
    }

    fn initial() -> FieldState {
        FieldState::new(
            [Complex64::new(1.0, 0.5), Complex64::new(-0.3, 0.8)],
            [Complex64::new(0.2, -0.1), Complex64::new(0.05, 0.4)],
        )
    }

    fn analytic(p: &SystemParams, s0: &FieldState, t: f64) -> FieldState {
        let mut s = *s0;
        for j in 0..2 {
            s.alpha[j] *= (Complex64::new(-0.5 * p.kappa, p.delta[j]) * t).exp();
            s.beta[j] *= (Complex64::new(-0.5 * p.gamma_m, -p.omega_m) * t).exp();
        }
        s
    }

    #[test]
    fn decoupled_system_follows_analytic_solution() {
        let p = decoupled();
        let s0 = initial();
        for method in [Method::FixedRk4, Method::AdaptiveRk45] {
            let cfg = IntegratorConfig {
                method,
                dt: 0.0025,
                t_end: 1e3,
                sample_stride: 1.0,
                ..IntegratorConfig::default()
            };
            let ts = integrate(&p, &s0, &cfg).unwrap();
            assert_eq!(ts.len(), 1001);
            for (t, s) in ts.t.iter().zip(&ts.states) {
                let exact = analytic(&p, &s0, *t);
                let err = (*s - exact).norm();
                assert!(err <= 10.0 * cfg.rel_tol * s0.norm() + 1e-12, "{method:?} t = {t}: {err:e}");
            }
        }
    }

    #[test]
    fn sample_grid_is_strictly_increasing() {
        let cfg = IntegratorConfig { t_end: 10.0, sample_stride: 0.3, ..IntegratorConfig::default() };
        let ts = integrate(&decoupled(), &initial(), &cfg).unwrap();
        assert_eq!(ts.len(), ts.states.len());
        assert!(ts.t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(ts.len(), 34);
    }

    #[test]
    fn fixed_step_is_bit_deterministic() {
        let p = SystemParams::reference().with_alpha_in(20.0);
        let cfg = IntegratorConfig { t_end: 200.0, ..IntegratorConfig::default() };
        let a = integrate(&p, &default_initial_state(), &cfg).unwrap();
        let b = integrate(&p, &default_initial_state(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exchange_symmetry_of_trajectories() {
        let p = SystemParams::reference().with_alpha_in(60.0);
        let cfg = IntegratorConfig { t_end: 100.0, ..IntegratorConfig::default() };
        let s0 = initial();
        let a = integrate(&p, &s0, &cfg).unwrap();
        let b = integrate(&p.swapped(), &s0.swapped(), &cfg).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x.swapped(), *y);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let p = SystemParams::reference();
        let cfg = IntegratorConfig { dt: 0.0, ..IntegratorConfig::default() };
        assert!(integrate(&p, &FieldState::ZERO, &cfg).is_err());
        let cfg = IntegratorConfig { transient_fraction: 1.0, ..IntegratorConfig::default() };
        assert!(integrate(&p, &FieldState::ZERO, &cfg).is_err());
    }

    #[test]
    fn blow_up_reports_last_good_time() {
        // Pure anti-damping grows without bound.
        let mut p = decoupled();
        p.kappa = 1.0;
        let mut s0 = FieldState::ZERO;
        s0.beta[0] = Complex64::new(1e300, 0.0);
        p.gamma_m = 0.0;
        let cfg = IntegratorConfig { t_end: 10.0, dt: 0.5, ..IntegratorConfig::default() };
        // a huge amplitude times the drive-free linear terms still stays
        // finite; make it overflow through the photon term instead
        p.g_m = 1.0;
        s0.alpha[0] = Complex64::new(1e200, 0.0);
        match integrate(&p, &s0, &cfg) {
            Err(Error::IntegrationFailure { t_last_good, .. }) => assert!(t_last_good >= 0.0),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn threshold_detection_on_synthetic_rows() {
        let row = |a: f64, x: f64| AmplitudeRow {
            alpha_in: a,
            photon_mean: [0.0; 2],
            photon_max: [0.0; 2],
            x_abs_mean: [x, 0.0],
            x_abs_max: [x, 0.0],
            failure: None,
        };
        let rows: Vec<_> = (1..=10).map(|k| row(k as f64, if k < 7 { 1.0 } else { 50.0 })).collect();
        assert_eq!(instability_threshold(&rows, 10.0), Some(7.0));
        assert_eq!(instability_threshold(&rows[..5], 10.0), None);
    }
}
