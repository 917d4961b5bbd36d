//! Largest Lyapunov exponent by two-trajectory renormalization.

use serde::{Deserialize, Serialize};

use crate::dynamics::rk::{rk4_advance, Dopri5};
use crate::dynamics::{check_bounded, rhs, IntegratorConfig, Method};
use crate::error::{Error, Result};
use crate::model::{FieldState, SystemParams, STATE_DIM};

const PAIR_DIM: usize = 2 * STATE_DIM;

/// Absolute variation of the trace tail below which an estimate is accepted
/// regardless of its relative variation.
pub const NOISE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovOptions {
    pub renorm_interval: f64,
    pub n_renorms: usize,
    /// Initial separation relative to `max(|s0|, 1)`.
    pub separation: f64,
    /// Number of running estimates kept in the convergence trace.
    pub trace_len: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            renorm_interval: 1.0,
            n_renorms: 10_000,
            separation: 1e-8,
            trace_len: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub lambda_max: f64,
    pub renorm_interval: f64,
    pub n_renorms: usize,
    /// Running estimates at evenly spaced renormalization counts.
    pub convergence_trace: Vec<f64>,
    /// Renormalization count of each trace entry.
    pub trace_counts: Vec<usize>,
    /// Spread (max - min) of the trace over the last decade of
    /// renormalization counts, `[n/10, n]`.
    pub tail_spread: f64,
    /// Tail spread is below 20% of `|lambda_max|` or below [`NOISE_FLOOR`].
    pub converged: bool,
}

pub fn lyapunov_max(p: &SystemParams, s0: &FieldState, cfg: &IntegratorConfig) -> Result<LyapunovEstimate> {
    lyapunov_max_with(p, s0, cfg, &LyapunovOptions::default())
}

/// Follows `s0` and a neighbour displaced by `separation`, rescaling the
/// neighbour back to the initial distance every `renorm_interval` and
/// averaging the logarithmic growth.
pub fn lyapunov_max_with(
    p: &SystemParams,
    s0: &FieldState,
    cfg: &IntegratorConfig,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate> {
    p.validate()?;
    cfg.validate()?;
    if !(opts.renorm_interval > 0.0) || opts.n_renorms == 0 || !(opts.separation > 0.0) || opts.trace_len == 0 {
        return Err(Error::Config("lyapunov options must be positive".into()));
    }
    if !s0.is_finite() {
        return Err(Error::InvalidState("initial state has non-finite components".into()));
    }
    let f1 = rhs(p);
    let f = |y: &[f64; PAIR_DIM]| {
        let a = f1(y[..STATE_DIM].try_into().unwrap());
        let b = f1(y[STATE_DIM..].try_into().unwrap());
        std::array::from_fn(|i| if i < STATE_DIM { a[i] } else { b[i - STATE_DIM] })
    };
    let base = s0.to_real();
    let d0 = opts.separation * s0.norm().max(1.0);
    let dir = d0 / (STATE_DIM as f64).sqrt();
    let mut y: [f64; PAIR_DIM] =
        std::array::from_fn(|i| if i < STATE_DIM { base[i] } else { base[i - STATE_DIM] + dir });

    let tau = opts.renorm_interval;
    let mut solver = match cfg.method {
        Method::AdaptiveRk45 => Some(Dopri5::new(&f, 0.0, y, cfg.adaptive())),
        Method::FixedRk4 => None,
    };
    let every = (opts.n_renorms / opts.trace_len).max(1);
    let mut trace = Vec::with_capacity(opts.trace_len + 1);
    let mut counts = Vec::with_capacity(opts.trace_len + 1);
    let mut log_sum = 0.0;
    for k in 1..=opts.n_renorms {
        let t_next = k as f64 * tau;
        y = match solver.as_mut() {
            Some(s) => {
                while s.t < t_next {
                    s.step(&f, t_next)?;
                }
                s.y
            }
            None => rk4_advance(&f, y, tau, cfg.dt),
        };
        check_bounded(&y, cfg.divergence_bound, t_next - tau)?;
        let d = (0..STATE_DIM).map(|i| (y[STATE_DIM + i] - y[i]).powi(2)).sum::<f64>().sqrt();
        if !(d > 0.0) {
            return Err(Error::IntegrationFailure {
                t_last_good: t_next,
                reason: "trajectories merged to rounding level".into(),
            });
        }
        log_sum += (d / d0).ln();
        for i in 0..STATE_DIM {
            y[STATE_DIM + i] = y[i] + (y[STATE_DIM + i] - y[i]) * d0 / d;
        }
        if let Some(s) = solver.as_mut() {
            s.reset(&f, y);
        }
        if k % every == 0 || k == opts.n_renorms {
            trace.push(log_sum / t_next);
            counts.push(k);
        }
    }
    let lambda_max = log_sum / (opts.n_renorms as f64 * tau);
    let tail = &trace[(trace.len() / 10).saturating_sub(1)..];
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let tail_spread = hi - lo;
    Ok(LyapunovEstimate {
        lambda_max,
        renorm_interval: tau,
        n_renorms: opts.n_renorms,
        convergence_trace: trace,
        trace_counts: counts,
        tail_spread,
        converged: tail_spread < 0.2 * lambda_max.abs() || tail_spread < NOISE_FLOOR,
    })
}
