//! Shared checks for the integration and acceptance suites.
#![allow(dead_code)]

use std::path::Path;

use epom::cli::{run_config, Command, RunConfig};
use epom::dynamics::{integrate, IntegratorConfig, Method};
use epom::model::{jacobian, nonlinear_rhs, STATE_DIM};
use epom::spectrum::{effective_hamiltonian, eigenvalues, EffectiveParams};
use epom::steady::solve_steady;
use epom::{FieldState, SystemParams};
use nalgebra::{Complex, Matrix2};
use num_complex::Complex64;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

pub const G_M: f64 = 1.076e-4;

pub fn fig2() -> SystemParams {
    SystemParams::reference()
}

pub fn effective(omega: [f64; 2], gamma: [f64; 2]) -> EffectiveParams {
    EffectiveParams {
        gamma_eff: gamma,
        omega_eff: omega,
        gamma_eff_imag: [0.0; 2],
        omega_eff_imag: [0.0; 2],
        optical_damping: 0.0,
        coupling: Complex64::new(0.0, 0.0),
    }
}

/// Effective rates spanning both PT phases around the reference scales.
pub fn effective_strategy() -> impl Strategy<Value = (EffectiveParams, f64)> {
    (0.5..1.5f64, -2e-3..2e-3f64, -2e-3..2e-3f64, -2e-3..2e-3f64, 1e-5..1e-3f64)
        .prop_map(|(w, dw, g1, g2, j)| (effective([w + dw, w - dw], [g1, g2]), j))
}

/// Draws `n` deterministic samples from `strategy`.
pub fn draws<S: Strategy>(strategy: S, n: usize) -> Vec<S::Value> {
    let mut runner = TestRunner::deterministic();
    (0..n).map(|_| strategy.new_tree(&mut runner).unwrap().current()).collect()
}

/// Eigenvalues from nalgebra's complex Schur decomposition.
pub fn generic_eigenvalues(h: &[[Complex64; 2]; 2]) -> [Complex64; 2] {
    let c = |z: Complex64| Complex::new(z.re, z.im);
    let m = Matrix2::new(c(h[0][0]), c(h[0][1]), c(h[1][0]), c(h[1][1]));
    let ev = m.schur().eigenvalues().expect("complex Schur always yields eigenvalues");
    [Complex64::new(ev[0].re, ev[0].im), Complex64::new(ev[1].re, ev[1].im)]
}

pub struct EigenErrors {
    pub closed_vs_generic: f64,
    pub trace: f64,
    pub sigma_squared: f64,
}

/// Errors of the closed-form eigenvalues against a generic solver and the
/// trace and `σ² = 4(tr² − 4 det)` identities, relative to the matrix scale.
pub fn eigen_errors(ep: &EffectiveParams, j: f64) -> EigenErrors {
    let h = effective_hamiltonian(ep, j);
    let eig = eigenvalues(ep, j);
    let generic = generic_eigenvalues(&h);
    let pair = [eig.lambda_plus, eig.lambda_minus];
    let direct = (pair[0] - generic[0]).norm().max((pair[1] - generic[1]).norm());
    let crossed = (pair[0] - generic[1]).norm().max((pair[1] - generic[0]).norm());
    let scale = h.iter().flatten().fold(1.0f64, |m, z| m.max(z.norm()));
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let sigma2_expected = 4.0 * (tr * tr - 4.0 * det);
    EigenErrors {
        closed_vs_generic: direct.min(crossed) / scale,
        trace: (pair[0] + pair[1] - tr).norm() / scale,
        // measured against the size of the terms that cancel near the EP
        sigma_squared: (eig.sigma * eig.sigma - sigma2_expected).norm() / (4.0 * (tr.norm_sqr() + 4.0 * det.norm())),
    }
}

/// Largest deviation between the analytic Jacobian and a central finite
/// difference of the nonlinear right-hand side, relative to the largest
/// Jacobian entry.
pub fn jacobian_fd_error(p: &SystemParams, at: &FieldState) -> f64 {
    let exact = jacobian(p, at);
    let y0 = at.to_real();
    let mut worst: f64 = 0.0;
    let scale = exact.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..STATE_DIM {
        let h = 1e-6 * y0[k].abs().max(1.0);
        let mut yp = y0;
        let mut ym = y0;
        yp[k] += h;
        ym[k] -= h;
        let fp = nonlinear_rhs(p, &FieldState::from_real(&yp)).unwrap().to_real();
        let fm = nonlinear_rhs(p, &FieldState::from_real(&ym)).unwrap().to_real();
        for r in 0..STATE_DIM {
            let fd = (fp[r] - fm[r]) / (2.0 * h);
            worst = worst.max((fd - exact[r][k]).abs());
        }
    }
    worst / scale
}

/// Steady state of `p`, panicking if the solver fails.
pub fn steady_state(p: &SystemParams) -> FieldState {
    solve_steady(p, None).unwrap().state()
}

/// `|y_h − y_{h/2}| / |y_{h/2} − y_{h/4}|` for fixed-step RK4 over `t_end`.
pub fn rk4_self_convergence(p: &SystemParams, t_end: f64, h: f64) -> f64 {
    let end = |dt: f64| {
        let cfg = IntegratorConfig { method: Method::FixedRk4, dt, t_end, sample_stride: t_end, ..IntegratorConfig::default() };
        *integrate(p, &FieldState::ZERO, &cfg).unwrap().states.last().unwrap()
    };
    let (a, b, c) = (end(h), end(h / 2.0), end(h / 4.0));
    (a - b).norm() / (b - c).norm()
}

/// A small bifurcation configuration that runs in well under a second.
pub fn small_bifurcation_config() -> RunConfig {
    let text = r#"{
        "params": {"delta": [1, -1], "g_m": 1.076e-4, "eta": 0, "kappa": 0.073,
                   "gamma_m": 1e-2, "j_m": 4e-4, "alpha_in": 20},
        "integrator": {"t_end": 2000, "sample_stride": 0.5},
        "bifurcation": {"eta_grid": [0, 0.5, 1],
                        "options": {"lyapunov": {"n_renorms": 300}}}
    }"#;
    RunConfig::from_json(text).unwrap()
}

/// Runs `command` twice, on one and on two worker threads, and reports
/// whether every CSV came out byte-identical.
pub fn rerun_identical(cfg: &RunConfig, command: Command) -> bool {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path, threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_config(command, cfg, dir))
            .unwrap()
    };
    let first = run(a.path(), 1);
    run(b.path(), 2);
    first.files.iter().filter(|f| f.ends_with(".csv")).all(|f| {
        std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap()
    })
}
