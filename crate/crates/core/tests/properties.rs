mod common;

use common::*;
use epom::analysis::beats::beat_spectrum;
use epom::analysis::poincare::{diameter, poincare_section, SectionRule};
use epom::dynamics::{integrate, IntegratorConfig, Method, TimeSeries};
use epom::model::{linearized_rhs, nonlinear_rhs};
use epom::spectrum::{eigenvalues, eigenvalues_direct, effective_hamiltonian};
use epom::steady::{monic_roots, solve_steady};
use epom::FieldState;
use num_complex::Complex64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn closed_form_eigenvalues_match_generic_solver((ep, j) in effective_strategy()) {
        let e = eigen_errors(&ep, j);
        prop_assert!(e.closed_vs_generic < 1e-12, "{}", e.closed_vs_generic);
        prop_assert!(e.trace < 1e-12, "{}", e.trace);
        prop_assert!(e.sigma_squared < 1e-10, "{}", e.sigma_squared);
        let d = eigenvalues_direct(&effective_hamiltonian(&ep, j));
        let s = eigenvalues(&ep, j);
        let err = (d[0] - s.lambda_plus).norm().min((d[0] - s.lambda_minus).norm());
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn steady_residual_is_below_tolerance(alpha in 0.0..125.0f64, eta in 0.0..1.0f64) {
        let p = fig2().with_alpha_in(alpha).with_eta(eta * G_M);
        let ss = solve_steady(&p, None).unwrap();
        prop_assert!(ss.converged);
        prop_assert!(ss.residual <= 1e-10, "{}", ss.residual);
        let f = nonlinear_rhs(&p, &ss.state()).unwrap();
        prop_assert!(f.max_abs() <= 1e-10);
    }

    #[test]
    fn linearization_is_linear_in_the_fluctuation(
        alpha in 1.0..60.0f64,
        d in proptest::array::uniform8(-1.0..1.0f64),
        s in -3.0..3.0f64,
    ) {
        let p = fig2().with_alpha_in(alpha);
        let fixed = steady_state(&p);
        let df = FieldState::from_real(&d);
        let a = linearized_rhs(&p, &fixed, &(df * s)).unwrap();
        let b = linearized_rhs(&p, &fixed, &df).unwrap() * s;
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
    }

    #[test]
    fn polynomial_roots_are_recovered(roots in proptest::collection::vec(-50.0..50.0f64, 1..7)) {
        // expand ∏ (z − r) with well-separated real roots
        let mut sorted = roots.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 0.5));
        let mut coeffs = vec![1.0];
        for r in &sorted {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, c) in coeffs.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= r * c;
            }
            coeffs = next;
        }
        let found = monic_roots(&coeffs[1..]);
        prop_assert_eq!(found.len(), sorted.len());
        for r in &sorted {
            let best = found.iter().map(|z| (z - Complex64::new(*r, 0.0)).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6 * r.abs().max(1.0), "root {} missed by {}", r, best);
        }
    }

    #[test]
    fn strobing_a_periodic_signal_gives_one_point(
        period in 3.0..10.0f64,
        a in 0.1..5.0f64,
        phase in 0.0..6.3f64,
    ) {
        let dt = period / 97.3;
        let n = (150.0 * period / dt) as usize;
        let w = 2.0 * std::f64::consts::PI / period;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let states = t.iter().map(|&t| {
            let x1 = a * (w * t + phase).cos() + 0.3 * (3.0 * w * t).sin();
            let x2 = (w * t).sin();
            FieldState::new([Complex64::new(0.0, 0.0); 2], [Complex64::new(0.5 * x1, 0.0), Complex64::new(0.5 * x2, 0.0)])
        }).collect();
        let ts = TimeSeries { t, states };
        let rule = SectionRule::Stroboscopic { period: Some(period), phase: 0.0 };
        let sec = poincare_section(&ts, &rule, 1.0).unwrap();
        prop_assert!(diameter(&sec.points) < 1e-6, "{}", diameter(&sec.points));
    }
}

#[test]
fn analytic_jacobian_matches_finite_differences() {
    for alpha in [5.0, 20.0, 50.0] {
        let p = fig2().with_alpha_in(alpha);
        let err = jacobian_fd_error(&p, &steady_state(&p));
        assert!(err < 1e-4, "alpha {alpha}: {err:e}");
    }
}

#[test]
fn rk4_converges_at_fourth_order() {
    let ratio = rk4_self_convergence(&fig2().with_alpha_in(20.0), 200.0, 0.2);
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn adaptive_and_fixed_step_agree() {
    let p = fig2().with_alpha_in(20.0);
    let base = IntegratorConfig { t_end: 1_000.0, ..IntegratorConfig::default() };
    let fixed = integrate(&p, &FieldState::ZERO, &IntegratorConfig { dt: 0.01, ..base }).unwrap();
    let adaptive = integrate(&p, &FieldState::ZERO, &IntegratorConfig { method: Method::AdaptiveRk45, ..base }).unwrap();
    let scale = fixed.states.iter().fold(0.0f64, |m, s| m.max(s.norm()));
    let worst = fixed.states.iter().zip(&adaptive.states).fold(0.0f64, |m, (a, b)| m.max((*a - *b).norm()));
    assert!(worst < 1e-6 * scale, "{worst:e} vs scale {scale:e}");
}

#[test]
fn long_time_average_approaches_steady_state() {
    // Heavier mechanical damping lets the ring-down finish in a short run.
    let p = epom::SystemParams { gamma_m: 1e-2, ..fig2().with_alpha_in(40.0) };
    let ss = solve_steady(&p, None).unwrap();
    let cfg = IntegratorConfig { t_end: 4_000.0, sample_stride: 0.5, ..IntegratorConfig::default() };
    let ts = integrate(&p, &FieldState::ZERO, &cfg).unwrap().post_transient(0.75);
    for j in 0..2 {
        let n = ts.photons(j);
        let mean = n.iter().sum::<f64>() / n.len() as f64;
        let expected = ss.alpha_bar[j].norm_sqr();
        assert!((mean / expected - 1.0).abs() < 1e-3, "cavity {j}: {mean} vs {expected}");
    }
}

#[test]
fn exchange_symmetry_of_the_equations() {
    let p = fig2().with_alpha_in(30.0);
    let s = FieldState::new(
        [Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.3)],
        [Complex64::new(0.1, -0.2), Complex64::new(0.05, 0.4)],
    );
    let a = nonlinear_rhs(&p.swapped(), &s.swapped()).unwrap();
    let b = nonlinear_rhs(&p, &s).unwrap().swapped();
    assert!((a - b).norm() < 1e-14 * b.norm());
}

#[test]
fn beat_splitting_is_stable_under_record_doubling() {
    let p = fig2().with_alpha_in(20.0).with_eta(G_M);
    let cfg = IntegratorConfig { t_end: 1.5e5, ..IntegratorConfig::default() };
    let ts = integrate(&p, &FieldState::ZERO, &cfg).unwrap();
    let window = |start: usize, len: usize| TimeSeries {
        t: ts.t[start..start + len].to_vec(),
        states: ts.states[start..start + len].to_vec(),
    };
    let short = beat_spectrum(&window(50_000, 1 << 15)).unwrap();
    let long = beat_spectrum(&window(50_000, 1 << 16)).unwrap();
    assert!(short.splitting > 0.0 && long.splitting > 0.0);
    assert!((short.splitting - long.splitting).abs() < long.bin_width.max(short.bin_width), "{short:?} {long:?}");
}

#[test]
fn below_threshold_the_orbit_settles_on_the_fixed_point() {
    let p = epom::SystemParams { gamma_m: 1e-2, ..fig2().with_alpha_in(60.0) };
    let ss = solve_steady(&p, None).unwrap().state();
    let cfg = IntegratorConfig { t_end: 6_000.0, sample_stride: 10.0, ..IntegratorConfig::default() };
    let ts = integrate(&p, &FieldState::ZERO, &cfg).unwrap();
    let last = ts.states.last().unwrap();
    assert!((*last - ss).norm() < 1e-6 * ss.norm(), "{:e}", (*last - ss).norm());
}
