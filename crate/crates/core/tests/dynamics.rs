mod common;

use common::*;
use ftm_core::dynamics::{
    diagnostics, fit_power_law, g_monotonicity, integrate_newton, lagrange_jacobi_residual,
    parabolic_diagnostic, tail_window, SampleGrid,
};
use ftm_core::{Configuration, DiagnosticsSeries, IntegrateOptions, MassSystem, Trajectory};

fn homothetic_run(n: usize) -> (Trajectory<f64>, DiagnosticsSeries<f64>) {
    let sys = two_body();
    let spec = two_body_spec();
    let opts = IntegrateOptions::default().samples(SampleGrid::Log(n));
    let traj = integrate_newton(&sys, &spec.position(1.0), &spec.velocity(1.0), (1.0, 100.0), &opts).unwrap();
    let series = diagnostics(&sys, &traj).unwrap();
    (traj, series)
}

fn circular_run() -> (Trajectory<f64>, DiagnosticsSeries<f64>) {
    let sys = two_body();
    let x = Configuration::from_rows(&[[0.5, 0.0], [-0.5, 0.0]]).unwrap();
    let v = 0.5 * 2f64.sqrt();
    let vel = Configuration::from_rows(&[[0.0, v], [0.0, -v]]).unwrap();
    let period = std::f64::consts::TAU / 2f64.sqrt();
    let opts = IntegrateOptions::default().samples(SampleGrid::Uniform(2001));
    let traj = integrate_newton(&sys, &x, &vel, (0.0, 3.0 * period), &opts).unwrap();
    let series = diagnostics(&sys, &traj).unwrap();
    (traj, series)
}

/// Two-body zero-energy run off the homothetic locus.
fn perturbed_parabolic_run() -> (Trajectory<f64>, DiagnosticsSeries<f64>) {
    let sys = two_body();
    let spec = two_body_spec();
    let x = spec.position(1.0);
    let kick = Configuration::from_rows(&[[0.0, 0.05], [0.0, -0.05]]).unwrap();
    let v = spec.velocity(1.0).axpy(1.0, &kick);
    // back to zero energy
    let v = v.scaled((sys.potential(&x).unwrap() / sys.kinetic(&v).unwrap()).sqrt());
    let opts = IntegrateOptions::default().samples(SampleGrid::Log(2000));
    let traj = integrate_newton(&sys, &x, &v, (1.0, 100.0), &opts).unwrap();
    let series = diagnostics(&sys, &traj).unwrap();
    (traj, series)
}

#[test]
fn homothetic_data_is_tracked() {
    let (traj, _) = homothetic_run(500);
    let spec = two_body_spec();
    assert!(traj.collision.is_none());
    for (&t, x) in traj.times.iter().zip(&traj.positions) {
        let exact = spec.position(t);
        let err = x.sub(&exact).max_body_norm() / exact.max_body_norm();
        assert!(err < 1e-6, "t = {t}: {err}");
    }
    let t0 = two_body().kinetic(&spec.velocity(1.0)).unwrap();
    assert!(traj.max_energy_drift <= 1e-8 * (1.0 + traj.energy0.abs() + t0));
}

#[test]
fn circular_orbit_identities() {
    let (traj, s) = circular_run();
    for p in &traj.positions {
        assert!((p.min_separation() - 1.0).abs() < 1e-6);
    }
    assert!(lagrange_jacobi_residual(&s).unwrap() < 1e-4);
    assert!(s.com_drift.iter().all(|&d| d <= 1e-8));
    let t0 = s.kinetic[0];
    assert!(traj.max_energy_drift <= 1e-8 * (1.0 + traj.energy0.abs() + t0));
    let p = parabolic_diagnostic(&s, 0.25).unwrap();
    assert!(!p.decreasing);
}

#[test]
fn homothetic_diagnostics_closed_forms() {
    let (_, s) = homothetic_run(2000);
    let spec = two_body_spec();
    let mu = spec.mu0;
    let g_exact = 4.0 / 3.0 * mu.powf(1.5);
    for k in 0..s.len() {
        let t = s.times[k];
        assert!(rel(s.inertia[k], mu * mu * t.powf(4.0 / 3.0)) < 1e-6);
        assert!(rel(s.potential[k], spec.u0 / mu * t.powf(-2.0 / 3.0)) < 1e-6);
        assert!(rel(s.g[k], g_exact) < 1e-6);
        assert!(s.energy[k].abs() < 1e-9);
        assert!(s.com_drift[k] <= 1e-8);
    }
    assert!(lagrange_jacobi_residual(&s).unwrap() < 1e-4);
    let g = g_monotonicity(&s, 1e-8);
    assert!(g.is_nondecreasing && g.min_increment.abs() <= 1e-8, "{g:?}");
}

#[test]
fn corrupted_series_is_detected() {
    let (_, mut s) = homothetic_run(2000);
    s.inertia.iter_mut().for_each(|i| *i *= 1.1);
    assert!(lagrange_jacobi_residual(&s).unwrap() > 0.05);
}

#[test]
fn inertia_rate_consistency() {
    let (_, s) = perturbed_parabolic_run();
    for k in 1..s.len() - 1 {
        let fd = (s.inertia[k + 1] - s.inertia[k - 1]) / (s.times[k + 1] - s.times[k - 1]);
        assert!((fd - s.inertia_rate[k]).abs() <= 1e-3 * s.inertia_rate[k].abs());
    }
}

#[test]
fn power_law_fits_on_the_homothetic_run() {
    let (_, s) = homothetic_run(2000);
    let spec = two_body_spec();
    let fi = fit_power_law(&s.times, &s.inertia, (10.0, 100.0)).unwrap();
    let fu = fit_power_law(&s.times, &s.potential, (10.0, 100.0)).unwrap();
    assert!((fi.exponent - 4.0 / 3.0).abs() < 1e-6);
    assert!(rel(fi.coefficient, spec.mu0 * spec.mu0) < 1e-6);
    assert!((fu.exponent + 2.0 / 3.0).abs() < 1e-6);
    assert!(rel(fu.coefficient, spec.u0 / spec.mu0) < 1e-6);
    assert!(rel(fi.coefficient / fu.coefficient, 4.5) < 1e-2);
    assert!(fi.r_squared > 1.0 - 1e-12);
}

#[test]
fn parabolic_diagnostic_on_homothetic_and_hyperbolic_runs() {
    let (_, s) = homothetic_run(2000);
    let spec = two_body_spec();
    let p = parabolic_diagnostic(&s, 0.5).unwrap();
    assert!(p.decreasing);
    let exact = 2.0 / 9.0 * spec.mu0 * spec.mu0 * p.tail_start.powf(-2.0 / 3.0);
    assert!(rel(p.t_tail_max, exact) < 1e-6);

    let sys = two_body();
    let x = two_body_a0();
    let v = two_body_a0().scaled(1.5);
    let h = sys.kinetic(&v).unwrap() - sys.potential(&x).unwrap();
    assert!(h > 0.0);
    let traj = integrate_newton(&sys, &x, &v, (0.0, 200.0), &IntegrateOptions::default()).unwrap();
    let s = diagnostics(&sys, &traj).unwrap();
    let p = parabolic_diagnostic(&s, 0.25).unwrap();
    assert!(p.t_tail_max >= h);
}

#[test]
fn g_increases_and_stays_bounded_off_the_homothetic_locus() {
    let (_, s) = perturbed_parabolic_run();
    assert!(s.energy.iter().all(|h| h.abs() < 1e-9));
    let g = g_monotonicity(&s, 0.0);
    assert!(g.is_nondecreasing && g.min_increment > 0.0, "{g:?}");
    let last = *s.g.last().unwrap();
    let sup = s.g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(sup.is_finite() && (sup - last).abs() <= 0.05 * last.abs());
    for w in s.g.windows(2) {
        assert!(w[1] - w[0] >= -1e-6 * w[0].abs());
    }
}

#[test]
fn pollard_lower_bound_and_coefficients() {
    for (_, s) in [homothetic_run(2000), perturbed_parabolic_run()] {
        let window = tail_window(&s.times);
        let fi = fit_power_law(&s.times, &s.inertia, window).unwrap();
        let fu = fit_power_law(&s.times, &s.potential, window).unwrap();
        let t0 = s.times[0];
        for (&t, &i) in s.times.iter().zip(&s.inertia) {
            if t >= window.0 {
                assert!(i >= 0.9 * fi.coefficient * (t - t0).powf(4.0 / 3.0));
            }
        }
        assert!(rel(fi.coefficient / fu.coefficient, 4.5) < 0.05);
    }
}

#[test]
fn collision_approach_is_flagged() {
    let sys = MassSystem::<f64>::equal(3, 2).unwrap();
    let x = Configuration::from_rows(&[[1.0, 0.0], [-0.5, 0.8], [-0.5, -0.8]]).unwrap();
    let traj = integrate_newton(&sys, &x, &sys.zeros(), (0.0, 50.0), &IntegrateOptions::default()).unwrap();
    let ev = traj.collision.expect("collision");
    assert!(ev.time < 50.0);
    assert!(traj.ensure_complete().is_err());
    assert_eq!(*traj.times.last().unwrap(), ev.time);
}
