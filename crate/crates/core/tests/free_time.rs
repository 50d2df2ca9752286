mod common;

use common::*;
use ftm_core::action::{action, phi_tau, DiscretePath, MinimizeOptions};
use ftm_core::central::{homothetic_action, homothetic_path};
use ftm_core::free_time::{
    minimize_free_time, phi, tau_bracket, verify_free_time_minimizer, CHECK_NO_COLLISION,
    CHECK_ZERO_ENERGY,
};
use ftm_core::{Configuration, Error, MassSystem, ToleranceSet};

fn opts() -> MinimizeOptions<f64> {
    MinimizeOptions {
        restarts: 1,
        ..MinimizeOptions::default()
    }
}

#[test]
fn free_time_recovers_the_homothetic_transfer() {
    let spec = two_body_spec();
    let sys = two_body();
    let res = minimize_free_time(&sys, &spec.position(1.0), &spec.position(8.0), 256, &opts()).unwrap();
    assert!(rel(res.tau_star, 7.0) < 1e-3, "tau* {}", res.tau_star);
    assert!(rel(res.phi_value, ACTION_1_8) < 1e-4, "phi {}", res.phi_value);
    let u_mid = sys.potential(&res.path.nodes()[res.path.len() / 2]).unwrap();
    assert!(res.energy_residual <= 1e-3 * u_mid);
    // free-time optimality over every probe
    for p in &res.probes {
        assert!(res.phi_value <= p.action + 1e-6);
    }
    assert!(res.bracket.t_lo < res.tau_star && res.tau_star < res.bracket.t_hi);
    let m0 = 1.0;
    let d = spec.position(1.0).max_body_distance(&spec.position(8.0));
    assert!(2.0 * res.phi_value * res.tau_star >= m0 * d * d);
}

#[test]
fn free_time_from_the_normal_configuration() {
    let spec = two_body_spec();
    let t0 = spec.time_at_radius(1.0);
    let t1 = 4.0;
    let res = minimize_free_time(&two_body(), &spec.a0, &spec.position(t1), 256, &opts()).unwrap();
    assert!(rel(res.tau_star, t1 - t0) < 1e-3, "tau* {}", res.tau_star);
    let exact = homothetic_action(&spec, t0, t1).unwrap();
    assert!(rel(res.phi_value, exact) < 1e-4, "phi {} vs {exact}", res.phi_value);
}

#[test]
fn zero_energy_on_random_pairs() {
    let sys = MassSystem::new(vec![1.0, 1.5, 0.8], 2).unwrap();
    let mut r = rng(21);
    for _ in 0..5 {
        let x = random_config(&sys, &mut r, 0.5);
        let y = random_config(&sys, &mut r, 0.5);
        let res = minimize_free_time(&sys, &x, &y, 96, &opts()).unwrap();
        assert!(res.energy_residual < 1e-3, "residual {}", res.energy_residual);
    }
}

#[test]
fn phi_scaling_and_triangle_inequality() {
    let sys = MassSystem::new(vec![1.0, 1.5, 0.8], 2).unwrap();
    let mut r = rng(3);
    let x = random_config(&sys, &mut r, 0.5);
    let y = random_config(&sys, &mut r, 0.5);
    let z = random_config(&sys, &mut r, 0.5);
    let n = 96;
    let pxy = phi(&sys, &x, &y, n, &opts()).unwrap();
    for lambda in [0.5f64, 2.0, 4.0] {
        let v = phi(&sys, &x.scaled(lambda), &y.scaled(lambda), n, &opts()).unwrap();
        assert!(rel(v, lambda.sqrt() * pxy) < 1e-3, "lambda {lambda}");
    }
    let pyz = phi(&sys, &y, &z, n, &opts()).unwrap();
    let pxz = phi(&sys, &x, &z, n, &opts()).unwrap();
    let scale = [&x, &y, &z].iter().map(|c| c.max_body_norm()).fold(0.0, f64::max);
    assert!(pxz <= pxy + pyz + 2e-3 * scale);
}

#[test]
fn degenerate_inputs() {
    let sys = two_body();
    let x = two_body_a0();
    assert_eq!(phi(&sys, &x, &x, 64, &opts()).unwrap(), 0.0);
    assert_eq!(
        minimize_free_time(&sys, &x, &x, 64, &opts()).unwrap_err(),
        Error::DegenerateEndpoints
    );
    let sys1 = MassSystem::<f64>::equal(2, 1).unwrap();
    let a = Configuration::from_rows(&[[0.0], [1.0]]).unwrap();
    let b = Configuration::from_rows(&[[0.0], [2.0]]).unwrap();
    assert_eq!(
        minimize_free_time(&sys1, &a, &b, 64, &opts()).unwrap_err(),
        Error::UnsupportedDimension { dim: 1 }
    );
}

#[test]
fn bracket_contains_the_homothetic_time() {
    let spec = two_body_spec();
    let b = tau_bracket(&two_body(), &spec.position(1.0), &spec.position(8.0), ACTION_1_8).unwrap();
    assert!(b.t_lo < 7.0 && 7.0 < b.t_hi && b.t_hi.is_finite());
}

#[test]
fn certificate_on_the_homothetic_path() {
    let sys = two_body();
    let spec = two_body_spec();
    let path = homothetic_path(&spec, 1.0, 8.0, 400).unwrap();
    let tol = ToleranceSet::defaults_for(&sys, &path).unwrap();
    let rep = verify_free_time_minimizer(&sys, &path, &tol).unwrap();
    assert!(rep.passed(), "{rep:?}");

    let lambda = 4.0;
    let scaled = path.rescaled(lambda);
    let rep = verify_free_time_minimizer(&sys, &scaled, &tol.rescaled(lambda)).unwrap();
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn certificate_on_the_discrete_minimizer() {
    let sys = two_body();
    let spec = two_body_spec();
    let res = minimize_free_time(&sys, &spec.position(1.0), &spec.position(8.0), 512, &opts()).unwrap();
    let tol = ToleranceSet::defaults_for(&sys, &res.path).unwrap();
    let rep = verify_free_time_minimizer(&sys, &res.path, &tol).unwrap();
    assert!(rep.passed(), "{rep:?}");
}

#[test]
fn certificate_flags_a_straight_line() {
    let sys = two_body();
    let x = Configuration::from_rows(&[[-1.0, 0.0], [1.0, 0.0]]).unwrap();
    let y = Configuration::from_rows(&[[-1.0, 3.0], [1.0, 3.0]]).unwrap();
    let path = DiscretePath::straight(&x, &y, 2.0, 64).unwrap();
    let tol = ToleranceSet::defaults_for(&sys, &path).unwrap();
    let rep = verify_free_time_minimizer(&sys, &path, &tol).unwrap();
    assert!(!rep.check(CHECK_ZERO_ENERGY).unwrap().passed);
}

#[test]
fn certificate_flags_a_collision() {
    let sys = two_body();
    let spec = two_body_spec();
    // from gamma0(1) back through the total collision at t = 0 and out again
    let path = DiscretePath::sample(-1.0, 1.0, 65, |t| {
        let c = spec.position(t);
        if t < 0.0 {
            c.scaled(-1.0)
        } else {
            c
        }
    })
    .unwrap()
    .reversed();
    let tol = ToleranceSet::defaults_for(&sys, &path).unwrap();
    let rep = verify_free_time_minimizer(&sys, &path, &tol).unwrap();
    assert!(!rep.check(CHECK_NO_COLLISION).unwrap().passed, "{rep:?}");
    assert!(!rep.passed());
}

#[test]
fn homothetic_subarcs_are_fixed_time_minimal() {
    let sys = two_body();
    let spec = two_body_spec();
    for (a, b) in [(1.0, 2.0), (2.0, 5.0), (1.5, 8.0), (3.0, 4.0), (0.5, 1.0)] {
        let exact = homothetic_action(&spec, a, b).unwrap();
        let v = phi_tau(&sys, &spec.position(a), &spec.position(b), b - a, 256, &opts()).unwrap();
        assert!(v >= exact - 1e-3 * exact, "[{a}, {b}]: {v} vs {exact}");
        let p = homothetic_path(&spec, a, b, 256).unwrap();
        assert!(v <= action(&sys, &p).unwrap() + 1e-12);
    }
}
