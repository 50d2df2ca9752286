#![allow(dead_code)]

use ftm_core::central::HomotheticSpec;
use ftm_core::{Configuration, MassSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MU0_TWO_BODY: f64 = 1.470_841_376_716_440_0;
pub const ACTION_1_8: f64 = 2.884_499_140_614_816_8;

pub fn two_body() -> MassSystem<f64> {
    MassSystem::equal(2, 2).unwrap()
}

/// Unit masses at `(+-2^(-1/2), 0)`: `I = 1`, `U = 2^(-1/2)`.
pub fn two_body_a0() -> Configuration<f64> {
    let s = 0.5f64.sqrt();
    Configuration::from_rows(&[[s, 0.0], [-s, 0.0]]).unwrap()
}

pub fn two_body_spec() -> HomotheticSpec<f64> {
    HomotheticSpec::new(&two_body(), &two_body_a0()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random centered configuration with pairwise separations above `min_sep`.
pub fn random_config(sys: &MassSystem<f64>, rng: &mut ChaCha8Rng, min_sep: f64) -> Configuration<f64> {
    loop {
        let coords: Vec<f64> = (0..sys.n_coords()).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let c = sys.configuration(coords).unwrap();
        if c.min_separation() > min_sep {
            return sys.centered(&c).unwrap();
        }
    }
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
