//! Minimal central configurations and their parabolic homothetic motions.
//!
//! A normal minimal configuration `a0` minimizes `U` on `{I = 1}`. With
//! `U0 = U(a0)` and `mu0 = (9 U0 / 2)^(1/3)` the curve `mu0 t^(2/3) a0` is a
//! zero-energy solution of Newton's equations; along it the action reduces to
//! that of the one-dimensional Kepler Lagrangian `rho'^2 / 2 + U0 / rho`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::action::{DiscretePath, MinimizeOptions};
use crate::configuration::{Configuration, MassSystem};
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct CentralConfigResult<S> {
    /// Normalized configuration: `I(a0) = 1`, `G(a0) = 0`.
    pub a0: Configuration<S>,
    pub u0: S,
    /// Mass norm of the projection of `grad U(a0)` onto the tangent space of
    /// `{I = 1, G = 0}`.
    pub tangent_residual: S,
    /// Mass norm of `grad U(a0) + U0 a0`.
    pub central_residual: S,
    /// False in dimension one, where the minimality theory does not apply.
    pub minimality_supported: bool,
}

/// Data of the parabolic homothetic motion `mu0 t^(2/3) a0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomotheticSpec<S> {
    pub a0: Configuration<S>,
    pub mu0: S,
    pub u0: S,
}

/// Projects `w` onto the tangent space of `{I = 1, G = 0}` at `x`.
fn project_tangent<S: Scalar>(sys: &MassSystem<S>, x: &[S], w: &mut [S]) {
    let d = sys.dim();
    let g = sys.com_coords(w);
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = *wk - g[k % d];
    }
    let radial = sys.inner_coords(x, w) / sys.inner_coords(x, x);
    for (wk, &xk) in w.iter_mut().zip(x) {
        *wk = *wk - radial * xk;
    }
}

/// Centers and rescales to `I = 1`.
fn normalize<S: Scalar>(sys: &MassSystem<S>, x: &mut [S]) {
    let d = sys.dim();
    let g = sys.com_coords(x);
    for (k, xk) in x.iter_mut().enumerate() {
        *xk = *xk - g[k % d];
    }
    let rho = sys.inner_coords(x, x).sqrt();
    x.iter_mut().for_each(|v| *v = *v / rho);
}

struct Descent<S> {
    x: Vec<S>,
    u: S,
    residual: S,
    converged: bool,
}

fn descend<S: Scalar>(sys: &MassSystem<S>, mut x: Vec<S>, opts: &MinimizeOptions<S>) -> Descent<S> {
    let nc = sys.n_coords();
    normalize(sys, &mut x);
    let mut u = sys.potential_coords(&x);
    let mut grad = vec![S::zero(); nc];
    let tangent = |x: &[S], grad: &mut [S]| -> S {
        if sys.accel_coords(x, grad).is_err() {
            return S::infinity();
        }
        project_tangent(sys, x, grad);
        sys.inner_coords(grad, grad).sqrt()
    };
    let mut res = tangent(&x, &mut grad);
    let mut step = S::lit(0.1) / res.max(S::epsilon());
    let mut prev: Option<(Vec<S>, Vec<S>)> = None;
    let mut converged = false;
    for _ in 0..opts.max_iters {
        if res <= opts.grad_tol {
            converged = true;
            break;
        }
        if let Some((px, pg)) = &prev {
            // Barzilai-Borwein step in the mass metric
            let s: Vec<S> = x.iter().zip(px).map(|(&a, &b)| a - b).collect();
            let y: Vec<S> = grad.iter().zip(pg).map(|(&a, &b)| a - b).collect();
            let sy = sys.inner_coords(&s, &y).abs();
            if sy > S::zero() {
                step = sys.inner_coords(&s, &s) / sy;
            }
        }
        let g2 = res * res;
        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..50 {
            let mut cand: Vec<S> = x.iter().zip(&grad).map(|(&a, &g)| a - alpha * g).collect();
            normalize(sys, &mut cand);
            let uc = sys.potential_coords(&cand);
            if uc.is_finite()
                && (uc <= u - S::lit(1e-4) * alpha * g2
                    || uc <= u + S::lit(64.0) * S::epsilon() * u)
            {
                accepted = Some((cand, uc));
                break;
            }
            alpha = alpha * S::lit(0.5);
        }
        let Some((cand, uc)) = accepted else { break };
        let mut new_grad = vec![S::zero(); nc];
        let new_res = tangent(&cand, &mut new_grad);
        prev = Some((std::mem::replace(&mut x, cand), std::mem::replace(&mut grad, new_grad)));
        u = uc;
        res = new_res;
        step = alpha;
    }
    if res <= opts.grad_tol {
        converged = true;
    }
    Descent {
        x,
        u,
        residual: res,
        converged,
    }
}

/// Minimal configuration: best projected-gradient critical point of `U` on
/// `{I = 1, G = 0}` over `opts.restarts + 1` random starts.
pub fn find_minimal_configuration<S: Scalar>(
    sys: &MassSystem<S>,
    seed: u64,
    opts: &MinimizeOptions<S>,
) -> Result<CentralConfigResult<S>> {
    opts.validate()?;
    let nc = sys.n_coords();
    let runs: Vec<Descent<S>> = (0..=opts.restarts)
        .into_par_iter()
        .map(|attempt| {
            let mut rng = seeded(seed, attempt as u64);
            let x0: Vec<S> = (0..nc)
                .map(|_| S::lit(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            descend(sys, x0, opts)
        })
        .collect();
    let best = runs
        .into_iter()
        .filter(|r| r.converged)
        .min_by(|a, b| a.u.partial_cmp(&b.u).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or(Error::NonConvergence {
            iterations: opts.max_iters,
            grad_norm: f64::NAN,
        })?;
    let a0 = sys.configuration(best.x)?;
    let central_residual = central_residual(sys, &a0)?;
    Ok(CentralConfigResult {
        a0,
        u0: best.u,
        tangent_residual: best.residual,
        central_residual,
        minimality_supported: sys.dim() >= 2,
    })
}

/// Mass norm of `grad U(a) + (U(a) / I(a)) a`; zero exactly at central
/// configurations.
pub fn central_residual<S: Scalar>(sys: &MassSystem<S>, a: &Configuration<S>) -> Result<S> {
    let g = sys.grad_potential(a)?;
    let lambda = sys.potential(a)? / sys.moment_of_inertia(a)?;
    sys.mass_norm(&g.axpy(lambda, a))
}

/// `mu0 = (9 U0 / 2)^(1/3)`.
pub fn homothetic_mu<S: Scalar>(u0: S) -> Result<S> {
    if !(u0 > S::zero() && u0.is_finite()) {
        return Err(Error::InvalidArgument(format!("U0 must be positive, got {u0}")));
    }
    Ok((S::lit(4.5) * u0).cbrt())
}

impl<S: Scalar> HomotheticSpec<S> {
    /// Spec for a normalized configuration `a0` (`I(a0) = 1` is enforced by
    /// rescaling).
    pub fn new(sys: &MassSystem<S>, a0: &Configuration<S>) -> Result<Self> {
        let p = sys.polar_decompose(a0)?;
        let u0 = sys.potential(&p.u)?;
        let mu0 = homothetic_mu(u0)?;
        Ok(Self { a0: p.u, mu0, u0 })
    }

    pub fn from_minimal(res: &CentralConfigResult<S>) -> Result<Self> {
        Ok(Self {
            a0: res.a0.clone(),
            mu0: homothetic_mu(res.u0)?,
            u0: res.u0,
        })
    }

    /// Position `mu0 t^(2/3) a0`.
    pub fn position(&self, t: S) -> Configuration<S> {
        self.a0.scaled(self.mu0 * t.abs().powf(S::lit(2.0 / 3.0)))
    }

    /// Velocity `(2/3) mu0 t^(-1/3) a0`, `t > 0`.
    pub fn velocity(&self, t: S) -> Configuration<S> {
        self.a0
            .scaled(S::lit(2.0 / 3.0) * self.mu0 * t.powf(S::lit(-1.0 / 3.0)))
    }

    /// Time at which the motion has radius `rho = I^(1/2)`.
    pub fn time_at_radius(&self, rho: S) -> S {
        (rho / self.mu0).powf(S::lit(1.5))
    }
}

/// The homothetic motion sampled on a uniform grid of `[t0, t1]`.
pub fn homothetic_path<S: Scalar>(
    spec: &HomotheticSpec<S>,
    t0: S,
    t1: S,
    n_nodes: usize,
) -> Result<DiscretePath<S>> {
    if !(t0 > S::zero() && t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < t0 < t1, got [{t0}, {t1}]"
        )));
    }
    DiscretePath::sample(t0, t1, n_nodes, |t| spec.position(t))
}

fn homothetic_action_value<S: Scalar>(mu0: S, t0: S, t1: S) -> Result<S> {
    if !(t0 >= S::zero() && t1 >= t0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= t0 <= t1, got [{t0}, {t1}]"
        )));
    }
    Ok(S::lit(4.0 / 3.0) * mu0 * mu0 * (t1.cbrt() - t0.cbrt()))
}

/// Exact action `(4/3) mu0^2 (t1^(1/3) - t0^(1/3))` of the homothetic motion.
pub fn homothetic_action<S: Scalar>(spec: &HomotheticSpec<S>, t0: S, t1: S) -> Result<S> {
    homothetic_action_value(spec.mu0, t0, t1)
}

/// Free-time action of the zero-energy arc of the Kepler Lagrangian
/// `rho'^2 / 2 + U0 / rho` between radii `rho_a < rho_b`.
pub fn kepler_free_time_value<S: Scalar>(u0: S, rho_a: S, rho_b: S) -> Result<S> {
    if !(rho_a >= S::zero() && rho_b > rho_a) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= rho_a < rho_b, got {rho_a}, {rho_b}"
        )));
    }
    let mu0 = homothetic_mu(u0)?;
    let t = |rho: S| (rho / mu0).powf(S::lit(1.5));
    homothetic_action_value(mu0, t(rho_a), t(rho_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mu_examples() {
        assert_relative_eq!(homothetic_mu(2.0f64 / 9.0).unwrap(), 1.0, max_relative = 1e-15);
        // mpmath, 30 digits
        assert_relative_eq!(
            homothetic_mu(0.5f64.sqrt()).unwrap(),
            1.470_841_376_716_440_0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            homothetic_mu(3.0f64).unwrap(),
            2.381_101_577_952_299_2,
            max_relative = 1e-15
        );
        assert!(homothetic_mu(0.0f64).is_err());
        assert!(homothetic_mu(-1.0f64).is_err());
    }

    #[test]
    fn homothetic_action_examples() {
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        let s = 0.5f64.sqrt();
        let a0 = Configuration::from_rows(&[[s, 0.0], [-s, 0.0]]).unwrap();
        let spec = HomotheticSpec::new(&sys, &a0).unwrap();
        assert_eq!(homothetic_action(&spec, 2.0, 2.0).unwrap(), 0.0);
        assert_relative_eq!(
            homothetic_action(&spec, 1.0, 8.0).unwrap(),
            2.884_499_140_614_816_8,
            max_relative = 1e-14
        );
        assert!((spec.mu0.powi(3) - 4.5 * spec.u0).abs() <= 1e-10);
    }

    #[test]
    fn homothetic_samples() {
        let sys = MassSystem::<f64>::equal(3, 2).unwrap();
        let h = 3f64.sqrt() / 2.0;
        let tri = Configuration::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]]).unwrap();
        let spec = HomotheticSpec::new(&sys, &sys.centered(&tri).unwrap()).unwrap();
        let p = homothetic_path(&spec, 0.5, 4.0, 50).unwrap();
        let at_one = spec.position(1.0);
        for (a, b) in at_one.coords().iter().zip(spec.a0.scaled(spec.mu0).coords()) {
            assert_eq!(a, b);
        }
        for (t, x) in p.times().iter().zip(p.nodes()) {
            let i = sys.moment_of_inertia(x).unwrap();
            assert_relative_eq!(i, spec.mu0.powi(2) * t.powf(4.0 / 3.0), max_relative = 1e-12);
        }
        assert!(homothetic_path(&spec, 0.0, 1.0, 10).is_err());
    }

    #[test]
    fn kepler_value_matches_times() {
        let u0 = 0.5f64.sqrt();
        let mu0 = homothetic_mu(u0).unwrap();
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        let s = 0.5f64.sqrt();
        let spec =
            HomotheticSpec::new(&sys, &Configuration::from_rows(&[[s, 0.0], [-s, 0.0]]).unwrap())
                .unwrap();
        let from_zero = kepler_free_time_value(u0, 0.0, mu0 * 8f64.powf(2.0 / 3.0)).unwrap();
        assert_relative_eq!(from_zero, homothetic_action(&spec, 0.0, 8.0).unwrap(), max_relative = 1e-14);
        let v = kepler_free_time_value(u0, mu0, 4.0 * mu0).unwrap();
        assert_relative_eq!(v, homothetic_action(&spec, 1.0, 8.0).unwrap(), max_relative = 1e-14);
        assert!(kepler_free_time_value(u0, 2.0, 1.0).is_err());
    }
}
