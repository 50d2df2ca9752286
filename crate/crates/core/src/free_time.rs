//! Optimization over the transfer time.
//!
//! Along a fixed-time minimizer on `[0, tau]` the derivative of the minimal
//! action with respect to `tau` is minus the mean energy
//! `h(tau) = (K - P) / tau`, where `K` and `P` are the kinetic and potential
//! parts of the action. Free time minimizers are therefore located at zeros
//! of `h`, which we find by bisection inside an a-priori bracket on `tau`.

use rand::Rng;

use crate::action::{
    self, action, action_gradient_norm, action_parts, best_fixed_time, best_on_grid,
    minimize_from, DiscretePath, MinimizeOptions, MinimizeReport,
};
use crate::configuration::{Configuration, MassSystem};
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::Scalar;

const SCAN_POINTS: usize = 8;
const BISECTION_ITERS: usize = 15;
const GOLDEN_ITERS: usize = 40;

/// Bounds `0 < t_lo < t_hi` on the transfer time of any curve whose action is
/// below a given bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauBracket<S> {
    pub t_lo: S,
    pub t_hi: S,
}

impl<S: Scalar> TauBracket<S> {
    pub fn new(t_lo: S, t_hi: S) -> Result<Self> {
        if !(t_lo > S::zero() && t_hi > t_lo && t_hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid tau bracket [{t_lo}, {t_hi}]"
            )));
        }
        Ok(Self { t_lo, t_hi })
    }

    /// `n >= 2` log-spaced points from `t_lo` to `t_hi`.
    pub fn log_grid(&self, n: usize) -> Vec<S> {
        let (a, b) = (self.t_lo.ln(), self.t_hi.ln());
        let step = (b - a) / S::from_usize_lossy(n - 1);
        let mut out: Vec<S> = (0..n)
            .map(|k| (a + step * S::from_usize_lossy(k)).exp())
            .collect();
        out[0] = self.t_lo;
        out[n - 1] = self.t_hi;
        out
    }
}

/// Transfer-time bracket for curves from `x` to `y` with action at most
/// `action_upper_bound`.
///
/// `t_lo = m0 d^2 / (2A)` with `d = max_i |r_i - s_i|`. The upper end is the
/// largest `tau` compatible with
/// `A >= tau m0^2 / (2 (|x| + (2 A tau / m0)^(1/2)))` (a quadratic in
/// `tau^(1/2)`), doubled as a safety margin.
pub fn tau_bracket<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    action_upper_bound: S,
) -> Result<TauBracket<S>> {
    sys.check(x)?;
    sys.check(y)?;
    if x == y {
        return Err(Error::DegenerateEndpoints);
    }
    let a = action_upper_bound;
    if !(a > S::zero() && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "action bound must be positive and finite, got {a}"
        )));
    }
    let two = S::lit(2.0);
    let m0 = sys.min_mass();
    let d = x.max_body_distance(y);
    let t_lo = m0 * d * d / (two * a);

    let big_x = x.max_body_norm();
    let c = (two * a / m0).sqrt();
    // m0^2 s^2 - 2 A c s - 2 A X = 0, s = tau^(1/2)
    let (qa, qb, qc) = (m0 * m0, -two * a * c, -two * a * big_x);
    let s = (-qb + (qb * qb - S::lit(4.0) * qa * qc).sqrt()) / (two * qa);
    let t_hi = two * s * s;
    TauBracket::new(t_lo, t_hi)
}

/// One fixed-time solve performed while searching over `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauProbe<S> {
    pub tau: S,
    pub action: S,
    /// Mean energy `(K - P) / tau` of the fixed-time minimizer.
    pub mean_energy: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeTimeResult<S> {
    pub path: DiscretePath<S>,
    pub tau_star: S,
    pub phi_value: S,
    /// Mean of `|T - U|` over the path nodes.
    pub energy_residual: S,
    pub report: MinimizeReport<S>,
    pub bracket: TauBracket<S>,
    /// Every fixed-time solve performed, in order.
    pub probes: Vec<TauProbe<S>>,
    /// True when the golden-section fallback was used instead of bisection.
    pub used_fallback: bool,
}

/// Mean energy `(K - P) / tau` of a path.
pub fn mean_energy<S: Scalar>(sys: &MassSystem<S>, path: &DiscretePath<S>) -> S {
    let (k, p) = action_parts(sys, path);
    (k - p) / path.duration()
}

/// Node velocities from second-order (three-point) finite differences.
pub fn node_velocities<S: Scalar>(path: &DiscretePath<S>) -> Vec<Configuration<S>> {
    let t = path.times();
    let x = path.nodes();
    let n = t.len();
    if n == 2 {
        let v = x[1].sub(&x[0]).scaled(S::one() / (t[1] - t[0]));
        return vec![v.clone(), v];
    }
    (0..n)
        .map(|k| {
            let j = k.clamp(1, n - 2);
            let (ta, tb, tc) = (t[j - 1], t[j], t[j + 1]);
            let tk = t[k];
            let wa = ((tk - tb) + (tk - tc)) / ((ta - tb) * (ta - tc));
            let wb = ((tk - ta) + (tk - tc)) / ((tb - ta) * (tb - tc));
            let wc = ((tk - ta) + (tk - tb)) / ((tc - ta) * (tc - tb));
            x[j - 1].scaled(wa).axpy(wb, &x[j]).axpy(wc, &x[j + 1])
        })
        .collect()
}

/// Pointwise energy `T - U` at each node.
pub fn node_energies<S: Scalar>(sys: &MassSystem<S>, path: &DiscretePath<S>) -> Vec<S> {
    node_velocities(path)
        .iter()
        .zip(path.nodes())
        .map(|(v, x)| {
            S::lit(0.5) * sys.inner_coords(v.coords(), v.coords()) - sys.potential_coords(x.coords())
        })
        .collect()
}

fn probe_of<S: Scalar>(sys: &MassSystem<S>, rep: &MinimizeReport<S>) -> TauProbe<S> {
    TauProbe {
        tau: rep.path.duration(),
        action: rep.action_value,
        mean_energy: mean_energy(sys, &rep.path),
    }
}

struct Search<'a, S: Scalar> {
    sys: &'a MassSystem<S>,
    x: &'a Configuration<S>,
    y: &'a Configuration<S>,
    n_nodes: usize,
    opts: &'a MinimizeOptions<S>,
    solved: Vec<MinimizeReport<S>>,
    probes: Vec<TauProbe<S>>,
}

impl<'a, S: Scalar> Search<'a, S> {
    fn record(&mut self, rep: MinimizeReport<S>) -> TauProbe<S> {
        let p = probe_of(self.sys, &rep);
        self.probes.push(p);
        self.solved.push(rep);
        p
    }

    /// Multi-start solve, also seeded from the closest previous solution.
    fn full_solve(&mut self, tau: S) -> Result<TauProbe<S>> {
        let fresh = best_fixed_time(self.sys, self.x, self.y, tau, self.n_nodes, self.opts);
        let rep = if self.solved.is_empty() {
            fresh?
        } else {
            action::pick_best(vec![fresh, self.warm(tau)])?
        };
        Ok(self.record(rep))
    }

    /// Solve warm-started from the previous solution nearest in `log tau`,
    /// falling back to a multi-start solve.
    fn warm_solve(&mut self, tau: S) -> Result<TauProbe<S>> {
        match self.warm(tau) {
            Ok(rep) => Ok(self.record(rep)),
            Err(_) => self.full_solve(tau),
        }
    }

    fn warm(&self, tau: S) -> Result<MinimizeReport<S>> {
        let nearest = self
            .solved
            .iter()
            .min_by(|a, b| {
                let da = (a.path.duration() / tau).ln().abs();
                let db = (b.path.duration() / tau).ln().abs();
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or(Error::InvalidArgument("no previous solution".into()))?;
        minimize_from(self.sys, &nearest.path.retimed(tau), self.opts)
    }
}

/// Free time minimizer from `x` to `y`: minimizes the discrete action over
/// paths and transfer times.
pub fn minimize_free_time<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    n_nodes: usize,
    opts: &MinimizeOptions<S>,
) -> Result<FreeTimeResult<S>> {
    sys.check(x)?;
    sys.check(y)?;
    if x == y {
        return Err(Error::DegenerateEndpoints);
    }
    if sys.dim() < 2 {
        return Err(Error::UnsupportedDimension { dim: sys.dim() });
    }
    let mut search = Search {
        sys,
        x,
        y,
        n_nodes,
        opts,
        solved: Vec::new(),
        probes: Vec::new(),
    };

    // Probe at the time balancing the straight-line kinetic and potential terms.
    let kin = S::lit(0.5) * sys.inner_coords(y.sub(x).coords(), y.sub(x).coords());
    let pot = S::lit(0.5) * (sys.potential_coords(x.coords()) + sys.potential_coords(y.coords()));
    let tau_probe = if pot.is_finite() && pot > S::zero() {
        (kin / pot).sqrt()
    } else {
        S::one()
    };
    let first = search.full_solve(tau_probe)?;
    let bracket = tau_bracket(sys, x, y, first.action)?;

    let scan = bracket.log_grid(SCAN_POINTS);
    let mut scanned = Vec::with_capacity(SCAN_POINTS);
    for &tau in &scan {
        scanned.push(search.full_solve(tau)?);
    }

    let sign_changes: Vec<usize> = (0..SCAN_POINTS - 1)
        .filter(|&i| (scanned[i].mean_energy >= S::zero()) != (scanned[i + 1].mean_energy >= S::zero()))
        .collect();
    let monotone_bracket = sign_changes.len() == 1
        && scanned[0].mean_energy >= S::zero()
        && scanned[SCAN_POINTS - 1].mean_energy <= S::zero();

    let used_fallback = if monotone_bracket {
        let i = sign_changes[0];
        let (mut lo, mut hi) = (scanned[i], scanned[i + 1]);
        for _ in 0..BISECTION_ITERS {
            let mid = (lo.tau * hi.tau).sqrt();
            let p = search.warm_solve(mid)?;
            if p.mean_energy >= S::zero() {
                lo = p;
            } else {
                hi = p;
            }
        }
        // final secant step in log tau between the bracketing probes
        let (la, lb) = (lo.tau.ln(), hi.tau.ln());
        let denom = lo.mean_energy - hi.mean_energy;
        let w = if denom > S::zero() {
            lo.mean_energy / denom
        } else {
            S::lit(0.5)
        };
        let w = w.max(S::zero()).min(S::one());
        search.warm_solve((la + w * (lb - la)).exp())?;
        false
    } else {
        let j = (0..SCAN_POINTS)
            .min_by(|&a, &b| {
                scanned[a]
                    .action
                    .partial_cmp(&scanned[b].action)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        let (mut a, mut b) = (
            scan[j.saturating_sub(1)].ln(),
            scan[(j + 1).min(SCAN_POINTS - 1)].ln(),
        );
        let inv_phi = S::lit((5f64.sqrt() - 1.0) / 2.0);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = search.warm_solve(c.exp())?.action;
        let mut fd = search.warm_solve(d.exp())?.action;
        for _ in 0..GOLDEN_ITERS {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = search.warm_solve(c.exp())?.action;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = search.warm_solve(d.exp())?.action;
            }
            if b - a < S::lit(1e-6) {
                break;
            }
        }
        true
    };

    let Search { solved, probes, .. } = search;
    let best = solved
        .into_iter()
        .min_by(|a, b| {
            a.action_value
                .partial_cmp(&b.action_value)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one probe");
    let energies = node_energies(sys, &best.path);
    let energy_residual =
        energies.iter().map(|e| e.abs()).sum::<S>() / S::from_usize_lossy(energies.len());
    Ok(FreeTimeResult {
        path: best.path.clone(),
        tau_star: best.path.duration(),
        phi_value: best.action_value,
        energy_residual,
        report: best,
        bracket,
        probes,
        used_fallback,
    })
}

/// Critical action potential `phi(x, y)`; exactly zero when `x == y`.
pub fn phi<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    n_nodes: usize,
    opts: &MinimizeOptions<S>,
) -> Result<S> {
    sys.check(x)?;
    sys.check(y)?;
    if x == y {
        return Ok(S::zero());
    }
    Ok(minimize_free_time(sys, x, y, n_nodes, opts)?.phi_value)
}

/// Thresholds for [`verify_free_time_minimizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceSet<S> {
    /// Bound on the discrete Euler-Lagrange residual (interior gradient norm).
    pub euler_lagrange: S,
    /// Bound on the pointwise energy `|T - U|`.
    pub energy: S,
    /// Minimum interior pairwise separation.
    pub collision_guard: S,
    /// Relative slack allowed when comparing a restriction with the
    /// fixed-time minimum between its endpoints.
    pub subinterval_slack: S,
    pub subintervals: usize,
    /// Bound on the drift of the center of mass.
    pub com_drift: S,
    pub seed: u64,
    /// Options for the fixed-time solves of the restriction check.
    pub minimize: MinimizeOptions<S>,
}

impl<S: Scalar> ToleranceSet<S> {
    /// Default thresholds scaled to `path`: Euler-Lagrange `1e-6 (1 + |A|)`,
    /// energy `1e-3 U(midpoint)`, slack `1e-3`, eight subintervals.
    pub fn defaults_for(sys: &MassSystem<S>, path: &DiscretePath<S>) -> Result<Self> {
        let a = action(sys, path)?;
        let mid = &path.nodes()[path.len() / 2];
        let u_mid = sys.potential(mid)?;
        let scale = path
            .nodes()
            .iter()
            .map(|c| c.max_body_norm())
            .fold(S::zero(), S::max);
        let a = if a.is_finite() { a } else { S::zero() };
        let minimize = MinimizeOptions {
            restarts: 0,
            ..MinimizeOptions::default()
        };
        Ok(Self {
            euler_lagrange: S::lit(1e-6) * (S::one() + a.abs()),
            energy: S::lit(1e-3) * u_mid,
            collision_guard: minimize.collision_guard,
            subinterval_slack: S::lit(1e-3),
            subintervals: 8,
            com_drift: S::lit(1e-6) * (S::one() + scale),
            seed: 0,
            minimize,
        })
    }

    /// Thresholds for the path rescaled by `lambda` (space) and
    /// `lambda^(3/2)` (time).
    pub fn rescaled(&self, lambda: S) -> Self {
        let half = lambda.sqrt();
        Self {
            euler_lagrange: self.euler_lagrange * half.max(S::one() / half),
            energy: self.energy / lambda,
            collision_guard: self.collision_guard * lambda,
            com_drift: self.com_drift * lambda,
            ..self.clone()
        }
    }
}

/// Outcome of one certificate check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_EULER_LAGRANGE: &str = "euler_lagrange";
pub const CHECK_ZERO_ENERGY: &str = "zero_energy";
pub const CHECK_NO_COLLISION: &str = "no_collision";
pub const CHECK_SUBINTERVALS: &str = "subinterval_minimality";
pub const CHECK_CENTER_OF_MASS: &str = "center_of_mass";

fn check(name: &'static str, value: f64, threshold: f64, ok_below: bool) -> Check {
    let passed = if ok_below {
        value <= threshold
    } else {
        value >= threshold
    };
    Check {
        name,
        value,
        threshold,
        passed: passed && !value.is_nan(),
    }
}

/// Numerical certificate that `path` behaves like a free time minimizer.
///
/// Never fails: a check that cannot be evaluated (e.g. the gradient at a
/// collision) is reported as failed with an infinite value.
pub fn verify_free_time_minimizer<S: Scalar>(
    sys: &MassSystem<S>,
    path: &DiscretePath<S>,
    tol: &ToleranceSet<S>,
) -> Result<VerificationReport> {
    sys.check(path.start())?;
    if path.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "verification needs at least 5 nodes, got {}",
            path.len()
        )));
    }
    let mut checks = Vec::with_capacity(5);

    let el = action_gradient_norm(sys, path)
        .map(|g| g.as_f64())
        .unwrap_or(f64::INFINITY);
    checks.push(check(CHECK_EULER_LAGRANGE, el, tol.euler_lagrange.as_f64(), true));

    let energy = node_energies(sys, path)
        .iter()
        .map(|e| e.abs().as_f64())
        .fold(0.0, |m: f64, e| if e.is_nan() { f64::INFINITY } else { m.max(e) });
    checks.push(check(CHECK_ZERO_ENERGY, energy, tol.energy.as_f64(), true));

    let sep = path.interior_min_separation().as_f64();
    checks.push(check(CHECK_NO_COLLISION, sep, tol.collision_guard.as_f64(), false));

    // worst relative excess of a restriction over the fixed-time minimum
    let mut rng = seeded(tol.seed, 0x5b);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..tol.subintervals {
        let k0 = rng.gen_range(0..path.len() - 2);
        let k1 = rng.gen_range(k0 + 2..path.len());
        let excess = path.restrict(k0, k1).and_then(|sub| {
            let a_sub = action(sys, &sub)?;
            let rep = best_on_grid(sys, sub.start(), sub.end(), sub.times(), &tol.minimize)?;
            Ok(((a_sub - rep.action_value) / a_sub.abs().max(S::one())).as_f64())
        });
        worst = worst.max(excess.unwrap_or(f64::INFINITY));
    }
    checks.push(check(CHECK_SUBINTERVALS, worst, tol.subinterval_slack.as_f64(), true));

    let g0 = sys.com_coords(path.start().coords());
    let drift = path
        .nodes()
        .iter()
        .map(|c| {
            sys.com_coords(c.coords())
                .iter()
                .zip(&g0)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<S>()
                .sqrt()
                .as_f64()
        })
        .fold(0.0, f64::max);
    checks.push(check(CHECK_CENTER_OF_MASS, drift, tol.com_drift.as_f64(), true));

    Ok(VerificationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_body() -> MassSystem<f64> {
        MassSystem::equal(2, 2).unwrap()
    }

    #[test]
    fn bracket_lower_end() {
        let sys = two_body();
        let x = Configuration::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let y = Configuration::from_rows(&[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        let b = tau_bracket(&sys, &x, &y, 1.0).unwrap();
        assert_eq!(b.t_lo, 0.5);
        let b2 = tau_bracket(&sys, &x, &y, 2.0).unwrap();
        assert_eq!(b2.t_lo, 0.25);
        assert!(b.t_hi > b.t_lo && b.t_hi.is_finite());
    }

    #[test]
    fn bracket_upper_end_solves_the_inequality() {
        let sys = MassSystem::new(vec![1.0, 0.5, 2.0], 2).unwrap();
        let x = Configuration::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]).unwrap();
        let y = Configuration::from_rows(&[[1.0, 0.0], [2.0, 1.0], [0.5, 1.0]]).unwrap();
        let a = 3.0;
        let b = tau_bracket(&sys, &x, &y, a).unwrap();
        let m0 = 0.5;
        let xn = x.max_body_norm();
        let rhs = |t: f64| t * m0 * m0 / (2.0 * (xn + (2.0 * a * t / m0).sqrt()));
        let root = b.t_hi / 2.0;
        assert_relative_eq!(rhs(root), a, max_relative = 1e-12);
        assert!(rhs(root * 1.01) > a);
    }

    #[test]
    fn degenerate_endpoints() {
        let sys = two_body();
        let x = Configuration::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(tau_bracket(&sys, &x, &x, 1.0).unwrap_err(), Error::DegenerateEndpoints);
        let opts = MinimizeOptions::default();
        assert_eq!(
            minimize_free_time(&sys, &x, &x, 16, &opts).unwrap_err(),
            Error::DegenerateEndpoints
        );
        assert_eq!(phi(&sys, &x, &x, 16, &opts).unwrap(), 0.0);
    }

    #[test]
    fn log_grid_endpoints() {
        let b = TauBracket::new(0.5, 8.0).unwrap();
        let g = b.log_grid(5);
        assert_eq!(g[0], 0.5);
        assert_eq!(g[4], 8.0);
        assert_relative_eq!(g[2], 2.0, max_relative = 1e-14);
        assert!(TauBracket::new(1.0, 1.0).is_err());
    }

    #[test]
    fn finite_difference_velocities_are_second_order_exact() {
        let x = Configuration::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let v = Configuration::from_rows(&[[0.3, -0.2], [0.1, 0.4]]).unwrap();
        let acc = Configuration::from_rows(&[[1.0, 0.5], [-0.2, 0.0]]).unwrap();
        let times = vec![0.0, 0.1, 0.35, 0.4, 0.9];
        let nodes = times
            .iter()
            .map(|&t: &f64| x.axpy(t, &v).axpy(0.5 * t * t, &acc))
            .collect();
        let p = DiscretePath::new(times.clone(), nodes).unwrap();
        for (t, vk) in times.iter().zip(node_velocities(&p)) {
            let expect = v.axpy(*t, &acc);
            for (a, b) in vk.coords().iter().zip(expect.coords()) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }
}
