//! Discrete paths, the discretized Lagrangian action and fixed-time minimizers.
//!
//! The action of a path sampled at `t_0 < ... < t_n` is
//!
//! ```text
//! A = sum_k [ |x_{k+1} - x_k|^2 / (2 dt_k) + dt_k (U(x_k) + U(x_{k+1})) / 2 ]
//! ```
//!
//! (chordal kinetic term, trapezoidal potential term, mass norm). Its
//! critical points satisfy the discrete Newton equation of the Stormer-Verlet
//! variational integrator.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::configuration::{Configuration, MassSystem};
use crate::error::{Error, Result};
use crate::lbfgs::{self, Objective, Status};
use crate::rng::seeded;
use crate::scalar::Scalar;

/// Time grid plus one configuration per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath<S> {
    times: Vec<S>,
    nodes: Vec<Configuration<S>>,
}

impl<S: Scalar> DiscretePath<S> {
    pub fn new(times: Vec<S>, nodes: Vec<Configuration<S>>) -> Result<Self> {
        if times.len() != nodes.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} nodes", times.len()),
                found: format!("{} nodes", nodes.len()),
            });
        }
        if times.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least 2 nodes".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "path times must be strictly increasing".into(),
            ));
        }
        let (n, d) = (nodes[0].n_bodies(), nodes[0].dim());
        if let Some(k) = nodes
            .iter()
            .position(|c| c.n_bodies() != n || c.dim() != d)
        {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{d}"),
                found: format!(
                    "{}x{} at node {k}",
                    nodes[k].n_bodies(),
                    nodes[k].dim()
                ),
            });
        }
        Ok(Self { times, nodes })
    }

    /// Uniform grid on `[t0, t1]` with `n_nodes` samples of `f`.
    pub fn sample(
        t0: S,
        t1: S,
        n_nodes: usize,
        f: impl Fn(S) -> Configuration<S>,
    ) -> Result<Self> {
        let times = uniform_grid(t0, t1, n_nodes)?;
        let nodes = times.iter().map(|&t| f(t)).collect();
        Self::new(times, nodes)
    }

    /// Constant-speed segment from `x` to `y` over `[0, tau]`.
    pub fn straight(x: &Configuration<S>, y: &Configuration<S>, tau: S, n_nodes: usize) -> Result<Self> {
        Self::sample(S::zero(), tau, n_nodes, |t| x.lerp(y, t / tau))
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn nodes(&self) -> &[Configuration<S>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> &Configuration<S> {
        &self.nodes[0]
    }

    pub fn end(&self) -> &Configuration<S> {
        &self.nodes[self.nodes.len() - 1]
    }

    pub fn duration(&self) -> S {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Sub-path on nodes `k0..=k1`.
    pub fn restrict(&self, k0: usize, k1: usize) -> Result<Self> {
        if !(k0 < k1 && k1 < self.len()) {
            return Err(Error::InvalidArgument(format!(
                "invalid node range {k0}..={k1} for {} nodes",
                self.len()
            )));
        }
        Self::new(
            self.times[k0..=k1].to_vec(),
            self.nodes[k0..=k1].to_vec(),
        )
    }

    /// Space scaled by `lambda`, time by `lambda^(3/2)`; the action scales by
    /// `lambda^(1/2)`.
    pub fn rescaled(&self, lambda: S) -> Self {
        let s = lambda.powf(S::lit(1.5));
        Self {
            times: self.times.iter().map(|&t| t * s).collect(),
            nodes: self.nodes.iter().map(|c| c.scaled(lambda)).collect(),
        }
    }

    /// Same nodes, time axis stretched linearly to span `[0, tau]`.
    pub fn retimed(&self, tau: S) -> Self {
        let t0 = self.times[0];
        let f = tau / self.duration();
        Self {
            times: self.times.iter().map(|&t| (t - t0) * f).collect(),
            nodes: self.nodes.clone(),
        }
    }

    /// Time-reversed path on the same time interval.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.times[0], self.times[self.len() - 1]);
        Self {
            times: self.times.iter().rev().map(|&t| a + b - t).collect(),
            nodes: self.nodes.iter().rev().cloned().collect(),
        }
    }

    /// Smallest pairwise separation over the interior nodes.
    pub fn interior_min_separation(&self) -> S {
        self.nodes[1..self.len() - 1]
            .iter()
            .map(|c| c.min_separation())
            .fold(S::infinity(), S::min)
    }
}

pub(crate) fn uniform_grid<S: Scalar>(t0: S, t1: S, n: usize) -> Result<Vec<S>> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid points".into()));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "empty time interval [{t0}, {t1}]"
        )));
    }
    let h = (t1 - t0) / S::from_usize_lossy(n - 1);
    let mut out: Vec<S> = (0..n).map(|k| t0 + h * S::from_usize_lossy(k)).collect();
    out[n - 1] = t1;
    Ok(out)
}

/// Discrete action of `path`; `+inf` when some node collides.
pub fn action<S: Scalar>(sys: &MassSystem<S>, path: &DiscretePath<S>) -> Result<S> {
    sys.check(path.start())?;
    let half = S::lit(0.5);
    let pots: Vec<S> = path
        .nodes
        .iter()
        .map(|c| sys.potential_coords(c.coords()))
        .collect();
    if pots.iter().any(|u| u.is_infinite()) {
        return Ok(S::infinity());
    }
    let mut a = S::zero();
    for k in 0..path.len() - 1 {
        let dt = path.times[k + 1] - path.times[k];
        let dx = path.nodes[k + 1].sub(&path.nodes[k]);
        a = a + half * sys.inner_coords(dx.coords(), dx.coords()) / dt
            + dt * half * (pots[k] + pots[k + 1]);
    }
    Ok(a)
}

/// Kinetic and potential parts of the discrete action.
pub(crate) fn action_parts<S: Scalar>(sys: &MassSystem<S>, path: &DiscretePath<S>) -> (S, S) {
    let half = S::lit(0.5);
    let pots: Vec<S> = path
        .nodes
        .iter()
        .map(|c| sys.potential_coords(c.coords()))
        .collect();
    let mut kin = S::zero();
    let mut pot = S::zero();
    for k in 0..path.len() - 1 {
        let dt = path.times[k + 1] - path.times[k];
        let dx = path.nodes[k + 1].sub(&path.nodes[k]);
        kin = kin + half * sys.inner_coords(dx.coords(), dx.coords()) / dt;
        pot = pot + dt * half * (pots[k] + pots[k + 1]);
    }
    (kin, pot)
}

/// Exact gradient of [`action`] with respect to the coordinates of the
/// interior nodes (endpoints held fixed). Entry `k` corresponds to node `k + 1`.
pub fn action_gradient<S: Scalar>(
    sys: &MassSystem<S>,
    path: &DiscretePath<S>,
) -> Result<Vec<Configuration<S>>> {
    sys.check(path.start())?;
    if path.len() < 3 {
        return Ok(Vec::new());
    }
    let mut grad = vec![S::zero(); (path.len() - 2) * sys.n_coords()];
    let flat: Vec<S> = path.nodes[1..path.len() - 1]
        .iter()
        .flat_map(|c| c.coords().iter().copied())
        .collect();
    let problem = ActionProblem::new(sys, &path.times, path.start(), path.end(), S::zero());
    problem.gradient_into(&flat, &mut grad)?;
    Ok(grad
        .chunks_exact(sys.n_coords())
        .map(|c| sys.configuration(c.to_vec()).expect("shape"))
        .collect())
}

/// Euclidean norm of the stacked interior gradient.
pub fn action_gradient_norm<S: Scalar>(sys: &MassSystem<S>, path: &DiscretePath<S>) -> Result<S> {
    Ok(action_gradient(sys, path)?
        .iter()
        .flat_map(|c| c.coords().iter().copied())
        .map(|v| v * v)
        .sum::<S>()
        .sqrt())
}

/// Objective over the stacked interior node coordinates.
struct ActionProblem<'a, S> {
    sys: &'a MassSystem<S>,
    times: &'a [S],
    start: &'a Configuration<S>,
    end: &'a Configuration<S>,
    guard: S,
    // Thomas factorization of the kinetic Hessian (unit mass): sub-diagonal
    // multipliers and pivots.
    lower: Vec<S>,
    pivots: Vec<S>,
}

impl<'a, S: Scalar> ActionProblem<'a, S> {
    fn new(
        sys: &'a MassSystem<S>,
        times: &'a [S],
        start: &'a Configuration<S>,
        end: &'a Configuration<S>,
        guard: S,
    ) -> Self {
        let m = times.len().saturating_sub(2);
        let inv: Vec<S> = times.windows(2).map(|w| S::one() / (w[1] - w[0])).collect();
        let mut lower = vec![S::zero(); m];
        let mut pivots = vec![S::zero(); m];
        for k in 0..m {
            let diag = inv[k] + inv[k + 1];
            if k == 0 {
                pivots[k] = diag;
            } else {
                lower[k] = -inv[k] / pivots[k - 1];
                pivots[k] = diag + lower[k] * inv[k];
            }
        }
        Self {
            sys,
            times,
            start,
            end,
            guard,
            lower,
            pivots,
        }
    }

    fn node<'b>(&'b self, z: &'b [S], k: usize) -> &'b [S] {
        let nc = self.sys.n_coords();
        let last = self.times.len() - 1;
        if k == 0 {
            self.start.coords()
        } else if k == last {
            self.end.coords()
        } else {
            &z[(k - 1) * nc..k * nc]
        }
    }

    fn value(&self, z: &[S]) -> S {
        let half = S::lit(0.5);
        let last = self.times.len() - 1;
        let mut a = S::zero();
        let mut u_prev = self.sys.potential_coords(self.node(z, 0));
        for k in 0..last {
            let dt = self.times[k + 1] - self.times[k];
            let (p, q) = (self.node(z, k), self.node(z, k + 1));
            let dx: Vec<S> = q.iter().zip(p).map(|(&b, &a)| b - a).collect();
            let u_next = self.sys.potential_coords(q);
            a = a + half * self.sys.inner_coords(&dx, &dx) / dt + dt * half * (u_prev + u_next);
            u_prev = u_next;
        }
        a
    }

    fn gradient_into(&self, z: &[S], grad: &mut [S]) -> Result<()> {
        let sys = self.sys;
        let (nc, d) = (sys.n_coords(), sys.dim());
        let half = S::lit(0.5);
        let mut acc = vec![S::zero(); nc];
        for k in 1..self.times.len() - 1 {
            let dt_prev = self.times[k] - self.times[k - 1];
            let dt_next = self.times[k + 1] - self.times[k];
            let w = half * (dt_prev + dt_next);
            let (xp, xk, xn) = (self.node(z, k - 1), self.node(z, k), self.node(z, k + 1));
            sys.accel_coords(xk, &mut acc)?;
            let g = &mut grad[(k - 1) * nc..k * nc];
            for (i, &m) in sys.masses().iter().enumerate() {
                for c in i * d..(i + 1) * d {
                    g[c] = m * ((xk[c] - xp[c]) / dt_prev - (xn[c] - xk[c]) / dt_next + w * acc[c]);
                }
            }
        }
        Ok(())
    }
}

impl<S: Scalar> Objective<S> for ActionProblem<'_, S> {
    fn value_grad(&self, z: &[S], grad: &mut [S]) -> Option<S> {
        let v = self.value(z);
        if !v.is_finite() {
            return None;
        }
        self.gradient_into(z, grad).ok()?;
        Some(v)
    }

    fn precondition(&self, v: &mut [S]) {
        // Solve (m_i K) y = v for every coordinate column, K the tridiagonal
        // kinetic Hessian.
        let sys = self.sys;
        let nc = sys.n_coords();
        let d = sys.dim();
        let m = self.pivots.len();
        if m == 0 {
            return;
        }
        let inv: Vec<S> = self.times.windows(2).map(|w| S::one() / (w[1] - w[0])).collect();
        for c in 0..nc {
            let mass = sys.masses()[c / d];
            for k in 1..m {
                let prev = v[(k - 1) * nc + c];
                v[k * nc + c] = v[k * nc + c] - self.lower[k] * prev;
            }
            v[(m - 1) * nc + c] = v[(m - 1) * nc + c] / self.pivots[m - 1];
            for k in (0..m - 1).rev() {
                let next = v[(k + 1) * nc + c];
                v[k * nc + c] = (v[k * nc + c] + inv[k + 1] * next) / self.pivots[k];
            }
            for k in 0..m {
                v[k * nc + c] = v[k * nc + c] / mass;
            }
        }
    }

    fn guard_margin(&self, z: &[S]) -> S {
        let nc = self.sys.n_coords();
        let (n, d) = (self.sys.n_bodies(), self.sys.dim());
        z.chunks_exact(nc)
            .map(|c| {
                let mut best = S::infinity();
                for i in 0..n {
                    for j in i + 1..n {
                        best = best.min(crate::configuration::euclid_dist(
                            &c[i * d..(i + 1) * d],
                            &c[j * d..(j + 1) * d],
                        ));
                    }
                }
                best
            })
            .fold(S::infinity(), S::min)
    }

    fn guard(&self) -> S {
        self.guard
    }
}

/// Settings for the action minimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions<S> {
    pub max_iters: usize,
    /// Stopping threshold on the Euclidean norm of the interior gradient.
    pub grad_tol: S,
    /// Extra randomized starts beyond the first.
    pub restarts: usize,
    pub rng_seed: u64,
    /// Minimum pairwise separation allowed at interior nodes during line search.
    pub collision_guard: S,
}

impl<S: Scalar> Default for MinimizeOptions<S> {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            grad_tol: S::lit(1e-8),
            restarts: 4,
            rng_seed: 0,
            collision_guard: S::lit(1e-6),
        }
    }
}

impl<S: Scalar> MinimizeOptions<S> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        if !(self.grad_tol > S::zero()) {
            return Err(Error::InvalidArgument("grad_tol must be positive".into()));
        }
        if !(self.collision_guard > S::zero()) {
            return Err(Error::InvalidArgument(
                "collision_guard must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Result of a fixed-time minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeReport<S> {
    pub path: DiscretePath<S>,
    pub action_value: S,
    pub grad_norm: S,
    pub iterations: usize,
    pub converged: bool,
    /// Smallest interior pairwise distance among accepted iterates.
    pub min_separation: S,
}

fn check_fixed_time_inputs<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    tau: S,
    n_nodes: usize,
    opts: &MinimizeOptions<S>,
) -> Result<()> {
    sys.check(x)?;
    sys.check(y)?;
    opts.validate()?;
    if sys.dim() < 2 {
        return Err(Error::UnsupportedDimension { dim: sys.dim() });
    }
    if !(tau > S::zero() && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if n_nodes < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 nodes, got {n_nodes}"
        )));
    }
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::InvalidArgument("non-finite endpoint".into()));
    }
    Ok(())
}

/// Initial path for start number `attempt`: the straight segment plus small
/// Gaussian noise, and for `attempt > 0` an additional random bow.
pub(crate) fn initial_path<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    times: &[S],
    seed: u64,
    attempt: usize,
) -> Result<DiscretePath<S>> {
    let mut rng = seeded(seed, attempt as u64);
    let dist = sys.mass_norm(&y.sub(x))?;
    let scale = if dist > S::zero() {
        dist
    } else {
        S::lit(1e-3) * sys.mass_norm(x)?.max(S::one())
    };
    let noise = S::lit(1e-3) * scale;
    let mut gauss = || S::lit(rng.sample::<f64, _>(StandardNormal));
    let nc = sys.n_coords();
    let bow: Vec<S> = if attempt > 0 {
        let raw: Vec<S> = (0..nc).map(|_| gauss()).collect();
        let r = sys.configuration(raw)?;
        let norm = sys.mass_norm(&r)?;
        let amp = S::lit(0.25) * scale * S::from_usize_lossy(attempt).sqrt() / norm;
        r.scaled(amp).into_coords()
    } else {
        vec![S::zero(); nc]
    };
    let last = times.len() - 1;
    let (t0, tau) = (times[0], times[last] - times[0]);
    let mut nodes = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let s = (t - t0) / tau;
        let mut c = x.lerp(y, s);
        if k != 0 && k != last {
            let shape = (S::PI() * s).sin();
            for (ci, &bi) in c.coords_mut().iter_mut().zip(&bow) {
                *ci = *ci + shape * bi + noise * gauss();
            }
        }
        nodes.push(c);
    }
    DiscretePath::new(times.to_vec(), nodes)
}

fn run_from<S: Scalar>(
    sys: &MassSystem<S>,
    init: &DiscretePath<S>,
    opts: &MinimizeOptions<S>,
) -> Result<MinimizeReport<S>> {
    let problem = ActionProblem::new(
        sys,
        &init.times,
        init.start(),
        init.end(),
        opts.collision_guard,
    );
    let z0: Vec<S> = init.nodes[1..init.len() - 1]
        .iter()
        .flat_map(|c| c.coords().iter().copied())
        .collect();
    let out = lbfgs::minimize(
        &problem,
        z0,
        &lbfgs::Settings {
            max_iters: opts.max_iters,
            grad_tol: opts.grad_tol,
            memory: 12,
        },
    );
    let to_f64 = |v: S| v.as_f64();
    match out.status {
        Status::Converged => {}
        Status::InfeasibleStart | Status::Stalled { guard_limited: true } => {
            return Err(Error::CollisionTrapped {
                min_separation: to_f64(out.min_margin),
            })
        }
        Status::Stalled { guard_limited: false } | Status::MaxIters => {
            return Err(Error::NonConvergence {
                iterations: out.iterations,
                grad_norm: to_f64(out.grad_norm),
            })
        }
    }
    let nc = sys.n_coords();
    let mut nodes = Vec::with_capacity(init.len());
    nodes.push(init.start().clone());
    for c in out.x.chunks_exact(nc) {
        nodes.push(sys.configuration(c.to_vec())?);
    }
    nodes.push(init.end().clone());
    let path = DiscretePath::new(init.times.clone(), nodes)?;
    Ok(MinimizeReport {
        path,
        action_value: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: true,
        min_separation: out.min_margin,
    })
}

/// Minimizes the discrete action starting from `init`, keeping its time grid
/// and endpoints.
pub fn minimize_from<S: Scalar>(
    sys: &MassSystem<S>,
    init: &DiscretePath<S>,
    opts: &MinimizeOptions<S>,
) -> Result<MinimizeReport<S>> {
    check_fixed_time_inputs(sys, init.start(), init.end(), init.duration(), init.len(), opts)?;
    run_from(sys, init, opts)
}

/// Local minimizer of the discrete action among paths from `x` to `y` on
/// `[0, tau]` with `n_nodes` uniform nodes.
///
/// Starts from a slightly perturbed straight segment; if that run ends
/// trapped against the collision guard, retries from randomized bowed arcs
/// (at most `opts.restarts` times).
pub fn minimize_fixed_time<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    tau: S,
    n_nodes: usize,
    opts: &MinimizeOptions<S>,
) -> Result<MinimizeReport<S>> {
    check_fixed_time_inputs(sys, x, y, tau, n_nodes, opts)?;
    let times = uniform_grid(S::zero(), tau, n_nodes)?;
    let mut last_err = None;
    for attempt in 0..=opts.restarts {
        let init = initial_path(sys, x, y, &times, opts.rng_seed, attempt)?;
        match run_from(sys, &init, opts) {
            Ok(rep) => return Ok(rep),
            Err(e @ Error::CollisionTrapped { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Best of `opts.restarts + 1` randomized starts (run in parallel).
pub fn best_fixed_time<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    tau: S,
    n_nodes: usize,
    opts: &MinimizeOptions<S>,
) -> Result<MinimizeReport<S>> {
    check_fixed_time_inputs(sys, x, y, tau, n_nodes, opts)?;
    let times = uniform_grid(S::zero(), tau, n_nodes)?;
    best_on_grid(sys, x, y, &times, opts)
}

/// [`best_fixed_time`] on an arbitrary time grid.
pub fn best_on_grid<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    times: &[S],
    opts: &MinimizeOptions<S>,
) -> Result<MinimizeReport<S>> {
    let (Some(&first), Some(&last)) = (times.first(), times.last()) else {
        return Err(Error::InvalidArgument("empty time grid".into()));
    };
    check_fixed_time_inputs(sys, x, y, last - first, times.len(), opts)?;
    let runs: Vec<Result<MinimizeReport<S>>> = (0..=opts.restarts)
        .into_par_iter()
        .map(|attempt| {
            let init = initial_path(sys, x, y, times, opts.rng_seed, attempt)?;
            run_from(sys, &init, opts)
        })
        .collect();
    pick_best(runs)
}

pub(crate) fn pick_best<S: Scalar>(
    runs: Vec<Result<MinimizeReport<S>>>,
) -> Result<MinimizeReport<S>> {
    let mut best: Option<MinimizeReport<S>> = None;
    let mut errors = Vec::new();
    for run in runs {
        match run {
            Ok(rep) if best.as_ref().is_none_or(|b| rep.action_value < b.action_value) => {
                best = Some(rep)
            }
            Ok(_) => {}
            Err(e) => errors.push(e),
        }
    }
    if let Some(b) = best {
        return Ok(b);
    }
    // CollisionTrapped only when every start was trapped.
    let non_trapped = errors
        .iter()
        .position(|e| !matches!(e, Error::CollisionTrapped { .. }));
    Err(errors.swap_remove(non_trapped.unwrap_or(0)))
}

/// Upper approximation of the fixed-time potential `phi(x, y, tau)`.
pub fn phi_tau<S: Scalar>(
    sys: &MassSystem<S>,
    x: &Configuration<S>,
    y: &Configuration<S>,
    tau: S,
    n_nodes: usize,
    opts: &MinimizeOptions<S>,
) -> Result<S> {
    Ok(best_fixed_time(sys, x, y, tau, n_nodes, opts)?.action_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_body() -> MassSystem<f64> {
        MassSystem::equal(2, 2).unwrap()
    }

    fn cfg(rows: &[[f64; 2]]) -> Configuration<f64> {
        Configuration::from_rows(rows).unwrap()
    }

    #[test]
    fn path_validation() {
        let x = cfg(&[[0.0, 0.0], [1.0, 0.0]]);
        assert!(DiscretePath::new(vec![0.0], vec![x.clone()]).is_err());
        assert!(DiscretePath::new(vec![0.0, 0.0], vec![x.clone(), x.clone()]).is_err());
        assert!(DiscretePath::new(vec![0.0, 1.0], vec![x.clone()]).is_err());
        let p = DiscretePath::new(vec![0.5, 2.0], vec![x.clone(), x]).unwrap();
        assert_eq!(p.duration(), 1.5);
    }

    #[test]
    fn constant_path_action() {
        let sys = two_body();
        let x = cfg(&[[0.0, 0.0], [2.0, 0.0]]);
        let p = DiscretePath::sample(0.0, 3.0, 17, |_| x.clone()).unwrap();
        assert_relative_eq!(action(&sys, &p).unwrap(), 3.0 * 0.5, max_relative = 1e-15);
    }

    #[test]
    fn colliding_node_gives_infinite_action() {
        let sys = two_body();
        let x = cfg(&[[-1.0, 0.0], [1.0, 0.0]]);
        let p = DiscretePath::straight(&x, &x.scaled(-1.0), 1.0, 3).unwrap();
        assert!(action(&sys, &p).unwrap().is_infinite());
        assert!(matches!(action_gradient(&sys, &p), Err(Error::Collision { .. })));
    }

    #[test]
    fn translation_only_affects_kinetic_part() {
        let sys = MassSystem::new(vec![1.0, 2.0, 0.5], 2).unwrap();
        let a = cfg(&[[0.0, 0.0], [1.0, 0.2], [0.3, 1.1]]);
        let b = cfg(&[[0.5, -0.3], [1.4, 0.7], [-0.2, 1.5]]);
        let p = DiscretePath::straight(&a, &b, 2.0, 9).unwrap();
        let shift = [0.7, -0.4];
        let shifted = DiscretePath::new(
            p.times().to_vec(),
            p.nodes().iter().map(|c| c.translated(&shift)).collect(),
        )
        .unwrap();
        let g = action_gradient(&sys, &p).unwrap();
        let gs = action_gradient(&sys, &shifted).unwrap();
        for (u, v) in g.iter().zip(&gs) {
            for (p, q) in u.coords().iter().zip(v.coords()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        // On a constant-velocity segment the kinetic terms telescope away,
        // leaving only the potential contribution.
        for (k, gk) in g.iter().enumerate() {
            let node = &p.nodes()[k + 1];
            let acc = sys.grad_potential(node).unwrap();
            let dt = p.times()[1] - p.times()[0];
            for (i, &m) in sys.masses().iter().enumerate() {
                for c in 0..2 {
                    let expect = dt * m * acc.body(i)[c];
                    assert!((gk.body(i)[c] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
                }
            }
        }
    }

    #[test]
    fn minimizer_refuses_one_dimension() {
        let sys = MassSystem::<f64>::equal(2, 1).unwrap();
        let x = Configuration::from_rows(&[[-1.0], [1.0]]).unwrap();
        let y = x.scaled(2.0);
        let err = minimize_fixed_time(&sys, &x, &y, 1.0, 16, &MinimizeOptions::default());
        assert_eq!(err.unwrap_err(), Error::UnsupportedDimension { dim: 1 });
        let p = DiscretePath::straight(&x, &y, 1.0, 5).unwrap();
        assert!(action(&sys, &p).unwrap().is_finite());
        assert!(action_gradient(&sys, &p).is_ok());
    }

    #[test]
    fn loop_at_a_point_beats_the_constant_path() {
        let sys = MassSystem::new(vec![1.0, 1.0, 1.0], 2).unwrap();
        let x = cfg(&[[0.0, 0.0], [1.0, 0.0], [0.2, 0.9]]);
        let tau = 0.1;
        let rep = minimize_fixed_time(&sys, &x, &x, tau, 32, &MinimizeOptions::default()).unwrap();
        let u = sys.potential(&x).unwrap();
        assert!(rep.converged);
        assert!(rep.action_value <= tau * u);
    }

    #[test]
    fn preconditioner_inverts_the_kinetic_hessian() {
        let sys = MassSystem::new(vec![1.0, 3.0], 2).unwrap();
        let x = cfg(&[[0.0, 0.0], [1.0, 0.0]]);
        let times = vec![0.0, 0.3, 0.5, 1.1, 1.2, 2.0];
        let prob = ActionProblem::new(&sys, &times, &x, &x, 0.0);
        let nc = sys.n_coords();
        let m = times.len() - 2;
        let v: Vec<f64> = (0..m * nc).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut y = v.clone();
        prob.precondition(&mut y);
        let inv: Vec<f64> = times.windows(2).map(|w| 1.0 / (w[1] - w[0])).collect();
        for c in 0..nc {
            let mass = sys.masses()[c / 2];
            for k in 0..m {
                let mut kv = (inv[k] + inv[k + 1]) * y[k * nc + c];
                if k > 0 {
                    kv -= inv[k] * y[(k - 1) * nc + c];
                }
                if k + 1 < m {
                    kv -= inv[k + 1] * y[(k + 1) * nc + c];
                }
                assert_relative_eq!(mass * kv, v[k * nc + c], epsilon = 1e-12);
            }
        }
    }
}
