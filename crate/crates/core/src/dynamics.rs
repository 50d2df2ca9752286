//! Integration of Newton's equations and asymptotic diagnostics.
//!
//! The integrator is the Dormand-Prince 5(4) embedded pair with the usual
//! I-controller. Diagnostics are pure functions of a sampled trajectory.

use crate::configuration::{Configuration, MassSystem};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Where the trajectory is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleGrid<S> {
    /// `n` equally spaced times including both ends.
    Uniform(usize),
    /// `n` log-spaced times including both ends (needs `t0 > 0`).
    Log(usize),
    /// Explicit increasing times inside the span.
    Times(Vec<S>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions<S> {
    pub rtol: S,
    pub atol: S,
    pub samples: SampleGrid<S>,
    pub max_steps: usize,
    /// Stop when the minimal separation drops below this fraction of the
    /// initial minimal separation.
    pub collision_fraction: S,
}

impl<S: Scalar> Default for IntegrateOptions<S> {
    fn default() -> Self {
        Self {
            rtol: S::lit(1e-12),
            atol: S::lit(1e-12),
            samples: SampleGrid::Uniform(1001),
            max_steps: 10_000_000,
            collision_fraction: S::lit(1e-6),
        }
    }
}

impl<S: Scalar> IntegrateOptions<S> {
    pub fn with_tolerance(tol: S) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }

    pub fn samples(mut self, samples: SampleGrid<S>) -> Self {
        self.samples = samples;
        self
    }
}

/// Early termination near a collision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent<S> {
    pub time: S,
    pub min_separation: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub times: Vec<S>,
    pub positions: Vec<Configuration<S>>,
    pub velocities: Vec<Configuration<S>>,
    /// Initial energy `T - U`.
    pub energy0: S,
    /// Largest `|h(t) - h(t0)|` over accepted steps.
    pub max_energy_drift: S,
    pub steps: usize,
    /// Set when the run stopped early near a collision; the samples then
    /// cover only the integrated part.
    pub collision: Option<CollisionEvent<S>>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `Err(CollisionApproach)` when the run terminated early.
    pub fn ensure_complete(&self) -> Result<()> {
        match self.collision {
            Some(ev) => Err(Error::CollisionApproach {
                time: ev.time.as_f64(),
                min_separation: ev.min_separation.as_f64(),
            }),
            None => Ok(()),
        }
    }
}

// Dormand-Prince 5(4) tableau (autonomous system, so the nodes are unused).
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B_HAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn sample_times<S: Scalar>(t0: S, t1: S, grid: &SampleGrid<S>) -> Result<Vec<S>> {
    let out = match grid {
        SampleGrid::Uniform(n) => crate::action::uniform_grid(t0, t1, *n)?,
        SampleGrid::Log(n) => {
            if !(t0 > S::zero()) || *n < 2 {
                return Err(Error::InvalidArgument(
                    "log sampling needs t0 > 0 and at least 2 samples".into(),
                ));
            }
            let mut v: Vec<S> = crate::action::uniform_grid(t0.ln(), t1.ln(), *n)?
                .into_iter()
                .map(S::exp)
                .collect();
            v[0] = t0;
            v[*n - 1] = t1;
            v
        }
        SampleGrid::Times(ts) => {
            if ts.is_empty()
                || ts.windows(2).any(|w| !(w[1] > w[0]))
                || ts[0] < t0
                || ts[ts.len() - 1] > t1
            {
                return Err(Error::InvalidArgument(
                    "sample times must be increasing and inside the span".into(),
                ));
            }
            ts.clone()
        }
    };
    Ok(out)
}

struct NewtonRhs<'a, S> {
    sys: &'a MassSystem<S>,
    nc: usize,
}

impl<S: Scalar> NewtonRhs<'_, S> {
    fn eval(&self, y: &[S], dy: &mut [S]) -> Result<()> {
        let (x, v) = y.split_at(self.nc);
        let (dx, dv) = dy.split_at_mut(self.nc);
        dx.copy_from_slice(v);
        self.sys.accel_coords(x, dv)
    }

    fn energy(&self, y: &[S]) -> S {
        let (x, v) = y.split_at(self.nc);
        S::lit(0.5) * self.sys.inner_coords(v, v) - self.sys.potential_coords(x)
    }
}

/// Integrates `x'' = grad U(x)` from `(x0, v0)` over `t_span`.
///
/// A close approach (minimal separation below
/// `opts.collision_fraction` times its initial value) ends the run early;
/// the partial trajectory is returned with [`Trajectory::collision`] set.
pub fn integrate_newton<S: Scalar>(
    sys: &MassSystem<S>,
    x0: &Configuration<S>,
    v0: &Configuration<S>,
    t_span: (S, S),
    opts: &IntegrateOptions<S>,
) -> Result<Trajectory<S>> {
    sys.check(x0)?;
    sys.check(v0)?;
    let (t0, t1) = t_span;
    let outputs = sample_times(t0, t1, &opts.samples)?;
    let sep0 = x0.min_separation();
    if sys.has_collision(x0)? {
        return Err(Error::InvalidArgument("initial configuration collides".into()));
    }
    let sep_stop = opts.collision_fraction * sep0;
    let nc = sys.n_coords();
    let rhs = NewtonRhs { sys, nc };

    let mut y: Vec<S> = x0.coords().iter().chain(v0.coords()).copied().collect();
    let mut k: Vec<Vec<S>> = vec![vec![S::zero(); 2 * nc]; 7];
    rhs.eval(&y, &mut k[0])?;
    let energy0 = rhs.energy(&y);
    let mut max_drift = S::zero();

    let mut traj = Trajectory {
        times: Vec::with_capacity(outputs.len()),
        positions: Vec::with_capacity(outputs.len()),
        velocities: Vec::with_capacity(outputs.len()),
        energy0,
        max_energy_drift: S::zero(),
        steps: 0,
        collision: None,
    };
    let push = |traj: &mut Trajectory<S>, t: S, y: &[S]| -> Result<()> {
        traj.times.push(t);
        traj.positions.push(sys.configuration(y[..nc].to_vec())?);
        traj.velocities.push(sys.configuration(y[nc..].to_vec())?);
        Ok(())
    };

    let mut t = t0;
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        push(&mut traj, outputs[next_out], &y)?;
        next_out += 1;
    }

    // initial step from the scales of y and y'
    let norm = |v: &[S]| v.iter().map(|&c| c * c).sum::<S>().sqrt();
    let mut h = S::lit(0.01) * norm(&y).max(S::lit(1e-6)) / norm(&k[0]).max(S::lit(1e-12));
    h = h.min(t1 - t0).max(S::lit(1e-12) * (t1 - t0));

    let order_exp = S::lit(-0.2);
    let mut y_new = vec![S::zero(); 2 * nc];
    let mut y_stage = vec![S::zero(); 2 * nc];
    while next_out < outputs.len() {
        if traj.steps >= opts.max_steps {
            return Err(Error::NonConvergence {
                iterations: traj.steps,
                grad_norm: f64::NAN,
            });
        }
        let target = outputs[next_out];
        let hits = t + h >= target;
        let step = if hits { target - t } else { h };

        for s in 1..7 {
            for i in 0..2 * nc {
                let mut acc = S::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc = acc + S::lit(A[s][j]) * kj[i];
                }
                y_stage[i] = y[i] + step * acc;
            }
            let stage = &mut k[s];
            if rhs.eval(&y_stage, stage).is_err() {
                stage.iter_mut().for_each(|v| *v = S::nan());
            }
        }
        let mut err = S::zero();
        for i in 0..2 * nc {
            let mut hi = S::zero();
            let mut lo = S::zero();
            for s in 0..7 {
                hi = hi + S::lit(B[s]) * k[s][i];
                lo = lo + S::lit(B_HAT[s]) * k[s][i];
            }
            y_new[i] = y[i] + step * hi;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let e = step * (hi - lo) / sc;
            err = err + e * e;
        }
        let err = (err / S::from_usize_lossy(2 * nc)).sqrt();

        if err.is_finite() && err <= S::one() {
            t = if hits { target } else { t + step };
            std::mem::swap(&mut y, &mut y_new);
            // FSAL: the last stage is f(y_new)
            k.swap(0, 6);
            traj.steps += 1;
            max_drift = max_drift.max((rhs.energy(&y) - energy0).abs());

            let sep = min_sep_coords(sys, &y[..nc]);
            if sep < sep_stop {
                push(&mut traj, t, &y)?;
                traj.collision = Some(CollisionEvent {
                    time: t,
                    min_separation: sep,
                });
                break;
            }
            if hits {
                push(&mut traj, t, &y)?;
                next_out += 1;
            }
            let fac = if err > S::zero() {
                (S::lit(0.9) * err.powf(order_exp)).min(S::lit(5.0)).max(S::lit(0.2))
            } else {
                S::lit(5.0)
            };
            // a step shortened to land on an output time does not shrink h
            h = if hits { h.max(step * fac) } else { step * fac };
        } else {
            let fac = if err.is_finite() {
                (S::lit(0.9) * err.powf(order_exp)).max(S::lit(0.1))
            } else {
                S::lit(0.1)
            };
            h = step * fac.min(S::one());
            if h < S::epsilon() * t.abs().max(S::one()) * S::lit(16.0) {
                let sep = min_sep_coords(sys, &y[..nc]);
                push(&mut traj, t, &y)?;
                traj.collision = Some(CollisionEvent {
                    time: t,
                    min_separation: sep,
                });
                break;
            }
        }
    }
    traj.max_energy_drift = max_drift;
    Ok(traj)
}

fn min_sep_coords<S: Scalar>(sys: &MassSystem<S>, x: &[S]) -> S {
    let d = sys.dim();
    let n = sys.n_bodies();
    let mut best = S::infinity();
    for i in 0..n {
        for j in i + 1..n {
            best = best.min(crate::configuration::euclid_dist(
                &x[i * d..(i + 1) * d],
                &x[j * d..(j + 1) * d],
            ));
        }
    }
    best
}

/// Pointwise series along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSeries<S> {
    pub times: Vec<S>,
    pub inertia: Vec<S>,
    /// `I' = 2 x . v`.
    pub inertia_rate: Vec<S>,
    pub potential: Vec<S>,
    pub kinetic: Vec<S>,
    /// `g = I' I^(-1/4)`.
    pub g: Vec<S>,
    /// `h = T - U`.
    pub energy: Vec<S>,
    /// `|G(x(t)) - G(x(t0))|`.
    pub com_drift: Vec<S>,
}

impl<S: Scalar> DiagnosticsSeries<S> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn diagnostics<S: Scalar>(sys: &MassSystem<S>, traj: &Trajectory<S>) -> Result<DiagnosticsSeries<S>> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let n = traj.len();
    let g0 = sys.center_of_mass(&traj.positions[0])?;
    let mut s = DiagnosticsSeries {
        times: traj.times.clone(),
        inertia: Vec::with_capacity(n),
        inertia_rate: Vec::with_capacity(n),
        potential: Vec::with_capacity(n),
        kinetic: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        energy: Vec::with_capacity(n),
        com_drift: Vec::with_capacity(n),
    };
    for (x, v) in traj.positions.iter().zip(&traj.velocities) {
        let i = sys.moment_of_inertia(x)?;
        let idot = S::lit(2.0) * sys.mass_inner(x, v)?;
        let u = sys.potential(x)?;
        let t = sys.kinetic(v)?;
        let g = sys.center_of_mass(x)?;
        s.inertia.push(i);
        s.inertia_rate.push(idot);
        s.potential.push(u);
        s.kinetic.push(t);
        s.g.push(idot * i.powf(S::lit(-0.25)));
        s.energy.push(t - u);
        s.com_drift.push(
            g.iter()
                .zip(&g0)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<S>()
                .sqrt(),
        );
    }
    Ok(s)
}

/// `max_k |I''_fd - 2U - 4h| / max(1, max 2U)` over interior samples, with
/// `I''_fd` the three-point second difference (non-uniform grids allowed).
pub fn lagrange_jacobi_residual<S: Scalar>(series: &DiagnosticsSeries<S>) -> Result<S> {
    let n = series.len();
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "need at least 5 samples, got {n}"
        )));
    }
    let two = S::lit(2.0);
    let t = &series.times;
    let i = &series.inertia;
    let mut worst = S::zero();
    for k in 1..n - 1 {
        let h1 = t[k] - t[k - 1];
        let h2 = t[k + 1] - t[k];
        let idd = two * ((i[k + 1] - i[k]) / h2 - (i[k] - i[k - 1]) / h1) / (h1 + h2);
        let r = (idd - two * series.potential[k] - S::lit(4.0) * series.energy[k]).abs();
        worst = worst.max(r);
    }
    let norm = series
        .potential
        .iter()
        .fold(S::one(), |m, &u| m.max(two * u));
    Ok(worst / norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GMonotonicity<S> {
    pub min_increment: S,
    pub is_nondecreasing: bool,
}

/// Smallest consecutive increment of `g`; nondecreasing iff it is `>= -tol_g`.
pub fn g_monotonicity<S: Scalar>(series: &DiagnosticsSeries<S>, tol_g: S) -> GMonotonicity<S> {
    let min_increment = series
        .g
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(S::infinity(), S::min);
    GMonotonicity {
        min_increment,
        is_nondecreasing: min_increment >= -tol_g,
    }
}

/// Least-squares fit `value ~ coefficient * t^exponent` in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit<S> {
    pub exponent: S,
    pub coefficient: S,
    pub r_squared: S,
    pub window: (S, S),
    pub samples: usize,
}

pub fn fit_power_law<S: Scalar>(times: &[S], values: &[S], window: (S, S)) -> Result<PowerLawFit<S>> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} values", times.len()),
            found: format!("{}", values.len()),
        });
    }
    let pts: Vec<(S, S)> = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(&t, &v)| (t, v))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 samples in the window, got {}",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(t, v)| !(*v > S::zero()) || !(*t > S::zero())) {
        return Err(Error::InvalidArgument(format!(
            "non-positive sample ({t}, {v}) in the fit window"
        )));
    }
    let n = S::from_usize_lossy(pts.len());
    let logs: Vec<(S, S)> = pts.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<S>() / n;
    let my = logs.iter().map(|p| p.1).sum::<S>() / n;
    let sxx = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<S>();
    let sxy = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<S>();
    let syy = logs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<S>();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > S::zero() {
        (sxy * sxy / (sxx * syy)).min(S::one())
    } else {
        S::one()
    };
    Ok(PowerLawFit {
        exponent: slope,
        coefficient: intercept.exp(),
        r_squared,
        window,
        samples: pts.len(),
    })
}

/// Default fit window: the last half of the time span.
pub fn tail_window<S: Scalar>(times: &[S]) -> (S, S) {
    let (a, b) = (times[0], times[times.len() - 1]);
    (a + (b - a) * S::lit(0.5), b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicReport<S> {
    /// Largest kinetic energy over the tail.
    pub t_tail_max: S,
    /// True when `T` strictly decreases across the tail samples.
    pub decreasing: bool,
    pub tail_start: S,
}

pub fn parabolic_diagnostic<S: Scalar>(
    series: &DiagnosticsSeries<S>,
    tail_fraction: S,
) -> Result<ParabolicReport<S>> {
    if !(tail_fraction > S::zero() && tail_fraction < S::one()) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must be in (0, 1), got {tail_fraction}"
        )));
    }
    let n = series.len();
    let count = (S::from_usize_lossy(n) * tail_fraction)
        .ceil()
        .to_usize()
        .unwrap_or(0)
        .min(n);
    if count < 2 {
        return Err(Error::InvalidArgument("tail window has fewer than 2 samples".into()));
    }
    let tail = &series.kinetic[n - count..];
    Ok(ParabolicReport {
        t_tail_max: tail.iter().copied().fold(S::neg_infinity(), S::max),
        decreasing: tail.windows(2).all(|w| w[1] < w[0]),
        tail_start: series.times[n - count],
    })
}
