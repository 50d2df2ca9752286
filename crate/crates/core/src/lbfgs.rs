//! Limited-memory BFGS with a user-supplied initial inverse Hessian and a
//! backtracking line search that can veto steps (collision guard).

use std::collections::VecDeque;

use crate::scalar::Scalar;

pub(crate) trait Objective<S: Scalar> {
    /// Value at `x`, writing the gradient into `grad`. `None` when `x` lies on
    /// a singularity of the objective.
    fn value_grad(&self, x: &[S], grad: &mut [S]) -> Option<S>;

    /// Applies the initial inverse-Hessian approximation in place.
    fn precondition(&self, _v: &mut [S]) {}

    /// Smallest separation-like quantity guarded by the line search.
    fn guard_margin(&self, _x: &[S]) -> S {
        S::infinity()
    }

    fn guard(&self) -> S {
        S::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Converged,
    MaxIters,
    /// No acceptable step; `guard_limited` when the collision guard vetoed it.
    Stalled { guard_limited: bool },
    /// The starting point is already singular or outside the guard.
    InfeasibleStart,
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome<S> {
    pub x: Vec<S>,
    pub value: S,
    pub grad_norm: S,
    pub iterations: usize,
    pub min_margin: S,
    pub status: Status,
}

pub(crate) struct Settings<S> {
    pub max_iters: usize,
    pub grad_tol: S,
    pub memory: usize,
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&p, &q)| p * q).sum()
}

pub(crate) fn minimize<S: Scalar, O: Objective<S>>(
    obj: &O,
    x0: Vec<S>,
    settings: &Settings<S>,
) -> Outcome<S> {
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![S::zero(); n];
    let mut min_margin = obj.guard_margin(&x);
    let value = match obj.value_grad(&x, &mut g) {
        Some(v) if v.is_finite() && min_margin >= obj.guard() => v,
        _ => {
            return Outcome {
                x,
                value: S::infinity(),
                grad_norm: S::infinity(),
                iterations: 0,
                min_margin,
                status: Status::InfeasibleStart,
            }
        }
    };
    let mut f = value;
    let mut gnorm = dot(&g, &g).sqrt();
    let mut history: VecDeque<(Vec<S>, Vec<S>, S)> = VecDeque::with_capacity(settings.memory);
    let c1 = S::lit(1e-4);
    let mut x_new = vec![S::zero(); n];
    let mut g_new = vec![S::zero(); n];

    for iter in 0..settings.max_iters {
        if gnorm <= settings.grad_tol {
            return Outcome {
                x,
                value: f,
                grad_norm: gnorm,
                iterations: iter,
                min_margin,
                status: Status::Converged,
            };
        }

        let mut d = two_loop(obj, &g, &history);
        let mut slope = dot(&g, &d);
        if !(slope < S::zero()) {
            history.clear();
            d = g.iter().map(|&v| -v).collect();
            obj.precondition(&mut d);
            slope = dot(&g, &d);
        }

        // weak Wolfe search by bisection/expansion; the guard and
        // singularities act as upper bounds on the step
        let c2 = S::lit(0.9);
        let mut alpha = S::one();
        let (mut lo, mut hi) = (S::zero(), S::infinity());
        let mut fallback: Option<(S, S, S)> = None;
        let mut accepted = false;
        let mut guard_hit = false;
        let roundoff = S::lit(64.0) * S::epsilon() * f.abs().max(S::one());
        for _ in 0..60 {
            for ((xn, &xi), &di) in x_new.iter_mut().zip(&x).zip(&d) {
                *xn = xi + alpha * di;
            }
            let margin = obj.guard_margin(&x_new);
            let fv = if margin < obj.guard() {
                guard_hit = true;
                None
            } else {
                match obj.value_grad(&x_new, &mut g_new) {
                    Some(fv) if fv.is_finite() => Some(fv),
                    _ => {
                        guard_hit = true;
                        None
                    }
                }
            };
            let mut take = false;
            match fv {
                Some(fv) if fv <= f + c1 * alpha * slope => {
                    if dot(&g_new, &d) >= c2 * slope {
                        take = true;
                    } else {
                        fallback = Some((alpha, fv, margin));
                        lo = alpha;
                    }
                }
                Some(fv) => {
                    // Near the optimum the decrease drops below the rounding
                    // level of f; accept steps that still shrink the gradient.
                    if fv <= f + roundoff && dot(&g_new, &g_new).sqrt() < gnorm {
                        take = true;
                    } else {
                        hi = alpha;
                    }
                }
                None => hi = alpha,
            }
            if take {
                fallback = Some((alpha, fv.unwrap_or(f), margin));
                accepted = true;
                break;
            }
            alpha = if hi.is_finite() {
                S::lit(0.5) * (lo + hi)
            } else {
                S::lit(2.0) * alpha
            };
            if hi.is_finite() && hi - lo <= S::epsilon() * hi {
                break;
            }
        }
        if !accepted {
            if let Some((a, _, _)) = fallback {
                // Armijo point without the curvature condition
                for ((xn, &xi), &di) in x_new.iter_mut().zip(&x).zip(&d) {
                    *xn = xi + a * di;
                }
                obj.value_grad(&x_new, &mut g_new);
                accepted = true;
            }
        }
        if let (true, Some((a, fv, margin))) = (accepted, fallback) {
            let s: Vec<S> = d.iter().map(|&v| a * v).collect();
            let y: Vec<S> = g_new.iter().zip(&g).map(|(&p, &q)| p - q).collect();
            let sy = dot(&s, &y);
            if sy > S::epsilon() * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                if history.len() == settings.memory {
                    history.pop_front();
                }
                history.push_back((s, y, S::one() / sy));
            }
            let step = a * dot(&d, &d).sqrt();
            let xnorm = dot(&x, &x).sqrt();
            std::mem::swap(&mut x, &mut x_new);
            std::mem::swap(&mut g, &mut g_new);
            f = fv;
            gnorm = dot(&g, &g).sqrt();
            min_margin = min_margin.min(margin);
            if guard_hit && step <= S::epsilon().sqrt() * (S::one() + xnorm) {
                return Outcome {
                    x,
                    value: f,
                    grad_norm: gnorm,
                    iterations: iter + 1,
                    min_margin,
                    status: Status::Stalled {
                        guard_limited: true,
                    },
                };
            }
            continue;
        }
        if !accepted {
            if !history.is_empty() {
                // retry once from a steepest-descent direction
                history.clear();
                continue;
            }
            return Outcome {
                x,
                value: f,
                grad_norm: gnorm,
                iterations: iter,
                min_margin,
                status: Status::Stalled {
                    guard_limited: guard_hit,
                },
            };
        }
    }
    let status = if gnorm <= settings.grad_tol {
        Status::Converged
    } else {
        Status::MaxIters
    };
    Outcome {
        x,
        value: f,
        grad_norm: gnorm,
        iterations: settings.max_iters,
        min_margin,
        status,
    }
}

fn two_loop<S: Scalar, O: Objective<S>>(
    obj: &O,
    g: &[S],
    history: &VecDeque<(Vec<S>, Vec<S>, S)>,
) -> Vec<S> {
    let mut q: Vec<S> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi = *qi - a * yi;
        }
        alphas.push(a);
    }
    obj.precondition(&mut q);
    if let Some((s, y, _)) = history.back() {
        let mut hy = y.clone();
        obj.precondition(&mut hy);
        let yhy = dot(y, &hy);
        if yhy > S::zero() {
            let gamma = dot(s, y) / yhy;
            q.iter_mut().for_each(|v| *v = *v * gamma);
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi = *qi + (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
