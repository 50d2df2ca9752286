//! Configuration-space primitives.
//!
//! A configuration `x = (r_1, ..., r_N)` is stored row-major as an `N x d`
//! matrix. The mass inner product `x . y = sum m_i <r_i, s_i>` is the only
//! metric used in the crate: norms, gradients and distances between
//! configurations are all taken with respect to it.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative threshold below which two bodies are treated as collided.
pub const COLLISION_REL_TOL: f64 = 1e-12;

/// Masses of the bodies and the dimension of the ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct MassSystem<S> {
    masses: Vec<S>,
    dim: usize,
    total_mass: S,
    min_mass: S,
}

/// Positions (or velocities) of all bodies.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration<S> {
    n: usize,
    dim: usize,
    coords: Vec<S>,
}

/// `x = rho * u` with `rho = I(x)^(1/2)` and `I(u) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarDecomposition<S> {
    pub rho: S,
    pub u: Configuration<S>,
}

impl<S: Scalar> Configuration<S> {
    pub fn new(n: usize, dim: usize, coords: Vec<S>) -> Result<Self> {
        if coords.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{n}x{dim} = {} coordinates", n * dim),
                found: format!("{} coordinates", coords.len()),
            });
        }
        Ok(Self { n, dim, coords })
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            n,
            dim,
            coords: vec![S::zero(); n * dim],
        }
    }

    /// Builds a configuration from one row per body.
    pub fn from_rows<R: AsRef<[S]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut coords = Vec::with_capacity(n * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: format!("{dim} coordinates for body {i}"),
                    found: format!("{}", row.len()),
                });
            }
            coords.extend_from_slice(row);
        }
        Ok(Self { n, dim, coords })
    }

    pub fn n_bodies(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [S] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<S> {
        self.coords
    }

    pub fn body(&self, i: usize) -> &[S] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn body_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.coords.chunks_exact(self.dim.max(1))
    }

    pub fn scaled(&self, lambda: S) -> Self {
        self.map(|c| c * lambda)
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            n: self.n,
            dim: self.dim,
            coords: self.coords.iter().map(|&c| f(c)).collect(),
        }
    }

    /// `self + alpha * other`, shapes assumed equal.
    pub fn axpy(&self, alpha: S, other: &Self) -> Self {
        debug_assert_eq!(self.coords.len(), other.coords.len());
        Self {
            n: self.n,
            dim: self.dim,
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-S::one(), other)
    }

    /// Adds the same vector `c` to every body.
    pub fn translated(&self, c: &[S]) -> Self {
        let mut out = self.clone();
        for row in out.coords.chunks_exact_mut(self.dim) {
            for (r, &ck) in row.iter_mut().zip(c) {
                *r = *r + ck;
            }
        }
        out
    }

    /// Linear interpolation `(1 - s) self + s other`.
    pub fn lerp(&self, other: &Self, s: S) -> Self {
        Self {
            n: self.n,
            dim: self.dim,
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| a + s * (b - a))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// Largest per-body Euclidean displacement `max_i |r_i - s_i|`.
    pub fn max_body_distance(&self, other: &Self) -> S {
        self.coords
            .chunks_exact(self.dim)
            .zip(other.coords.chunks_exact(self.dim))
            .map(|(a, b)| euclid_dist(a, b))
            .fold(S::zero(), S::max)
    }

    /// Largest Euclidean norm of a body position, `max_i |r_i|`.
    pub fn max_body_norm(&self) -> S {
        self.rows()
            .map(|r| r.iter().map(|&c| c * c).sum::<S>().sqrt())
            .fold(S::zero(), S::max)
    }

    /// Smallest pairwise Euclidean distance between bodies.
    pub fn min_separation(&self) -> S {
        let mut best = S::infinity();
        for i in 0..self.n {
            for j in i + 1..self.n {
                best = best.min(euclid_dist(self.body(i), self.body(j)));
            }
        }
        best
    }
}

#[inline]
pub(crate) fn euclid_dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| (p - q) * (p - q))
        .sum::<S>()
        .sqrt()
}

impl<S: Scalar> MassSystem<S> {
    pub fn new(masses: Vec<S>, dim: usize) -> Result<Self> {
        if masses.len() < 2 {
            return Err(Error::InvalidMassSystem(format!(
                "need at least 2 bodies, got {}",
                masses.len()
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidMassSystem("dimension must be >= 1".into()));
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m > S::zero()))
        {
            return Err(Error::InvalidMassSystem(format!(
                "mass {i} must be positive and finite, got {m}"
            )));
        }
        let total_mass = masses.iter().copied().sum();
        let min_mass = masses.iter().copied().fold(S::infinity(), S::min);
        Ok(Self {
            masses,
            dim,
            total_mass,
            min_mass,
        })
    }

    /// `n` unit masses.
    pub fn equal(n: usize, dim: usize) -> Result<Self> {
        Self::new(vec![S::one(); n], dim)
    }

    pub fn masses(&self) -> &[S] {
        &self.masses
    }

    pub fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_mass(&self) -> S {
        self.total_mass
    }

    pub fn min_mass(&self) -> S {
        self.min_mass
    }

    /// Number of scalar coordinates of a configuration, `N * d`.
    pub fn n_coords(&self) -> usize {
        self.masses.len() * self.dim
    }

    pub fn check(&self, x: &Configuration<S>) -> Result<()> {
        if x.n != self.masses.len() || x.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.masses.len(), self.dim),
                found: format!("{}x{}", x.n, x.dim),
            });
        }
        Ok(())
    }

    pub fn zeros(&self) -> Configuration<S> {
        Configuration::zeros(self.n_bodies(), self.dim)
    }

    pub fn configuration(&self, coords: Vec<S>) -> Result<Configuration<S>> {
        Configuration::new(self.n_bodies(), self.dim, coords)
    }

    /// Newtonian potential `U(x) = sum_{i<j} m_i m_j / |r_ij|`.
    ///
    /// Returns `+inf` on a collision instead of failing, so that action
    /// evaluation stays total.
    pub fn potential(&self, x: &Configuration<S>) -> Result<S> {
        self.check(x)?;
        Ok(self.potential_coords(x.coords()))
    }

    pub(crate) fn potential_coords(&self, c: &[S]) -> S {
        let d = self.dim;
        let thresh = self.collision_threshold(c);
        let mut u = S::zero();
        for i in 0..self.masses.len() {
            let ri = &c[i * d..(i + 1) * d];
            for j in i + 1..self.masses.len() {
                let r = euclid_dist(ri, &c[j * d..(j + 1) * d]);
                if r <= thresh {
                    return S::infinity();
                }
                u = u + self.masses[i] * self.masses[j] / r;
            }
        }
        u
    }

    fn collision_threshold(&self, c: &[S]) -> S {
        S::lit(COLLISION_REL_TOL) * (S::one() + self.inner_coords(c, c).sqrt())
    }

    /// Kinetic energy `T(v) = 1/2 sum m_i |v_i|^2`.
    pub fn kinetic(&self, v: &Configuration<S>) -> Result<S> {
        self.check(v)?;
        Ok(S::lit(0.5) * self.inner_coords(v.coords(), v.coords()))
    }

    /// Moment of inertia about the origin, `I(x) = x . x`.
    pub fn moment_of_inertia(&self, x: &Configuration<S>) -> Result<S> {
        self.check(x)?;
        Ok(self.inner_coords(x.coords(), x.coords()))
    }

    /// Mass inner product `x . y = sum m_i <r_i, s_i>`.
    pub fn mass_inner(&self, x: &Configuration<S>, y: &Configuration<S>) -> Result<S> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.inner_coords(x.coords(), y.coords()))
    }

    /// Norm induced by the mass inner product.
    pub fn mass_norm(&self, x: &Configuration<S>) -> Result<S> {
        Ok(self.moment_of_inertia(x)?.sqrt())
    }

    pub(crate) fn inner_coords(&self, a: &[S], b: &[S]) -> S {
        let d = self.dim;
        self.masses
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let s: S = a[i * d..(i + 1) * d]
                    .iter()
                    .zip(&b[i * d..(i + 1) * d])
                    .map(|(&p, &q)| p * q)
                    .sum();
                m * s
            })
            .sum()
    }

    /// Weighted barycenter `G(x) = M^-1 sum m_i r_i`.
    pub fn center_of_mass(&self, x: &Configuration<S>) -> Result<Vec<S>> {
        self.check(x)?;
        Ok(self.com_coords(x.coords()))
    }

    pub(crate) fn com_coords(&self, c: &[S]) -> Vec<S> {
        let d = self.dim;
        let mut g = vec![S::zero(); d];
        for (i, &m) in self.masses.iter().enumerate() {
            for k in 0..d {
                g[k] = g[k] + m * c[i * d + k];
            }
        }
        g.iter().map(|&v| v / self.total_mass).collect()
    }

    /// Translates `x` so that its center of mass is at the origin.
    pub fn centered(&self, x: &Configuration<S>) -> Result<Configuration<S>> {
        let g = self.center_of_mass(x)?;
        let neg: Vec<S> = g.iter().map(|&v| -v).collect();
        Ok(x.translated(&neg))
    }

    /// Gradient of `U` with respect to the mass inner product, i.e. the
    /// Newtonian acceleration field `(grad U)_i = sum_{j != i} m_j r_ji / |r_ij|^3`.
    pub fn grad_potential(&self, x: &Configuration<S>) -> Result<Configuration<S>> {
        self.check(x)?;
        let mut out = self.zeros();
        self.accel_coords(x.coords(), out.coords_mut())?;
        Ok(out)
    }

    /// Writes the acceleration field of `c` into `acc`.
    pub(crate) fn accel_coords(&self, c: &[S], acc: &mut [S]) -> Result<()> {
        let d = self.dim;
        let n = self.masses.len();
        let thresh = self.collision_threshold(c);
        acc.iter_mut().for_each(|a| *a = S::zero());
        for i in 0..n {
            for j in i + 1..n {
                let mut r2 = S::zero();
                for k in 0..d {
                    let dk = c[j * d + k] - c[i * d + k];
                    r2 = r2 + dk * dk;
                }
                let r = r2.sqrt();
                if r <= thresh {
                    return Err(Error::Collision { i, j });
                }
                let inv3 = S::one() / (r2 * r);
                for k in 0..d {
                    let dk = (c[j * d + k] - c[i * d + k]) * inv3;
                    acc[i * d + k] = acc[i * d + k] + self.masses[j] * dk;
                    acc[j * d + k] = acc[j * d + k] - self.masses[i] * dk;
                }
            }
        }
        Ok(())
    }

    /// True when some pair of bodies is closer than the collision tolerance.
    pub fn has_collision(&self, x: &Configuration<S>) -> Result<bool> {
        self.check(x)?;
        Ok(x.min_separation() <= self.collision_threshold(x.coords()))
    }

    /// `x = rho u` with `rho = I(x)^(1/2)`.
    pub fn polar_decompose(&self, x: &Configuration<S>) -> Result<PolarDecomposition<S>> {
        let i = self.moment_of_inertia(x)?;
        if !(i > S::zero()) {
            return Err(Error::TotalCollision);
        }
        let rho = i.sqrt();
        Ok(PolarDecomposition {
            rho,
            u: x.scaled(S::one() / rho),
        })
    }
}

impl<S: Scalar> PolarDecomposition<S> {
    pub fn reconstruct(&self) -> Configuration<S> {
        self.u.scaled(self.rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(sys: &MassSystem<f64>, rng: &mut ChaCha8Rng) -> Configuration<f64> {
        let coords = (0..sys.n_coords()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        sys.configuration(coords).unwrap()
    }

    #[test]
    fn rejects_bad_mass_systems() {
        assert!(MassSystem::<f64>::new(vec![1.0], 2).is_err());
        assert!(MassSystem::<f64>::new(vec![1.0, 0.0], 2).is_err());
        assert!(MassSystem::<f64>::new(vec![1.0, -1.0], 2).is_err());
        assert!(MassSystem::<f64>::new(vec![1.0, 1.0], 0).is_err());
        let sys = MassSystem::new(vec![2.0, 0.5, 3.0], 3).unwrap();
        assert_eq!(sys.total_mass(), 5.5);
        assert_eq!(sys.min_mass(), 0.5);
    }

    #[test]
    fn potential_examples() {
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        let x = Configuration::from_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(sys.potential(&x).unwrap(), 1.0);

        let sys3 = MassSystem::<f64>::equal(3, 2).unwrap();
        let h = 3f64.sqrt() / 2.0;
        let tri = Configuration::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]]).unwrap();
        assert_relative_eq!(sys3.potential(&tri).unwrap(), 3.0, max_relative = 1e-15);

        let coll = Configuration::from_rows(&[[0.3, 0.1], [0.3, 0.1]]).unwrap();
        assert!(sys.potential(&coll).unwrap().is_infinite());
        assert!(sys.has_collision(&coll).unwrap());
        assert!(matches!(
            sys.grad_potential(&coll),
            Err(Error::Collision { i: 0, j: 1 })
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        let x = Configuration::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(sys.potential(&x), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(sys.kinetic(&x), Err(Error::DimensionMismatch { .. })));
        assert!(Configuration::<f64>::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn kinetic_examples() {
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        assert_eq!(sys.kinetic(&sys.zeros()).unwrap(), 0.0);
        let v = Configuration::from_rows(&[[2.0, 0.0], [0.0, 0.0]]).unwrap();
        assert_eq!(sys.kinetic(&v).unwrap(), 2.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_config(&sys, &mut rng);
        let t = sys.kinetic(&v).unwrap();
        assert_relative_eq!(sys.kinetic(&v.scaled(3.0)).unwrap(), 9.0 * t, max_relative = 1e-14);
    }

    #[test]
    fn inertia_examples() {
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        let s = 0.5f64.sqrt();
        let x = Configuration::from_rows(&[[s, 0.0], [-s, 0.0]]).unwrap();
        assert_relative_eq!(sys.moment_of_inertia(&x).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(
            sys.moment_of_inertia(&x.scaled(2.0)).unwrap(),
            4.0,
            max_relative = 1e-15
        );

        let sys = MassSystem::new(vec![1.0, 2.5, 0.7], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_config(&sys, &mut rng);
        let y = random_config(&sys, &mut rng);
        assert_eq!(sys.mass_inner(&x, &x).unwrap(), sys.moment_of_inertia(&x).unwrap());
        assert_eq!(sys.mass_inner(&x, &y).unwrap(), sys.mass_inner(&y, &x).unwrap());
    }

    #[test]
    fn center_of_mass_examples() {
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        let x = Configuration::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
        assert_eq!(sys.center_of_mass(&x).unwrap(), vec![0.0, 0.0]);

        let sys = MassSystem::new(vec![1.0, 3.0], 2).unwrap();
        let x = Configuration::from_rows(&[[0.0, 0.0], [4.0, 0.0]]).unwrap();
        assert_eq!(sys.center_of_mass(&x).unwrap(), vec![3.0, 0.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_config(&sys, &mut rng);
        let g = sys.center_of_mass(&x).unwrap();
        let g2 = sys.center_of_mass(&x.scaled(2.0)).unwrap();
        for k in 0..2 {
            assert_relative_eq!(g2[k], 2.0 * g[k], max_relative = 1e-14);
        }
        let c = [0.3, -1.7];
        let gt = sys.center_of_mass(&x.translated(&c)).unwrap();
        for k in 0..2 {
            assert_relative_eq!(gt[k], g[k] + c[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn two_body_acceleration() {
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        let x = Configuration::from_rows(&[[0.5, 0.0], [-0.5, 0.0]]).unwrap();
        let a = sys.grad_potential(&x).unwrap();
        assert_eq!(a.body(0), &[-1.0, 0.0]);
        assert_eq!(a.body(1), &[1.0, 0.0]);
    }

    #[test]
    fn total_momentum_of_forces_vanishes() {
        let sys = MassSystem::new(vec![1.0, 2.0, 0.5, 4.0], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let x = random_config(&sys, &mut rng);
            let a = sys.grad_potential(&x).unwrap();
            let p = sys.com_coords(a.coords());
            let scale = a.coords().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for pk in p {
                assert!(pk.abs() <= 1e-13 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let sys = MassSystem::new(vec![1.0, 2.0, 0.5], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = random_config(&sys, &mut rng);
            let w = random_config(&sys, &mut rng);
            let g = sys.grad_potential(&x).unwrap();
            let analytic = sys.mass_inner(&g, &w).unwrap();
            let h = 1e-5;
            let up = sys.potential(&x.axpy(h, &w)).unwrap();
            let dn = sys.potential(&x.axpy(-h, &w)).unwrap();
            let fd = (up - dn) / (2.0 * h);
            assert!(
                (fd - analytic).abs() <= 1e-6 * analytic.abs().max(1e-3),
                "fd {fd} analytic {analytic}"
            );
        }
    }

    #[test]
    fn polar_decomposition_examples() {
        let sys = MassSystem::<f64>::equal(2, 2).unwrap();
        let s = 0.5f64.sqrt();
        let unit = Configuration::from_rows(&[[s, 0.0], [-s, 0.0]]).unwrap();
        let x = unit.scaled(2.0);
        let p = sys.polar_decompose(&x).unwrap();
        assert_relative_eq!(p.rho, 2.0, max_relative = 1e-15);
        for (a, b) in p.u.coords().iter().zip(x.scaled(0.5).coords()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-15);
        }
        let p1 = sys.polar_decompose(&unit).unwrap();
        assert_relative_eq!(p1.rho, 1.0, max_relative = 1e-15);

        assert_eq!(sys.polar_decompose(&sys.zeros()), Err(Error::TotalCollision));
    }

    #[test]
    fn generic_over_f32() {
        let sys = MassSystem::<f32>::equal(2, 2).unwrap();
        let x = Configuration::from_rows(&[[0.0f32, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(sys.potential(&x).unwrap(), 0.5f32);
        assert_eq!(sys.moment_of_inertia(&x).unwrap(), 4.0f32);
    }
}
