//! Uncertainty-set geometry.
//!
//! Every constraint draws its noise from its own copy of one set. Only the
//! Euclidean ball is implemented; the [`UncertaintySet`] trait is what the
//! solvers program against.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// Membership slack used when checking vectors this module returns.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

pub trait UncertaintySet {
    fn dim(&self) -> usize;

    fn contains(&self, u: &DVector<f64>) -> bool;

    /// Euclidean projection onto the set.
    fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>>;

    /// A maximizer of `g · u` over the set.
    fn linear_max(&self, g: &DVector<f64>) -> Result<DVector<f64>>;

    fn l2_diameter(&self) -> f64;

    /// Upper bound on the l1 diameter.
    fn l1_diameter(&self) -> f64;
}

/// `{ u in R^K : ||u||_2 <= radius }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSet {
    dimension: usize,
    radius: f64,
}

impl BallSet {
    pub fn new(dimension: usize, radius: f64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument("ball dimension must be positive".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { dimension, radius })
    }

    pub fn unit(dimension: usize) -> Result<Self> {
        Self::new(dimension, 1.0)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn check(&self, v: &DVector<f64>, what: &'static str) -> Result<()> {
        ensure_dim(self.dimension, v.len())?;
        ensure_finite(v.as_slice(), what)
    }
}

impl UncertaintySet for BallSet {
    fn dim(&self) -> usize {
        self.dimension
    }

    fn contains(&self, u: &DVector<f64>) -> bool {
        u.len() == self.dimension && u.norm() <= self.radius * (1.0 + MEMBERSHIP_TOL)
    }

    fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        project_ball(v, self)
    }

    fn linear_max(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        ball_linear_max(g, self)
    }

    fn l2_diameter(&self) -> f64 {
        2.0 * self.radius
    }

    fn l1_diameter(&self) -> f64 {
        2.0 * self.radius * (self.dimension as f64).sqrt()
    }
}

/// Euclidean projection onto the ball: radial rescaling of exterior points.
pub fn project_ball(v: &DVector<f64>, set: &BallSet) -> Result<DVector<f64>> {
    set.check(v, "project_ball input")?;
    let norm = v.norm();
    if norm <= set.radius {
        Ok(v.clone())
    } else {
        Ok(v * (set.radius / norm))
    }
}

/// Exact maximizer of `g · u` over the ball; the zero vector when `g = 0`.
pub fn ball_linear_max(g: &DVector<f64>, set: &BallSet) -> Result<DVector<f64>> {
    set.check(g, "ball_linear_max input")?;
    let norm = g.norm();
    if norm == 0.0 {
        Ok(DVector::zeros(set.dimension))
    } else {
        Ok(g * (set.radius / norm))
    }
}

/// Uniform sample on the sphere of radius `set.radius()`.
pub fn sample_sphere<R: Rng + ?Sized>(set: &BallSet, rng: &mut R) -> DVector<f64> {
    if set.dimension == 1 {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return DVector::from_element(1, sign * set.radius);
    }
    loop {
        let g = DVector::from_fn(set.dimension, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-12 {
            return g * (set.radius / norm);
        }
    }
}

/// Uniform sample from the solid ball.
pub fn sample_ball<R: Rng + ?Sized>(set: &BallSet, rng: &mut R) -> DVector<f64> {
    let direction = sample_sphere(set, rng);
    let scale = rng.random::<f64>().powf(1.0 / set.dimension as f64);
    direction * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn projection_examples() {
        let unit = BallSet::unit(2).unwrap();
        assert!((project_ball(&v(&[3.0, 4.0]), &unit).unwrap() - v(&[0.6, 0.8])).norm() < 1e-15);
        assert_eq!(project_ball(&v(&[0.1, 0.0]), &unit).unwrap(), v(&[0.1, 0.0]));
        assert_eq!(project_ball(&v(&[0.0, 0.0]), &unit).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn projection_rejects_non_finite() {
        let unit = BallSet::unit(2).unwrap();
        assert!(matches!(
            project_ball(&v(&[f64::NAN, 0.0]), &unit),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            project_ball(&v(&[1.0]), &unit),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn linear_max_examples() {
        let unit = BallSet::unit(2).unwrap();
        assert!((ball_linear_max(&v(&[3.0, 4.0]), &unit).unwrap() - v(&[0.6, 0.8])).norm() < 1e-15);
        assert_eq!(ball_linear_max(&v(&[0.0, 0.0]), &unit).unwrap(), v(&[0.0, 0.0]));
        let r2 = BallSet::new(2, 2.0).unwrap();
        assert_eq!(ball_linear_max(&v(&[-2.0, 0.0]), &r2).unwrap(), v(&[-2.0, 0.0]));
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(BallSet::new(0, 1.0).is_err());
        assert!(BallSet::new(2, 0.0).is_err());
        assert!(BallSet::new(2, f64::INFINITY).is_err());
    }

    #[test]
    fn diameters() {
        let b = BallSet::new(4, 1.5).unwrap();
        assert_eq!(b.l2_diameter(), 3.0);
        assert!((b.l1_diameter() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_sampling_one_dimensional() {
        let set = BallSet::unit(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = sample_sphere(&set, &mut rng);
            assert!(u[0] == 1.0 || u[0] == -1.0);
        }
    }

    #[test]
    fn sphere_sampling_is_deterministic() {
        let set = BallSet::unit(3).unwrap();
        let a = sample_sphere(&set, &mut ChaCha8Rng::seed_from_u64(11));
        let b = sample_sphere(&set, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_sampling_mean_is_centered() {
        let set = BallSet::unit(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut mean = DVector::zeros(2);
        for _ in 0..n {
            mean += sample_sphere(&set, &mut rng);
        }
        mean /= n as f64;
        assert!(mean.iter().all(|c| c.abs() < 0.02), "mean = {mean}");
    }

    #[test]
    fn ball_samples_are_members() {
        let set = BallSet::new(3, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            assert!(set.contains(&sample_ball(&set, &mut rng)));
        }
    }

    #[test]
    fn linear_max_beats_sphere_samples() {
        let set = BallSet::unit(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let g = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let best = g.dot(&ball_linear_max(&g, &set).unwrap());
            for _ in 0..1000 {
                let u = sample_sphere(&set, &mut rng);
                assert!(best >= g.dot(&u) - 1e-12);
            }
        }
    }

    fn finite_vec(k: usize) -> impl Strategy<Value = DVector<f64>> {
        proptest::collection::vec(-10.0f64..10.0, k).prop_map(DVector::from_vec)
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(x in finite_vec(3)) {
            let set = BallSet::unit(3).unwrap();
            let p = project_ball(&x, &set).unwrap();
            let pp = project_ball(&p, &set).unwrap();
            prop_assert!((p.clone() - pp).norm() <= 1e-12);
            prop_assert!(set.contains(&p));
        }

        #[test]
        fn projection_is_nearest(x in finite_vec(3), seed in any::<u64>()) {
            let set = BallSet::unit(3).unwrap();
            let p = project_ball(&x, &set).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let w = sample_ball(&set, &mut rng);
                prop_assert!((&x - &p).norm() <= (&x - &w).norm() + 1e-12);
            }
        }
    }
}
