//! Seeded instance generators with known ground truth.
//!
//! Feasible instances are built around an interior point `x*` whose robust
//! slack is exactly `margin` in every constraint. Infeasible instances
//! contain constraints whose weighted combination exceeds `margin` at every
//! point and every noise value.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    quad_form_coefficients, Family, GroundTruth, Instance, RobustLpInstance, RobustQpInstance, RobustSdpInstance,
};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_dot, symmetrize, vectorize};
use crate::trustregion::{trs_max_on_ball, TrsProblem};
use crate::uncertainty::{sample_ball, BallSet};

/// Radius of the ball the planted point is drawn from.
const PLANTED_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Decision dimension (matrix side for SDP).
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub sigma: f64,
    pub margin: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.k == 0 {
            return Err(Error::InvalidArgument("n, m and k must be positive".into()));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "margin must be positive, got {}",
                self.margin
            )));
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn with_norm(m: DMatrix<f64>, target: f64) -> DMatrix<f64> {
    let norm = m.norm();
    if norm == 0.0 {
        m
    } else {
        m * (target / norm)
    }
}

fn unit_vector(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = gaussian_vector(len, rng);
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Noise matrices with `sum_k ||P_k||_F^2 = sigma^2`.
fn noise_matrices(n: usize, k: usize, sigma: f64, symmetric: bool, rng: &mut ChaCha8Rng) -> Vec<DMatrix<f64>> {
    let raw: Vec<DMatrix<f64>> = (0..k)
        .map(|_| {
            let g = gaussian_matrix(n, n, rng);
            if symmetric {
                symmetrize(&g)
            } else {
                g
            }
        })
        .collect();
    let total = raw.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    raw.into_iter()
        .map(|m| if total == 0.0 { m } else { m * (sigma / total) })
        .collect()
}

fn planted_point(dim: usize, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    Ok(sample_ball(&BallSet::new(dim, PLANTED_RADIUS)?, rng))
}

fn feasible_truth(margin: f64, point: &DVector<f64>) -> GroundTruth {
    GroundTruth {
        robust_feasible: true,
        margin,
        point: Some(point.iter().copied().collect()),
    }
}

fn infeasible_truth(margin: f64) -> GroundTruth {
    GroundTruth {
        robust_feasible: false,
        margin,
        point: None,
    }
}

pub fn feasible_lp(cfg: &GeneratorConfig) -> Result<RobustLpInstance> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let x_star = planted_point(cfg.n, &mut rng)?;
    let a: Vec<DVector<f64>> = (0..cfg.m).map(|_| unit_vector(cfg.n, &mut rng)).collect();
    let p = with_norm(gaussian_matrix(cfg.n, cfg.k, &mut rng), cfg.sigma);
    let spread = p.tr_mul(&x_star).norm();
    let b = a.iter().map(|ai| ai.dot(&x_star) + spread + cfg.margin).collect();
    Ok(RobustLpInstance::new(a, b, p)?.with_ground_truth(feasible_truth(cfg.margin, &x_star)))
}

pub fn feasible_qp(cfg: &GeneratorConfig) -> Result<RobustQpInstance> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let x_star = planted_point(cfg.n, &mut rng)?;
    let a: Vec<DMatrix<f64>> = (0..cfg.m)
        .map(|_| with_norm(gaussian_matrix(cfg.n, cfg.n, &mut rng), 1.0))
        .collect();
    let b: Vec<DVector<f64>> = (0..cfg.m).map(|_| unit_vector(cfg.n, &mut rng) * 0.5).collect();
    let p = noise_matrices(cfg.n, cfg.k, cfg.sigma, false, &mut rng);
    // Build with c = 0, then shift each c_i by the certified worst case at x*.
    let draft = RobustQpInstance::new(a.clone(), b.clone(), vec![0.0; cfg.m], p.clone())?;
    let c = (0..cfg.m)
        .map(|i| {
            let qf = quad_form_coefficients(&draft, i, &x_star);
            let tolerance = 1e-10 * (1.0 + qf.q.norm() + qf.r.norm());
            let worst = trs_max_on_ball(&TrsProblem::new(qf.q, qf.r, tolerance)?)?.dual_bound;
            Ok(worst + qf.s + cfg.margin)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RobustQpInstance::new(a, b, c, p)?.with_ground_truth(feasible_truth(cfg.margin, &x_star)))
}

pub fn feasible_sdp(cfg: &GeneratorConfig) -> Result<RobustSdpInstance> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let n = cfg.n;
    let g = gaussian_matrix(n, n, &mut rng);
    let x_star = with_norm(&g * g.transpose(), PLANTED_RADIUS);
    let a: Vec<DMatrix<f64>> = (0..cfg.m)
        .map(|_| with_norm(symmetrize(&gaussian_matrix(n, n, &mut rng)), 1.0))
        .collect();
    let p = noise_matrices(n, cfg.k, cfg.sigma, true, &mut rng);
    let spread = p
        .iter()
        .map(|pk| frobenius_dot(pk, &x_star).powi(2))
        .sum::<f64>()
        .sqrt();
    let b = a
        .iter()
        .map(|ai| frobenius_dot(ai, &x_star) + spread + cfg.margin)
        .collect();
    Ok(RobustSdpInstance::new(a, b, p)?.with_ground_truth(feasible_truth(cfg.margin, &vectorize(&x_star))))
}

/// LP whose first two constraints are `±e · x <= -(sigma + margin)`:
/// averaging them leaves at most `||P||_F = sigma` to offset `sigma + margin`.
pub fn infeasible_lp(cfg: &GeneratorConfig) -> Result<RobustLpInstance> {
    require_pair(cfg)?;
    let base = feasible_lp(&GeneratorConfig {
        seed: cfg.seed ^ 1,
        ..*cfg
    })?;
    let mut rng = cfg.rng();
    let e = unit_vector(cfg.n, &mut rng);
    let mut a: Vec<DVector<f64>> = (0..cfg.m).map(|i| base.nominal(i).clone()).collect();
    let mut b = base.offsets().to_vec();
    let shift = base.sigma() + cfg.margin;
    a[0] = e.clone();
    a[1] = -e;
    b[0] = -shift;
    b[1] = -shift;
    Ok(RobustLpInstance::new(a, b, base.noise_shape().clone())?.with_ground_truth(infeasible_truth(cfg.margin)))
}

/// QCQP whose first two constraints pull `x` in opposite directions:
/// `||M x||^2 ∓ e · x + margin <= 0`, whose average is at least `margin`.
pub fn infeasible_qp(cfg: &GeneratorConfig) -> Result<RobustQpInstance> {
    require_pair(cfg)?;
    let base = feasible_qp(&GeneratorConfig {
        seed: cfg.seed ^ 1,
        ..*cfg
    })?;
    let mut rng = cfg.rng();
    let e = unit_vector(cfg.n, &mut rng);
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..cfg.m {
        let (ai, bi, ci) = base.nominal(i);
        a.push(ai.clone());
        b.push(bi.clone());
        c.push(ci);
    }
    b[0] = e.clone();
    b[1] = -e;
    c[0] = -cfg.margin;
    c[1] = -cfg.margin;
    Ok(RobustQpInstance::new(a, b, c, base.noise_matrices().to_vec())?.with_ground_truth(infeasible_truth(cfg.margin)))
}

/// SDP whose first constraint demands `tr X`-like mass no point of the
/// domain has: `(-I + sum u_k P_k) • X <= -(sqrt(n) + sigma + margin)`.
pub fn infeasible_sdp(cfg: &GeneratorConfig) -> Result<RobustSdpInstance> {
    let base = feasible_sdp(&GeneratorConfig {
        seed: cfg.seed ^ 1,
        ..*cfg
    })?;
    let n = cfg.n;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..cfg.m {
        let (ai, bi) = base.nominal(i);
        a.push(ai.clone());
        b.push(bi);
    }
    a[0] = -DMatrix::identity(n, n);
    b[0] = -((n as f64).sqrt() + base.sigma() + cfg.margin);
    Ok(RobustSdpInstance::new(a, b, base.noise_matrices().to_vec())?.with_ground_truth(infeasible_truth(cfg.margin)))
}

fn require_pair(cfg: &GeneratorConfig) -> Result<()> {
    if cfg.m < 2 {
        return Err(Error::InvalidArgument(
            "infeasible instances need at least two constraints".into(),
        ));
    }
    Ok(())
}

pub fn feasible(family: Family, cfg: &GeneratorConfig) -> Result<Instance> {
    Ok(match family {
        Family::Lp => Instance::Lp(feasible_lp(cfg)?),
        Family::Qp => Instance::Qp(feasible_qp(cfg)?),
        Family::Sdp => Instance::Sdp(feasible_sdp(cfg)?),
    })
}

pub fn infeasible(family: Family, cfg: &GeneratorConfig) -> Result<Instance> {
    Ok(match family {
        Family::Lp => Instance::Lp(infeasible_lp(cfg)?),
        Family::Qp => Instance::Qp(infeasible_qp(cfg)?),
        Family::Sdp => Instance::Sdp(infeasible_sdp(cfg)?),
    })
}
