//! Quadratic optimization over the unit ball (the trust-region subproblem).
//!
//! `q(u) = u^T Q u + 2 r^T u` is maximized over `||u||_2 <= 1` for any
//! symmetric `Q`, definite or not. The solver eigendecomposes `Q` and finds
//! the multiplier `mu >= max(lambda_max, 0)` of the stationarity system
//! `(mu I - Q) u = r` by bisection on the secular equation. Every answer is
//! certified by the Lagrangian dual value `mu + r^T (mu I - Q)^+ r`, which
//! upper-bounds the true maximum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

/// Relative size of the top-eigenspace component of `r` below which the
/// hard case is assumed.
pub const HARD_CASE_THRESHOLD: f64 = 1e-10;

const MAX_BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TrsProblem {
    q: DMatrix<f64>,
    r: DVector<f64>,
    tolerance: f64,
}

impl TrsProblem {
    /// `q` is symmetrized on intake.
    pub fn new(q: DMatrix<f64>, r: DVector<f64>, tolerance: f64) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::InvalidArgument("TRS matrix must be square".into()));
        }
        ensure_dim(q.nrows(), r.len())?;
        ensure_finite(q.as_slice(), "TRS matrix")?;
        ensure_finite(r.as_slice(), "TRS linear term")?;
        if !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "TRS tolerance must be positive, got {tolerance}"
            )));
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self { q, r, tolerance })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.q * u)) + 2.0 * self.r.dot(u)
    }

    fn negated(&self) -> Self {
        Self {
            q: -&self.q,
            r: -&self.r,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrsSolution {
    pub point: DVector<f64>,
    pub value: f64,
    /// Multiplier `mu` of the ball constraint.
    pub multiplier: f64,
    /// Dual bound: an upper bound on the maximum (a lower bound on the
    /// minimum for [`trs_min_on_ball`]).
    pub dual_bound: f64,
    pub on_boundary: bool,
}

/// Maximizes `q` over the unit ball to within the problem tolerance.
pub fn trs_max_on_ball(problem: &TrsProblem) -> Result<TrsSolution> {
    let k = problem.dim();
    let r_norm = problem.r.norm();
    if r_norm == 0.0 && problem.q.iter().all(|&x| x == 0.0) {
        return Ok(TrsSolution {
            point: DVector::zeros(k),
            value: 0.0,
            multiplier: 0.0,
            dual_bound: 0.0,
            on_boundary: false,
        });
    }

    let eig = SymmetricEigen::new(problem.q.clone());
    let lambdas = &eig.eigenvalues;
    let vectors = &eig.eigenvectors;
    let beta = vectors.transpose() * &problem.r;
    let lambda_max = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = problem.q.norm() + r_norm;
    let eig_tol = 1e-12 * scale.max(1.0);

    let point_at = |mu: f64, skip_top: bool| -> DVector<f64> {
        let mut u = DVector::zeros(k);
        for j in 0..k {
            let gap = mu - lambdas[j];
            if skip_top && lambdas[j] >= lambda_max - eig_tol {
                continue;
            }
            u += vectors.column(j) * (beta[j] / gap);
        }
        u
    };
    let secular = |mu: f64| -> f64 {
        (0..k)
            .map(|j| {
                let gap = mu - lambdas[j];
                if beta[j] == 0.0 {
                    0.0
                } else if gap <= 0.0 {
                    f64::INFINITY
                } else {
                    (beta[j] / gap).powi(2)
                }
            })
            .sum()
    };
    let dual_value = |mu: f64| -> f64 {
        mu + (0..k)
            .map(|j| {
                if beta[j] == 0.0 {
                    0.0
                } else {
                    beta[j] * beta[j] / (mu - lambdas[j])
                }
            })
            .sum::<f64>()
    };

    // Interior maximizer of a concave objective.
    if lambda_max < 0.0 && secular(0.0) <= 1.0 {
        let point = point_at(0.0, false);
        return certify(problem, point, 0.0, dual_value(0.0), false);
    }

    let mu_low = lambda_max.max(0.0);
    let top_beta: f64 = (0..k)
        .filter(|&j| lambdas[j] >= lambda_max - eig_tol)
        .map(|j| beta[j] * beta[j])
        .sum::<f64>()
        .sqrt();

    if lambda_max >= 0.0 && top_beta <= HARD_CASE_THRESHOLD * r_norm {
        let w = point_at(lambda_max, true);
        let w_norm_sq = w.norm_squared();
        if w_norm_sq <= 1.0 {
            let top = (0..k)
                .max_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]))
                .expect("non-empty spectrum");
            let tau = (1.0 - w_norm_sq).max(0.0).sqrt();
            let point = w + vectors.column(top) * tau;
            // Any mu above lambda_max gives a valid bound; shift by the
            // neglected top component so that term stays bounded.
            let shifted = lambda_max + top_beta;
            let bound = if top_beta == 0.0 {
                lambda_max
                    + (0..k)
                        .filter(|&j| lambdas[j] < lambda_max - eig_tol)
                        .map(|j| beta[j] * beta[j] / (lambda_max - lambdas[j]))
                        .sum::<f64>()
            } else {
                dual_value(shifted)
            };
            return certify(problem, point, lambda_max, bound, true);
        }
    }

    // Boundary solution: secular(mu) = 1 with mu in (mu_low, mu_low + ||r||].
    let mut lo = mu_low;
    // `mu_low + ||r||` brackets in exact arithmetic; widen for rounding.
    let mut width = r_norm;
    let mut hi = mu_low + width;
    for _ in 0..8 {
        if secular(hi) <= 1.0 {
            break;
        }
        width *= 2.0;
        hi = mu_low + width;
    }
    if secular(hi) > 1.0 {
        return Err(Error::Numerical(format!(
            "secular equation not bracketed on [{lo}, {hi}]"
        )));
    }
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if secular(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton polish on 1/||u(mu)|| - 1, which is nearly linear in mu.
    let mut mu = hi;
    for _ in 0..3 {
        let phi = secular(mu);
        if !phi.is_finite() || phi == 0.0 {
            break;
        }
        let dphi: f64 = (0..k)
            .map(|j| -2.0 * beta[j] * beta[j] / (mu - lambdas[j]).powi(3))
            .sum();
        let psi = 1.0 / phi.sqrt() - 1.0;
        let dpsi = -0.5 * phi.powf(-1.5) * dphi;
        if dpsi == 0.0 {
            break;
        }
        let next = mu - psi / dpsi;
        if !(next > lo && next <= hi) {
            break;
        }
        mu = next;
    }

    let mut point = point_at(mu, false);
    let norm = point.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Numerical(format!(
            "secular root finding stalled: ||u|| = {norm} at mu = {mu}"
        )));
    }
    // The maximizer lies on the sphere; rounding in mu can leave it short.
    point /= norm;
    certify(problem, point, mu, dual_value(mu), true)
}

fn certify(
    problem: &TrsProblem,
    point: DVector<f64>,
    multiplier: f64,
    dual_bound: f64,
    on_boundary: bool,
) -> Result<TrsSolution> {
    let value = problem.objective(&point);
    let gap = dual_bound - value;
    let slack = 1e-9 * (1.0 + value.abs());
    if !gap.is_finite() || gap > problem.tolerance || gap < -slack {
        return Err(Error::Numerical(format!(
            "trust-region certificate gap {gap} exceeds tolerance {}",
            problem.tolerance
        )));
    }
    Ok(TrsSolution {
        point,
        value,
        multiplier,
        dual_bound: dual_bound.max(value),
        on_boundary,
    })
}

/// Minimizes `q` over the unit ball by maximizing `-q`.
pub fn trs_min_on_ball(problem: &TrsProblem) -> Result<TrsSolution> {
    let sol = trs_max_on_ball(&problem.negated())?;
    Ok(TrsSolution {
        point: sol.point,
        value: -sol.value,
        multiplier: sol.multiplier,
        dual_bound: -sol.dual_bound,
        on_boundary: sol.on_boundary,
    })
}

/// Result of the grid search together with its worst-case gap to the true maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub point: DVector<f64>,
    pub value: f64,
    /// `Lipschitz(q) * covering radius of the grid`.
    pub error_bound: f64,
}

/// Grid search over the unit ball for `K <= 3`, using roughly `resolution` points.
///
/// Uses only matrix-vector products, so it stays independent of the
/// eigendecomposition path.
pub fn trs_brute_force(problem: &TrsProblem, resolution: usize) -> Result<BruteForceResult> {
    let k = problem.dim();
    if k == 0 || k > 3 {
        return Err(Error::InvalidArgument(format!(
            "brute-force TRS supports 1 <= K <= 3, got {k}"
        )));
    }
    if resolution < 8 {
        return Err(Error::InvalidArgument("grid resolution must be at least 8".into()));
    }
    let lipschitz = 2.0 * problem.q.norm() + 2.0 * problem.r.norm();
    let mut best = DVector::zeros(k);
    let mut best_value = problem.objective(&best);
    let mut consider = |u: DVector<f64>| {
        let value = problem.objective(&u);
        if value > best_value {
            best_value = value;
            best = u;
        }
    };

    let cover = match k {
        1 => {
            let n = resolution;
            for i in 0..n {
                let t = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                consider(DVector::from_element(1, t));
            }
            1.0 / (n - 1) as f64
        }
        2 => {
            let shells = ((resolution as f64 / (2.0 * PI)).sqrt().ceil() as usize).max(1);
            let angles = ((2.0 * PI * shells as f64).ceil() as usize).max(4);
            for s in 1..=shells {
                let rho = s as f64 / shells as f64;
                for a in 0..angles {
                    let theta = 2.0 * PI * a as f64 / angles as f64;
                    consider(DVector::from_row_slice(&[rho * theta.cos(), rho * theta.sin()]));
                }
            }
            0.5 / shells as f64 + PI / angles as f64
        }
        _ => {
            let shells = ((resolution as f64 / 8.0).cbrt().ceil() as usize).max(1);
            let lats = 2 * shells;
            let lons = 2 * lats;
            for s in 1..=shells {
                let rho = s as f64 / shells as f64;
                for i in 0..=lats {
                    let phi = PI * i as f64 / lats as f64;
                    for j in 0..lons {
                        let theta = 2.0 * PI * j as f64 / lons as f64;
                        consider(DVector::from_row_slice(&[
                            rho * phi.sin() * theta.cos(),
                            rho * phi.sin() * theta.sin(),
                            rho * phi.cos(),
                        ]));
                        if i == 0 || i == lats {
                            break;
                        }
                    }
                }
            }
            0.5 / shells as f64 + PI / (2.0 * lats as f64) + PI / lons as f64
        }
    };

    Ok(BruteForceResult {
        point: best,
        value: best_value,
        error_bound: lipschitz * cover,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::uncertainty::{sample_ball, BallSet};

    fn problem(q: &[f64], r: &[f64]) -> TrsProblem {
        let k = r.len();
        TrsProblem::new(DMatrix::from_row_slice(k, k, q), DVector::from_row_slice(r), 1e-6).unwrap()
    }

    fn random_problem(rng: &mut ChaCha8Rng, k: usize) -> TrsProblem {
        let q = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
        let r = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        TrsProblem::new(q, r, 1e-6).unwrap()
    }

    #[test]
    fn top_eigenvector_case() {
        let sol = trs_max_on_ball(&problem(&[2.0, 0.0, 0.0, 1.0], &[0.0, 0.0])).unwrap();
        assert!((sol.value - 2.0).abs() < 1e-9);
        assert!((sol.point[0].abs() - 1.0).abs() < 1e-9);
        assert!(sol.on_boundary);
    }

    #[test]
    fn scalar_quadratic_with_tiny_linear_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let c = rng.random_range(0.0..2.0);
            let scale = 10f64.powf(rng.random_range(-8.0..0.0));
            let q = DMatrix::identity(3, 3) * c;
            let r = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)) * scale;
            let sol = trs_max_on_ball(&TrsProblem::new(q, r, 1e-9).unwrap()).unwrap();
            assert!(sol.value <= sol.dual_bound + 1e-9);
        }
    }

    #[test]
    fn linear_case_matches_normalization() {
        let sol = trs_max_on_ball(&problem(&[0.0; 4], &[1.0, 1.0])).unwrap();
        assert!((sol.value - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        let expected = DVector::from_row_slice(&[1.0, 1.0]) / 2f64.sqrt();
        assert!((sol.point - expected).norm() < 1e-7);
    }

    #[test]
    fn indefinite_case_matches_grid() {
        let p = problem(&[1.0, 0.0, 0.0, -1.0], &[0.0, 0.1]);
        let sol = trs_max_on_ball(&p).unwrap();
        let grid = trs_brute_force(&p, 10_000).unwrap();
        assert!((sol.value - grid.value).abs() <= 1e-3 + p.tolerance());
        // closed form on the boundary: 1 - 2 s^2 + 0.2 s at s = 0.05
        assert!((sol.value - 1.005).abs() < 1e-9);
    }

    #[test]
    fn degenerate_zero_problem() {
        let sol = trs_max_on_ball(&problem(&[0.0; 4], &[0.0, 0.0])).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.point, DVector::zeros(2));
    }

    #[test]
    fn concave_interior_maximizer() {
        // q = -u^2 - v^2 + 2*0.25 u, maximized at (0.25, 0) inside the ball.
        let sol = trs_max_on_ball(&problem(&[-1.0, 0.0, 0.0, -1.0], &[0.25, 0.0])).unwrap();
        assert!(!sol.on_boundary);
        assert!((sol.point[0] - 0.25).abs() < 1e-12);
        assert!((sol.value - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn concave_with_large_linear_term_hits_boundary() {
        let sol = trs_max_on_ball(&problem(&[-1.0, 0.0, 0.0, -1.0], &[3.0, 0.0])).unwrap();
        assert!(sol.on_boundary);
        assert!((sol.value - 5.0).abs() < 1e-9);
    }

    #[test]
    fn hard_case_uses_top_eigenvector() {
        // r lies entirely in the second eigenspace.
        let p = problem(&[2.0, 0.0, 0.0, 0.0], &[0.0, 0.5]);
        let sol = trs_max_on_ball(&p).unwrap();
        let grid = trs_brute_force(&p, 40_000).unwrap();
        assert!(sol.value + 1e-9 >= grid.value);
        assert!(sol.value - grid.value <= grid.error_bound + p.tolerance());
        assert!((sol.point.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brute_force_examples() {
        let p = problem(&[2.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        let grid = trs_brute_force(&p, 10_000).unwrap();
        assert!((grid.value - 2.0).abs() < 1e-3);

        let z = problem(&[0.0; 4], &[0.0, 0.0]);
        assert_eq!(trs_brute_force(&z, 10_000).unwrap().value, 0.0);

        let big = TrsProblem::new(DMatrix::identity(4, 4), DVector::zeros(4), 1e-6).unwrap();
        assert!(trs_brute_force(&big, 1000).is_err());
    }

    #[test]
    fn brute_force_never_beats_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 1..=3 {
            for _ in 0..20 {
                let p = random_problem(&mut rng, k);
                let sol = trs_max_on_ball(&p).unwrap();
                let grid = trs_brute_force(&p, 5_000).unwrap();
                assert!(grid.value <= sol.value + p.tolerance() + grid.error_bound);
                assert!(sol.value - grid.value <= grid.error_bound + p.tolerance());
            }
        }
    }

    #[test]
    fn min_examples() {
        let s = trs_min_on_ball(&problem(&[2.0, 0.0, 0.0, 1.0], &[0.0, 0.0])).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert!(s.point.norm() < 1e-12);

        let s = trs_min_on_ball(&problem(&[0.0; 4], &[1.0, 0.0])).unwrap();
        assert!((s.value + 2.0).abs() < 1e-9);
        assert!((s.point[0] + 1.0).abs() < 1e-9);

        let s = trs_min_on_ball(&problem(&[-1.0, 0.0, 0.0, -1.0], &[0.0, 0.0])).unwrap();
        assert!((s.value + 1.0).abs() < 1e-9);
        assert!((s.point.norm() - 1.0).abs() < 1e-9);
        assert!(s.dual_bound <= s.value + 1e-12);
    }

    #[test]
    fn symmetrizes_on_intake() {
        let p = problem(&[1.0, 4.0, 0.0, 1.0], &[0.0, 0.0]);
        assert_eq!((p.q() - p.q().transpose()).norm(), 0.0);
        assert_eq!(p.q()[(0, 1)], 2.0);
    }

    #[test]
    fn dominates_random_probes_and_kkt_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &k in &[2usize, 3, 5] {
            let set = BallSet::unit(k).unwrap();
            for _ in 0..100 {
                let p = random_problem(&mut rng, k);
                let sol = trs_max_on_ball(&p).unwrap();
                assert!(sol.point.norm() <= 1.0 + 1e-9);
                for _ in 0..200 {
                    let u = sample_ball(&set, &mut rng);
                    assert!(sol.value + p.tolerance() >= p.objective(&u));
                }
                if sol.on_boundary {
                    let residual = (DMatrix::identity(k, k) * sol.multiplier - p.q()) * &sol.point - p.r();
                    assert!(residual.norm() <= 1e-6 * (p.q().norm() + p.r().norm()));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(TrsProblem::new(DMatrix::zeros(2, 3), DVector::zeros(2), 1e-6).is_err());
        assert!(TrsProblem::new(DMatrix::zeros(2, 2), DVector::zeros(3), 1e-6).is_err());
        assert!(TrsProblem::new(DMatrix::zeros(2, 2), DVector::zeros(2), 0.0).is_err());
    }
}
