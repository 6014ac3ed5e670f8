//! Robust convex quadratic constraints
//! `||(A_i + sum_k u_k P_k) x||^2 - b_i · x - c_i <= 0` over the unit ball.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::{default_budget, solve_nominal, NominalKernel};
use super::{check_noise, into_verdict, GroundTruth};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::linalg::{serde_dense, unvectorize, vectorize};
use crate::robust::{
    FeasibilityOracle, LinearDecomposition, OracleVerdict, PerturbationConstants, PessimizationOracle, RobustProblem,
};
use crate::trustregion::{trs_max_on_ball, trs_min_on_ball, TrsProblem};
use crate::uncertainty::BallSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQp", into = "RawQp")]
pub struct RobustQpInstance {
    a: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    c: Vec<f64>,
    p: Vec<DMatrix<f64>>,
    noise: BallSet,
    rho: f64,
    ground_truth: Option<GroundTruth>,
}

#[derive(Serialize, Deserialize)]
struct RawQp {
    #[serde(with = "serde_dense::matrices")]
    a: Vec<DMatrix<f64>>,
    #[serde(with = "serde_dense::vectors")]
    b: Vec<DVector<f64>>,
    c: Vec<f64>,
    #[serde(with = "serde_dense::matrices")]
    p: Vec<DMatrix<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruth>,
}

impl TryFrom<RawQp> for RobustQpInstance {
    type Error = Error;

    fn try_from(raw: RawQp) -> Result<Self> {
        let mut inst = Self::new(raw.a, raw.b, raw.c, raw.p)?;
        inst.ground_truth = raw.ground_truth;
        Ok(inst)
    }
}

impl From<RobustQpInstance> for RawQp {
    fn from(inst: RobustQpInstance) -> Self {
        Self {
            a: inst.a,
            b: inst.b,
            c: inst.c,
            p: inst.p,
            ground_truth: inst.ground_truth,
        }
    }
}

/// `f_i(x, u) = u^T q u + 2 r · u + s` for fixed `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadFormCoefficients {
    pub q: DMatrix<f64>,
    pub r: DVector<f64>,
    pub s: f64,
}

impl QuadFormCoefficients {
    pub fn evaluate(&self, u: &DVector<f64>) -> f64 {
        u.dot(&(&self.q * u)) + 2.0 * self.r.dot(u) + self.s
    }
}

impl RobustQpInstance {
    /// `a`, `b`, `c` hold one entry per constraint; `p` holds the `K` noise matrices.
    pub fn new(a: Vec<DMatrix<f64>>, b: Vec<DVector<f64>>, c: Vec<f64>, p: Vec<DMatrix<f64>>) -> Result<Self> {
        if a.is_empty() || p.is_empty() {
            return Err(Error::InvalidArgument(
                "a QP instance needs at least one constraint and one noise matrix".into(),
            ));
        }
        ensure_dim(a.len(), b.len())?;
        ensure_dim(a.len(), c.len())?;
        let n = a[0].nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("decision dimension must be positive".into()));
        }
        for m in a.iter().chain(&p) {
            if m.shape() != (n, n) {
                return Err(Error::InvalidArgument(format!(
                    "expected {n}x{n} matrices, got {:?}",
                    m.shape()
                )));
            }
            ensure_finite(m.as_slice(), "QP matrix")?;
        }
        for bi in &b {
            ensure_dim(n, bi.len())?;
            ensure_finite(bi.as_slice(), "QP linear term")?;
        }
        ensure_finite(&c, "QP constants")?;
        let rho = a.iter().map(|m| m.norm()).fold(0.0, f64::max);
        let noise = BallSet::unit(p.len())?;
        Ok(Self {
            a,
            b,
            c,
            p,
            noise,
            rho,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Self {
        self.ground_truth = Some(truth);
        self
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        self.ground_truth.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.p.len()
    }

    /// `sigma^2 = sum_k ||P_k||_F^2`.
    pub fn sigma(&self) -> f64 {
        self.p.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    /// `rho = max_i ||A_i||_F`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn nominal(&self, constraint: usize) -> (&DMatrix<f64>, &DVector<f64>, f64) {
        (&self.a[constraint], &self.b[constraint], self.c[constraint])
    }

    pub fn noise_matrices(&self) -> &[DMatrix<f64>] {
        &self.p
    }

    /// `A_i + sum_k u_k P_k`.
    pub fn perturbed_matrix(&self, constraint: usize, u: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.a[constraint].clone();
        for (uk, pk) in u.iter().zip(&self.p) {
            m += pk * *uk;
        }
        m
    }
}

/// Coefficients of the constraint as a quadratic in the noise: with
/// `y_0 = A_i x`, `Y = [P_1 x, ..., P_K x]` (an `n x K` matrix),
/// `q = Y^T Y`, `r = Y^T y_0` and `s = y_0 · y_0 - b_i · x - c_i`.
pub fn quad_form_coefficients(
    instance: &RobustQpInstance,
    constraint: usize,
    x: &DVector<f64>,
) -> QuadFormCoefficients {
    let (a, b, c) = instance.nominal(constraint);
    let y0 = a * x;
    let columns: Vec<DVector<f64>> = instance.p.iter().map(|pk| pk * x).collect();
    let y = DMatrix::from_columns(&columns);
    QuadFormCoefficients {
        q: y.tr_mul(&y),
        r: y.tr_mul(&y0),
        s: y0.norm_squared() - b.dot(x) - c,
    }
}

/// `(vec(u u^T), u)`, the representation in which the constraints are linear.
pub fn lift_noise(u: &DVector<f64>) -> DVector<f64> {
    let k = u.len();
    let outer = u * u.transpose();
    let mut lifted = DVector::zeros(k * k + k);
    lifted.rows_mut(0, k * k).copy_from(&vectorize(&outer));
    lifted.rows_mut(k * k, k).copy_from(u);
    lifted
}

impl RobustProblem for RobustQpInstance {
    fn num_constraints(&self) -> usize {
        self.a.len()
    }

    fn decision_dim(&self) -> usize {
        self.dim()
    }

    fn noise_set(&self, _constraint: usize) -> &BallSet {
        &self.noise
    }

    fn evaluate(&self, constraint: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let m = self.perturbed_matrix(constraint, u);
        (m * x).norm_squared() - self.b[constraint].dot(x) - self.c[constraint]
    }

    fn linear_decomposition(&self, constraint: usize, x: &DVector<f64>) -> Option<LinearDecomposition> {
        let coeffs = quad_form_coefficients(self, constraint, x);
        let k = self.noise_dim();
        let mut g = DVector::zeros(k * k + k);
        g.rows_mut(0, k * k).copy_from(&vectorize(&coeffs.q));
        g.rows_mut(k * k, k).copy_from(&(coeffs.r * 2.0));
        Some(LinearDecomposition { g, h: coeffs.s })
    }

    fn lift(&self, u: &DVector<f64>) -> DVector<f64> {
        lift_noise(u)
    }

    fn lifted_dim(&self) -> usize {
        let k = self.noise_dim();
        k * k + k
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && x.norm() <= 1.0 + 1e-9
    }

    /// `D = 8K`, `G = 2K (sigma^2 + 2 sigma rho)`, `F = 2 sigma^2 + 4 sigma rho`.
    fn perturbation_constants(&self) -> Option<PerturbationConstants> {
        let k = self.noise_dim() as f64;
        let (sigma, rho) = (self.sigma(), self.rho);
        Some(PerturbationConstants {
            diameter: 8.0 * k,
            gradient_bound: 2.0 * k * (sigma * sigma + 2.0 * sigma * rho),
            value_bound: 2.0 * sigma * sigma + 4.0 * sigma * rho,
            estimated: false,
        })
    }
}

struct QpKernel {
    hessians: Vec<DMatrix<f64>>,
    linear: Vec<DVector<f64>>,
    constants: Vec<f64>,
    lipschitz: f64,
}

impl NominalKernel for QpKernel {
    fn constraints(&self) -> usize {
        self.hessians.len()
    }

    fn value(&self, i: usize, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.hessians[i] * x)) - self.linear[i].dot(x) - self.constants[i]
    }

    fn subgradient(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        &self.hessians[i] * x * 2.0 - &self.linear[i]
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        let norm = x.norm();
        if norm > 1.0 {
            x / norm
        } else {
            x.clone()
        }
    }

    fn origin(&self) -> DVector<f64> {
        DVector::zeros(self.linear[0].len())
    }

    fn domain_diameter(&self) -> f64 {
        2.0
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn dual_bound(&self, weights: &[f64]) -> Result<f64> {
        let n = self.linear[0].len();
        let mut h = DMatrix::zeros(n, n);
        let mut lin = DVector::zeros(n);
        let mut constant = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            h += &self.hessians[i] * w;
            lin.axpy(w, &self.linear[i], 1.0);
            constant += w * self.constants[i];
        }
        let tolerance = 1e-10 * (1.0 + h.norm() + lin.norm());
        let problem = TrsProblem::new(h, lin * -0.5, tolerance)?;
        Ok(trs_min_on_ball(&problem)?.dual_bound - constant)
    }
}

/// Reference feasibility oracle for the nominal QCQP at fixed noise.
#[derive(Debug, Clone)]
pub struct QpOracle<'a> {
    instance: &'a RobustQpInstance,
    eps: f64,
    budget: usize,
}

impl<'a> QpOracle<'a> {
    pub fn new(instance: &'a RobustQpInstance, eps: f64) -> Result<Self> {
        super::validate_accuracy(eps)?;
        Ok(Self {
            instance,
            eps,
            budget: default_budget(eps),
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

/// One-shot form of [`QpOracle`].
pub fn qcqp_feasibility_oracle(
    instance: &RobustQpInstance,
    noise: &[DVector<f64>],
    eps: f64,
    budget: usize,
) -> Result<OracleVerdict> {
    QpOracle::new(instance, eps)?.with_budget(budget).solve(noise, None)
}

impl FeasibilityOracle for QpOracle<'_> {
    fn solve(&self, noise: &[DVector<f64>], warm_start: Option<&DVector<f64>>) -> Result<OracleVerdict> {
        let inst = self.instance;
        check_noise(noise, inst.num_constraints(), &inst.noise)?;
        let hessians: Vec<DMatrix<f64>> = noise
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let m = inst.perturbed_matrix(i, u);
                m.tr_mul(&m)
            })
            .collect();
        let lipschitz = hessians
            .iter()
            .zip(&inst.b)
            .map(|(h, b)| 2.0 * h.norm() + b.norm())
            .fold(0.0, f64::max);
        let kernel = QpKernel {
            hessians,
            linear: inst.b.clone(),
            constants: inst.c.clone(),
            lipschitz,
        };
        let verdict = solve_nominal(&kernel, self.eps, self.budget, warm_start)?;
        Ok(into_verdict(verdict, noise))
    }

    fn accuracy(&self) -> f64 {
        self.eps
    }
}

/// Worst-case noise for a lifted linear functional: maximizes
/// `target · (vec(u u^T), u)` over the unit ball through the trust-region solver.
#[derive(Debug, Clone, Copy)]
pub struct LiftedTrsPessimizer {
    noise_dim: usize,
    tolerance: f64,
}

impl LiftedTrsPessimizer {
    pub fn new(noise_dim: usize, tolerance: f64) -> Result<Self> {
        if noise_dim == 0 || !(tolerance.is_finite() && tolerance > 0.0) {
            return Err(Error::InvalidArgument(
                "pessimizer needs a positive dimension and tolerance".into(),
            ));
        }
        Ok(Self { noise_dim, tolerance })
    }
}

impl PessimizationOracle for LiftedTrsPessimizer {
    fn pessimize(&self, _constraint: usize, target: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.noise_dim;
        ensure_dim(k * k + k, target.len())?;
        let quad = unvectorize(&target.rows(0, k * k).into_owned(), k);
        let linear = target.rows(k * k, k).into_owned() * 0.5;
        // Cumulative targets grow linearly in time; keep the requested gap
        // above what double precision can certify at that scale.
        let floor = 1e-12 * (quad.norm() + linear.norm());
        let problem = TrsProblem::new(quad, linear, self.tolerance.max(floor))?;
        let point = trs_max_on_ball(&problem)?.point;
        let norm = point.norm();
        Ok(if norm > 1.0 { point / norm } else { point })
    }

    fn accuracy(&self) -> f64 {
        self.tolerance
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn single(a: DMatrix<f64>, b: DVector<f64>, c: f64, p: Vec<DMatrix<f64>>) -> RobustQpInstance {
        RobustQpInstance::new(vec![a], vec![b], vec![c], p).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        let inst = single(DMatrix::zeros(2, 2), v(&[0.0, 0.0]), 0.0, vec![DMatrix::identity(2, 2)]);
        let qf = quad_form_coefficients(&inst, 0, &v(&[1.0, 0.0]));
        assert_eq!((qf.q[(0, 0)], qf.r[0], qf.s), (1.0, 0.0, 0.0));

        let inst = single(
            DMatrix::identity(2, 2),
            v(&[0.0, 0.0]),
            0.0,
            vec![DMatrix::identity(2, 2)],
        );
        let x = v(&[1.0, 0.0]);
        let qf = quad_form_coefficients(&inst, 0, &x);
        assert_eq!((qf.q[(0, 0)], qf.r[0], qf.s), (1.0, 1.0, 1.0));
        for u in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let u = v(&[u]);
            assert!((qf.evaluate(&u) - (1.0 + u[0]).powi(2)).abs() < 1e-12);
            assert!((inst.evaluate(0, &x, &u) - (1.0 + u[0]).powi(2)).abs() < 1e-12);
        }

        let inst = single(
            DMatrix::identity(2, 2),
            v(&[1.0, 2.0]),
            0.7,
            vec![DMatrix::identity(2, 2); 2],
        );
        let qf = quad_form_coefficients(&inst, 0, &v(&[0.0, 0.0]));
        assert!(qf.q.iter().all(|&e| e == 0.0) && qf.r.iter().all(|&e| e == 0.0));
        assert_eq!(qf.s, -0.7);
    }

    #[test]
    fn decomposition_matches_lift() {
        let p = vec![
            DMatrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.1, 0.2]),
        ];
        let inst = single(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 0.7]),
            v(&[0.2, -0.1]),
            0.3,
            p,
        );
        let x = v(&[0.4, -0.5]);
        let u = v(&[0.6, -0.2]);
        let dec = inst.linear_decomposition(0, &x).unwrap();
        let lifted = dec.g.dot(&inst.lift(&u)) + dec.h;
        assert!((lifted - inst.evaluate(0, &x, &u)).abs() < 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let eps = 0.05;
        let zero_p = vec![DMatrix::zeros(2, 2)];
        let u = [v(&[0.0])];

        let inst = single(DMatrix::identity(2, 2), v(&[0.0, 0.0]), 1.0, zero_p.clone());
        assert!(matches!(
            qcqp_feasibility_oracle(&inst, &u, eps, 100).unwrap(),
            OracleVerdict::Feasible {
                inner_iterations: 0,
                ..
            }
        ));

        let inst = single(DMatrix::identity(2, 2), v(&[0.0, 0.0]), -0.1, zero_p.clone());
        match qcqp_feasibility_oracle(&inst, &u, eps, 100).unwrap() {
            OracleVerdict::Infeasible { certificate, .. } => {
                assert_eq!(certificate.weights, vec![1.0]);
                assert!((certificate.bound - 0.1).abs() < 1e-8);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }

        let inst = single(DMatrix::identity(2, 2), v(&[0.0, 0.0]), 0.25, zero_p);
        match qcqp_feasibility_oracle(&inst, &u, eps, 100).unwrap() {
            OracleVerdict::Feasible { x, .. } => assert!(x.norm_squared() <= 0.25 + eps),
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn lifted_pessimizer_maximizes_the_quadratic() {
        let pess = LiftedTrsPessimizer::new(2, 1e-10).unwrap();
        // u^T diag(1, -1) u + 0.2 u_2 peaks at 1.005.
        let target = v(&[1.0, 0.0, 0.0, -1.0, 0.0, 0.2]);
        let u = pess.pessimize(0, &target).unwrap();
        let value = |u: &DVector<f64>| target.dot(&lift_noise(u));
        assert!((value(&u) - 1.005).abs() < 1e-8);
        assert!(u.norm() <= 1.0 + 1e-12);
    }
}
