//! Robust linear matrix constraints `(A_i + sum_k u_k P_k) • X - b_i <= 0`
//! over `{X psd, ||X||_F <= 1}`. Decisions are `X` flattened column-major.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::kernel::{default_budget, solve_nominal, NominalKernel};
use super::{check_noise, into_verdict, GroundTruth};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::linalg::{serde_dense, square_side, symmetrize, unvectorize, vectorize};
use crate::robust::{
    FeasibilityOracle, LinearDecomposition, OracleVerdict, PerturbationConstants, RobustProblem, SubgradientConstants,
};
use crate::uncertainty::BallSet;

/// Symmetric-part tolerance and eigenvalue floor for domain membership.
const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSdp", into = "RawSdp")]
pub struct RobustSdpInstance {
    a: Vec<DMatrix<f64>>,
    b: Vec<f64>,
    p: Vec<DMatrix<f64>>,
    noise: BallSet,
    ground_truth: Option<GroundTruth>,
}

#[derive(Serialize, Deserialize)]
struct RawSdp {
    #[serde(with = "serde_dense::matrices")]
    a: Vec<DMatrix<f64>>,
    b: Vec<f64>,
    #[serde(with = "serde_dense::matrices")]
    p: Vec<DMatrix<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruth>,
}

impl TryFrom<RawSdp> for RobustSdpInstance {
    type Error = Error;

    fn try_from(raw: RawSdp) -> Result<Self> {
        let mut inst = Self::new(raw.a, raw.b, raw.p)?;
        inst.ground_truth = raw.ground_truth;
        Ok(inst)
    }
}

impl From<RobustSdpInstance> for RawSdp {
    fn from(inst: RobustSdpInstance) -> Self {
        Self {
            a: inst.a,
            b: inst.b,
            p: inst.p,
            ground_truth: inst.ground_truth,
        }
    }
}

fn mat_dot(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    a.as_slice().iter().zip(x.iter()).map(|(p, q)| p * q).sum()
}

impl RobustSdpInstance {
    /// All matrices are symmetrized.
    pub fn new(a: Vec<DMatrix<f64>>, b: Vec<f64>, p: Vec<DMatrix<f64>>) -> Result<Self> {
        if a.is_empty() || p.is_empty() {
            return Err(Error::InvalidArgument(
                "an SDP instance needs at least one constraint and one noise matrix".into(),
            ));
        }
        ensure_dim(a.len(), b.len())?;
        let n = a[0].nrows();
        if n == 0 {
            return Err(Error::InvalidArgument("matrix side must be positive".into()));
        }
        for m in a.iter().chain(&p) {
            if m.shape() != (n, n) {
                return Err(Error::InvalidArgument(format!(
                    "expected {n}x{n} matrices, got {:?}",
                    m.shape()
                )));
            }
            ensure_finite(m.as_slice(), "SDP matrix")?;
        }
        ensure_finite(&b, "SDP offsets")?;
        let noise = BallSet::unit(p.len())?;
        Ok(Self {
            a: a.iter().map(symmetrize).collect(),
            b,
            p: p.iter().map(symmetrize).collect(),
            noise,
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

    /// Matrix side `n`; decisions have `n^2` entries.
    pub fn side(&self) -> usize {
        self.a[0].nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.p.len()
    }

    pub fn sigma(&self) -> f64 {
        self.p.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn nominal(&self, constraint: usize) -> (&DMatrix<f64>, f64) {
        (&self.a[constraint], self.b[constraint])
    }

    pub fn noise_matrices(&self) -> &[DMatrix<f64>] {
        &self.p
    }

    pub fn perturbed(&self, constraint: usize, u: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.a[constraint].clone();
        for (uk, pk) in u.iter().zip(&self.p) {
            m += pk * *uk;
        }
        m
    }
}

/// `(P_1 • X, ..., P_K • X)` for a flattened `X`.
pub fn sdp_noise_gradient(instance: &RobustSdpInstance, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(instance.p.len(), instance.p.iter().map(|pk| mat_dot(pk, x)))
}

/// Nearest point of `{X psd, ||X||_F <= 1}`: symmetrize, clamp negative
/// eigenvalues, rescale into the Frobenius ball.
pub fn project_psd_ball(x: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(x));
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let norm = clamped.norm();
    let scale = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&(clamped * scale)) * v.transpose()))
}

/// Whether `x` flattens a symmetric psd matrix of Frobenius norm at most one.
pub fn in_psd_ball(x: &DVector<f64>, n: usize) -> bool {
    if x.len() != n * n {
        return false;
    }
    let m = unvectorize(x, n);
    if (&m - m.transpose()).amax() > DOMAIN_TOL || m.norm() > 1.0 + DOMAIN_TOL {
        return false;
    }
    SymmetricEigen::new(symmetrize(&m)).eigenvalues.min() >= -DOMAIN_TOL
}

/// `min { C • X : X psd, ||X||_F <= 1 } = -||negative eigenvalues of C||_2`.
pub fn min_over_psd_ball(c: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(c));
    -eig.eigenvalues.iter().map(|l| l.min(0.0).powi(2)).sum::<f64>().sqrt()
}

impl RobustProblem for RobustSdpInstance {
    fn num_constraints(&self) -> usize {
        self.a.len()
    }

    fn decision_dim(&self) -> usize {
        self.side() * self.side()
    }

    fn noise_set(&self, _constraint: usize) -> &BallSet {
        &self.noise
    }

    fn evaluate(&self, constraint: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        mat_dot(&self.perturbed(constraint, u), x) - self.b[constraint]
    }

    fn noise_gradient(&self, _constraint: usize, x: &DVector<f64>, _u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(sdp_noise_gradient(self, x))
    }

    fn linear_decomposition(&self, constraint: usize, x: &DVector<f64>) -> Option<LinearDecomposition> {
        Some(LinearDecomposition {
            g: sdp_noise_gradient(self, x),
            h: mat_dot(&self.a[constraint], x) - self.b[constraint],
        })
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        in_psd_ball(x, self.side())
    }

    fn subgradient_constants(&self) -> Option<SubgradientConstants> {
        Some(SubgradientConstants {
            diameter: 2.0,
            gradient_bound: self.sigma(),
            estimated: false,
        })
    }

    fn perturbation_constants(&self) -> Option<PerturbationConstants> {
        let root_k = (self.noise_dim() as f64).sqrt();
        Some(PerturbationConstants {
            diameter: 2.0 * root_k,
            gradient_bound: root_k * self.sigma(),
            value_bound: self.sigma(),
            estimated: false,
        })
    }
}

struct SdpKernel {
    side: usize,
    matrices: Vec<DMatrix<f64>>,
    offsets: Vec<f64>,
    lipschitz: f64,
}

impl NominalKernel for SdpKernel {
    fn constraints(&self) -> usize {
        self.matrices.len()
    }

    fn value(&self, i: usize, x: &DVector<f64>) -> f64 {
        mat_dot(&self.matrices[i], x) - self.offsets[i]
    }

    fn subgradient(&self, i: usize, _x: &DVector<f64>) -> DVector<f64> {
        vectorize(&self.matrices[i])
    }

    fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        vectorize(&project_psd_ball(&unvectorize(x, self.side)))
    }

    fn origin(&self) -> DVector<f64> {
        DVector::zeros(self.side * self.side)
    }

    fn domain_diameter(&self) -> f64 {
        2.0
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn dual_bound(&self, weights: &[f64]) -> Result<f64> {
        let mut combined = DMatrix::zeros(self.side, self.side);
        let mut offset = 0.0;
        for ((w, m), b) in weights.iter().zip(&self.matrices).zip(&self.offsets) {
            combined += m * *w;
            offset += w * b;
        }
        Ok(min_over_psd_ball(&combined) - offset)
    }
}

/// Reference feasibility oracle for the nominal SDP at fixed noise.
#[derive(Debug, Clone)]
pub struct SdpOracle<'a> {
    instance: &'a RobustSdpInstance,
    eps: f64,
    budget: usize,
}

impl<'a> SdpOracle<'a> {
    pub fn new(instance: &'a RobustSdpInstance, eps: f64) -> Result<Self> {
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

/// One-shot form of [`SdpOracle`].
pub fn sdp_feasibility_oracle(
    instance: &RobustSdpInstance,
    noise: &[DVector<f64>],
    eps: f64,
    budget: usize,
) -> Result<OracleVerdict> {
    SdpOracle::new(instance, eps)?.with_budget(budget).solve(noise, None)
}

impl FeasibilityOracle for SdpOracle<'_> {
    fn solve(&self, noise: &[DVector<f64>], warm_start: Option<&DVector<f64>>) -> Result<OracleVerdict> {
        let inst = self.instance;
        check_noise(noise, inst.num_constraints(), &inst.noise)?;
        if let Some(w) = warm_start {
            if square_side(w.len()) != Some(inst.side()) {
                return Err(Error::DimensionMismatch {
                    expected: inst.side() * inst.side(),
                    got: w.len(),
                });
            }
        }
        let matrices: Vec<DMatrix<f64>> = noise.iter().enumerate().map(|(i, u)| inst.perturbed(i, u)).collect();
        let lipschitz = matrices.iter().map(|m| m.norm()).fold(0.0, f64::max);
        let kernel = SdpKernel {
            side: inst.side(),
            matrices,
            offsets: inst.b.clone(),
            lipschitz,
        };
        let verdict = solve_nominal(&kernel, self.eps, self.budget, warm_start)?;
        Ok(into_verdict(verdict, noise))
    }

    fn accuracy(&self) -> f64 {
        self.eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(a: DMatrix<f64>, b: f64, p: Vec<DMatrix<f64>>) -> RobustSdpInstance {
        RobustSdpInstance::new(vec![a], vec![b], p).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let u = [DVector::zeros(1)];
        for n in 1..=4 {
            let inst = single(DMatrix::identity(n, n), 2.0, vec![DMatrix::zeros(n, n)]);
            assert!(matches!(
                sdp_feasibility_oracle(&inst, &u, 0.1, 1000).unwrap(),
                OracleVerdict::Feasible { .. }
            ));
        }

        let inst = single(-DMatrix::identity(2, 2), -2.0, vec![DMatrix::zeros(2, 2)]);
        match sdp_feasibility_oracle(&inst, &u, 0.1, 1000).unwrap() {
            OracleVerdict::Infeasible { certificate, .. } => {
                assert!((certificate.bound - (2.0 - 2f64.sqrt())).abs() < 1e-9);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }

        let a = DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        let inst = single(a, 1e6, vec![DMatrix::zeros(3, 3)]);
        match sdp_feasibility_oracle(&inst, &u, 0.1, 1000).unwrap() {
            OracleVerdict::Feasible { x, inner_iterations } => {
                assert_eq!(inner_iterations, 0);
                assert!(x.iter().all(|&v| v == 0.0));
            }
            other => panic!("expected feasible, got {other:?}"),
        }
    }

    #[test]
    fn noise_gradient_examples() {
        let n = 2;
        let x = vectorize(&(DMatrix::identity(n, n) / 2f64.sqrt()));
        let inst = single(
            DMatrix::zeros(n, n),
            0.0,
            vec![DMatrix::identity(n, n), DMatrix::zeros(n, n)],
        );
        let g = sdp_noise_gradient(&inst, &x);
        assert!((g[0] - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
        assert!(sdp_noise_gradient(&inst, &DVector::zeros(4)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection_lands_in_domain() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, -3.0]);
        let p = project_psd_ball(&m);
        assert!(in_psd_ball(&vectorize(&p), 2));
        assert!((p.norm() - 1.0).abs() < 1e-12);
        let inside = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        assert!((project_psd_ball(&inside) - &inside).amax() < 1e-12);
    }

    #[test]
    fn psd_ball_minimum() {
        let c = DMatrix::from_diagonal(&DVector::from_row_slice(&[-3.0, 4.0, -4.0]));
        assert!((min_over_psd_ball(&c) + 5.0).abs() < 1e-12);
        assert_eq!(min_over_psd_ball(&DMatrix::identity(2, 2)), 0.0);
    }
}
