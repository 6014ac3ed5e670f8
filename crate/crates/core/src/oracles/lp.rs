//! Robust linear constraints `(a_i + P u_i) · x - b_i <= 0` over the unit ball.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::{default_budget, solve_nominal, NominalKernel, NominalVerdict};
use super::{check_noise, into_verdict, GroundTruth};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::serde_dense;
use crate::robust::{
    FeasibilityOracle, LinearDecomposition, OracleVerdict, PerturbationConstants, RobustProblem, SubgradientConstants,
};
use crate::uncertainty::BallSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLp", into = "RawLp")]
pub struct RobustLpInstance {
    a: Vec<DVector<f64>>,
    b: Vec<f64>,
    p: DMatrix<f64>,
    noise: BallSet,
    ground_truth: Option<GroundTruth>,
}

#[derive(Serialize, Deserialize)]
struct RawLp {
    #[serde(with = "serde_dense::vectors")]
    a: Vec<DVector<f64>>,
    b: Vec<f64>,
    #[serde(with = "serde_dense::matrix")]
    p: DMatrix<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth: Option<GroundTruth>,
}

impl TryFrom<RawLp> for RobustLpInstance {
    type Error = Error;

    fn try_from(raw: RawLp) -> Result<Self> {
        let mut inst = Self::new(raw.a, raw.b, raw.p)?;
        inst.ground_truth = raw.ground_truth;
        Ok(inst)
    }
}

impl From<RobustLpInstance> for RawLp {
    fn from(inst: RobustLpInstance) -> Self {
        Self {
            a: inst.a,
            b: inst.b,
            p: inst.p,
            ground_truth: inst.ground_truth,
        }
    }
}

impl RobustLpInstance {
    /// `a` and `b` hold one entry per constraint; `p` is `n x K`.
    pub fn new(a: Vec<DVector<f64>>, b: Vec<f64>, p: DMatrix<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidArgument(
                "an LP instance needs at least one constraint".into(),
            ));
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        let n = a[0].len();
        if n == 0 || p.ncols() == 0 {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        for ai in &a {
            crate::error::ensure_dim(n, ai.len())?;
            ensure_finite(ai.as_slice(), "LP nominal vector")?;
        }
        crate::error::ensure_dim(n, p.nrows())?;
        ensure_finite(&b, "LP offsets")?;
        ensure_finite(p.as_slice(), "LP noise shape")?;
        let noise = BallSet::unit(p.ncols())?;
        Ok(Self {
            a,
            b,
            p,
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

    pub fn nominal(&self, constraint: usize) -> &DVector<f64> {
        &self.a[constraint]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    pub fn noise_shape(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.p.ncols()
    }

    /// `sigma = ||P||_F`.
    pub fn sigma(&self) -> f64 {
        self.p.norm()
    }

    /// Adds the objective constraint `c · x - level <= 0`, which carries
    /// the same noise shape as the other constraints.
    pub fn with_objective(&self, c: &DVector<f64>, level: f64) -> Result<Self> {
        let mut a = vec![c.clone()];
        a.extend(self.a.iter().cloned());
        let mut b = vec![level];
        b.extend_from_slice(&self.b);
        Self::new(a, b, self.p.clone())
    }

    /// `a_i + P u`.
    pub fn perturbed(&self, constraint: usize, u: &DVector<f64>) -> DVector<f64> {
        &self.a[constraint] + &self.p * u
    }
}

/// `g_i(x) = P^T x`, the same for every constraint.
pub fn lp_reward_vector(instance: &RobustLpInstance, x: &DVector<f64>) -> DVector<f64> {
    instance.p.tr_mul(x)
}

impl RobustProblem for RobustLpInstance {
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
        self.perturbed(constraint, u).dot(x) - self.b[constraint]
    }

    fn noise_gradient(&self, _constraint: usize, x: &DVector<f64>, _u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(lp_reward_vector(self, x))
    }

    fn linear_decomposition(&self, constraint: usize, x: &DVector<f64>) -> Option<LinearDecomposition> {
        Some(LinearDecomposition {
            g: lp_reward_vector(self, x),
            h: self.a[constraint].dot(x) - self.b[constraint],
        })
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && x.norm() <= 1.0 + 1e-9
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

struct LpKernel {
    rows: Vec<DVector<f64>>,
    offsets: Vec<f64>,
    lipschitz: f64,
}

impl NominalKernel for LpKernel {
    fn constraints(&self) -> usize {
        self.rows.len()
    }

    fn value(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.rows[i].dot(x) - self.offsets[i]
    }

    fn subgradient(&self, i: usize, _x: &DVector<f64>) -> DVector<f64> {
        self.rows[i].clone()
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
        DVector::zeros(self.rows[0].len())
    }

    fn domain_diameter(&self) -> f64 {
        2.0
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn dual_bound(&self, weights: &[f64]) -> Result<f64> {
        let mut combined = DVector::zeros(self.rows[0].len());
        let mut offset = 0.0;
        for ((w, row), b) in weights.iter().zip(&self.rows).zip(&self.offsets) {
            combined.axpy(*w, row, 1.0);
            offset += w * b;
        }
        Ok(-combined.norm() - offset)
    }
}

/// Reference feasibility oracle for the nominal LP at fixed noise.
#[derive(Debug, Clone)]
pub struct LpOracle<'a> {
    instance: &'a RobustLpInstance,
    eps: f64,
    budget: usize,
}

impl<'a> LpOracle<'a> {
    pub fn new(instance: &'a RobustLpInstance, eps: f64) -> Result<Self> {
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

/// One-shot form of [`LpOracle`].
pub fn lp_feasibility_oracle(
    instance: &RobustLpInstance,
    noise: &[DVector<f64>],
    eps: f64,
    budget: usize,
) -> Result<OracleVerdict> {
    LpOracle::new(instance, eps)?.with_budget(budget).solve(noise, None)
}

impl FeasibilityOracle for LpOracle<'_> {
    fn solve(&self, noise: &[DVector<f64>], warm_start: Option<&DVector<f64>>) -> Result<OracleVerdict> {
        let inst = self.instance;
        check_noise(noise, inst.num_constraints(), &inst.noise)?;
        let rows: Vec<DVector<f64>> = noise.iter().enumerate().map(|(i, u)| inst.perturbed(i, u)).collect();
        let lipschitz = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let kernel = LpKernel {
            rows,
            offsets: inst.b.clone(),
            lipschitz,
        };
        let verdict: NominalVerdict = solve_nominal(&kernel, self.eps, self.budget, warm_start)?;
        Ok(into_verdict(verdict, noise))
    }

    fn accuracy(&self) -> f64 {
        self.eps
    }
}
