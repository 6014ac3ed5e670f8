//! The robust feasibility model: constraints `f_i(x, u_i) <= 0` for all `u_i` in `U`.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::uncertainty::{sample_ball, BallSet, UncertaintySet};

/// `f_i(x, u') = g · u' + h` over the (possibly lifted) noise representation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDecomposition {
    pub g: DVector<f64>,
    pub h: f64,
}

/// A robust feasibility problem over a decision domain `D`.
///
/// Noise sets are identical copies of one set; the constraint index is
/// passed anyway so heterogeneous sets can be added later.
pub trait RobustProblem {
    fn num_constraints(&self) -> usize;

    fn decision_dim(&self) -> usize;

    fn noise_set(&self, constraint: usize) -> &BallSet;

    fn evaluate(&self, constraint: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64;

    /// `grad_u f_i(x, u)`; needed by the dual-subgradient method.
    fn noise_gradient(&self, _constraint: usize, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// `(g_i(x), h_i(x))`; needed by the dual-perturbation method.
    fn linear_decomposition(&self, _constraint: usize, _x: &DVector<f64>) -> Option<LinearDecomposition> {
        None
    }

    /// Noise representation in which the constraint is linear.
    fn lift(&self, u: &DVector<f64>) -> DVector<f64> {
        u.clone()
    }

    fn lifted_dim(&self) -> usize {
        self.noise_set(0).dim()
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool;

    /// Radius of a Euclidean ball containing the decision domain.
    fn decision_radius(&self) -> f64 {
        1.0
    }

    /// Constants for the dual-subgradient method, when known in closed form.
    fn subgradient_constants(&self) -> Option<SubgradientConstants> {
        None
    }

    /// Constants for the dual-perturbation method, when known in closed form.
    fn perturbation_constants(&self) -> Option<PerturbationConstants> {
        None
    }
}

/// `D >= l2 diameter of U`, `G >= ||grad_u f_i||_2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubgradientConstants {
    pub diameter: f64,
    pub gradient_bound: f64,
    /// Set when the values were estimated by sampling.
    pub estimated: bool,
}

/// `D >= l1 diameter of the lifted set`, `G >= ||g_i(x)||_1`,
/// `F >= |g_i(x) · u'|`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerturbationConstants {
    pub diameter: f64,
    pub gradient_bound: f64,
    pub value_bound: f64,
    pub estimated: bool,
}

pub(crate) fn validate_positive(name: &str, value: f64, allow_zero: bool) -> Result<()> {
    let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "constant {name} must be finite and positive, got {value}"
        )))
    }
}

impl SubgradientConstants {
    pub fn validate(&self) -> Result<()> {
        validate_positive("D", self.diameter, false)?;
        validate_positive("G", self.gradient_bound, true)
    }
}

impl PerturbationConstants {
    pub fn validate(&self) -> Result<()> {
        validate_positive("D", self.diameter, false)?;
        validate_positive("G", self.gradient_bound, true)?;
        validate_positive("F", self.value_bound, true)
    }
}

/// Inflation applied to sampled constant estimates.
pub const ESTIMATE_INFLATION: f64 = 1.1;

/// Samples `(x, u)` pairs from the ball containing the decision domain and
/// from the noise set, and inflates the observed maxima by 10%.
pub fn estimate_subgradient_constants<P, R>(problem: &P, samples: usize, rng: &mut R) -> Result<SubgradientConstants>
where
    P: RobustProblem + ?Sized,
    R: Rng + ?Sized,
{
    let decision_ball = BallSet::new(problem.decision_dim(), problem.decision_radius())?;
    let mut max_grad: f64 = 0.0;
    for _ in 0..samples {
        let x = sample_ball(&decision_ball, rng);
        for i in 0..problem.num_constraints() {
            let u = sample_ball(problem.noise_set(i), rng);
            let g = problem
                .noise_gradient(i, &x, &u)
                .ok_or_else(|| Error::InvalidArgument(format!("constraint {i} has no noise gradient")))?;
            max_grad = max_grad.max(g.norm());
        }
    }
    Ok(SubgradientConstants {
        diameter: problem.noise_set(0).l2_diameter(),
        gradient_bound: max_grad * ESTIMATE_INFLATION,
        estimated: true,
    })
}

/// Sampled counterpart of [`estimate_subgradient_constants`] for the
/// dual-perturbation constants.
pub fn estimate_perturbation_constants<P, R>(problem: &P, samples: usize, rng: &mut R) -> Result<PerturbationConstants>
where
    P: RobustProblem + ?Sized,
    R: Rng + ?Sized,
{
    let decision_ball = BallSet::new(problem.decision_dim(), problem.decision_radius())?;
    let (mut max_g, mut max_f, mut max_lift_l1): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..samples {
        let x = sample_ball(&decision_ball, rng);
        for i in 0..problem.num_constraints() {
            let u = sample_ball(problem.noise_set(i), rng);
            let dec = problem
                .linear_decomposition(i, &x)
                .ok_or_else(|| Error::InvalidArgument(format!("constraint {i} has no linear decomposition")))?;
            let lifted = problem.lift(&u);
            max_g = max_g.max(dec.g.iter().map(|v| v.abs()).sum());
            max_f = max_f.max(dec.g.dot(&lifted).abs());
            max_lift_l1 = max_lift_l1.max(lifted.iter().map(|v| v.abs()).sum());
        }
    }
    let set = problem.noise_set(0);
    let diameter = if problem.lifted_dim() == set.dim() {
        set.l1_diameter()
    } else {
        2.0 * max_lift_l1 * ESTIMATE_INFLATION
    };
    Ok(PerturbationConstants {
        diameter,
        gradient_bound: max_g * ESTIMATE_INFLATION,
        value_bound: max_f * ESTIMATE_INFLATION,
        estimated: true,
    })
}

type EvalFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync;
type DecompFn = dyn Fn(&DVector<f64>) -> (DVector<f64>, f64) + Send + Sync;

/// One constraint given by closures.
#[derive(Clone)]
pub struct ConstraintSpec {
    evaluate: Arc<EvalFn>,
    noise_gradient: Option<Arc<GradFn>>,
    linear_decomposition: Option<Arc<DecompFn>>,
}

impl std::fmt::Debug for ConstraintSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstraintSpec")
            .field("noise_gradient", &self.noise_gradient.is_some())
            .field("linear_decomposition", &self.linear_decomposition.is_some())
            .finish()
    }
}

impl ConstraintSpec {
    pub fn new(evaluate: impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            evaluate: Arc::new(evaluate),
            noise_gradient: None,
            linear_decomposition: None,
        }
    }

    pub fn with_noise_gradient(
        mut self,
        gradient: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.noise_gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_linear_decomposition(
        mut self,
        decomposition: impl Fn(&DVector<f64>) -> (DVector<f64>, f64) + Send + Sync + 'static,
    ) -> Self {
        self.linear_decomposition = Some(Arc::new(decomposition));
        self
    }
}

/// Closure-backed problem over a Euclidean-ball decision domain.
#[derive(Debug, Clone)]
pub struct FnProblem {
    constraints: Vec<ConstraintSpec>,
    noise: BallSet,
    decision_dim: usize,
    domain_radius: f64,
    subgradient_constants: Option<SubgradientConstants>,
    perturbation_constants: Option<PerturbationConstants>,
}

impl FnProblem {
    pub fn new(
        constraints: Vec<ConstraintSpec>,
        noise: BallSet,
        decision_dim: usize,
        domain_radius: f64,
    ) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::InvalidArgument("a problem needs at least one constraint".into()));
        }
        if decision_dim == 0 {
            return Err(Error::InvalidArgument("decision dimension must be positive".into()));
        }
        validate_positive("domain radius", domain_radius, false)?;
        Ok(Self {
            constraints,
            noise,
            decision_dim,
            domain_radius,
            subgradient_constants: None,
            perturbation_constants: None,
        })
    }

    pub fn with_subgradient_constants(mut self, constants: SubgradientConstants) -> Result<Self> {
        constants.validate()?;
        self.subgradient_constants = Some(constants);
        Ok(self)
    }

    pub fn with_perturbation_constants(mut self, constants: PerturbationConstants) -> Result<Self> {
        constants.validate()?;
        self.perturbation_constants = Some(constants);
        Ok(self)
    }
}

impl RobustProblem for FnProblem {
    fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    fn decision_dim(&self) -> usize {
        self.decision_dim
    }

    fn noise_set(&self, _constraint: usize) -> &BallSet {
        &self.noise
    }

    fn evaluate(&self, constraint: usize, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        (self.constraints[constraint].evaluate)(x, u)
    }

    fn noise_gradient(&self, constraint: usize, x: &DVector<f64>, u: &DVector<f64>) -> Option<DVector<f64>> {
        self.constraints[constraint].noise_gradient.as_ref().map(|g| g(x, u))
    }

    fn linear_decomposition(&self, constraint: usize, x: &DVector<f64>) -> Option<LinearDecomposition> {
        self.constraints[constraint].linear_decomposition.as_ref().map(|d| {
            let (g, h) = d(x);
            LinearDecomposition { g, h }
        })
    }

    fn in_domain(&self, x: &DVector<f64>) -> bool {
        x.len() == self.decision_dim && x.norm() <= self.domain_radius * (1.0 + 1e-9)
    }

    fn decision_radius(&self) -> f64 {
        self.domain_radius
    }

    fn subgradient_constants(&self) -> Option<SubgradientConstants> {
        self.subgradient_constants
    }

    fn perturbation_constants(&self) -> Option<PerturbationConstants> {
        self.perturbation_constants
    }
}

/// Largest gap `|f_i(x,u) - (g_i(x) · lift(u) + h_i(x))|` over sampled pairs.
pub fn decomposition_consistency_gap<P, R>(problem: &P, samples: usize, rng: &mut R) -> Result<f64>
where
    P: RobustProblem + ?Sized,
    R: Rng + ?Sized,
{
    let decision_ball = BallSet::new(problem.decision_dim(), problem.decision_radius())?;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = sample_ball(&decision_ball, rng);
        for i in 0..problem.num_constraints() {
            let u = sample_ball(problem.noise_set(i), rng);
            let Some(dec) = problem.linear_decomposition(i, &x) else {
                return Err(Error::InvalidArgument(format!(
                    "constraint {i} has no linear decomposition"
                )));
            };
            let direct = problem.evaluate(i, &x, &u);
            worst = worst.max((direct - dec.g.dot(&problem.lift(&u)) - dec.h).abs());
        }
    }
    Ok(worst)
}

/// Largest violation of midpoint convexity in `x` over sampled triples;
/// non-positive (up to rounding) for convex constraints.
pub fn convexity_violation<P, R>(problem: &P, samples: usize, rng: &mut R) -> Result<f64>
where
    P: RobustProblem + ?Sized,
    R: Rng + ?Sized,
{
    let decision_ball = BallSet::new(problem.decision_dim(), problem.decision_radius())?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x1 = sample_ball(&decision_ball, rng);
        let x2 = sample_ball(&decision_ball, rng);
        let lambda: f64 = rng.random();
        let mid = &x1 * lambda + &x2 * (1.0 - lambda);
        for i in 0..problem.num_constraints() {
            let u = sample_ball(problem.noise_set(i), rng);
            let lhs = problem.evaluate(i, &mid, &u);
            let rhs = lambda * problem.evaluate(i, &x1, &u) + (1.0 - lambda) * problem.evaluate(i, &x2, &u);
            worst = worst.max(lhs - rhs);
        }
    }
    Ok(worst)
}

/// Samples `(x, u)` pairs and reports the first constant that a sample exceeds.
pub fn check_subgradient_constants<P, R>(
    problem: &P,
    constants: &SubgradientConstants,
    samples: usize,
    rng: &mut R,
) -> Result<()>
where
    P: RobustProblem + ?Sized,
    R: Rng + ?Sized,
{
    let decision_ball = BallSet::new(problem.decision_dim(), problem.decision_radius())?;
    let set = problem.noise_set(0);
    if constants.diameter < set.l2_diameter() * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "D = {} is below the l2 diameter {} of the noise set",
            constants.diameter,
            set.l2_diameter()
        )));
    }
    for _ in 0..samples {
        let x = sample_ball(&decision_ball, rng);
        for i in 0..problem.num_constraints() {
            let u = sample_ball(problem.noise_set(i), rng);
            if let Some(g) = problem.noise_gradient(i, &x, &u) {
                let norm = g.norm();
                if norm > constants.gradient_bound * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "sampled noise gradient norm {norm} exceeds G = {}",
                        constants.gradient_bound
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Perturbation-method counterpart of [`check_subgradient_constants`].
pub fn check_perturbation_constants<P, R>(
    problem: &P,
    constants: &PerturbationConstants,
    samples: usize,
    rng: &mut R,
) -> Result<()>
where
    P: RobustProblem + ?Sized,
    R: Rng + ?Sized,
{
    let decision_ball = BallSet::new(problem.decision_dim(), problem.decision_radius())?;
    let tol = |bound: f64| bound * (1.0 + 1e-9) + 1e-12;
    for _ in 0..samples {
        let x = sample_ball(&decision_ball, rng);
        for i in 0..problem.num_constraints() {
            let u = sample_ball(problem.noise_set(i), rng);
            let Some(dec) = problem.linear_decomposition(i, &x) else {
                continue;
            };
            let g_l1: f64 = dec.g.iter().map(|v| v.abs()).sum();
            let value = dec.g.dot(&problem.lift(&u)).abs();
            if g_l1 > tol(constants.gradient_bound) {
                return Err(Error::InvalidArgument(format!(
                    "sampled ||g_i(x)||_1 = {g_l1} exceeds G = {}",
                    constants.gradient_bound
                )));
            }
            if value > tol(constants.value_bound) {
                return Err(Error::InvalidArgument(format!(
                    "sampled |g_i(x) . u'| = {value} exceeds F = {}",
                    constants.value_bound
                )));
            }
        }
    }
    Ok(())
}
