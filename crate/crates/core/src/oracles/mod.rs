//! Reference feasibility oracles for robust LP, QCQP and SDP families with
//! Euclidean-ball noise, plus instance generators.
//!
//! Each oracle runs projected subgradient descent on the largest constraint
//! value and declares infeasibility only through a positive dual bound.

pub mod generate;
mod kernel;
mod lp;
mod qp;
mod sdp;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::robust::{
    dual_perturbation_solve, dual_subgradient_solve, InfeasibilityCertificate, OracleVerdict, PerturbationConfig,
    PessimizationOracle, RobustProblem, SolveOutcome, SubgradientConfig,
};
use crate::uncertainty::{ball_linear_max, BallSet, UncertaintySet};
use kernel::NominalVerdict;

pub use kernel::default_budget;
pub use lp::{lp_feasibility_oracle, lp_reward_vector, LpOracle, RobustLpInstance};
pub use qp::{
    lift_noise, qcqp_feasibility_oracle, quad_form_coefficients, LiftedTrsPessimizer, QpOracle, QuadFormCoefficients,
    RobustQpInstance,
};
pub use sdp::{
    in_psd_ball, min_over_psd_ball, project_psd_ball, sdp_feasibility_oracle, sdp_noise_gradient, RobustSdpInstance,
    SdpOracle,
};

/// What the generator knows about an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub robust_feasible: bool,
    /// Robust slack of `point` (feasible instances) or guaranteed positive
    /// violation (infeasible ones).
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lp,
    Qp,
    Sdp,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Lp, Family::Qp, Family::Sdp];

    pub fn name(self) -> &'static str {
        match self {
            Family::Lp => "lp",
            Family::Qp => "qp",
            Family::Sdp => "sdp",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown problem family '{s}' (expected lp, qp or sdp)")))
    }
}

/// An instance of any supported family, tagged by `family` when serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Instance {
    Lp(RobustLpInstance),
    Qp(RobustQpInstance),
    Sdp(RobustSdpInstance),
}

impl Instance {
    pub fn family(&self) -> Family {
        match self {
            Instance::Lp(_) => Family::Lp,
            Instance::Qp(_) => Family::Qp,
            Instance::Sdp(_) => Family::Sdp,
        }
    }

    pub fn problem(&self) -> &dyn RobustProblem {
        match self {
            Instance::Lp(i) => i,
            Instance::Qp(i) => i,
            Instance::Sdp(i) => i,
        }
    }

    pub fn ground_truth(&self) -> Option<&GroundTruth> {
        match self {
            Instance::Lp(i) => i.ground_truth(),
            Instance::Qp(i) => i.ground_truth(),
            Instance::Sdp(i) => i.ground_truth(),
        }
    }
}

/// Exact linear maximization over the noise ball.
#[derive(Debug, Clone, Copy)]
pub struct BallPessimizer {
    set: BallSet,
}

impl BallPessimizer {
    pub fn new(set: BallSet) -> Self {
        Self { set }
    }
}

impl PessimizationOracle for BallPessimizer {
    fn pessimize(&self, _constraint: usize, target: &DVector<f64>) -> Result<DVector<f64>> {
        ball_linear_max(target, &self.set)
    }

    fn accuracy(&self) -> f64 {
        0.0
    }
}

/// Meta-algorithm to run, with its settings.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Subgradient(SubgradientConfig),
    Perturbation(PerturbationConfig),
}

impl SolverChoice {
    pub fn eps(&self) -> f64 {
        match self {
            SolverChoice::Subgradient(c) => c.eps,
            SolverChoice::Perturbation(c) => c.eps,
        }
    }
}

/// Tolerance of the lifted trust-region pessimizer used for QCQP instances.
pub const QP_PESSIMIZER_TOLERANCE: f64 = 1e-9;

/// Runs the chosen meta-algorithm on `instance` with the reference oracles
/// at accuracy `eps`. `oracle_budget` overrides the default inner budget.
///
/// QCQP constraints are convex in the noise, so only the perturbation
/// method applies to them.
pub fn solve_instance(
    instance: &Instance,
    choice: &SolverChoice,
    oracle_budget: Option<usize>,
) -> Result<SolveOutcome> {
    let eps = choice.eps();
    let budget = oracle_budget.unwrap_or_else(|| default_budget(eps));
    match (instance, choice) {
        (Instance::Qp(_), SolverChoice::Subgradient(_)) => Err(Error::Unsupported(
            "the subgradient method needs constraints concave in the noise; use the perturbation method for QCQP"
                .into(),
        )),
        (Instance::Lp(inst), _) => run(
            inst,
            &LpOracle::new(inst, eps)?.with_budget(budget),
            &BallPessimizer::new(*inst.noise_set(0)),
            choice,
        ),
        (Instance::Sdp(inst), _) => run(
            inst,
            &SdpOracle::new(inst, eps)?.with_budget(budget),
            &BallPessimizer::new(*inst.noise_set(0)),
            choice,
        ),
        (Instance::Qp(inst), _) => {
            let pessimizer = LiftedTrsPessimizer::new(inst.noise_dim(), QP_PESSIMIZER_TOLERANCE.min(eps))?;
            run(
                inst,
                &QpOracle::new(inst, eps)?.with_budget(budget),
                &pessimizer,
                choice,
            )
        }
    }
}

fn run<P, O, M>(problem: &P, oracle: &O, pessimizer: &M, choice: &SolverChoice) -> Result<SolveOutcome>
where
    P: RobustProblem,
    O: crate::robust::FeasibilityOracle,
    M: PessimizationOracle,
{
    match choice {
        SolverChoice::Subgradient(c) => dual_subgradient_solve(problem, oracle, c),
        SolverChoice::Perturbation(c) => dual_perturbation_solve(problem, oracle, pessimizer, c),
    }
}

pub(crate) fn validate_accuracy(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "oracle accuracy must be positive and finite, got {eps}"
        )))
    }
}

pub(crate) fn check_noise(noise: &[DVector<f64>], constraints: usize, set: &BallSet) -> Result<()> {
    ensure_dim(constraints, noise.len())?;
    for (i, u) in noise.iter().enumerate() {
        ensure_dim(set.dim(), u.len())?;
        if !set.contains(u) {
            return Err(Error::InvalidArgument(format!(
                "noise for constraint {i} has norm {} outside the uncertainty set",
                u.norm()
            )));
        }
    }
    Ok(())
}

pub(crate) fn into_verdict(verdict: NominalVerdict, noise: &[DVector<f64>]) -> OracleVerdict {
    match verdict {
        NominalVerdict::Feasible { x, iterations } => OracleVerdict::Feasible {
            x,
            inner_iterations: iterations,
        },
        NominalVerdict::Infeasible {
            weights,
            bound,
            iterations,
        } => OracleVerdict::Infeasible {
            certificate: InfeasibilityCertificate {
                weights,
                noise: noise.to_vec(),
                bound,
            },
            inner_iterations: iterations,
        },
    }
}
