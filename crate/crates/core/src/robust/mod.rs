//! Oracle-based robust feasibility solvers.
//!
//! Both meta-algorithms alternate between a dual learner that picks noise
//! for every constraint and a call to a non-robust feasibility oracle at that
//! noise. If every oracle call succeeds, the average of the primal iterates
//! is approximately robust; if one fails, the oracle's certificate proves the
//! robust problem infeasible.

mod bisection;
mod driver;
mod perturbation;
mod problem;
mod report;
mod subgradient;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::serde_dense;

pub use bisection::{robust_minimize_bisection, BisectionResult};
pub use perturbation::{
    dual_perturbation_solve, perturbation_horizon, perturbation_step, HorizonMode, PerturbationConfig,
};
pub use problem::{
    check_perturbation_constants, check_subgradient_constants, convexity_violation, decomposition_consistency_gap,
    estimate_perturbation_constants, estimate_subgradient_constants, ConstraintSpec, FnProblem, LinearDecomposition,
    PerturbationConstants, RobustProblem, SubgradientConstants, ESTIMATE_INFLATION,
};
pub use report::{average_iterates, Algorithm, InfeasibleReport, RunReport, SolveOutcome};
pub use subgradient::{dual_subgradient_solve, subgradient_horizon, subgradient_step, SubgradientConfig};

/// Dual certificate proving the nominal problem at `noise` has no solution:
/// `min_{x in D} sum_i weights_i f_i(x, noise_i) >= bound > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCertificate {
    pub weights: Vec<f64>,
    #[serde(with = "serde_dense::vectors")]
    pub noise: Vec<DVector<f64>>,
    pub bound: f64,
}

/// Output of a feasibility oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict {
    /// `x` in `D` with `f_i(x, u_i) <= eps` for every constraint.
    Feasible { x: DVector<f64>, inner_iterations: usize },
    Infeasible {
        certificate: InfeasibilityCertificate,
        inner_iterations: usize,
    },
}

impl OracleVerdict {
    pub fn inner_iterations(&self) -> usize {
        match self {
            Self::Feasible { inner_iterations, .. } | Self::Infeasible { inner_iterations, .. } => *inner_iterations,
        }
    }
}

/// Approximate solver of the nominal problem at fixed noise.
///
/// Returns an `eps`-feasible point, or a sound infeasibility certificate, or
/// [`crate::Error::Budget`] when neither could be established.
pub trait FeasibilityOracle {
    fn solve(&self, noise: &[DVector<f64>], warm_start: Option<&DVector<f64>>) -> Result<OracleVerdict>;

    fn accuracy(&self) -> f64;
}

/// Approximate worst-case noise finder: given a linear functional `target`
/// over the lifted noise representation, returns `u in U` whose lift is
/// within `accuracy()` of maximizing it.
pub trait PessimizationOracle {
    fn pessimize(&self, constraint: usize, target: &DVector<f64>) -> Result<DVector<f64>>;

    fn accuracy(&self) -> f64;
}

/// `ceil` that snaps values within rounding noise of an integer.
pub(crate) fn ceil_snapped(x: f64) -> usize {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}
