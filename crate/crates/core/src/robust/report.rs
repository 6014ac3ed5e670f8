use std::time::Duration;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::InfeasibilityCertificate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Online gradient ascent on the noise.
    Subgradient,
    /// Follow-the-perturbed-leader on the noise.
    Perturbation,
}

/// Trace of a run that ended with every oracle call succeeding.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub algorithm: Algorithm,
    /// Number of averaged iterations `T`.
    pub horizon: usize,
    /// Dual step size `eta`; `None` when it is unbounded (no noise dependence).
    pub step_size: Option<f64>,
    /// Primal iterates `x^1..x^T`.
    pub iterates: Vec<DVector<f64>>,
    /// `u_i^t` per iteration, when recording was requested.
    pub noise: Option<Vec<Vec<DVector<f64>>>>,
    /// `f_i(x^t, u_i^t)` per iteration and constraint.
    pub violations: Vec<Vec<f64>>,
    pub oracle_iterations: Vec<usize>,
    /// Time since the start of the run when each iteration finished.
    pub elapsed: Vec<Duration>,
    /// `(1/T) sum_t f_i(x^t, u_i^t)` per constraint.
    pub average_violation: Vec<f64>,
    /// Average of the iterates.
    pub solution: DVector<f64>,
    /// Oracle calls made, including any bootstrap call.
    pub oracle_calls: usize,
    pub constants_estimated: bool,
    pub wall_time: Duration,
}

impl RunReport {
    pub fn max_violation(&self, iteration: usize) -> f64 {
        self.violations[iteration]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct InfeasibleReport {
    pub algorithm: Algorithm,
    /// 1-based index of the oracle call that failed.
    pub oracle_call: usize,
    pub certificate: InfeasibilityCertificate,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub enum SolveOutcome {
    Solved(RunReport),
    Infeasible(InfeasibleReport),
}

impl SolveOutcome {
    pub fn is_solved(&self) -> bool {
        matches!(self, Self::Solved(_))
    }

    pub fn solved(self) -> Option<RunReport> {
        match self {
            Self::Solved(r) => Some(r),
            Self::Infeasible(_) => None,
        }
    }
}

/// Arithmetic mean of a non-empty list of iterates.
pub fn average_iterates(iterates: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = iterates
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot average an empty trace".into()))?;
    let mut sum = DVector::zeros(first.len());
    for x in iterates {
        if x.len() != first.len() {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: x.len(),
            });
        }
        sum += x;
    }
    Ok(sum / iterates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn averaging_examples() {
        assert_eq!(
            average_iterates(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap(),
            v(&[0.5, 0.5])
        );
        assert_eq!(average_iterates(&[v(&[0.3, -2.0])]).unwrap(), v(&[0.3, -2.0]));
        let x0 = v(&[0.1, 0.7, -0.3]);
        let copies = vec![x0.clone(); 100];
        assert!((average_iterates(&copies).unwrap() - x0).amax() <= 1e-12);
        assert!(average_iterates(&[]).is_err());
    }
}
