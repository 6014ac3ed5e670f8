use nalgebra::DVector;

use super::report::SolveOutcome;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BisectionResult {
    /// Smallest level found approximately feasible.
    pub value: f64,
    /// Solution returned by the solver at `value`.
    pub witness: DVector<f64>,
    /// Bisection steps, excluding the two bracket checks.
    pub steps: usize,
    pub solver_calls: usize,
}

/// Robust minimization by bisection on the objective level.
///
/// `solve(t)` must run a robust feasibility solver on the problem augmented
/// with the objective constraint `f_0(x, u) - t <= 0`. Both ends of the
/// bracket are checked first: feasibility at `lo` or infeasibility at `hi`
/// is reported as [`Error::Bracket`]. Then `ceil(log2((hi - lo) / tol))`
/// bisection steps follow.
pub fn robust_minimize_bisection<F>(lo: f64, hi: f64, tol: f64, mut solve: F) -> Result<BisectionResult>
where
    F: FnMut(f64) -> Result<SolveOutcome>,
{
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidArgument(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }

    let mut witness = match solve(hi)? {
        SolveOutcome::Solved(report) => report.solution,
        SolveOutcome::Infeasible(_) => {
            return Err(Error::Bracket(format!(
                "robust problem is infeasible at the upper end {hi}"
            )));
        }
    };
    if solve(lo)?.is_solved() {
        return Err(Error::Bracket(format!(
            "robust problem is already feasible at the lower end {lo}"
        )));
    }

    let steps = if hi - lo > tol {
        ((hi - lo) / tol).log2().ceil() as usize
    } else {
        0
    };
    let (mut low, mut high) = (lo, hi);
    for _ in 0..steps {
        let mid = 0.5 * (low + high);
        match solve(mid)? {
            SolveOutcome::Solved(report) => {
                high = mid;
                witness = report.solution;
            }
            SolveOutcome::Infeasible(_) => low = mid,
        }
        log::debug!("bisection bracket [{low}, {high}]");
    }
    Ok(BisectionResult {
        value: high,
        witness,
        steps,
        solver_calls: steps + 2,
    })
}
