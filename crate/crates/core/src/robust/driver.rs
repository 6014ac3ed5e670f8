//! Bookkeeping shared by the two meta-algorithms.

use std::time::{Duration, Instant};

use nalgebra::DVector;

use super::report::{average_iterates, Algorithm, InfeasibleReport, RunReport, SolveOutcome};
use super::{FeasibilityOracle, OracleVerdict, RobustProblem};
use crate::error::{Error, Result};

/// Slack allowed on the oracle's `eps` when re-checking its feasible verdicts.
const CONTRACT_SLACK: f64 = 1e-9;

pub(crate) enum Step {
    Feasible(DVector<f64>),
    Infeasible(InfeasibleReport),
}

pub(crate) struct Recorder {
    algorithm: Algorithm,
    eps: f64,
    start: Instant,
    oracle_calls: usize,
    record_noise: bool,
    iterates: Vec<DVector<f64>>,
    noise: Vec<Vec<DVector<f64>>>,
    violations: Vec<Vec<f64>>,
    oracle_iterations: Vec<usize>,
    elapsed: Vec<Duration>,
}

impl Recorder {
    pub(crate) fn new(algorithm: Algorithm, eps: f64, horizon: usize, record_noise: bool) -> Self {
        // Cap the pre-allocation; horizons from loose constants can be huge.
        let cap = horizon.min(1 << 16);
        Self {
            algorithm,
            eps,
            start: Instant::now(),
            oracle_calls: 0,
            record_noise,
            iterates: Vec::with_capacity(cap),
            noise: Vec::new(),
            violations: Vec::with_capacity(cap),
            oracle_iterations: Vec::with_capacity(cap),
            elapsed: Vec::with_capacity(cap),
        }
    }

    /// Calls the oracle and checks its verdict against the contract.
    pub(crate) fn call<P, O>(
        &mut self,
        problem: &P,
        oracle: &O,
        noise: &[DVector<f64>],
        warm_start: Option<&DVector<f64>>,
    ) -> Result<(Step, usize)>
    where
        P: RobustProblem + ?Sized,
        O: FeasibilityOracle + ?Sized,
    {
        self.oracle_calls += 1;
        let call = self.oracle_calls;
        let verdict = oracle.solve(noise, warm_start).map_err(|e| match e {
            Error::Budget { iterations, detail } => Error::Budget {
                iterations,
                detail: format!("oracle call {call}: {detail}"),
            },
            other => other,
        })?;
        let inner = verdict.inner_iterations();
        match verdict {
            OracleVerdict::Feasible { x, .. } => {
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(Error::Budget {
                        iterations: call,
                        detail: "oracle returned a non-finite point".into(),
                    });
                }
                if !problem.in_domain(&x) {
                    return Err(Error::OracleContract(format!(
                        "oracle call {call} returned a point outside the decision domain"
                    )));
                }
                Ok((Step::Feasible(x), inner))
            }
            OracleVerdict::Infeasible { certificate, .. } => {
                if certificate.bound.is_nan() || certificate.bound <= 0.0 {
                    return Err(Error::OracleContract(format!(
                        "oracle call {call} declared infeasibility with non-positive bound {}",
                        certificate.bound
                    )));
                }
                Ok((
                    Step::Infeasible(InfeasibleReport {
                        algorithm: self.algorithm,
                        oracle_call: call,
                        certificate,
                        wall_time: self.start.elapsed(),
                    }),
                    inner,
                ))
            }
        }
    }

    /// Records iteration `x^t` with its noise and the oracle's effort.
    pub(crate) fn record<P: RobustProblem + ?Sized>(
        &mut self,
        problem: &P,
        x: DVector<f64>,
        noise: &[DVector<f64>],
        inner_iterations: usize,
    ) -> Result<()> {
        let values: Vec<f64> = noise
            .iter()
            .enumerate()
            .map(|(i, u)| problem.evaluate(i, &x, u))
            .collect();
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Budget {
                iterations: self.iterates.len() + 1,
                detail: "constraint evaluation produced a non-finite value".into(),
            });
        }
        let worst = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if worst > self.eps + CONTRACT_SLACK * self.eps.max(1.0) {
            return Err(Error::OracleContract(format!(
                "oracle point violates a constraint by {worst} > eps = {}",
                self.eps
            )));
        }
        self.violations.push(values);
        if self.record_noise {
            self.noise.push(noise.to_vec());
        }
        self.iterates.push(x);
        self.oracle_iterations.push(inner_iterations);
        self.elapsed.push(self.start.elapsed());
        Ok(())
    }

    pub(crate) fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    pub(crate) fn finish(
        self,
        horizon: usize,
        step_size: Option<f64>,
        constants_estimated: bool,
    ) -> Result<SolveOutcome> {
        let solution = average_iterates(&self.iterates)?;
        let count = self.violations.len() as f64;
        let m = self.violations.first().map_or(0, Vec::len);
        let average_violation = (0..m)
            .map(|i| self.violations.iter().map(|row| row[i]).sum::<f64>() / count)
            .collect();
        Ok(SolveOutcome::Solved(RunReport {
            algorithm: self.algorithm,
            horizon,
            step_size,
            iterates: self.iterates,
            noise: self.record_noise.then_some(self.noise),
            violations: self.violations,
            oracle_iterations: self.oracle_iterations,
            elapsed: self.elapsed,
            average_violation,
            solution,
            oracle_calls: self.oracle_calls,
            constants_estimated,
            wall_time: self.start.elapsed(),
        }))
    }
}

pub(crate) fn validate_eps(eps: f64) -> Result<()> {
    if eps.is_finite() && eps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "eps must be positive and finite, got {eps}"
        )))
    }
}

pub(crate) fn non_finite(what: &str, iteration: usize) -> Error {
    Error::Budget {
        iterations: iteration,
        detail: format!("{what} became non-finite"),
    }
}
