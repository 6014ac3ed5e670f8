use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::driver::{non_finite, validate_eps, Recorder, Step};
use super::problem::{estimate_subgradient_constants, RobustProblem, SubgradientConstants};
use super::report::{Algorithm, SolveOutcome};
use super::{ceil_snapped, FeasibilityOracle};
use crate::error::{Error, Result};
use crate::learners::OgdState;
use crate::uncertainty::UncertaintySet;

/// Settings for [`dual_subgradient_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientConfig {
    pub eps: f64,
    /// Keep every `u_i^t` in the report.
    pub record_noise: bool,
    /// Sample count used when the problem does not supply its constants.
    pub estimation_samples: usize,
    pub estimation_seed: u64,
}

impl SubgradientConfig {
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            record_noise: false,
            estimation_samples: 1000,
            estimation_seed: 0,
        }
    }
}

/// `T = ceil(G^2 D^2 / eps^2)`, at least one.
pub fn subgradient_horizon(constants: &SubgradientConstants, eps: f64) -> usize {
    let t = (constants.gradient_bound * constants.diameter / eps).powi(2);
    ceil_snapped(t).max(1)
}

/// `eta = D / (G sqrt(T))`; `None` when `G = 0` and any step works.
pub fn subgradient_step(constants: &SubgradientConstants, horizon: usize) -> Option<f64> {
    (constants.gradient_bound > 0.0).then(|| constants.diameter / (constants.gradient_bound * (horizon as f64).sqrt()))
}

/// Dual-subgradient method: projected gradient ascent on every `u_i`
/// against the previous primal iterate, followed by an oracle call.
///
/// On success the average iterate is `2 eps`-robust. The first oracle call
/// is made at `u = 0` to produce the initial primal iterate.
pub fn dual_subgradient_solve<P, O>(problem: &P, oracle: &O, config: &SubgradientConfig) -> Result<SolveOutcome>
where
    P: RobustProblem + ?Sized,
    O: FeasibilityOracle + ?Sized,
{
    validate_eps(config.eps)?;
    check_oracle_accuracy(oracle.accuracy(), config.eps)?;
    let m = problem.num_constraints();
    if m == 0 {
        return Err(Error::InvalidArgument("problem has no constraints".into()));
    }

    let (constants, estimated) = match problem.subgradient_constants() {
        Some(c) => (c, false),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.estimation_seed);
            let c = estimate_subgradient_constants(problem, config.estimation_samples, &mut rng)?;
            log::info!("estimated D = {}, G = {}", c.diameter, c.gradient_bound);
            (c, true)
        }
    };
    constants.validate()?;
    let horizon = subgradient_horizon(&constants, config.eps);
    let step = subgradient_step(&constants, horizon);
    log::info!("dual subgradient: T = {horizon}, eta = {step:?}");

    let mut recorder = Recorder::new(Algorithm::Subgradient, oracle.accuracy(), horizon, config.record_noise);
    let mut learners = (0..m)
        .map(|i| OgdState::new(DVector::zeros(problem.noise_set(i).dim()), step.unwrap_or(1.0)))
        .collect::<Result<Vec<_>>>()?;

    let initial: Vec<DVector<f64>> = learners.iter().map(|l| l.point().clone()).collect();
    let (first, _) = recorder.call(problem, oracle, &initial, None)?;
    let mut previous = match first {
        Step::Feasible(x) => x,
        Step::Infeasible(report) => return Ok(SolveOutcome::Infeasible(report)),
    };

    for t in 1..=horizon {
        for (i, learner) in learners.iter_mut().enumerate() {
            let gradient = problem
                .noise_gradient(i, &previous, learner.point())
                .ok_or_else(|| Error::InvalidArgument(format!("constraint {i} has no noise gradient")))?;
            if !gradient.iter().all(|v| v.is_finite()) {
                return Err(non_finite("noise gradient", t));
            }
            *learner = learner.step(&gradient, problem.noise_set(i))?;
        }
        let noise: Vec<DVector<f64>> = learners.iter().map(|l| l.point().clone()).collect();
        let (outcome, inner) = recorder.call(problem, oracle, &noise, Some(&previous))?;
        match outcome {
            Step::Feasible(x) => {
                recorder.record(problem, x.clone(), &noise, inner)?;
                previous = x;
            }
            Step::Infeasible(report) => return Ok(SolveOutcome::Infeasible(report)),
        }
        if t % 10_000 == 0 {
            log::debug!("iteration {t}/{horizon}, {:?} elapsed", recorder.elapsed());
        }
    }
    recorder.finish(horizon, step, estimated)
}

pub(crate) fn check_oracle_accuracy(accuracy: f64, eps: f64) -> Result<()> {
    if accuracy.is_finite() && accuracy > 0.0 && accuracy <= eps * (1.0 + 1e-12) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "oracle accuracy {accuracy} must be positive and at most eps = {eps}"
        )))
    }
}
