use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::driver::{non_finite, validate_eps, Recorder, Step};
use super::problem::{estimate_perturbation_constants, PerturbationConstants, RobustProblem};
use super::report::{Algorithm, SolveOutcome};
use super::subgradient::check_oracle_accuracy;
use super::{ceil_snapped, FeasibilityOracle, PessimizationOracle};
use crate::error::{Error, Result};
use crate::learners::FplState;
use crate::uncertainty::UncertaintySet;

/// How the iteration count of the dual-perturbation method is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonMode {
    /// `ceil(max(DG, F) * 16 F / eps^2 * ln(m / delta))`.
    #[default]
    Formula,
    /// Smallest `T` with `2 sqrt(DFG/T) + 2 F sqrt(ln(m/delta)/T) <= eps`.
    Derived,
}

impl std::str::FromStr for HorizonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(HorizonMode::Formula),
            "derived" => Ok(HorizonMode::Derived),
            _ => Err(Error::InvalidArgument(format!(
                "unknown horizon mode '{s}' (expected formula or derived)"
            ))),
        }
    }
}

/// Settings for [`dual_perturbation_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationConfig {
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub horizon_mode: HorizonMode,
    pub record_noise: bool,
    pub estimation_samples: usize,
}

impl PerturbationConfig {
    pub fn new(eps: f64, delta: f64, seed: u64) -> Self {
        Self {
            eps,
            delta,
            seed,
            horizon_mode: HorizonMode::Formula,
            record_noise: false,
            estimation_samples: 1000,
        }
    }
}

pub fn perturbation_horizon(
    constants: &PerturbationConstants,
    constraints: usize,
    eps: f64,
    delta: f64,
    mode: HorizonMode,
) -> Result<usize> {
    validate_eps(eps)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if constraints == 0 {
        return Err(Error::InvalidArgument("problem has no constraints".into()));
    }
    let PerturbationConstants {
        diameter: d,
        gradient_bound: g,
        value_bound: f,
        ..
    } = *constants;
    let log_term = (constraints as f64 / delta).ln();
    let t = match mode {
        HorizonMode::Formula => (d * g).max(f) * 16.0 * f / (eps * eps) * log_term,
        HorizonMode::Derived => {
            let root = (2.0 * (d * f * g).sqrt() + 2.0 * f * log_term.sqrt()) / eps;
            root * root
        }
    };
    if !t.is_finite() || t > usize::MAX as f64 / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "iteration count {t} is not representable"
        )));
    }
    Ok(ceil_snapped(t).max(1))
}

/// `eta = sqrt(D / (F G T))`; `None` when `F G = 0` and no perturbation is needed.
pub fn perturbation_step(constants: &PerturbationConstants, horizon: usize) -> Option<f64> {
    let denom = constants.value_bound * constants.gradient_bound * horizon as f64;
    (denom > 0.0).then(|| (constants.diameter / denom).sqrt())
}

/// Dual-perturbation method: every `u_i` follows the perturbed leader of
/// the rewards `g_i(x^1), ..., g_i(x^{t-1})` through the pessimization
/// oracle, followed by an oracle call.
///
/// On success the average iterate is `4 eps`-robust with probability at
/// least `1 - delta`. Constraint `i` draws its perturbations from ChaCha
/// stream `i` of `config.seed`.
pub fn dual_perturbation_solve<P, O, M>(
    problem: &P,
    oracle: &O,
    pessimizer: &M,
    config: &PerturbationConfig,
) -> Result<SolveOutcome>
where
    P: RobustProblem + ?Sized,
    O: FeasibilityOracle + ?Sized,
    M: PessimizationOracle + ?Sized,
{
    validate_eps(config.eps)?;
    check_oracle_accuracy(oracle.accuracy(), config.eps)?;
    let pess = pessimizer.accuracy();
    if !(pess >= 0.0 && pess <= config.eps * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "pessimization accuracy {pess} must lie in [0, eps = {}]",
            config.eps
        )));
    }
    let m = problem.num_constraints();

    let (constants, estimated) = match problem.perturbation_constants() {
        Some(c) => (c, false),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_c0ff_ee00_0000);
            let c = estimate_perturbation_constants(problem, config.estimation_samples, &mut rng)?;
            log::info!(
                "estimated D = {}, G = {}, F = {}",
                c.diameter,
                c.gradient_bound,
                c.value_bound
            );
            (c, true)
        }
    };
    constants.validate()?;
    let horizon = perturbation_horizon(&constants, m, config.eps, config.delta, config.horizon_mode)?;
    let step = perturbation_step(&constants, horizon);
    log::info!("dual perturbation: T = {horizon}, eta = {step:?}");

    let lifted_dim = problem.lifted_dim();
    let bound = step.map_or(0.0, |eta| 1.0 / eta);
    let mut learners = (0..m)
        .map(|i| FplState::seeded(lifted_dim, bound, config.seed, i as u64))
        .collect::<Result<Vec<_>>>()?;

    let mut recorder = Recorder::new(Algorithm::Perturbation, oracle.accuracy(), horizon, config.record_noise);
    let mut previous: Option<DVector<f64>> = None;
    let mut noise: Vec<DVector<f64>> = Vec::with_capacity(m);

    for t in 1..=horizon {
        noise.clear();
        for (i, learner) in learners.iter_mut().enumerate() {
            let (target, next) = learner.perturbed_leader();
            *learner = next;
            let u = pessimizer.pessimize(i, &target)?;
            let set = problem.noise_set(i);
            if u.len() != set.dim() || !set.contains(&u) {
                return Err(Error::InvalidPessimization {
                    constraint: i,
                    norm: u.norm(),
                });
            }
            if !u.iter().all(|v| v.is_finite()) {
                return Err(non_finite("pessimized noise", t));
            }
            noise.push(u);
        }
        let (outcome, inner) = recorder.call(problem, oracle, &noise, previous.as_ref())?;
        let x = match outcome {
            Step::Feasible(x) => x,
            Step::Infeasible(report) => return Ok(SolveOutcome::Infeasible(report)),
        };
        for (i, learner) in learners.iter_mut().enumerate() {
            let dec = problem
                .linear_decomposition(i, &x)
                .ok_or_else(|| Error::InvalidArgument(format!("constraint {i} has no linear decomposition")))?;
            *learner = learner.accumulate(&dec.g).map_err(|_| non_finite("reward vector", t))?;
        }
        recorder.record(problem, x.clone(), &noise, inner)?;
        previous = Some(x);
        if t % 10_000 == 0 {
            log::debug!("iteration {t}/{horizon}, {:?} elapsed", recorder.elapsed());
        }
    }
    recorder.finish(horizon, step, estimated)
}
