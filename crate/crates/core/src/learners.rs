//! Online learning primitives used as the dual engines of the meta-algorithms.
//!
//! Rewards are linear and maximized: a learner picks `x_t`, then observes a
//! reward vector `f_t` and collects `f_t · x_t`. States are values; every
//! step returns a fresh state and leaves the old one untouched.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::linalg::l1_norm;
use crate::uncertainty::{ball_linear_max, sample_sphere, BallSet, UncertaintySet};

/// Online gradient ascent iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct OgdState {
    point: DVector<f64>,
    step_size: f64,
}

impl OgdState {
    pub fn new(point: DVector<f64>, step_size: f64) -> Result<Self> {
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "OGD step size must be positive, got {step_size}"
            )));
        }
        ensure_finite(point.as_slice(), "OGD initial point")?;
        Ok(Self { point, step_size })
    }

    pub fn point(&self) -> &DVector<f64> {
        &self.point
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    /// `project(point + step_size * gradient)`.
    pub fn step<S: UncertaintySet>(&self, gradient: &DVector<f64>, set: &S) -> Result<Self> {
        ensure_dim(self.point.len(), gradient.len())?;
        ensure_finite(gradient.as_slice(), "OGD gradient")?;
        let moved = &self.point + gradient * self.step_size;
        Ok(Self {
            point: set.project(&moved)?,
            step_size: self.step_size,
        })
    }
}

/// `eta = D / (G sqrt(T))`.
pub fn ogd_step_size(diameter: f64, gradient_bound: f64, horizon: usize) -> f64 {
    diameter / (gradient_bound * (horizon as f64).sqrt())
}

/// `G D sqrt(T)`.
pub fn ogd_regret_bound(diameter: f64, gradient_bound: f64, horizon: usize) -> f64 {
    gradient_bound * diameter * (horizon as f64).sqrt()
}

/// Linear optimization procedure `M_eps`: returns `x` with
/// `g · x >= max_{y in K} g · y - accuracy()`.
pub trait LinearMaximizer {
    fn maximize(&self, g: &DVector<f64>) -> Result<DVector<f64>>;

    fn accuracy(&self) -> f64 {
        0.0
    }
}

/// Exact maximizer over a ball.
#[derive(Debug, Clone, Copy)]
pub struct ExactBallMaximizer(pub BallSet);

impl LinearMaximizer for ExactBallMaximizer {
    fn maximize(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        ball_linear_max(g, &self.0)
    }
}

/// Ball maximizer that deliberately gives away `eps` of the optimum by
/// shrinking the exact answer towards the origin.
#[derive(Debug, Clone, Copy)]
pub struct DegradedBallMaximizer {
    pub set: BallSet,
    pub eps: f64,
}

impl LinearMaximizer for DegradedBallMaximizer {
    fn maximize(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        let exact = ball_linear_max(g, &self.set)?;
        let best = g.norm() * self.set.radius();
        if best <= self.eps {
            return Ok(DVector::zeros(g.len()));
        }
        Ok(exact * (1.0 - self.eps / best))
    }

    fn accuracy(&self) -> f64 {
        self.eps
    }
}

/// Follow-the-perturbed-leader state: the running reward sum plus the
/// random stream used for perturbations.
#[derive(Debug, Clone)]
pub struct FplState {
    cumulative: DVector<f64>,
    perturbation_bound: f64,
    rng: ChaCha8Rng,
}

impl FplState {
    /// `perturbation_bound` is `1/eta`; perturbations are uniform on `[0, 1/eta]^d`.
    pub fn new(dim: usize, perturbation_bound: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(perturbation_bound.is_finite() && perturbation_bound >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "perturbation bound must be finite and non-negative, got {perturbation_bound}"
            )));
        }
        Ok(Self {
            cumulative: DVector::zeros(dim),
            perturbation_bound,
            rng,
        })
    }

    /// Learner seeded from `seed` on its own ChaCha stream.
    pub fn seeded(dim: usize, perturbation_bound: f64, seed: u64, stream: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self::new(dim, perturbation_bound, rng)
    }

    pub fn cumulative(&self) -> &DVector<f64> {
        &self.cumulative
    }

    pub fn perturbation_bound(&self) -> f64 {
        self.perturbation_bound
    }

    pub fn accumulate(&self, reward: &DVector<f64>) -> Result<Self> {
        ensure_dim(self.cumulative.len(), reward.len())?;
        ensure_finite(reward.as_slice(), "FPL reward")?;
        Ok(Self {
            cumulative: &self.cumulative + reward,
            perturbation_bound: self.perturbation_bound,
            rng: self.rng.clone(),
        })
    }

    /// Draws a fresh perturbation and returns `cumulative + p` with the advanced state.
    pub fn perturbed_leader(&self) -> (DVector<f64>, Self) {
        let mut rng = self.rng.clone();
        let bound = self.perturbation_bound;
        let target = DVector::from_fn(self.cumulative.len(), |i, _| {
            self.cumulative[i] + bound * rng.random::<f64>()
        });
        let next = Self {
            cumulative: self.cumulative.clone(),
            perturbation_bound: bound,
            rng,
        };
        (target, next)
    }

    /// `M_eps(cumulative + p)` for a fresh perturbation `p`.
    pub fn step<M: LinearMaximizer + ?Sized>(&self, oracle: &M) -> Result<(DVector<f64>, Self)> {
        let (target, next) = self.perturbed_leader();
        let decision = oracle.maximize(&target)?;
        Ok((decision, next))
    }
}

/// `eta = sqrt(D / (R A T))`.
pub fn fpl_eta(diameter_l1: f64, reward_bound: f64, l1_bound: f64, horizon: usize) -> f64 {
    (diameter_l1 / (reward_bound * l1_bound * horizon as f64)).sqrt()
}

/// `2 sqrt(D R A T) + 2 eps T`.
pub fn fpl_regret_bound(diameter_l1: f64, reward_bound: f64, l1_bound: f64, horizon: usize, eps: f64) -> f64 {
    let t = horizon as f64;
    2.0 * (diameter_l1 * reward_bound * l1_bound * t).sqrt() + 2.0 * eps * t
}

/// Constants of the FPL regret bound for a recorded sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretConstants {
    /// Bound on `|f_t · x|` over the decision set.
    pub reward_bound: f64,
    /// Bound on `||f_t||_1`.
    pub l1_bound: f64,
    /// Bound on the l1 diameter of the decision set.
    pub diameter_l1: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RegretTrace {
    pub rewards: Vec<DVector<f64>>,
    pub decisions: Vec<DVector<f64>>,
}

impl RegretTrace {
    pub fn push(&mut self, reward: DVector<f64>, decision: DVector<f64>) {
        self.rewards.push(reward);
        self.decisions.push(decision);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn collected(&self) -> f64 {
        self.rewards.iter().zip(&self.decisions).map(|(f, x)| f.dot(x)).sum()
    }

    /// Bound constants for decisions restricted to `set`.
    pub fn constants(&self, set: &BallSet) -> RegretConstants {
        reward_constants(&self.rewards, set)
    }
}

/// FPL bound constants of a reward sequence played over `set`.
pub fn reward_constants(rewards: &[DVector<f64>], set: &BallSet) -> RegretConstants {
    let max_l2 = rewards.iter().map(|f| f.norm()).fold(0.0, f64::max);
    let max_l1 = rewards.iter().map(l1_norm).fold(0.0, f64::max);
    RegretConstants {
        reward_bound: set.radius() * max_l2,
        l1_bound: max_l1,
        diameter_l1: set.l1_diameter(),
    }
}

/// Best fixed decision's total reward minus the learner's total reward.
pub fn measure_regret<M: LinearMaximizer + ?Sized>(trace: &RegretTrace, exact: &M) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("regret of an empty trace".into()));
    }
    let total: DVector<f64> = trace
        .rewards
        .iter()
        .fold(DVector::zeros(trace.rewards[0].len()), |acc, f| acc + f);
    let best = total.dot(&exact.maximize(&total)?);
    Ok(best - trace.collected())
}

/// Plays OGD from the origin against a fixed sequence of linear rewards.
pub fn run_ogd(rewards: &[DVector<f64>], set: &BallSet, step_size: f64) -> Result<RegretTrace> {
    let mut state = OgdState::new(DVector::zeros(set.dim()), step_size)?;
    let mut trace = RegretTrace::default();
    for f in rewards {
        trace.push(f.clone(), state.point().clone());
        state = state.step(f, set)?;
    }
    Ok(trace)
}

/// Plays FPL against a fixed sequence of linear rewards.
pub fn run_fpl<M: LinearMaximizer + ?Sized>(
    rewards: &[DVector<f64>],
    oracle: &M,
    initial: FplState,
) -> Result<RegretTrace> {
    let mut state = initial;
    let mut trace = RegretTrace::default();
    for f in rewards {
        let (decision, next) = state.step(oracle)?;
        trace.push(f.clone(), decision);
        state = next.accumulate(f)?;
    }
    Ok(trace)
}

/// `sum_t M(f_{1:t}) · f_t - M(f_{1:T}) · f_{1:T}`; non-negative up to
/// `eps T` for an `eps`-accurate maximizer.
pub fn be_the_leader_residual<M: LinearMaximizer + ?Sized>(rewards: &[DVector<f64>], oracle: &M) -> Result<f64> {
    let Some(first) = rewards.first() else {
        return Err(Error::InvalidArgument("empty reward sequence".into()));
    };
    let mut prefix = DVector::zeros(first.len());
    let mut leader_total = 0.0;
    for f in rewards {
        prefix += f;
        leader_total += oracle.maximize(&prefix)?.dot(f);
    }
    Ok(leader_total - oracle.maximize(&prefix)?.dot(&prefix))
}

/// Oblivious reward sequence: every `f_t` has norm `scale` and points along
/// a fixed random drift plus a fresh random direction.
pub fn random_rewards<R: Rng + ?Sized>(
    dim: usize,
    rounds: usize,
    scale: f64,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    ensure_finite(&[scale], "reward scale")?;
    let sphere = BallSet::unit(dim)?;
    let drift = sample_sphere(&sphere, rng) * 0.5;
    Ok((0..rounds)
        .map(|_| {
            let raw = &drift + sample_sphere(&sphere, rng);
            let norm = raw.norm();
            if norm > 0.0 {
                raw * (scale / norm)
            } else {
                drift.clone() * (2.0 * scale)
            }
        })
        .collect())
}
