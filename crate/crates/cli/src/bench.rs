//! Regret benchmark of the online learners against seeded reward sequences.

use clap::ValueEnum;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robustkit::learners::{
    fpl_eta, fpl_regret_bound, measure_regret, ogd_regret_bound, ogd_step_size, random_rewards, reward_constants,
    run_fpl, run_ogd, DegradedBallMaximizer, ExactBallMaximizer, FplState, LinearMaximizer,
};
use robustkit::uncertainty::BallSet;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    Ogd,
    Fpl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchSettings {
    pub learner: Learner,
    pub dim: usize,
    pub rounds: usize,
    pub seeds: usize,
    /// Accuracy given away by the FPL oracle.
    pub eps: f64,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub seed: u64,
    pub regret: f64,
    pub bound: f64,
}

impl BenchSettings {
    pub fn validate(&self) -> CliResult<()> {
        if self.dim == 0 || self.rounds == 0 || self.seeds == 0 {
            return Err(CliError::Usage(format!(
                "--k, --rounds and --seeds must be positive (got {}, {}, {})",
                self.dim, self.rounds, self.seeds
            )));
        }
        if !(self.eps.is_finite() && self.eps >= 0.0) {
            return Err(CliError::Usage(format!("--eps must be non-negative, got {}", self.eps)));
        }
        if self.learner == Learner::Ogd && self.eps > 0.0 {
            return Err(CliError::Usage(
                "oracle degradation only applies to --learner fpl".into(),
            ));
        }
        Ok(())
    }
}

/// One row per seed, in seed order.
pub fn run(settings: &BenchSettings) -> CliResult<Vec<BenchRow>> {
    settings.validate()?;
    let set = BallSet::unit(settings.dim)?;
    (0..settings.seeds as u64)
        .map(|offset| {
            let seed = settings.base_seed.wrapping_add(offset);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rewards = random_rewards(settings.dim, settings.rounds, 1.0, &mut rng)?;
            let exact = ExactBallMaximizer(set);
            let (regret, bound) = match settings.learner {
                Learner::Ogd => {
                    let diameter = 2.0 * set.radius();
                    let gradient_bound = rewards.iter().map(|f| f.norm()).fold(0.0, f64::max);
                    let step = ogd_step_size(diameter, gradient_bound, settings.rounds);
                    let trace = run_ogd(&rewards, &set, step)?;
                    (
                        measure_regret(&trace, &exact)?,
                        ogd_regret_bound(diameter, gradient_bound, settings.rounds),
                    )
                }
                Learner::Fpl => {
                    let c = reward_constants(&rewards, &set);
                    let eta = fpl_eta(c.diameter_l1, c.reward_bound, c.l1_bound, settings.rounds);
                    let oracle: Box<dyn LinearMaximizer> = if settings.eps > 0.0 {
                        Box::new(DegradedBallMaximizer { set, eps: settings.eps })
                    } else {
                        Box::new(exact)
                    };
                    let state = FplState::seeded(settings.dim, 1.0 / eta, seed, 1)?;
                    let trace = run_fpl(&rewards, oracle.as_ref(), state)?;
                    let bound =
                        fpl_regret_bound(c.diameter_l1, c.reward_bound, c.l1_bound, settings.rounds, settings.eps);
                    (measure_regret(&trace, &exact)?, bound)
                }
            };
            Ok(BenchRow { seed, regret, bound })
        })
        .collect()
}

/// OGD bounds are worst case and must hold row by row; FPL bounds hold in
/// expectation, so only the mean is compared.
pub fn within_bounds(learner: Learner, rows: &[BenchRow]) -> bool {
    match learner {
        Learner::Ogd => rows.iter().all(|r| r.regret <= r.bound),
        Learner::Fpl => {
            let n = rows.len() as f64;
            rows.iter().map(|r| r.regret).sum::<f64>() / n <= rows.iter().map(|r| r.bound).sum::<f64>() / n
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(learner: Learner) -> BenchSettings {
        BenchSettings {
            learner,
            dim: 3,
            rounds: 200,
            seeds: 20,
            eps: 0.0,
            base_seed: 4,
        }
    }

    #[test]
    fn ogd_rows_within_bound() {
        let rows = run(&settings(Learner::Ogd)).unwrap();
        assert_eq!(rows.len(), 20);
        assert!(rows.windows(2).all(|w| w[0].seed < w[1].seed));
        assert!(within_bounds(Learner::Ogd, &rows));
    }

    #[test]
    fn fpl_mean_within_bound() {
        let rows = run(&BenchSettings {
            eps: 0.01,
            ..settings(Learner::Fpl)
        })
        .unwrap();
        assert!(within_bounds(Learner::Fpl, &rows));
    }

    #[test]
    fn zero_rounds_is_usage_error() {
        let err = run(&BenchSettings {
            rounds: 0,
            ..settings(Learner::Ogd)
        })
        .unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }
}
