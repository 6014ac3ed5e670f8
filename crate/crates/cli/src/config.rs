use clap::ValueEnum;
use robustkit::oracles::Family;
use robustkit::robust::HorizonMode;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmChoice {
    Subgradient,
    Perturbation,
}

/// Everything that determines a `solve` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub sigma: f64,
    pub eps: f64,
    pub delta: f64,
    pub alg: AlgorithmChoice,
    pub seed: u64,
    pub t_mode: HorizonMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 || self.m == 0 || self.k == 0 {
            return Err(CliError::Usage(format!(
                "dimensions must be positive (n = {}, m = {}, k = {})",
                self.n, self.m, self.k
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(CliError::Usage(format!(
                "--sigma must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(CliError::Usage(format!("--eps must lie in (0, 1], got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::Usage(format!(
                "--delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}
