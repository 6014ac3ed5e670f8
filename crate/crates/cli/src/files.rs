//! JSON documents exchanged between commands.

use std::fs;
use std::path::{Path, PathBuf};

use robustkit::oracles::generate::GeneratorConfig;
use robustkit::oracles::Instance;
use robustkit::robust::InfeasibilityCertificate;
use robustkit::verify::{RobustnessCertificate, RobustnessReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub const INSTANCE_FILE: &str = "instance.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const REGRET_FILE: &str = "regret.csv";
pub const PLOT_FILE: &str = "convergence.svg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorRecord>,
    pub instance: Instance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRecord {
    #[serde(flatten)]
    pub config: GeneratorConfig,
    pub infeasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Solved,
    Infeasible,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityRecord {
    /// 1-based oracle call that produced the certificate.
    pub oracle_call: usize,
    pub certificate: InfeasibilityCertificate,
}

/// Result of `solve`; also accepted by `verify` as a solution file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub verdict: Verdict,
    pub horizon: Option<usize>,
    pub step_size: Option<f64>,
    pub oracle_calls: Option<usize>,
    pub constants_estimated: Option<bool>,
    pub solution: Option<Vec<f64>>,
    /// Per-constraint `(1/T) sum_t f_i(x^t, u_i^t)`.
    pub average_violation: Option<Vec<f64>>,
    pub infeasibility: Option<InfeasibilityRecord>,
    pub error: Option<String>,
    /// Only filled in with `--timing`, so default output stays reproducible.
    pub wall_time_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub schema_version: u32,
    pub report: RobustnessReport,
    pub certificate: RobustnessCertificate,
}

/// Written by `verify` when the solution file carries an infeasibility certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityCheckFile {
    pub schema_version: u32,
    pub claimed_bound: f64,
    pub recomputed_bound: f64,
    pub passed: bool,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::malformed(path, e))
}

/// Reads a JSON document and checks its `schema_version`.
pub fn read_versioned<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let value: serde_json::Value = read_json(path)?;
    match value.get("schema_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(CliError::malformed(
                path,
                format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"),
            ))
        }
        None => return Err(CliError::malformed(path, "missing schema_version")),
    }
    serde_json::from_value(value).map_err(|e| CliError::malformed(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::malformed(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn output_dir(dir: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir.to_path_buf())
}
