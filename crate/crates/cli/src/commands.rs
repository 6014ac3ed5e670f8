use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use robustkit::oracles::generate::{feasible, infeasible, GeneratorConfig};
use robustkit::oracles::{solve_instance, Family, Instance, SolverChoice};
use robustkit::robust::{PerturbationConfig, SolveOutcome, SubgradientConfig};
use robustkit::verify::{certify, check_epsilon_robust, recompute_infeasibility_bound};

use crate::bench::{self, BenchRow, BenchSettings};
use crate::config::{AlgorithmChoice, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::files::{
    output_dir, read_json, read_versioned, write_json, CertificateFile, GeneratorRecord, InfeasibilityCheckFile,
    InfeasibilityRecord, InstanceFile, Summary, Verdict, CERTIFICATE_FILE, INSTANCE_FILE, PLOT_FILE, REGRET_FILE,
    SCHEMA_VERSION, SUMMARY_FILE, TRACE_FILE,
};
use crate::plot::{self, Series};
use crate::trace::{read_trace, rows_from_report, write_trace};

pub fn generate(family: Family, config: GeneratorConfig, infeasible_instance: bool, out: &Path) -> CliResult<PathBuf> {
    let instance = if infeasible_instance {
        infeasible(family, &config)?
    } else {
        feasible(family, &config)?
    };
    let path = output_dir(out)?.join(INSTANCE_FILE);
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION,
        generator: Some(GeneratorRecord {
            config,
            infeasible: infeasible_instance,
        }),
        instance,
    };
    write_json(&path, &file)?;
    Ok(path)
}

/// `(n, m, k, sigma)` of an instance; `n` is the matrix side for SDP.
fn shape(instance: &Instance) -> (usize, usize, usize, f64) {
    let m = instance.problem().num_constraints();
    match instance {
        Instance::Lp(i) => (i.dim(), m, i.noise_dim(), i.sigma()),
        Instance::Qp(i) => (i.dim(), m, i.noise_dim(), i.sigma()),
        Instance::Sdp(i) => (i.side(), m, i.noise_dim(), i.sigma()),
    }
}

pub struct SolveRequest {
    pub config: ExperimentConfig,
    /// Solve this file instead of generating from `config`.
    pub instance: Option<PathBuf>,
    pub margin: f64,
    pub out: PathBuf,
    pub timing: bool,
    pub oracle_budget: Option<usize>,
}

/// Runs one solve and writes the summary and trace. Infeasible and
/// budget verdicts are returned as errors after the files are written.
pub fn solve(request: &SolveRequest) -> CliResult<Summary> {
    let mut config = request.config.clone();
    let instance = match &request.instance {
        Some(path) => {
            let file: InstanceFile = read_versioned(path)?;
            let (n, m, k, sigma) = shape(&file.instance);
            config = ExperimentConfig {
                family: file.instance.family(),
                n,
                m,
                k,
                sigma,
                ..config
            };
            file.instance
        }
        None => {
            config.validate()?;
            let generator = GeneratorConfig {
                n: config.n,
                m: config.m,
                k: config.k,
                sigma: config.sigma,
                margin: request.margin,
                seed: config.seed,
            };
            feasible(config.family, &generator)?
        }
    };
    config.validate()?;

    let choice = match config.alg {
        AlgorithmChoice::Subgradient => SolverChoice::Subgradient(SubgradientConfig {
            estimation_seed: config.seed,
            ..SubgradientConfig::new(config.eps)
        }),
        AlgorithmChoice::Perturbation => SolverChoice::Perturbation(PerturbationConfig {
            horizon_mode: config.t_mode,
            ..PerturbationConfig::new(config.eps, config.delta, config.seed)
        }),
    };
    log::info!("solving {} instance with {:?}", config.family, config.alg);
    let start = Instant::now();
    let outcome = solve_instance(&instance, &choice, request.oracle_budget);
    let wall = request.timing.then(|| start.elapsed().as_secs_f64());

    let mut summary = Summary {
        schema_version: SCHEMA_VERSION,
        config,
        verdict: Verdict::Budget,
        horizon: None,
        step_size: None,
        oracle_calls: None,
        constants_estimated: None,
        solution: None,
        average_violation: None,
        infeasibility: None,
        error: None,
        wall_time_seconds: wall,
    };
    let mut rows = Vec::new();
    let failure = match outcome {
        Ok(SolveOutcome::Solved(report)) => {
            rows = rows_from_report(&report, request.timing);
            summary.verdict = Verdict::Solved;
            summary.horizon = Some(report.horizon);
            summary.step_size = report.step_size;
            summary.oracle_calls = Some(report.oracle_calls);
            summary.constants_estimated = Some(report.constants_estimated);
            summary.solution = Some(report.solution.iter().copied().collect());
            summary.average_violation = Some(report.average_violation.clone());
            None
        }
        Ok(SolveOutcome::Infeasible(report)) => {
            summary.verdict = Verdict::Infeasible;
            summary.oracle_calls = Some(report.oracle_call);
            summary.infeasibility = Some(InfeasibilityRecord {
                oracle_call: report.oracle_call,
                certificate: report.certificate,
            });
            Some(CliError::Failed(format!(
                "infeasible: certified at oracle call {}",
                report.oracle_call
            )))
        }
        Err(e) => match CliError::from(e) {
            CliError::Budget(detail) => {
                summary.error = Some(detail.clone());
                Some(CliError::Budget(detail))
            }
            other => return Err(other),
        },
    };

    let dir = output_dir(&request.out)?;
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    write_trace(&dir.join(TRACE_FILE), &rows)?;
    match failure {
        None => Ok(summary),
        Some(e) => Err(e),
    }
}

pub enum VerifyOutcome {
    Robust(CertificateFile),
    Infeasible(InfeasibilityCheckFile),
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        match self {
            VerifyOutcome::Robust(c) => c.report.passed,
            VerifyOutcome::Infeasible(c) => c.passed,
        }
    }
}

/// A solution is either a bare array or any JSON object with a `solution`
/// array, such as a `solve` summary.
fn read_solution(path: &Path) -> CliResult<SolutionSource> {
    let value: serde_json::Value = read_json(path)?;
    if let Some(array) = value.as_array() {
        return Ok(SolutionSource::Point(parse_point(path, array)?));
    }
    if let Some(array) = value.get("solution").and_then(serde_json::Value::as_array) {
        return Ok(SolutionSource::Point(parse_point(path, array)?));
    }
    if let Some(record) = value.get("infeasibility").filter(|v| !v.is_null()) {
        let record: InfeasibilityRecord =
            serde_json::from_value(record.clone()).map_err(|e| CliError::malformed(path, e))?;
        return Ok(SolutionSource::Certificate(record));
    }
    Err(CliError::malformed(
        path,
        "expected a solution array or an infeasibility certificate",
    ))
}

enum SolutionSource {
    Point(DVector<f64>),
    Certificate(InfeasibilityRecord),
}

fn parse_point(path: &Path, values: &[serde_json::Value]) -> CliResult<DVector<f64>> {
    let entries = values
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| CliError::malformed(path, format!("non-numeric solution entry {v}")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    Ok(DVector::from_vec(entries))
}

/// Certifies a solution against `threshold`, or re-derives the bound of an
/// infeasibility certificate. Writes the result to `out`.
pub fn verify(
    instance_path: &Path,
    solution_path: &Path,
    threshold: f64,
    eps: f64,
    out: &Path,
) -> CliResult<VerifyOutcome> {
    if !threshold.is_finite() {
        return Err(CliError::Usage(format!("--threshold must be finite, got {threshold}")));
    }
    let file: InstanceFile = read_versioned(instance_path)?;
    let outcome = match read_solution(solution_path)? {
        SolutionSource::Point(x) => {
            if x.len() != file.instance.problem().decision_dim() {
                return Err(CliError::malformed(
                    solution_path,
                    format!(
                        "solution has {} entries, instance expects {}",
                        x.len(),
                        file.instance.problem().decision_dim()
                    ),
                ));
            }
            let certificate = certify(&file.instance, &x, eps)?;
            let report = check_epsilon_robust(&certificate, threshold)?;
            VerifyOutcome::Robust(CertificateFile {
                schema_version: SCHEMA_VERSION,
                report,
                certificate,
            })
        }
        SolutionSource::Certificate(record) => {
            let recomputed = recompute_infeasibility_bound(&file.instance, &record.certificate)?;
            VerifyOutcome::Infeasible(InfeasibilityCheckFile {
                schema_version: SCHEMA_VERSION,
                claimed_bound: record.certificate.bound,
                recomputed_bound: recomputed,
                passed: recomputed > 0.0,
            })
        }
    };
    let path = output_dir(out)?.join(CERTIFICATE_FILE);
    match &outcome {
        VerifyOutcome::Robust(c) => write_json(&path, c)?,
        VerifyOutcome::Infeasible(c) => write_json(&path, c)?,
    }
    Ok(outcome)
}

pub fn regret_bench(settings: &BenchSettings, out: &Path) -> CliResult<Vec<BenchRow>> {
    let rows = bench::run(settings)?;
    let path = output_dir(out)?.join(REGRET_FILE);
    let mut writer = csv::Writer::from_path(&path).map_err(|e| CliError::malformed(&path, e))?;
    for row in &rows {
        writer.serialize(row).map_err(|e| CliError::malformed(&path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

pub fn plot(traces: &[PathBuf], out: &Path) -> CliResult<PathBuf> {
    if traces.is_empty() {
        return Err(CliError::Usage("plot needs at least one trace".into()));
    }
    let loaded = traces
        .iter()
        .map(|p| {
            let rows = read_trace(p)?;
            if rows.is_empty() {
                return Err(CliError::malformed(p, "trace has no rows"));
            }
            Ok((p, rows))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let series: Vec<Series<'_>> = loaded
        .iter()
        .map(|(p, rows)| Series {
            label: series_label(p),
            rows,
        })
        .collect();
    let path = output_dir(out)?.join(PLOT_FILE);
    std::fs::write(&path, plot::render(&series)).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// `run/trace.csv` is labelled `run`; other files by their stem.
fn series_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem == "trace" {
        if let Some(parent) = path.parent().and_then(Path::file_name) {
            return parent.to_string_lossy().into_owned();
        }
    }
    stem
}
