//! `robustkit`: generate robust LP/QCQP/SDP instances, solve them with the
//! dual-subgradient or dual-perturbation method, verify solutions, benchmark
//! learner regret and plot convergence traces.
//!
//! Exit codes: 0 solved/pass, 2 usage or I/O error, 3 infeasible/fail,
//! 4 budget exhausted. Set `ROBUSTKIT_LOG` (e.g. `info`) for logging.

mod bench;
mod commands;
mod config;
mod error;
mod files;
mod plot;
mod trace;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robustkit::oracles::generate::GeneratorConfig;
use robustkit::oracles::Family;
use robustkit::robust::HorizonMode;

use crate::bench::{BenchSettings, Learner};
use crate::commands::{SolveRequest, VerifyOutcome};
use crate::config::{AlgorithmChoice, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::files::Verdict;

#[derive(Debug, Parser)]
#[command(
    name = "robustkit",
    version,
    about = "Approximate robust optimization through online learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded instance with known ground truth to <out>/instance.json.
    Generate(GenerateArgs),
    /// Run a meta-algorithm; writes <out>/summary.json and <out>/trace.csv.
    Solve(SolveArgs),
    /// Certify a solution's worst-case violation; writes <out>/certificate.json.
    Verify(VerifyArgs),
    /// Measure learner regret over seeded sequences; writes <out>/regret.csv.
    RegretBench(BenchArgs),
    /// Plot max violation per iteration from one or more traces; writes <out>/convergence.svg.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct ShapeArgs {
    #[arg(long, default_value = "lp")]
    family: Family,
    /// Decision dimension (matrix side for sdp).
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Number of constraints.
    #[arg(long, default_value_t = 20)]
    m: usize,
    /// Noise dimension.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Total Frobenius norm of the noise matrices.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Robust slack of the planted point (or violation of infeasible instances).
    #[arg(long, default_value_t = 0.05)]
    margin: f64,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Build an instance with no robust feasible point.
    #[arg(long)]
    infeasible: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Instance file; when absent a feasible instance is generated from the shape flags and seed.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, value_enum, default_value = "subgradient")]
    alg: AlgorithmChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration count of the perturbation method: formula or derived.
    #[arg(long, default_value = "formula")]
    t_mode: HorizonMode,
    /// Inner iteration budget of every oracle call.
    #[arg(long)]
    oracle_budget: Option<usize>,
    /// Record wall-clock times (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solution array, solve summary, or summary holding an infeasibility certificate.
    #[arg(long)]
    solution: PathBuf,
    /// Largest worst-case violation accepted.
    #[arg(long)]
    threshold: f64,
    /// Accuracy of the trust-region verifier.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "ogd")]
    learner: Learner,
    /// Dimension of the decision ball.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Rounds per sequence.
    #[arg(long, default_value_t = 1000)]
    rounds: usize,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 50)]
    seeds: usize,
    /// Accuracy given away by the FPL linear oracle.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Trace CSV files; several are overlaid.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn generator_config(shape: &ShapeArgs, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n: shape.n,
        m: shape.m,
        k: shape.k,
        sigma: shape.sigma,
        margin: shape.margin,
        seed,
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(args) => {
            let path = commands::generate(
                args.shape.family,
                generator_config(&args.shape, args.seed),
                args.infeasible,
                &args.out,
            )?;
            println!("wrote {}", path.display());
        }
        Command::Solve(args) => {
            let request = SolveRequest {
                config: ExperimentConfig {
                    family: args.shape.family,
                    n: args.shape.n,
                    m: args.shape.m,
                    k: args.shape.k,
                    sigma: args.shape.sigma,
                    eps: args.eps,
                    delta: args.delta,
                    alg: args.alg,
                    seed: args.seed,
                    t_mode: args.t_mode,
                },
                instance: args.instance,
                margin: args.shape.margin,
                out: args.out,
                timing: args.timing,
                oracle_budget: args.oracle_budget,
            };
            let summary = commands::solve(&request)?;
            debug_assert_eq!(summary.verdict, Verdict::Solved);
            println!(
                "solved: T = {}, oracle calls = {}",
                summary.horizon.unwrap_or(0),
                summary.oracle_calls.unwrap_or(0)
            );
        }
        Command::Verify(args) => {
            let outcome = commands::verify(&args.instance, &args.solution, args.threshold, args.eps, &args.out)?;
            match &outcome {
                VerifyOutcome::Robust(c) => println!(
                    "worst violation {} at constraint {} (threshold {})",
                    c.report.worst_violation, c.report.worst_constraint, c.report.threshold
                ),
                VerifyOutcome::Infeasible(c) => {
                    println!(
                        "certificate bound {} recomputed as {}",
                        c.claimed_bound, c.recomputed_bound
                    )
                }
            }
            if !outcome.passed() {
                return Err(match outcome {
                    VerifyOutcome::Robust(c) => {
                        CliError::Failed(format!("offending constraints {:?}", c.report.offending))
                    }
                    VerifyOutcome::Infeasible(_) => CliError::Failed("certificate does not prove infeasibility".into()),
                });
            }
        }
        Command::RegretBench(args) => {
            let settings = BenchSettings {
                learner: args.learner,
                dim: args.k,
                rounds: args.rounds,
                seeds: args.seeds,
                eps: args.eps,
                base_seed: args.seed,
            };
            let rows = commands::regret_bench(&settings, &args.out)?;
            let n = rows.len() as f64;
            let mean = rows.iter().map(|r| r.regret).sum::<f64>() / n;
            let bound = rows.iter().map(|r| r.bound).sum::<f64>() / n;
            println!(
                "mean regret {mean} against mean bound {bound} over {} seeds",
                rows.len()
            );
            if !bench::within_bounds(args.learner, &rows) {
                return Err(CliError::Failed("regret exceeds its bound".into()));
            }
        }
        Command::Plot(args) => {
            let path = commands::plot(&args.traces, &args.out)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROBUSTKIT_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
