use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chb_core::harness::{
    check_problem, output, run_single, stability_experiment, sweep_delta, sweep_lambda, ExperimentConfig,
};
use chb_core::Error;
use clap::{Args, Parser, Subcommand};
use log::warn;
use serde::Serialize;

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "chb", version, about = "Cahn-Hilliard solver with dynamic boundary conditions on the unit disk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trajectory, diagnostics and summary.
    Solve(Common),
    /// Run the δ-sweep and fit the convergence rate.
    SweepDelta(Common),
    /// Run the continuous-dependence experiment.
    Stability(Common),
    /// Run the λ-sweep.
    SweepLambda(Common),
    /// Validate the problem data and print the admissibility report.
    GraphCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep every N-th trajectory state; 0 keeps only the first and last.
    #[arg(long)]
    stride: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Number of worker threads for independent runs.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for random initial data.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let text = std::fs::read_to_string(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))
            .map_err(|e| Failure::new(EXIT_VALIDATION, e))?;
        let mut config = ExperimentConfig::from_json(&text).map_err(Failure::from)?;
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        if let Some(stride) = self.stride {
            config.output.stride = stride;
        }
        config.output.plots |= self.plots;
        if let Some(workers) = self.workers {
            config.workers = workers;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate().map_err(Failure::from)?;
        Ok(config)
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure { code, error: error.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Validation(report) => {
                if let Ok(json) = output::to_json_string(report) {
                    eprintln!("{json}");
                }
                EXIT_VALIDATION
            }
            Error::Config(_)
            | Error::Json(_)
            | Error::InvalidGraph(_)
            | Error::InvalidPerturbation(_)
            | Error::InvalidGrid(_)
            | Error::ShapeMismatch { .. }
            | Error::MeanMismatch(_) => EXIT_VALIDATION,
            Error::Io(_) => 1,
            _ => EXIT_SOLVER,
        };
        Failure::new(code, e)
    }
}

fn print<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = output::to_json_string(value).map_err(|e| Failure::new(1, e))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(Failure::new(1, e)),
        _ => Ok(()),
    }
}

fn acceptance(ok: bool, what: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::new(EXIT_ACCEPTANCE, anyhow::anyhow!("{what}")))
    }
}

fn solver_failures<'a>(failures: impl Iterator<Item = &'a Option<String>>, out: &Path) -> Result<(), Failure> {
    let failed: Vec<&String> = failures.flatten().collect();
    if failed.is_empty() {
        return Ok(());
    }
    Err(Failure::new(
        EXIT_SOLVER,
        anyhow::anyhow!("{} run(s) failed (report in {}): {}", failed.len(), out.display(), failed[0]),
    ))
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Solve(args) => {
            let config = args.load()?;
            let summary = run_single(&config)?;
            print(&summary)?;
            if let Some(e) = summary.error {
                return Err(Failure::new(
                    EXIT_SOLVER,
                    anyhow::anyhow!("solver failed; last good step at t = {}: {e}", summary.final_time),
                ));
            }
            Ok(())
        }
        Command::SweepDelta(args) => {
            let config = args.load()?;
            let report = sweep_delta(&config)?;
            print(&report)?;
            solver_failures(report.rows.iter().map(|r| &r.failure), &config.output.dir)?;
            if !report.rate_claim_allowed {
                warn!("same-growth condition not verified; the slope is reported without a rate claim");
                return Ok(());
            }
            let slope = report.fit.map_or(f64::NAN, |f| f.slope);
            acceptance(report.slope_ok(), &format!("fitted slope {slope} below {}", report.min_slope))
        }
        Command::Stability(args) => {
            let config = args.load()?;
            let report = stability_experiment(&config)?;
            print(&report)?;
            solver_failures(report.rows.iter().map(|r| &r.failure), &config.output.dir)?;
            let band = report.band.unwrap_or(f64::NAN);
            acceptance(report.within_band(), &format!("ratio band {band} exceeds {}", report.max_band))
        }
        Command::SweepLambda(args) => {
            let config = args.load()?;
            let report = sweep_lambda(&config)?;
            print(&report)?;
            solver_failures(report.rows.iter().map(|r| &r.failure), &config.output.dir)?;
            acceptance(report.differences_decreasing, "successive λ differences do not decrease")?;
            acceptance(report.overshoot_nonincreasing, "obstacle overshoot grows as λ decreases")
        }
        Command::GraphCheck(args) => {
            let config = args.load()?;
            let problem = config.build_problem()?;
            let report = check_problem(&problem, &config.solver)?;
            print(&report)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
