//! Experiment orchestration: single runs, δ- and λ-sweeps, the
//! continuous-dependence experiment, and report emission.

mod config;
mod lambda;
pub mod output;
mod rate;
mod stability;
mod sweep;

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BulkField, TraceField};
use crate::solver::{validate, DiagnosticsRow, Problem, Solver, SolverConfig, StepSolution, ValidationReport};

pub use config::{
    ExperimentConfig, ExperimentKind, OutputConfig, PresetRef, ProblemEntry, ReferenceMode, StabilityPerturbation,
};
pub use lambda::{sweep_lambda, LambdaDifference, LambdaReport, LambdaRow};
pub use rate::{fit_rate, RateFit};
pub use stability::{stability_experiment, StabilityReport, StabilityRow};
pub use sweep::{combine_errors, summarize_sweep, sweep_delta, ErrorComponents, SweepFlag, SweepReport, SweepRow};

/// Runs `problem` validation and turns failures into [`Error::Validation`].
pub fn check_problem(problem: &Problem, config: &SolverConfig) -> Result<ValidationReport> {
    let report = validate(problem, config);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if report.is_ok() {
        Ok(report)
    } else {
        Err(Error::Validation(Box::new(report)))
    }
}

/// Runs `f` on a pool of `workers` threads.
pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// The `(u, v)` part of a state.
#[derive(Debug, Clone)]
pub(crate) struct Snapshot {
    pub t: f64,
    pub u: BulkField,
    pub v: TraceField,
}

/// A finished run reduced to per-step snapshots and diagnostics.
pub(crate) struct Recorded {
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: Vec<DiagnosticsRow>,
}

/// Runs to `t_end` keeping `(u, v)` at every step; a mid-run failure is
/// reported with the last good time.
pub(crate) fn run_recorded(problem: &Problem, config: SolverConfig) -> Result<Recorded> {
    let mut solver = Solver::new(problem, config)?;
    let mut snapshots = Vec::new();
    let traj = solver.run_with(0, |s, _| snapshots.push(Snapshot { t: s.t, u: s.u.clone(), v: s.v.clone() }));
    if let Some(e) = traj.error {
        let last_time = snapshots.last().map_or(0.0, |s| s.t);
        return Err(Error::RunFailed { last_time, source: Box::new(e) });
    }
    Ok(Recorded { snapshots, diagnostics: traj.diagnostics })
}

/// Left-endpoint weights `t_{n+1} − t_n` (zero for the last time level).
pub(crate) fn left_weights(times: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = times.windows(2).map(|p| p[1] - p[0]).collect();
    w.push(0.0);
    w
}

/// Largest drift of the bulk and boundary means from their initial values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantSummary {
    pub max_mass_drift_bulk: f64,
    pub max_mass_drift_trace: f64,
    /// Largest single-step energy increase.
    pub max_energy_increase: f64,
}

impl InvariantSummary {
    pub fn from_diagnostics(rows: &[DiagnosticsRow]) -> Self {
        let (m0, g0) = rows.first().map_or((0.0, 0.0), |r| (r.mass_bulk, r.mass_trace));
        InvariantSummary {
            max_mass_drift_bulk: rows.iter().map(|r| (r.mass_bulk - m0).abs()).fold(0.0, f64::max),
            max_mass_drift_trace: rows.iter().map(|r| (r.mass_trace - g0).abs()).fold(0.0, f64::max),
            max_energy_increase: rows.iter().skip(1).map(|r| r.d_energy).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: usize,
    pub final_time: f64,
    pub initial_mass_bulk: f64,
    pub initial_mass_trace: f64,
    pub final_mass_bulk: f64,
    pub final_mass_trace: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub energy_drop: f64,
    pub invariants: InvariantSummary,
    /// `dt·(L + L_Γ)`.
    pub stiffness: f64,
    pub wall_time_seconds: f64,
    pub warnings: Vec<String>,
    /// Solver failure message; the run stopped at `final_time`.
    pub error: Option<String>,
}

fn write_state(dir: &Path, index: usize, s: &StepSolution) -> Result<()> {
    let bulk = [("u", &s.u), ("mu", &s.mu), ("xi", &s.xi)];
    for (name, field) in bulk {
        let mut f = std::io::BufWriter::new(fs::File::create(dir.join(format!("{name}_{index:06}.csv")))?);
        field.write_csv(&mut f, s.t, true)?;
    }
    let trace = [("v", &s.v), ("w", &s.w), ("eta", &s.eta)];
    for (name, field) in trace {
        let mut f = std::io::BufWriter::new(fs::File::create(dir.join(format!("{name}_{index:06}.csv")))?);
        field.write_csv(&mut f, s.t, true)?;
    }
    Ok(())
}

/// One run of the configured problem: trajectory CSVs every `stride` steps,
/// `diagnostics.csv` and `summary.json` under the output directory.
pub fn run_single(config: &ExperimentConfig) -> Result<RunSummary> {
    let problem = config.build_problem()?;
    let report = check_problem(&problem, &config.solver)?;
    let out = &config.output.dir;
    let traj_dir = out.join("trajectory");
    fs::create_dir_all(&traj_dir)?;

    let clock = Instant::now();
    let mut solver = Solver::new(&problem, config.solver)?;
    let traj = solver.run(config.output.stride);
    let wall = clock.elapsed().as_secs_f64();

    for (k, s) in traj.states.iter().enumerate() {
        write_state(&traj_dir, k, s)?;
    }
    let mut f = std::io::BufWriter::new(fs::File::create(out.join("diagnostics.csv"))?);
    DiagnosticsRow::write_csv(&traj.diagnostics, &mut f)?;

    let first = traj.diagnostics.first().copied().expect("initial diagnostics row");
    let last = traj.diagnostics.last().copied().expect("initial diagnostics row");
    let mut warnings = report.warnings.clone();
    if traj.stiffness > 0.5 {
        warnings.push(format!("dt·(L + L_Γ) = {:.3} exceeds 0.5", traj.stiffness));
    }
    let summary = RunSummary {
        steps: traj.diagnostics.len() - 1,
        final_time: last.t,
        initial_mass_bulk: first.mass_bulk,
        initial_mass_trace: first.mass_trace,
        final_mass_bulk: last.mass_bulk,
        final_mass_trace: last.mass_trace,
        initial_energy: first.energy,
        final_energy: last.energy,
        energy_drop: first.energy - last.energy,
        invariants: InvariantSummary::from_diagnostics(&traj.diagnostics),
        stiffness: traj.stiffness,
        wall_time_seconds: wall,
        warnings,
        error: traj.error.map(|e| e.to_string()),
    };
    output::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(preset: &str, t_end: f64, dir: &Path) -> ExperimentConfig {
        let json = format!(
            r#"{{"problem": {{"preset": "{preset}"}}, "grid": {{"n_r": 8, "n_theta": 16}},
                "solver": {{"delta": 0.1, "lambda": 0.01, "dt": 0.01, "t_end": {t_end}}},
                "output": {{"dir": {:?}, "stride": 2}}}}"#,
            dir.to_str().unwrap()
        );
        ExperimentConfig::from_json(&json).unwrap()
    }

    #[test]
    fn single_run_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_single(&config("cubic", 0.05, dir.path())).unwrap();
        assert_eq!(s.steps, 5);
        assert!(s.error.is_none());
        assert!(s.invariants.max_mass_drift_bulk <= 1e-11);
        assert!(s.energy_drop >= 0.0);
        let traj = dir.path().join("trajectory");
        for name in ["u", "mu", "xi", "v", "w", "eta"] {
            for k in 0..4 {
                assert!(traj.join(format!("{name}_{k:06}.csv")).exists(), "{name} {k}");
            }
        }
        let diag = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
        assert_eq!(diag.lines().count(), 7);
        assert!(diag.starts_with(DiagnosticsRow::CSV_HEADER));
    }

    #[test]
    fn zero_run_is_constant() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_single(&config("zero", 0.03, dir.path())).unwrap();
        assert_eq!(s.final_energy, 0.0);
        assert_eq!(s.final_mass_bulk, 0.0);
        assert_eq!(s.invariants.max_mass_drift_trace, 0.0);
    }

    #[test]
    fn validation_failure_is_structured() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config("obstacle", 0.02, dir.path());
        if let ProblemEntry::Preset(p) = &mut c.problem {
            p.initial = Some(crate::solver::InitialSpec::Modes {
                mean: 0.0,
                terms: vec![crate::solver::ModeTerm::new(2.0, 1.0, 1)],
            });
        }
        match run_single(&c) {
            Err(Error::Validation(r)) => assert!(!r.is_ok()),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn left_endpoint_weights() {
        assert_eq!(left_weights(&[0.0, 0.25, 0.75]), vec![0.25, 0.5, 0.0]);
    }
}
