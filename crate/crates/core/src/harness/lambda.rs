use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::NormToolkit;
use crate::solver::SolverConfig;

use super::output::{self, Series};
use super::{check_problem, left_weights, run_recorded, with_workers, ExperimentConfig, ExperimentKind, Recorded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    /// `max_n max_j dist(v_j^n, D(β_Γ))`.
    pub max_overshoot: Option<f64>,
    pub final_energy: Option<f64>,
    pub failure: Option<String>,
}

/// Distance between the runs at two consecutive λ values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaDifference {
    pub lambda_a: f64,
    pub lambda_b: f64,
    /// `‖u_a − u_b‖_{L²(0,T;V)}`.
    pub bulk: f64,
    /// `‖v_a − v_b‖_{L²(0,T;L²(Γ))}`.
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub rows: Vec<LambdaRow>,
    pub differences: Vec<LambdaDifference>,
    pub differences_decreasing: bool,
    pub overshoot_nonincreasing: bool,
}

fn difference(a: &Recorded, b: &Recorded, la: f64, lb: f64, norms: &NormToolkit) -> Result<LambdaDifference> {
    let g = norms.grid();
    let times: Vec<f64> = a.snapshots.iter().map(|s| s.t).collect();
    let w = left_weights(&times);
    let (mut bulk, mut boundary) = (0.0, 0.0);
    for ((sa, sb), w) in a.snapshots.iter().zip(&b.snapshots).zip(&w) {
        let du = sa.u.sub(&sb.u);
        let dv = sa.v.sub(&sb.v);
        bulk += w * norms.v_norm_bulk(&du, &dv)?.powi(2);
        boundary += w * g.inner_trace(&dv, &dv)?;
    }
    Ok(LambdaDifference { lambda_a: la, lambda_b: lb, bulk: bulk.sqrt(), boundary: boundary.sqrt() })
}

/// Runs each λ with common data and measures successive differences.
/// Writes `sweep_lambda.csv`, `sweep_lambda.json` and optionally `sweep_lambda.svg`.
pub fn sweep_lambda(config: &ExperimentConfig) -> Result<LambdaReport> {
    let ExperimentKind::SweepLambda { lambdas } = &config.experiment else {
        return Err(Error::Config("experiment kind is not sweep_lambda".into()));
    };
    config.validate()?;
    let problem = config.build_problem()?;
    check_problem(&problem, &config.solver)?;
    let norms = NormToolkit::new(&problem.grid);

    let runs: Vec<Result<Recorded>> = with_workers(config.workers, || {
        lambdas.par_iter().map(|&lambda| run_recorded(&problem, SolverConfig { lambda, ..config.solver })).collect()
    })?;

    let rows: Vec<LambdaRow> = lambdas
        .iter()
        .zip(&runs)
        .map(|(&lambda, run)| match run {
            Ok(r) => LambdaRow {
                lambda,
                max_overshoot: Some(r.diagnostics.iter().map(|d| d.overshoot).fold(0.0, f64::max)),
                final_energy: r.diagnostics.last().map(|d| d.energy),
                failure: None,
            },
            Err(e) => LambdaRow { lambda, max_overshoot: None, final_energy: None, failure: Some(e.to_string()) },
        })
        .collect();

    let mut differences = Vec::new();
    for k in 0..lambdas.len() - 1 {
        if let (Ok(a), Ok(b)) = (&runs[k], &runs[k + 1]) {
            differences.push(difference(a, b, lambdas[k], lambdas[k + 1], &norms)?);
        }
    }
    let complete = differences.len() + 1 == lambdas.len();
    let differences_decreasing =
        complete && differences.windows(2).all(|w| w[1].bulk <= w[0].bulk && w[1].boundary <= w[0].boundary);
    let overshoots: Vec<f64> = rows.iter().filter_map(|r| r.max_overshoot).collect();
    let overshoot_nonincreasing = overshoots.len() == rows.len() && overshoots.windows(2).all(|w| w[1] <= w[0]);

    let report = LambdaReport { rows, differences, differences_decreasing, overshoot_nonincreasing };
    write_report(config, &report)?;
    Ok(report)
}

fn write_report(config: &ExperimentConfig, report: &LambdaReport) -> Result<()> {
    let out = &config.output.dir;
    fs::create_dir_all(out)?;
    let nan = f64::NAN;
    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let d = k.checked_sub(1).and_then(|i| report.differences.iter().find(|d| d.lambda_a == report.rows[i].lambda));
            vec![
                r.lambda,
                r.max_overshoot.unwrap_or(nan),
                r.final_energy.unwrap_or(nan),
                d.map_or(nan, |d| d.bulk),
                d.map_or(nan, |d| d.boundary),
            ]
        })
        .collect();
    output::write_csv(
        &out.join("sweep_lambda.csv"),
        &["lambda", "max_overshoot", "final_energy", "diff_bulk_prev", "diff_boundary_prev"],
        &rows,
    )?;
    output::write_json(&out.join("sweep_lambda.json"), report)?;
    if config.output.plots {
        let bulk = report.differences.iter().map(|d| (d.lambda_b, d.bulk)).collect();
        let boundary = report.differences.iter().map(|d| (d.lambda_b, d.boundary)).collect();
        let series = [
            Series { name: "bulk L²(V)", points: bulk, dashed: false },
            Series { name: "boundary L²(L²)", points: boundary, dashed: false },
        ];
        let svg = output::loglog_svg("successive λ differences", "λ", "difference", &series);
        fs::write(out.join("sweep_lambda.svg"), svg)?;
    }
    Ok(())
}
