use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::NormToolkit;
use crate::solver::{mean_correct, Problem};

use super::output::{self, Series};
use super::{check_problem, run_recorded, with_workers, ExperimentConfig, ExperimentKind, Recorded, StabilityPerturbation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub amplitude: f64,
    /// `sup_t LHS(t)/RHS(t)` over times with `RHS > 0`.
    pub sup_ratio: Option<f64>,
    pub sup_lhs: Option<f64>,
    pub final_rhs: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Largest over smallest ratio across amplitudes.
    pub band: Option<f64>,
    pub max_band: f64,
    /// `max_a |ratio(a)/ratio(a₀) − 1|`.
    pub homogeneity_spread: Option<f64>,
}

impl StabilityReport {
    pub fn within_band(&self) -> bool {
        self.band.is_some_and(|b| b <= self.max_band)
    }
}

/// Problem data with `amplitude` times the unit perturbation added.
fn perturbed(base: &Problem, pert: &StabilityPerturbation, amplitude: f64, seed: u64) -> Result<Problem> {
    let mut p = base.clone();
    p.f = base.f.plus(pert.f.scaled(amplitude));
    p.g = base.g.plus(pert.g.scaled(amplitude));
    if let Some(init) = &pert.initial {
        let (du, dv) = init.build(&base.grid, seed)?;
        let (du, dv) = mean_correct(&base.grid, &du.scaled(amplitude), &dv.scaled(amplitude))?;
        p.u0 = base.u0.zip_map(&du, |a, b| a + b);
        p.v0 = base.v0.zip_map(&dv, |a, b| a + b);
    }
    Ok(p)
}

/// `(LHS(t_n), RHS(t_n))` of the continuous-dependence estimate, with
/// right-endpoint quadrature for the time integrals.
fn lhs_rhs(
    base: &Recorded,
    run: &Recorded,
    pert: &StabilityPerturbation,
    amplitude: f64,
    norms: &NormToolkit,
) -> Result<Vec<(f64, f64)>> {
    let g = norms.grid();
    let mut out = Vec::with_capacity(base.snapshots.len());
    let (mut int_lhs, mut int_rhs) = (0.0, 0.0);
    let mut initial = 0.0;
    for (n, (a, b)) in base.snapshots.iter().zip(&run.snapshots).enumerate() {
        let du = b.u.sub(&a.u);
        let dv = b.v.sub(&a.v);
        let pointwise = norms.dual_norm_bulk(&du)?.powi(2) + norms.dual_norm_trace(&dv)?.powi(2);
        if n == 0 {
            initial = pointwise;
        } else {
            let dt = a.t - base.snapshots[n - 1].t;
            int_lhs += dt * (norms.v_norm_bulk(&du, &dv)?.powi(2) + norms.h_half_norm_trace(&dv)?.powi(2));
            let f = pert.f.scaled(amplitude).bulk(g, a.t)?;
            let gs = pert.g.scaled(amplitude).trace(g, a.t)?;
            int_rhs += dt * (g.inner_bulk(&f, &f)? + g.inner_trace(&gs, &gs)?);
        }
        out.push((pointwise + int_lhs, initial + int_rhs));
    }
    Ok(out)
}

/// Continuous dependence on the data: for each amplitude `a`, the base run
/// and the run with `a` times the perturbation are compared.
/// Writes `stability.csv`, `stability.json` and optionally `stability.svg`.
pub fn stability_experiment(config: &ExperimentConfig) -> Result<StabilityReport> {
    let ExperimentKind::Stability { amplitudes, perturbation, max_band } = &config.experiment else {
        return Err(Error::Config("experiment kind is not stability".into()));
    };
    config.validate()?;
    let problem = config.build_problem()?;
    check_problem(&problem, &config.solver)?;
    let problems: Vec<Problem> = amplitudes
        .iter()
        .map(|&a| perturbed(&problem, perturbation, a, config.seed))
        .collect::<Result<_>>()?;
    let norms = NormToolkit::new(&problem.grid);
    let base = run_recorded(&problem, config.solver)?;

    let rows: Vec<StabilityRow> = with_workers(config.workers, || {
        amplitudes
            .par_iter()
            .zip(&problems)
            .map(|(&amplitude, p)| {
                let outcome = run_recorded(p, config.solver)
                    .and_then(|run| lhs_rhs(&base, &run, perturbation, amplitude, &norms));
                match outcome {
                    Ok(series) => StabilityRow {
                        amplitude,
                        sup_ratio: series
                            .iter()
                            .filter(|(_, r)| *r > 0.0)
                            .map(|(l, r)| l / r)
                            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x)))),
                        sup_lhs: Some(series.iter().map(|(l, _)| *l).fold(0.0, f64::max)),
                        final_rhs: series.last().map(|(_, r)| *r),
                        failure: None,
                    },
                    Err(e) => StabilityRow {
                        amplitude,
                        sup_ratio: None,
                        sup_lhs: None,
                        final_rhs: None,
                        failure: Some(e.to_string()),
                    },
                }
            })
            .collect()
    })?;

    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.sup_ratio).collect();
    let complete = ratios.len() == rows.len() && !ratios.is_empty();
    let band = complete.then(|| {
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    });
    let homogeneity_spread = complete.then(|| ratios.iter().map(|r| (r / ratios[0] - 1.0).abs()).fold(0.0, f64::max));
    let report = StabilityReport { rows, band, max_band: *max_band, homogeneity_spread };
    write_report(config, &report)?;
    Ok(report)
}

fn write_report(config: &ExperimentConfig, report: &StabilityReport) -> Result<()> {
    let out = &config.output.dir;
    fs::create_dir_all(out)?;
    let nan = f64::NAN;
    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| {
            vec![r.amplitude, r.sup_ratio.unwrap_or(nan), r.sup_lhs.unwrap_or(nan), r.final_rhs.unwrap_or(nan)]
        })
        .collect();
    output::write_csv(&out.join("stability.csv"), &["amplitude", "sup_ratio", "sup_lhs", "final_rhs"], &rows)?;
    output::write_json(&out.join("stability.json"), report)?;
    if config.output.plots {
        let pts = report.rows.iter().filter_map(|r| r.sup_ratio.map(|x| (r.amplitude, x))).collect();
        let series = [Series { name: "sup LHS/RHS", points: pts, dashed: false }];
        fs::write(out.join("stability.svg"), output::loglog_svg("stability ratio", "amplitude", "ratio", &series))?;
    }
    Ok(())
}
