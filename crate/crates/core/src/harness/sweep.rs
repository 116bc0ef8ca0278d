use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{check_same_growth, SameGrowthReport};
use crate::norms::NormToolkit;
use crate::solver::SolverConfig;

use super::output::{self, Series};
use super::{
    check_problem, left_weights, run_recorded, with_workers, ExperimentConfig, ExperimentKind, InvariantSummary,
    RateFit, Recorded, ReferenceMode, Snapshot,
};

/// The four parts of the combined sweep error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorComponents {
    /// `sup_n |u_δ − u|_*`.
    pub sup_dual_bulk: f64,
    /// `(Σ_n dt ‖u_δ − u‖_V²)^{1/2}`.
    pub l2_v_bulk: f64,
    /// `sup_n |v_δ − v|_{Γ,*}`.
    pub sup_dual_trace: f64,
    /// `(Σ_n dt ‖v_δ − v‖_{H^{1/2}}²)^{1/2}`.
    pub l2_h_half_trace: f64,
}

impl ErrorComponents {
    pub fn total(&self) -> f64 {
        self.sup_dual_bulk + self.l2_v_bulk + self.sup_dual_trace + self.l2_h_half_trace
    }
}

/// Combines per-step norms `[dual bulk, V bulk, dual trace, H^{1/2} trace]`
/// with sup in time and left-endpoint time quadrature.
pub fn combine_errors(times: &[f64], norms: &[[f64; 4]]) -> ErrorComponents {
    let w = left_weights(times);
    let sup = |k: usize| norms.iter().map(|n| n[k]).fold(0.0, f64::max);
    let l2 = |k: usize| w.iter().zip(norms).map(|(w, n)| w * n[k] * n[k]).sum::<f64>().sqrt();
    ErrorComponents { sup_dual_bulk: sup(0), l2_v_bulk: l2(1), sup_dual_trace: sup(2), l2_h_half_trace: l2(3) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    /// Combined error `e(δ)`; `None` when the run failed.
    pub error: Option<f64>,
    pub components: Option<ErrorComponents>,
    /// `δ · sup_n ‖∇_Γ v_δ^n‖`.
    pub delta_sup_grad_v: Option<f64>,
    /// `‖v_δ‖_{L²(0,T;H¹(Γ))}`, reported as a boundedness proxy.
    pub l2_h1_trace: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum SweepFlag {
    /// Every successful row has `e = 0`; no rate can be fitted.
    ZeroError,
    InsufficientPoints { usable: usize },
    RowFailed { delta: f64 },
    /// The graph pair fails the same-growth check; the fitted slope carries no rate claim.
    SameGrowthInfeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub reference: ReferenceMode,
    pub reference_delta: f64,
    pub reference_invariants: InvariantSummary,
    pub rows: Vec<SweepRow>,
    pub fit: Option<RateFit>,
    pub flags: Vec<SweepFlag>,
    pub same_growth: Option<SameGrowthReport>,
    pub rate_claim_allowed: bool,
    pub min_slope: f64,
    /// Whether `δ · sup‖∇_Γ v_δ‖` is nonincreasing along the sweep.
    pub monitor_nonincreasing: bool,
    /// Smallest-δ over largest-δ value of the monitor.
    pub monitor_ratio: Option<f64>,
}

impl SweepReport {
    pub fn slope_ok(&self) -> bool {
        self.fit.is_some_and(|f| f.slope >= self.min_slope)
    }
}

/// Fit and flags from finished rows: failed rows and rows with `e = 0` are
/// left out of the fit.
pub fn summarize_sweep(rows: &[SweepRow]) -> (Option<RateFit>, Vec<SweepFlag>) {
    let mut flags: Vec<SweepFlag> =
        rows.iter().filter(|r| r.error.is_none()).map(|r| SweepFlag::RowFailed { delta: r.delta }).collect();
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_some()).collect();
    let points: Vec<(f64, f64)> =
        ok.iter().filter_map(|r| r.error.filter(|e| *e > 0.0).map(|e| (r.delta, e))).collect();
    if !ok.is_empty() && points.is_empty() {
        flags.push(SweepFlag::ZeroError);
        return (None, flags);
    }
    match super::fit_rate(&points) {
        Ok(fit) => (Some(fit), flags),
        Err(_) => {
            flags.push(SweepFlag::InsufficientPoints { usable: points.len() });
            (None, flags)
        }
    }
}

fn evaluate(delta: f64, run: &Recorded, reference: &[Snapshot], norms: &NormToolkit) -> Result<SweepRow> {
    let g = norms.grid();
    if run.snapshots.len() != reference.len() {
        return Err(Error::Config("sweep runs have different step counts".into()));
    }
    let mut per_step = Vec::with_capacity(reference.len());
    let mut sup_grad = 0.0f64;
    let mut h1 = Vec::with_capacity(reference.len());
    for (s, r) in run.snapshots.iter().zip(reference) {
        let du = s.u.sub(&r.u);
        let dv = s.v.sub(&r.v);
        per_step.push([
            norms.dual_norm_bulk(&du)?,
            norms.v_norm_bulk(&du, &dv)?,
            norms.dual_norm_trace(&dv)?,
            norms.h_half_norm_trace(&dv)?,
        ]);
        sup_grad = sup_grad.max(g.h1_seminorm_trace(&s.v)?);
        h1.push(norms.v_norm_trace(&s.v)?);
    }
    let times: Vec<f64> = reference.iter().map(|s| s.t).collect();
    let components = combine_errors(&times, &per_step);
    let l2_h1 = left_weights(&times).iter().zip(&h1).map(|(w, x)| w * x * x).sum::<f64>().sqrt();
    Ok(SweepRow {
        delta,
        error: Some(components.total()),
        components: Some(components),
        delta_sup_grad_v: Some(delta * sup_grad),
        l2_h1_trace: Some(l2_h1),
        failure: None,
    })
}

/// δ-sweep against a reference run with identical data, grid, `dt` and `λ`.
/// Writes `sweep_delta.csv`, `sweep_delta.json` and, with plots enabled,
/// `sweep_delta.svg` to the output directory.
pub fn sweep_delta(config: &ExperimentConfig) -> Result<SweepReport> {
    let ExperimentKind::SweepDelta { deltas, reference, min_slope } = &config.experiment else {
        return Err(Error::Config("experiment kind is not sweep_delta".into()));
    };
    config.validate()?;
    let problem = config.build_problem()?;
    check_problem(&problem, &config.solver)?;
    let samples = problem.default_sample_grid();
    let same_growth = check_same_growth(&problem.bulk_graph, &problem.boundary_graph, &samples).ok();
    let rate_claim_allowed = same_growth.as_ref().is_some_and(|s| s.feasible);
    if !rate_claim_allowed {
        log::warn!("same-growth check failed; the fitted slope carries no rate claim");
    }

    let reference_delta = match reference {
        ReferenceMode::DeltaZero => 0.0,
        ReferenceMode::Finest => *deltas.last().expect("validated nonempty"),
    };
    let with_delta = |delta: f64| SolverConfig { delta, ..config.solver };
    let norms = NormToolkit::new(&problem.grid);

    let ref_run = run_recorded(&problem, with_delta(reference_delta))?;
    let reference_invariants = InvariantSummary::from_diagnostics(&ref_run.diagnostics);

    let rows: Vec<SweepRow> = with_workers(config.workers, || {
        deltas
            .par_iter()
            .map(|&delta| {
                let outcome = if delta == reference_delta {
                    evaluate(delta, &ref_run, &ref_run.snapshots, &norms)
                } else {
                    run_recorded(&problem, with_delta(delta))
                        .and_then(|run| evaluate(delta, &run, &ref_run.snapshots, &norms))
                };
                outcome.unwrap_or_else(|e| SweepRow {
                    delta,
                    error: None,
                    components: None,
                    delta_sup_grad_v: None,
                    l2_h1_trace: None,
                    failure: Some(e.to_string()),
                })
            })
            .collect()
    })?;

    let (fit, mut flags) = summarize_sweep(&rows);
    if !rate_claim_allowed {
        flags.push(SweepFlag::SameGrowthInfeasible);
    }
    let monitor: Vec<f64> = rows.iter().filter_map(|r| r.delta_sup_grad_v).collect();
    let monitor_nonincreasing = monitor.windows(2).all(|w| w[1] <= w[0]);
    let monitor_ratio = match (monitor.first(), monitor.last()) {
        (Some(&a), Some(&b)) if monitor.len() > 1 && a > 0.0 => Some(b / a),
        _ => None,
    };
    let report = SweepReport {
        reference: *reference,
        reference_delta,
        reference_invariants,
        rows,
        fit,
        flags,
        same_growth,
        rate_claim_allowed,
        min_slope: *min_slope,
        monitor_nonincreasing,
        monitor_ratio,
    };
    write_report(config, &report)?;
    Ok(report)
}

fn write_report(config: &ExperimentConfig, report: &SweepReport) -> Result<()> {
    let out = &config.output.dir;
    fs::create_dir_all(out)?;
    let nan = f64::NAN;
    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| {
            let c = r.components;
            vec![
                r.delta,
                r.error.unwrap_or(nan),
                c.map_or(nan, |c| c.sup_dual_bulk),
                c.map_or(nan, |c| c.l2_v_bulk),
                c.map_or(nan, |c| c.sup_dual_trace),
                c.map_or(nan, |c| c.l2_h_half_trace),
                r.delta_sup_grad_v.unwrap_or(nan),
                r.l2_h1_trace.unwrap_or(nan),
            ]
        })
        .collect();
    output::write_csv(
        &out.join("sweep_delta.csv"),
        &[
            "delta",
            "error",
            "sup_dual_bulk",
            "l2_v_bulk",
            "sup_dual_trace",
            "l2_h_half_trace",
            "delta_sup_grad_v",
            "l2_h1_trace",
        ],
        &rows,
    )?;
    output::write_json(&out.join("sweep_delta.json"), report)?;
    if config.output.plots {
        let pts: Vec<(f64, f64)> = report.rows.iter().filter_map(|r| r.error.map(|e| (r.delta, e))).collect();
        let mut series = vec![Series { name: "e(δ)", points: pts.clone(), dashed: false }];
        let label;
        if let Some(f) = report.fit {
            label = format!("fit, slope {:.3}", f.slope);
            let line = pts.iter().map(|(d, _)| (*d, (f.intercept + f.slope * d.ln()).exp())).collect();
            series.push(Series { name: &label, points: line, dashed: true });
        }
        fs::write(out.join("sweep_delta.svg"), output::loglog_svg("combined error vs δ", "δ", "e(δ)", &series))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(delta: f64, e: Option<f64>) -> SweepRow {
        SweepRow {
            delta,
            error: e,
            components: None,
            delta_sup_grad_v: None,
            l2_h1_trace: None,
            failure: e.is_none().then(|| "failed".to_string()),
        }
    }

    #[test]
    fn zero_errors_refuse_fit() {
        let (fit, flags) = summarize_sweep(&[row(0.1, Some(0.0)), row(0.05, Some(0.0)), row(0.025, Some(0.0))]);
        assert!(fit.is_none());
        assert_eq!(flags, vec![SweepFlag::ZeroError]);
    }

    #[test]
    fn synthetic_half_rate() {
        let rows: Vec<SweepRow> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&d| row(d, Some(d.sqrt()))).collect();
        let (fit, flags) = summarize_sweep(&rows);
        assert!(flags.is_empty());
        assert!((fit.unwrap().slope - 0.5).abs() < 1e-12);
    }

    #[test]
    fn failed_rows_excluded_and_flagged() {
        let rows = vec![row(0.1, Some(0.1)), row(0.05, None), row(0.025, Some(0.025)), row(0.0125, Some(0.0125))];
        let (fit, flags) = summarize_sweep(&rows);
        assert!((fit.unwrap().slope - 1.0).abs() < 1e-12);
        assert_eq!(flags, vec![SweepFlag::RowFailed { delta: 0.05 }]);
        let (fit, flags) = summarize_sweep(&rows[..2]);
        assert!(fit.is_none());
        assert!(flags.contains(&SweepFlag::InsufficientPoints { usable: 1 }));
    }

    #[test]
    fn combine_uses_sup_and_left_endpoints() {
        let c = combine_errors(&[0.0, 0.5, 1.0], &[[0.0, 0.0, 1.0, 0.0], [2.0, 1.0, 0.5, 2.0], [1.0, 9.0, 0.0, 9.0]]);
        assert_eq!(c.sup_dual_bulk, 2.0);
        assert_eq!(c.sup_dual_trace, 1.0);
        assert!((c.l2_v_bulk - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((c.l2_h_half_trace - 2.0f64.sqrt()).abs() < 1e-15);
    }

    fn sweep_config(dir: &std::path::Path, deltas: &str, reference: &str) -> ExperimentConfig {
        let json = format!(
            r#"{{"problem": {{"preset": "cubic"}}, "grid": {{"n_r": 8, "n_theta": 16}},
                "solver": {{"delta": 0.0, "lambda": 0.01, "dt": 0.01, "t_end": 0.05}},
                "experiment": {{"kind": "sweep_delta", "deltas": {deltas}, "reference": "{reference}"}},
                "output": {{"dir": {:?}, "plots": true}}, "workers": 2}}"#,
            dir.to_str().unwrap()
        );
        ExperimentConfig::from_json(&json).unwrap()
    }

    #[test]
    fn reference_repeated_gives_zero_error() {
        let dir = tempfile::tempdir().unwrap();
        let r = sweep_delta(&sweep_config(dir.path(), "[0.1]", "finest")).unwrap();
        assert_eq!(r.rows[0].error, Some(0.0));
        assert!(r.fit.is_none());
        assert!(r.flags.contains(&SweepFlag::ZeroError));
    }

    #[test]
    fn small_sweep_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let r = sweep_delta(&sweep_config(dir.path(), "[0.4, 0.2, 0.1]", "delta_zero")).unwrap();
        assert!(r.rows.iter().all(|row| row.error.unwrap() > 0.0));
        assert!(r.fit.is_some());
        assert_eq!(r.reference_delta, 0.0);
        assert!(r.reference_invariants.max_mass_drift_bulk <= 1e-11);
        for f in ["sweep_delta.csv", "sweep_delta.json", "sweep_delta.svg"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let csv = fs::read_to_string(dir.path().join("sweep_delta.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
    }
}
