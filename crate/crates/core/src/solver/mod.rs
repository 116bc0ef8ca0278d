//! Backward-Euler time stepping for the viscous Cahn–Hilliard system with a
//! dynamic boundary condition of Cahn–Hilliard type.
//!
//! Per step the unknowns `(u′, μ′, v′, w′)` solve
//!
//! ```text
//! (u′ − u)/dt = Δ_h μ′                                   (zero flux on μ′)
//! μ′ = λ(u′ − u)/dt − Δ_h u′ + β_λ(u′) + π(u) + s(u′ − u) − f(t′)
//! (v′ − v)/dt = Δ_Γ w′
//! w′ = λ(v′ − v)/dt + ∂_ν u′ − δΔ_Γ v′ + β_Γ,λ(v′) + π_Γ(v) + s(v′ − v) − g(t′)
//! ```
//!
//! where `Δ_h u′` closes the outer face on the ring `v′`. Monotone terms are
//! implicit and the Lipschitz perturbations explicit.

mod problem;
mod stepper;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BulkField, TraceField};

pub use problem::{
    mean_correct, mean_gap, validate, InitialSpec, ModeTerm, Preset, PresetParams, Problem, ProblemSpec, SourceSpec,
    ValidationIssue, ValidationReport, RANGE_MARGIN,
};
pub use stepper::{energy, run, step, Solver, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Surface diffusion coefficient `δ ∈ [0, 1]`.
    pub delta: f64,
    /// Viscosity and Yosida parameter `λ ∈ (0, 1]`.
    pub lambda: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "SolverConfig::default_tol")]
    pub newton_tol: f64,
    #[serde(default = "SolverConfig::default_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default)]
    pub stabilization: f64,
}

impl SolverConfig {
    fn default_tol() -> f64 {
        1e-10
    }
    fn default_max_iter() -> usize {
        50
    }

    pub fn new(delta: f64, lambda: f64, dt: f64, t_end: f64) -> Self {
        SolverConfig {
            delta,
            lambda,
            dt,
            t_end,
            newton_tol: Self::default_tol(),
            newton_max_iter: Self::default_max_iter(),
            stabilization: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1], got {}", self.delta));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda must lie in (0, 1], got {}", self.lambda));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.newton_tol > 0.0) {
            return bad(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter must be at least 1".into());
        }
        if !(self.stabilization >= 0.0 && self.stabilization.is_finite()) {
            return bad(format!("stabilization must be nonnegative, got {}", self.stabilization));
        }
        Ok(())
    }

    /// Step times `t_1 < … < t_N = t_end`; a trailing partial step is kept.
    pub fn step_times(&self) -> Vec<f64> {
        let whole = (self.t_end / self.dt * (1.0 + 1e-12)).floor() as usize;
        let mut times: Vec<f64> = (1..=whole).map(|n| n as f64 * self.dt).collect();
        match times.last() {
            Some(&last) if (self.t_end - last).abs() <= 1e-12 * self.t_end => {
                *times.last_mut().unwrap() = self.t_end;
            }
            _ => times.push(self.t_end),
        }
        times
    }
}

/// The discrete sextuplet at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub t: f64,
    pub u: BulkField,
    pub mu: BulkField,
    pub xi: BulkField,
    pub v: TraceField,
    pub w: TraceField,
    pub eta: TraceField,
    pub newton_iters: usize,
    pub residual: f64,
}

/// Per-step monitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass_bulk: f64,
    pub mass_trace: f64,
    pub energy: f64,
    pub d_energy: f64,
    pub grad_mu: f64,
    pub grad_w: f64,
    /// Largest distance of `v` from `D(β_Γ)`.
    pub overshoot: f64,
    pub delta_h1v: f64,
    pub newton_iters: usize,
}

impl DiagnosticsRow {
    pub const CSV_HEADER: &'static str =
        "t,mass_bulk,mass_trace,energy,d_energy,grad_mu,grad_w,overshoot,delta_h1v,newton_iters";

    pub fn write_csv<W: Write>(rows: &[DiagnosticsRow], out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.t,
                r.mass_bulk,
                r.mass_trace,
                r.energy,
                r.d_energy,
                r.grad_mu,
                r.grad_w,
                r.overshoot,
                r.delta_h1v,
                r.newton_iters
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_ranges() {
        assert!(SolverConfig::new(0.0, 1.0, 1e-3, 0.1).validate().is_ok());
        assert!(SolverConfig::new(1.5, 0.1, 1e-3, 0.1).validate().is_err());
        assert!(SolverConfig::new(0.5, 0.0, 1e-3, 0.1).validate().is_err());
        assert!(SolverConfig::new(0.5, 0.1, -1.0, 0.1).validate().is_err());
        let json = r#"{"delta":0.1,"lambda":0.01,"dt":0.001,"t_end":0.25}"#;
        let c: SolverConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.newton_tol, 1e-10);
        assert_eq!(c.newton_max_iter, 50);
        assert_eq!(c.stabilization, 0.0);
    }

    #[test]
    fn step_times_cover_interval() {
        let t = SolverConfig::new(0.1, 0.1, 1e-3, 0.25).step_times();
        assert_eq!(t.len(), 250);
        assert_eq!(*t.last().unwrap(), 0.25);
        let t = SolverConfig::new(0.1, 0.1, 0.1, 0.25).step_times();
        assert_eq!(t.len(), 3);
        assert_eq!(*t.last().unwrap(), 0.25);
    }
}
