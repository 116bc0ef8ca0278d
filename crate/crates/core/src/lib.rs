//! Numerical core for viscous Cahn–Hilliard systems with dynamic boundary
//! conditions on the unit disk.

pub mod error;
pub mod graphs;
pub mod grid;
pub mod harness;
pub mod norms;
pub mod solver;

pub use error::{Error, Result};
pub use graphs::{
    check_domination, check_same_growth, DominationReport, GraphSpec, Interval, Perturbation, SameGrowthReport,
};
pub use grid::{Boundary, BulkField, DiskGrid, GridSpec, TraceField};
pub use norms::NormToolkit;
pub use solver::{DiagnosticsRow, Problem, ProblemSpec, Solver, SolverConfig, StepSolution, Trajectory};
