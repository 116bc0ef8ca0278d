use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(f64),

    #[error("resolvent root find failed for r = {r}, lambda = {lambda}")]
    RootFindFailure { r: f64, lambda: f64 },

    #[error("{0} lies outside the graph domain")]
    OutOfDomain(f64),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("sample grid is empty")]
    EmptySampleGrid,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("input has nonzero mean {mean:e}")]
    NonzeroMean { mean: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("Newton iteration diverged at t = {t} (residual {residual:e} after {iterations} iterations)")]
    NewtonDivergence { t: f64, residual: f64, iterations: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("rate fit point ({0}, {1}) is not strictly positive")]
    NonPositivePoint(f64, f64),

    #[error("perturbed data violates the mean condition by {0:e}")]
    MeanMismatch(f64),

    #[error("validation failed with {} issue(s)", .0.issues.len())]
    Validation(Box<crate::solver::ValidationReport>),

    #[error("run failed after t = {last_time}: {source}")]
    RunFailed { last_time: f64, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
