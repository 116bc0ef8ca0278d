//! Problem data: graphs, perturbations, sources, initial data, and the
//! admissibility checks run before a solve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{
    check_domination, check_same_growth, linspace, DominationReport, GraphSpec, Interval, Perturbation,
    SameGrowthReport,
};
use crate::grid::{BulkField, DiskGrid, TraceField};

use super::SolverConfig;

/// Margin kept from finite domain endpoints in range checks.
pub const RANGE_MARGIN: f64 = 1e-12;

/// `amplitude · r^radial_power · cos(mode·θ + phase) · cos(frequency·t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTerm {
    pub amplitude: f64,
    #[serde(default)]
    pub radial_power: f64,
    #[serde(default)]
    pub mode: u32,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub frequency: f64,
}

impl ModeTerm {
    pub fn new(amplitude: f64, radial_power: f64, mode: u32) -> Self {
        ModeTerm { amplitude, radial_power, mode, phase: 0.0, frequency: 0.0 }
    }

    fn spatial(&self, r: f64, theta: f64) -> f64 {
        let radial = if self.radial_power == 0.0 { 1.0 } else { r.powf(self.radial_power) };
        self.amplitude * radial * (self.mode as f64 * theta + self.phase).cos()
    }

    fn temporal(&self, t: f64) -> f64 {
        if self.frequency == 0.0 {
            1.0
        } else {
            (self.frequency * t).cos()
        }
    }

    fn value(&self, r: f64, theta: f64, t: f64) -> f64 {
        self.spatial(r, theta) * self.temporal(t)
    }
}

/// Source providers for `f` (bulk) and `g` (boundary ring).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    #[default]
    Zero,
    /// Sum of separable analytic terms; the trace is the value at `r = 1`.
    Separable { terms: Vec<ModeTerm> },
    /// Time-independent grid values.
    Tabulated { values: Vec<f64> },
    Sum { parts: Vec<SourceSpec> },
}

impl SourceSpec {
    pub fn is_autonomous(&self) -> bool {
        match self {
            SourceSpec::Zero | SourceSpec::Tabulated { .. } => true,
            SourceSpec::Separable { terms } => terms.iter().all(|t| t.frequency == 0.0),
            SourceSpec::Sum { parts } => parts.iter().all(SourceSpec::is_autonomous),
        }
    }

    /// Appends `part` to this source.
    pub fn plus(&self, part: SourceSpec) -> SourceSpec {
        match self {
            SourceSpec::Zero => part,
            _ => SourceSpec::Sum { parts: vec![self.clone(), part] },
        }
    }

    /// Multiplies every term by `s`.
    pub fn scaled(&self, s: f64) -> SourceSpec {
        match self {
            SourceSpec::Zero => SourceSpec::Zero,
            SourceSpec::Separable { terms } => SourceSpec::Separable {
                terms: terms.iter().map(|t| ModeTerm { amplitude: s * t.amplitude, ..t.clone() }).collect(),
            },
            SourceSpec::Tabulated { values } => {
                SourceSpec::Tabulated { values: values.iter().map(|x| s * x).collect() }
            }
            SourceSpec::Sum { parts } => SourceSpec::Sum { parts: parts.iter().map(|p| p.scaled(s)).collect() },
        }
    }

    pub fn bulk(&self, grid: &DiskGrid, t: f64) -> Result<BulkField> {
        match self {
            SourceSpec::Zero => Ok(grid.bulk_zeros()),
            SourceSpec::Separable { terms } => {
                Ok(grid.bulk_from_fn(|r, th| terms.iter().map(|m| m.value(r, th, t)).sum()))
            }
            SourceSpec::Tabulated { values } => grid.bulk_from_values(values.clone()),
            SourceSpec::Sum { parts } => {
                let mut acc = grid.bulk_zeros();
                for p in parts {
                    acc = acc.zip_map(&p.bulk(grid, t)?, |a, b| a + b);
                }
                Ok(acc)
            }
        }
    }

    pub fn trace(&self, grid: &DiskGrid, t: f64) -> Result<TraceField> {
        match self {
            SourceSpec::Zero => Ok(grid.trace_zeros()),
            SourceSpec::Separable { terms } => {
                Ok(grid.trace_from_fn(|th| terms.iter().map(|m| m.value(1.0, th, t)).sum()))
            }
            SourceSpec::Tabulated { values } => grid.trace_from_values(values.clone()),
            SourceSpec::Sum { parts } => {
                let mut acc = grid.trace_zeros();
                for p in parts {
                    acc = acc.zip_map(&p.trace(grid, t)?, |a, b| a + b);
                }
                Ok(acc)
            }
        }
    }
}

/// Initial data `(u₀, v₀)`. Analytic kinds sample the bulk at cell centers
/// and the trace at `r = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant { value: f64 },
    Modes { mean: f64, terms: Vec<ModeTerm> },
    /// Seeded random smooth field: `mean + amplitude · s/‖s‖`, where `s` mixes
    /// `r^k (a_k cos kθ + b_k sin kθ)/k` for `1 ≤ k ≤ max_mode`.
    Random { mean: f64, amplitude: f64, max_mode: u32 },
    Tabulated { bulk: Vec<f64>, trace: Vec<f64> },
}

impl InitialSpec {
    pub fn build(&self, grid: &DiskGrid, seed: u64) -> Result<(BulkField, TraceField)> {
        match self {
            InitialSpec::Constant { value } => Ok((grid.bulk_constant(*value), grid.trace_constant(*value))),
            InitialSpec::Modes { mean, terms } => {
                let f = |r: f64, th: f64| mean + terms.iter().map(|m| m.spatial(r, th)).sum::<f64>();
                Ok((grid.bulk_from_fn(f), grid.trace_from_fn(|th| f(1.0, th))))
            }
            InitialSpec::Random { mean, amplitude, max_mode } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coeffs: Vec<(f64, f64)> = (0..*max_mode)
                    .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let bound: f64 = coeffs.iter().enumerate().map(|(k, (a, b))| (a.abs() + b.abs()) / (k + 1) as f64).sum();
                let scale = if bound > 0.0 { amplitude / bound } else { 0.0 };
                let f = |r: f64, th: f64| {
                    mean + scale
                        * coeffs
                            .iter()
                            .enumerate()
                            .map(|(k, (a, b))| {
                                let k = (k + 1) as f64;
                                r.powf(k) * (a * (k * th).cos() + b * (k * th).sin()) / k
                            })
                            .sum::<f64>()
                };
                Ok((grid.bulk_from_fn(f), grid.trace_from_fn(|th| f(1.0, th))))
            }
            InitialSpec::Tabulated { bulk, trace } => {
                Ok((grid.bulk_from_values(bulk.clone())?, grid.trace_from_values(trace.clone())?))
            }
        }
    }
}

/// Serializable description of a problem; combined with a grid it yields a [`Problem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub bulk_graph: GraphSpec,
    pub boundary_graph: GraphSpec,
    #[serde(default = "zero_perturbation")]
    pub bulk_perturbation: Perturbation,
    #[serde(default = "zero_perturbation")]
    pub boundary_perturbation: Perturbation,
    #[serde(default)]
    pub f: SourceSpec,
    #[serde(default)]
    pub g: SourceSpec,
    pub initial: InitialSpec,
    /// Largest admissible gap between `v₀` and the extrapolated bulk trace;
    /// defaults to `Δr · max(1, max|u₀|)`.
    #[serde(default)]
    pub trace_tolerance: Option<f64>,
}

fn zero_perturbation() -> Perturbation {
    Perturbation::Linear { slope: 0.0 }
}

impl ProblemSpec {
    pub fn build(&self, grid: &DiskGrid, seed: u64) -> Result<Problem> {
        let (u0, v0) = self.initial.build(grid, seed)?;
        Ok(Problem {
            grid: grid.clone(),
            bulk_graph: self.bulk_graph,
            boundary_graph: self.boundary_graph,
            bulk_perturbation: self.bulk_perturbation.clone(),
            boundary_perturbation: self.boundary_perturbation.clone(),
            f: self.f.clone(),
            g: self.g.clone(),
            u0,
            v0,
            trace_tolerance: self.trace_tolerance,
        })
    }
}

/// Fully resolved problem data on a grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: DiskGrid,
    pub bulk_graph: GraphSpec,
    pub boundary_graph: GraphSpec,
    pub bulk_perturbation: Perturbation,
    pub boundary_perturbation: Perturbation,
    pub f: SourceSpec,
    pub g: SourceSpec,
    pub u0: BulkField,
    pub v0: TraceField,
    pub trace_tolerance: Option<f64>,
}

impl Problem {
    pub fn is_autonomous(&self) -> bool {
        self.f.is_autonomous() && self.g.is_autonomous()
    }

    /// Whether both perturbations have concave primitives.
    pub fn has_concave_perturbations(&self) -> bool {
        self.bulk_perturbation.has_concave_primitive() && self.boundary_perturbation.has_concave_primitive()
    }

    pub fn initial_means(&self) -> Result<(f64, f64)> {
        Ok((self.grid.mean_bulk(&self.u0)?, self.grid.mean_trace(&self.v0)?))
    }

    pub fn effective_trace_tolerance(&self) -> f64 {
        self.trace_tolerance.unwrap_or_else(|| self.grid.dr() * self.u0.max_abs().max(1.0))
    }

    /// Samples spanning the data range widened by 50%, kept inside `D(β_Γ)`.
    pub fn default_sample_grid(&self) -> Vec<f64> {
        let (ulo, uhi) = self.u0.range();
        let (vlo, vhi) = self.v0.range();
        let (lo, hi) = (ulo.min(vlo), uhi.max(vhi));
        let center = 0.5 * (lo + hi);
        let half = if hi > lo { 0.75 * (hi - lo) } else { 0.5 };
        let dom = self.boundary_graph.domain();
        let inner = |x: f64| {
            let eps = 1e-6;
            let a = if dom.lower.is_finite() { dom.lower + if dom.lower_closed { 0.0 } else { eps } } else { x };
            let b = if dom.upper.is_finite() { dom.upper - if dom.upper_closed { 0.0 } else { eps } } else { x };
            x.clamp(a.min(x), b.max(a))
        };
        let (a, b) = (inner(center - half), inner(center + half));
        linspace(a, b, 101).into_iter().filter(|r| dom.contains(*r)).collect()
    }
}

/// One admissibility failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ValidationIssue {
    InvalidGraph { which: String, message: String },
    InvalidPerturbation { which: String, message: String },
    InvalidConfig { message: String },
    NonFiniteData { which: String },
    ShapeMismatch { message: String },
    TraceIncompatible { max_gap: f64, tolerance: f64 },
    IncompatibleRange { field: String, min: f64, max: f64, domain: Interval },
    DominationViolated { witness: Option<f64> },
    SourceError { which: String, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub warnings: Vec<String>,
    pub domination: Option<DominationReport>,
    pub same_growth: Option<SameGrowthReport>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Runs every admissibility check on `problem` and `config`. Never panics
/// on bad data; failures are collected in the report.
pub fn validate(problem: &Problem, config: &SolverConfig) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if let Err(e) = config.validate() {
        rep.issues.push(ValidationIssue::InvalidConfig { message: e.to_string() });
    }
    let mut graphs_ok = true;
    for (which, g) in [("bulk", &problem.bulk_graph), ("boundary", &problem.boundary_graph)] {
        if let Err(e) = g.validate() {
            graphs_ok = false;
            rep.issues.push(ValidationIssue::InvalidGraph { which: which.into(), message: e.to_string() });
        }
    }
    for (which, p) in [("bulk", &problem.bulk_perturbation), ("boundary", &problem.boundary_perturbation)] {
        if let Err(e) = p.validate() {
            rep.issues.push(ValidationIssue::InvalidPerturbation { which: which.into(), message: e.to_string() });
        }
    }
    let grid = &problem.grid;
    if grid.check_bulk(&problem.u0).is_err() || grid.check_trace(&problem.v0).is_err() {
        rep.issues.push(ValidationIssue::ShapeMismatch { message: "initial data does not match the grid".into() });
        return rep;
    }
    if !problem.u0.is_finite() {
        rep.issues.push(ValidationIssue::NonFiniteData { which: "u0".into() });
    }
    if !problem.v0.is_finite() {
        rep.issues.push(ValidationIssue::NonFiniteData { which: "v0".into() });
    }
    for (which, src, bulk) in [("f", &problem.f, true), ("g", &problem.g, false)] {
        let res = if bulk { src.bulk(grid, 0.0).map(|_| ()) } else { src.trace(grid, 0.0).map(|_| ()) };
        if let Err(e) = res {
            rep.issues.push(ValidationIssue::SourceError { which: which.into(), message: e.to_string() });
        }
    }
    if !rep.is_ok() {
        return rep;
    }

    if let Ok(ext) = grid.extrapolate_to_boundary(&problem.u0) {
        let gap = ext.sub(&problem.v0).max_abs();
        let tol = problem.effective_trace_tolerance();
        if gap > tol {
            rep.issues.push(ValidationIssue::TraceIncompatible { max_gap: gap, tolerance: tol });
        }
    }

    if graphs_ok {
        for (field, (min, max), dom) in [
            ("u0", problem.u0.range(), problem.bulk_graph.domain()),
            ("v0", problem.v0.range(), problem.boundary_graph.domain()),
        ] {
            if !(dom.contains_interior(min, RANGE_MARGIN) && dom.contains_interior(max, RANGE_MARGIN)) {
                rep.issues.push(ValidationIssue::IncompatibleRange { field: field.into(), min, max, domain: dom });
            }
        }

        let samples = problem.default_sample_grid();
        match check_domination(&problem.bulk_graph, &problem.boundary_graph, &samples) {
            Ok(d) => {
                if !d.feasible {
                    rep.issues.push(ValidationIssue::DominationViolated { witness: d.violation });
                }
                rep.domination = Some(d);
            }
            Err(e) => rep.warnings.push(format!("domination check skipped: {e}")),
        }
        match check_same_growth(&problem.bulk_graph, &problem.boundary_graph, &samples) {
            Ok(s) => rep.same_growth = Some(s),
            Err(e) => rep.warnings.push(format!("same-growth check skipped: {e}")),
        }
    }

    let stiffness = config.dt
        * (problem.bulk_perturbation.lipschitz_constant() + problem.boundary_perturbation.lipschitz_constant());
    if stiffness > 0.5 {
        rep.warnings.push(format!("dt·(L + L_Γ) = {stiffness:.3} exceeds 0.5; explicit perturbation may be unstable"));
    }
    rep
}

/// Preset problem families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Zero graphs and data, constant state.
    Zero,
    /// Zero graphs, zero perturbations: a linear bulk/boundary diffusion.
    Linear,
    /// `β = β_Γ = r³`, `π = π_Γ = −r`.
    Cubic,
    /// `β = β_Γ = s·ln((1+r)/(1−r))`, `π = π_Γ = −2c·r`.
    Logarithmic,
    /// `β = β_Γ = ∂I_[−1,1]`, `π = π_Γ = −r`, boundary forcing `a·cos θ`.
    Obstacle,
    /// `β = π = 0` in the bulk, `β_Γ = 0`, `π_Γ = −r` on the boundary.
    Backward,
}

/// Tunable constants of the preset families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetParams {
    #[serde(default = "PresetParams::default_scale")]
    pub log_scale: f64,
    #[serde(default = "PresetParams::default_c")]
    pub log_c: f64,
    #[serde(default = "PresetParams::default_forcing")]
    pub obstacle_forcing: f64,
}

impl PresetParams {
    fn default_scale() -> f64 {
        1.0
    }
    fn default_c() -> f64 {
        1.5
    }
    fn default_forcing() -> f64 {
        20.0
    }
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams {
            log_scale: Self::default_scale(),
            log_c: Self::default_c(),
            obstacle_forcing: Self::default_forcing(),
        }
    }
}

impl Preset {
    pub const ALL: [Preset; 6] =
        [Preset::Zero, Preset::Linear, Preset::Cubic, Preset::Logarithmic, Preset::Obstacle, Preset::Backward];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::Linear => "linear",
            Preset::Cubic => "cubic",
            Preset::Logarithmic => "logarithmic",
            Preset::Obstacle => "obstacle",
            Preset::Backward => "backward",
        }
    }

    /// Smooth initial datum shared by the nontrivial presets; its range stays
    /// inside `(−0.6, 0.8)`.
    pub fn default_initial() -> InitialSpec {
        InitialSpec::Modes {
            mean: 0.1,
            terms: vec![ModeTerm::new(0.3, 2.0, 2), ModeTerm::new(0.2, 4.0, 4), ModeTerm::new(0.1, 6.0, 6)],
        }
    }

    pub fn spec(&self, params: &PresetParams) -> ProblemSpec {
        let linear = |slope: f64| Perturbation::Linear { slope };
        let base = ProblemSpec {
            bulk_graph: GraphSpec::Zero,
            boundary_graph: GraphSpec::Zero,
            bulk_perturbation: linear(0.0),
            boundary_perturbation: linear(0.0),
            f: SourceSpec::Zero,
            g: SourceSpec::Zero,
            initial: Self::default_initial(),
            trace_tolerance: None,
        };
        match self {
            Preset::Zero => ProblemSpec { initial: InitialSpec::Constant { value: 0.0 }, ..base },
            Preset::Linear => base,
            Preset::Cubic => ProblemSpec {
                bulk_graph: GraphSpec::CUBIC,
                boundary_graph: GraphSpec::CUBIC,
                bulk_perturbation: linear(-1.0),
                boundary_perturbation: linear(-1.0),
                ..base
            },
            Preset::Logarithmic => {
                let g = GraphSpec::Logarithmic { scale: params.log_scale };
                ProblemSpec {
                    bulk_graph: g,
                    boundary_graph: g,
                    bulk_perturbation: linear(-2.0 * params.log_c),
                    boundary_perturbation: linear(-2.0 * params.log_c),
                    ..base
                }
            }
            Preset::Obstacle => {
                let g = GraphSpec::DoubleObstacle { lower: -1.0, upper: 1.0 };
                ProblemSpec {
                    bulk_graph: g,
                    boundary_graph: g,
                    bulk_perturbation: linear(-1.0),
                    boundary_perturbation: linear(-1.0),
                    g: SourceSpec::Separable { terms: vec![ModeTerm::new(params.obstacle_forcing, 0.0, 1)] },
                    ..base
                }
            }
            Preset::Backward => ProblemSpec { boundary_perturbation: linear(-1.0), ..base },
        }
    }
}

/// `π`-weighted check that a perturbation of the initial data keeps both means.
pub fn mean_gap(grid: &DiskGrid, du: &BulkField, dv: &TraceField) -> Result<f64> {
    Ok(grid.mean_bulk(du)?.abs().max(grid.mean_trace(dv)?.abs()))
}

/// Subtracts the bulk and trace means from a perturbation of the initial data.
pub fn mean_correct(grid: &DiskGrid, du: &BulkField, dv: &TraceField) -> Result<(BulkField, TraceField)> {
    let mu = grid.mean_bulk(du)?;
    let mv = grid.mean_trace(dv)?;
    let out = (du.map(|x| x - mu), dv.map(|x| x - mv));
    let gap = mean_gap(grid, &out.0, &out.1)?;
    if gap > 1e-12 {
        return Err(Error::MeanMismatch(gap));
    }
    Ok(out)
}
