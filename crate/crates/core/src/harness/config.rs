use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiskGrid, GridSpec};
use crate::solver::{InitialSpec, ModeTerm, Preset, PresetParams, Problem, ProblemSpec, SolverConfig, SourceSpec};

/// A preset name with optional parameters, or a fully explicit problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemEntry {
    Preset(PresetRef),
    Explicit(Box<ProblemSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetRef {
    pub preset: Preset,
    #[serde(default)]
    pub params: PresetParams,
    /// Replaces the preset's initial data.
    #[serde(default)]
    pub initial: Option<InitialSpec>,
}

impl ProblemEntry {
    pub fn spec(&self) -> ProblemSpec {
        match self {
            ProblemEntry::Preset(p) => {
                let mut spec = p.preset.spec(&p.params);
                if let Some(init) = &p.initial {
                    spec.initial = init.clone();
                }
                spec
            }
            ProblemEntry::Explicit(spec) => (**spec).clone(),
        }
    }
}

/// Which run the δ-sweep compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    #[default]
    DeltaZero,
    /// The smallest δ of the sweep.
    Finest,
}

/// Unit-amplitude data perturbation of the stability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityPerturbation {
    #[serde(default = "StabilityPerturbation::default_f")]
    pub f: SourceSpec,
    #[serde(default = "StabilityPerturbation::default_g")]
    pub g: SourceSpec,
    /// Initial-data perturbation; mean-corrected before use.
    #[serde(default)]
    pub initial: Option<InitialSpec>,
}

impl StabilityPerturbation {
    fn default_f() -> SourceSpec {
        SourceSpec::Separable { terms: vec![ModeTerm::new(1.0, 1.0, 1)] }
    }
    fn default_g() -> SourceSpec {
        SourceSpec::Separable { terms: vec![ModeTerm::new(1.0, 0.0, 2)] }
    }
}

impl Default for StabilityPerturbation {
    fn default() -> Self {
        StabilityPerturbation { f: Self::default_f(), g: Self::default_g(), initial: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    #[default]
    Single,
    SweepDelta {
        deltas: Vec<f64>,
        #[serde(default)]
        reference: ReferenceMode,
        #[serde(default = "default_min_slope")]
        min_slope: f64,
    },
    Stability {
        amplitudes: Vec<f64>,
        #[serde(default)]
        perturbation: StabilityPerturbation,
        #[serde(default = "default_max_band")]
        max_band: f64,
    },
    SweepLambda {
        lambdas: Vec<f64>,
    },
}

fn default_min_slope() -> f64 {
    0.45
}

fn default_max_band() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "OutputConfig::default_dir")]
    pub dir: PathBuf,
    /// Trajectory dump stride in steps; 0 writes only the first and last state.
    #[serde(default)]
    pub stride: usize,
    #[serde(default)]
    pub plots: bool,
}

impl OutputConfig {
    fn default_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: Self::default_dir(), stride: 0, plots: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemEntry,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_workers() -> usize {
    1
}

fn strictly_decreasing_unit(name: &str, xs: &[f64], min_len: usize) -> Result<()> {
    if xs.len() < min_len {
        return Err(Error::Config(format!("{name} needs at least {min_len} value(s), got {}", xs.len())));
    }
    if let Some(x) = xs.iter().find(|x| !(**x > 0.0 && **x <= 1.0)) {
        return Err(Error::Config(format!("{name} must lie in (0, 1], got {x}")));
    }
    if xs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(format!("{name} must be strictly decreasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        DiskGrid::from_spec(self.grid)?;
        self.solver.validate()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        match &self.experiment {
            ExperimentKind::Single => Ok(()),
            ExperimentKind::SweepDelta { deltas, .. } => strictly_decreasing_unit("deltas", deltas, 1),
            ExperimentKind::Stability { amplitudes, max_band, .. } => {
                if amplitudes.is_empty() {
                    return Err(Error::Config("amplitudes must not be empty".into()));
                }
                if let Some(a) = amplitudes.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
                    return Err(Error::Config(format!("amplitudes must be positive, got {a}")));
                }
                if !(*max_band >= 1.0) {
                    return Err(Error::Config(format!("max_band must be at least 1, got {max_band}")));
                }
                Ok(())
            }
            ExperimentKind::SweepLambda { lambdas } => strictly_decreasing_unit("lambdas", lambdas, 2),
        }
    }

    pub fn build_grid(&self) -> Result<DiskGrid> {
        DiskGrid::from_spec(self.grid)
    }

    pub fn build_problem(&self) -> Result<Problem> {
        self.problem.spec().build(&self.build_grid()?, self.seed)
    }
}
