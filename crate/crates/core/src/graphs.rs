//! Maximal monotone graphs on the real line, their convex primitives,
//! resolvents and Yosida approximations.
//!
//! Each [`GraphSpec`] is the subdifferential of a proper, convex, lower
//! semicontinuous potential `β̂ ≥ 0` with `β̂(0) = 0`. The Yosida
//! approximation `β_λ = (I − J_λ)/λ`, with `J_λ = (I + λβ)⁻¹`, is the
//! single-valued, `1/λ`-Lipschitz regularization the solver works with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Endpoint margin used when bracketing the logarithmic resolvent.
const LOG_ENDPOINT_MARGIN: f64 = 1e-15;
const ROOT_REL_TOL: f64 = 4.0 * f64::EPSILON;
const ROOT_MAX_ITER: usize = 100;

/// An interval of the real line with open or closed endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
        lower_closed: false,
        upper_closed: false,
    };

    pub fn closed(lower: f64, upper: f64) -> Self {
        Interval { lower, upper, lower_closed: true, upper_closed: true }
    }

    pub fn open(lower: f64, upper: f64) -> Self {
        Interval { lower, upper, lower_closed: false, upper_closed: false }
    }

    pub fn contains(&self, r: f64) -> bool {
        let above = if self.lower_closed { r >= self.lower } else { r > self.lower };
        let below = if self.upper_closed { r <= self.upper } else { r < self.upper };
        above && below
    }

    /// Membership in the interior, keeping `margin` away from finite endpoints.
    pub fn contains_interior(&self, r: f64, margin: f64) -> bool {
        r > self.lower + margin && r < self.upper - margin
    }

    /// Structural inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Interval) -> bool {
        let lower_ok = self.lower > other.lower
            || (self.lower == other.lower && (other.lower_closed || !self.lower_closed));
        let upper_ok = self.upper < other.upper
            || (self.upper == other.upper && (other.upper_closed || !self.upper_closed));
        lower_ok && upper_ok
    }

    /// Distance from `r` to the closure of the interval.
    pub fn distance(&self, r: f64) -> f64 {
        if r < self.lower {
            self.lower - r
        } else if r > self.upper {
            r - self.upper
        } else {
            0.0
        }
    }

    /// An endpoint of `self` that is not in `other`, if any.
    fn escaping_endpoint(&self, other: &Interval) -> Option<f64> {
        if !(self.lower > other.lower
            || (self.lower == other.lower && (other.lower_closed || !self.lower_closed)))
        {
            return Some(if self.lower.is_finite() { self.lower } else { f64::MIN });
        }
        if !(self.upper < other.upper
            || (self.upper == other.upper && (other.upper_closed || !self.upper_closed)))
        {
            return Some(if self.upper.is_finite() { self.upper } else { f64::MAX });
        }
        None
    }
}

/// One of the supported maximal monotone graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    /// `β ≡ 0`.
    Zero,
    /// `β(r) = coefficient · r^exponent` with an odd exponent ≥ 3.
    PowerOdd { exponent: u32, coefficient: f64 },
    /// `β(r) = scale · ln((1 + r)/(1 − r))` on `(−1, 1)`.
    Logarithmic { scale: f64 },
    /// Subdifferential of the indicator of `[lower, upper]`.
    DoubleObstacle { lower: f64, upper: f64 },
}

impl GraphSpec {
    pub const CUBIC: GraphSpec = GraphSpec::PowerOdd { exponent: 3, coefficient: 1.0 };

    /// Checks the parameter constraints, including `0 ∈ D(β)`.
    pub fn validate(&self) -> Result<()> {
        match *self {
            GraphSpec::Zero => Ok(()),
            GraphSpec::PowerOdd { exponent, coefficient } => {
                if exponent < 3 || exponent % 2 == 0 {
                    return Err(Error::InvalidGraph(format!(
                        "power exponent must be odd and at least 3, got {exponent}"
                    )));
                }
                if !(coefficient.is_finite() && coefficient > 0.0) {
                    return Err(Error::InvalidGraph(format!(
                        "power coefficient must be positive, got {coefficient}"
                    )));
                }
                Ok(())
            }
            GraphSpec::Logarithmic { scale } => {
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::InvalidGraph(format!(
                        "logarithmic scale must be positive, got {scale}"
                    )));
                }
                Ok(())
            }
            GraphSpec::DoubleObstacle { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(Error::InvalidGraph(format!(
                        "obstacle bounds must satisfy lower < upper, got [{lower}, {upper}]"
                    )));
                }
                if lower > 0.0 || upper < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "obstacle interval [{lower}, {upper}] must contain 0"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The domain `D(β)`.
    pub fn domain(&self) -> Interval {
        match *self {
            GraphSpec::Zero | GraphSpec::PowerOdd { .. } => Interval::REAL_LINE,
            GraphSpec::Logarithmic { .. } => Interval::open(-1.0, 1.0),
            GraphSpec::DoubleObstacle { lower, upper } => Interval::closed(lower, upper),
        }
    }

    /// Pointwise value of a smooth graph.
    fn smooth_value(&self, x: f64) -> f64 {
        match *self {
            GraphSpec::PowerOdd { exponent, coefficient } => coefficient * x.powi(exponent as i32),
            GraphSpec::Logarithmic { scale } => scale * ((1.0 + x) / (1.0 - x)).ln(),
            _ => 0.0,
        }
    }

    /// Derivative of a smooth graph.
    fn smooth_derivative(&self, x: f64) -> f64 {
        match *self {
            GraphSpec::PowerOdd { exponent, coefficient } => {
                coefficient * exponent as f64 * x.powi(exponent as i32 - 1)
            }
            GraphSpec::Logarithmic { scale } => 2.0 * scale / ((1.0 - x) * (1.0 + x)),
            _ => 0.0,
        }
    }

    /// Element of `β(r)` of least absolute value.
    pub fn minimal_section(&self, r: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::NonFinite(r));
        }
        if !self.domain().contains(r) {
            return Err(Error::OutOfDomain(r));
        }
        Ok(match self {
            GraphSpec::Zero | GraphSpec::DoubleObstacle { .. } => 0.0,
            _ => self.smooth_value(r),
        })
    }

    /// The convex potential `β̂`, `+∞` outside its effective domain.
    pub fn primitive(&self, r: f64) -> f64 {
        match *self {
            GraphSpec::Zero => 0.0,
            GraphSpec::PowerOdd { exponent, coefficient } => {
                coefficient * r.powi(exponent as i32 + 1) / (exponent as f64 + 1.0)
            }
            GraphSpec::Logarithmic { scale } => {
                if r.abs() > 1.0 || r.is_nan() {
                    return f64::INFINITY;
                }
                let xlnx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
                scale * (xlnx(1.0 + r) + xlnx(1.0 - r))
            }
            GraphSpec::DoubleObstacle { lower, upper } => {
                if (lower..=upper).contains(&r) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// The resolvent `J_λ(r) = (I + λβ)⁻¹(r)`.
    pub fn resolvent(&self, r: f64, lambda: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::NonFinite(r));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::NonFinite(lambda));
        }
        match *self {
            GraphSpec::Zero => Ok(r),
            GraphSpec::DoubleObstacle { lower, upper } => Ok(r.clamp(lower, upper)),
            GraphSpec::PowerOdd { .. } => {
                if r == 0.0 {
                    return Ok(0.0);
                }
                let (lo, hi) = if r > 0.0 { (0.0, r) } else { (r, 0.0) };
                self.solve_resolvent(r, lambda, lo, hi)
            }
            GraphSpec::Logarithmic { .. } => {
                if r == 0.0 {
                    return Ok(0.0);
                }
                let edge = 1.0 - LOG_ENDPOINT_MARGIN;
                let (lo, hi) = if r > 0.0 { (0.0, r.min(edge)) } else { (r.max(-edge), 0.0) };
                // β blows up at ±1, so the root is interior unless it sits
                // closer to the endpoint than the margin resolves.
                let f = |x: f64| x + lambda * self.smooth_value(x) - r;
                if r > 0.0 && f(hi) < 0.0 {
                    return Ok(hi);
                }
                if r < 0.0 && f(lo) > 0.0 {
                    return Ok(lo);
                }
                self.solve_resolvent(r, lambda, lo, hi)
            }
        }
    }

    /// Safeguarded Newton on the strictly increasing `x + λβ(x) − r` over `[lo, hi]`.
    fn solve_resolvent(&self, r: f64, lambda: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
        let f = |x: f64| x + lambda * self.smooth_value(x) - r;
        let tol = ROOT_REL_TOL * r.abs();
        let mut x = 0.5 * (lo + hi);
        for _ in 0..ROOT_MAX_ITER {
            let fx = f(x);
            if fx.abs() <= tol {
                return Ok(x);
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let slope = 1.0 + lambda * self.smooth_derivative(x);
            let newton = x - fx / slope;
            x = if newton > lo && newton < hi && newton.is_finite() {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                return Ok(x);
            }
        }
        let fx = f(x);
        if fx.abs() <= tol {
            Ok(x)
        } else {
            Err(Error::RootFindFailure { r, lambda })
        }
    }

    /// The Yosida approximation `β_λ(r) = (r − J_λ(r))/λ`.
    pub fn yosida(&self, r: f64, lambda: f64) -> Result<f64> {
        let x = self.resolvent(r, lambda)?;
        match *self {
            GraphSpec::PowerOdd { .. } => Ok(self.smooth_value(x)),
            GraphSpec::Logarithmic { .. } if x.abs() <= 0.5 => Ok(self.smooth_value(x)),
            _ => Ok((r - x) / lambda),
        }
    }

    /// An element of the generalized derivative of `β_λ` at `r`.
    ///
    /// For the obstacle the kink convention is `1/λ`.
    pub fn yosida_derivative(&self, r: f64, lambda: f64) -> Result<f64> {
        match *self {
            GraphSpec::Zero => Ok(0.0),
            GraphSpec::DoubleObstacle { lower, upper } => {
                Ok(if r > lower && r < upper { 0.0 } else { 1.0 / lambda })
            }
            _ => {
                let x = self.resolvent(r, lambda)?;
                let d = self.smooth_derivative(x);
                if d.is_finite() {
                    Ok(d / (1.0 + lambda * d))
                } else {
                    Ok(1.0 / lambda)
                }
            }
        }
    }

    /// Moreau envelope `β̂_λ(r) = |r − J_λ(r)|²/(2λ) + β̂(J_λ(r))`.
    pub fn yosida_primitive(&self, r: f64, lambda: f64) -> Result<f64> {
        let x = self.resolvent(r, lambda)?;
        Ok((r - x).powi(2) / (2.0 * lambda) + self.primitive(x))
    }
}

/// A Lipschitz perturbation `π` and its primitive `π̂(ρ) = ∫₀^ρ π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    Linear { slope: f64 },
    /// Piecewise-linear interpolation through `(points[k], values[k])`,
    /// extended linearly beyond the first and last segments.
    Tabulated { points: Vec<f64>, values: Vec<f64> },
}

impl Perturbation {
    pub fn validate(&self) -> Result<()> {
        match self {
            Perturbation::Linear { slope } => {
                if !slope.is_finite() {
                    return Err(Error::InvalidPerturbation(format!("slope {slope}")));
                }
                Ok(())
            }
            Perturbation::Tabulated { points, values } => {
                if points.len() < 2 || points.len() != values.len() {
                    return Err(Error::InvalidPerturbation(
                        "tabulated perturbation needs at least two (point, value) pairs".into(),
                    ));
                }
                if points.iter().chain(values).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidPerturbation("non-finite table entry".into()));
                }
                if points.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidPerturbation(
                        "table points must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    fn segment(points: &[f64], x: f64) -> usize {
        let k = points.partition_point(|&p| p <= x);
        k.clamp(1, points.len() - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Perturbation::Linear { slope } => slope * x,
            Perturbation::Tabulated { points, values } => {
                let k = Self::segment(points, x);
                let s = (values[k + 1] - values[k]) / (points[k + 1] - points[k]);
                values[k] + s * (x - points[k])
            }
        }
    }

    /// Global Lipschitz constant.
    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            Perturbation::Linear { slope } => slope.abs(),
            Perturbation::Tabulated { points, values } => points
                .windows(2)
                .zip(values.windows(2))
                .map(|(p, v)| ((v[1] - v[0]) / (p[1] - p[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Whether `π` is nonincreasing, i.e. `π̂` is concave.
    pub fn has_concave_primitive(&self) -> bool {
        match self {
            Perturbation::Linear { slope } => *slope <= 0.0,
            Perturbation::Tabulated { values, .. } => values.windows(2).all(|v| v[1] <= v[0]),
        }
    }

    /// `∫₀^ρ π(s) ds`, exact for both kinds.
    pub fn primitive(&self, rho: f64) -> f64 {
        match self {
            Perturbation::Linear { slope } => 0.5 * slope * rho * rho,
            Perturbation::Tabulated { .. } => self.antiderivative(rho) - self.antiderivative(0.0),
        }
    }

    /// An antiderivative anchored at the first table point.
    fn antiderivative(&self, x: f64) -> f64 {
        let Perturbation::Tabulated { points, .. } = self else {
            unreachable!("antiderivative is only used for tables")
        };
        let trapezoid = |a: f64, b: f64| 0.5 * (self.eval(a) + self.eval(b)) * (b - a);
        let k = Self::segment(points, x);
        let full: f64 = (0..k).map(|m| trapezoid(points[m], points[m + 1])).sum();
        full + trapezoid(points[k], x)
    }
}

/// Outcome of the sampled bulk/boundary domination check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub domain_contained: bool,
    pub rho1: f64,
    pub c1: f64,
    pub feasible: bool,
    pub violation: Option<f64>,
    pub samples: Vec<f64>,
}

/// Outcome of the sampled same-growth check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SameGrowthReport {
    pub same_domain: bool,
    pub m: f64,
    pub feasible: bool,
    pub violation: Option<f64>,
    pub samples: Vec<f64>,
}

/// Slack applied to fitted constants when probing beyond the sample grid.
const EXTENSION_SLACK: f64 = 2.0;

/// Pushes a sample outward: ×4 along unbounded directions, three quarters
/// of the way to a finite endpoint otherwise.
fn extend_sample(domain: &Interval, r: f64) -> f64 {
    if r > 0.0 {
        if domain.upper.is_finite() {
            let edge = if domain.upper_closed { domain.upper } else { domain.upper - LOG_ENDPOINT_MARGIN };
            r + 0.75 * (edge - r).max(0.0)
        } else {
            4.0 * r
        }
    } else if r < 0.0 {
        if domain.lower.is_finite() {
            let edge = if domain.lower_closed { domain.lower } else { domain.lower + LOG_ENDPOINT_MARGIN };
            r - 0.75 * (r - edge).max(0.0)
        } else {
            4.0 * r
        }
    } else {
        r
    }
}

fn abs_sections(bulk: &GraphSpec, boundary: &GraphSpec, samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let boundary_domain = boundary.domain();
    samples
        .iter()
        .map(|&r| {
            if !boundary_domain.contains(r) {
                return Err(Error::OutOfDomain(r));
            }
            Ok((bulk.minimal_section(r)?.abs(), boundary.minimal_section(r)?.abs()))
        })
        .collect()
}

/// Sampled check of `D(β_Γ) ⊆ D(β)` and `|β°| ≤ ρ₁|β_Γ°| + c₁`.
///
/// `(ρ₁, c₁)` is a least-squares line of `|β°|` on `|β_Γ°|`, lifted until it
/// bounds every sample. The fitted pair is then probed (with slack) on an
/// extension of the grid; a failure there is reported as a growth violation.
pub fn check_domination(
    bulk: &GraphSpec,
    boundary: &GraphSpec,
    sample_grid: &[f64],
) -> Result<DominationReport> {
    if sample_grid.is_empty() {
        return Err(Error::EmptySampleGrid);
    }
    let boundary_domain = boundary.domain();
    let bulk_domain = bulk.domain();
    if let Some(witness) = boundary_domain.escaping_endpoint(&bulk_domain) {
        return Ok(DominationReport {
            domain_contained: false,
            rho1: f64::NAN,
            c1: f64::NAN,
            feasible: false,
            violation: Some(witness),
            samples: sample_grid.to_vec(),
        });
    }
    let pairs = abs_sections(bulk, boundary, sample_grid)?;

    let n = pairs.len() as f64;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let var_b: f64 = pairs.iter().map(|p| (p.1 - mean_b).powi(2)).sum();
    let cov: f64 = pairs.iter().map(|p| (p.1 - mean_b) * (p.0 - mean_a)).sum();
    let rho1 = if var_b > 0.0 { (cov / var_b).max(0.0) } else { 1.0 };
    let c1 = pairs.iter().map(|&(a, b)| a - rho1 * b).fold(0.0, f64::max);

    let mut violation = None;
    for &r in sample_grid {
        let ext = extend_sample(&boundary_domain, r);
        let (Ok(a), Ok(b)) = (bulk.minimal_section(ext), boundary.minimal_section(ext)) else {
            continue;
        };
        if a.abs() > EXTENSION_SLACK * (rho1 * b.abs() + c1) + 1e-12 {
            violation = Some(ext);
            break;
        }
    }
    Ok(DominationReport {
        domain_contained: true,
        rho1,
        c1,
        feasible: violation.is_none(),
        violation,
        samples: sample_grid.to_vec(),
    })
}

/// Sampled check of `D(β) = D(β_Γ)` and
/// `(1/M)|β_Γ°| − M ≤ |β°| ≤ M(|β_Γ°| + 1)`.
pub fn check_same_growth(
    bulk: &GraphSpec,
    boundary: &GraphSpec,
    sample_grid: &[f64],
) -> Result<SameGrowthReport> {
    if sample_grid.is_empty() {
        return Err(Error::EmptySampleGrid);
    }
    let boundary_domain = boundary.domain();
    if boundary_domain != bulk.domain() {
        let witness = boundary_domain
            .escaping_endpoint(&bulk.domain())
            .or_else(|| bulk.domain().escaping_endpoint(&boundary_domain));
        return Ok(SameGrowthReport {
            same_domain: false,
            m: f64::NAN,
            feasible: false,
            violation: witness,
            samples: sample_grid.to_vec(),
        });
    }
    let required = |a: f64, b: f64| {
        let upper = a / (b + 1.0);
        // b/M − M ≤ a  ⇔  M² + aM − b ≥ 0
        let lower = 0.5 * (-a + (a * a + 4.0 * b).sqrt());
        upper.max(lower)
    };
    let pairs = abs_sections(bulk, boundary, sample_grid)?;
    let m = pairs.iter().map(|&(a, b)| required(a, b)).fold(1.0, f64::max);

    let mut violation = None;
    for &r in sample_grid {
        let ext = extend_sample(&boundary_domain, r);
        let (Ok(a), Ok(b)) = (bulk.minimal_section(ext), boundary.minimal_section(ext)) else {
            continue;
        };
        if required(a.abs(), b.abs()) > EXTENSION_SLACK * m {
            violation = Some(ext);
            break;
        }
    }
    Ok(SameGrowthReport {
        same_domain: true,
        m,
        feasible: violation.is_none(),
        violation,
        samples: sample_grid.to_vec(),
    })
}

/// `n` evenly spaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain bisection on `x + λβ(x) = r`, independent of the Newton path.
    fn bisection_resolvent(g: &GraphSpec, r: f64, lambda: f64) -> f64 {
        let (mut lo, mut hi) = match g {
            GraphSpec::Logarithmic { .. } => (-1.0 + 1e-16, 1.0 - 1e-16),
            _ => (-r.abs() - 1.0, r.abs() + 1.0),
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + lambda * g.smooth_value(mid) > r {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn obstacle_resolvent_is_projection() {
        let g = GraphSpec::DoubleObstacle { lower: -1.0, upper: 1.0 };
        assert_eq!(g.resolvent(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(g.yosida(2.0, 0.5).unwrap(), 2.0);
        assert_eq!(g.yosida_primitive(2.0, 0.5).unwrap(), 1.0);
        assert_eq!(g.minimal_section(1.0).unwrap(), 0.0);
        assert_eq!(g.primitive(1.5), f64::INFINITY);
    }

    #[test]
    fn zero_graph_is_identity() {
        let g = GraphSpec::Zero;
        assert_eq!(g.resolvent(3.7, 0.2).unwrap(), 3.7);
        assert_eq!(g.yosida(3.7, 0.2).unwrap(), 0.0);
        assert_eq!(g.yosida_primitive(-5.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn cubic_resolvent_matches_bisection() {
        let g = GraphSpec::CUBIC;
        let oracle = bisection_resolvent(&g, 1.0, 1.0);
        assert!((oracle - 0.682_327_803_828_019_3).abs() < 1e-12);
        let x = g.resolvent(1.0, 1.0).unwrap();
        assert!((x - oracle).abs() < 1e-12);
        assert!((g.yosida(1.0, 1.0).unwrap() - (1.0 - oracle)).abs() < 1e-12);
        let envelope = (1.0 - oracle).powi(2) / 2.0 + oracle.powi(4) / 4.0;
        assert!((g.yosida_primitive(1.0, 1.0).unwrap() - envelope).abs() < 1e-12);
        assert!((envelope - 0.104_647).abs() < 1e-5);
    }

    #[test]
    fn logarithmic_values() {
        let g = GraphSpec::Logarithmic { scale: 1.0 };
        assert_eq!(g.yosida(0.0, 0.3).unwrap(), 0.0);
        assert!((g.minimal_section(0.5).unwrap() - 3f64.ln()).abs() < 1e-15);
        // composite Simpson on ∫₀^0.9 ln((1+s)/(1−s)) ds
        let n = 20_000;
        let h = 0.9 / n as f64;
        let f = |s: f64| ((1.0 + s) / (1.0 - s)).ln();
        let simpson: f64 = (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                w * f(k as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert!((g.primitive(0.9) - simpson).abs() < 1e-10);
        assert!((g.primitive(0.9) - 0.989_263_9).abs() < 1e-7);
        assert!(g.primitive(1.0).is_finite());
        assert_eq!(g.primitive(1.01), f64::INFINITY);
        assert!(g.minimal_section(1.0).is_err());
    }

    #[test]
    fn logarithmic_resolvent_saturates_near_endpoint() {
        let g = GraphSpec::Logarithmic { scale: 1.0 };
        let x = g.resolvent(1e3, 1e-4).unwrap();
        assert!(x < 1.0 && x > 0.999);
        let y = g.yosida(1e3, 1e-4).unwrap();
        assert!((y - (1e3 - x) / 1e-4).abs() < 1e-6);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(GraphSpec::DoubleObstacle { lower: 0.5, upper: 1.0 }.validate().is_err());
        assert!(GraphSpec::DoubleObstacle { lower: 1.0, upper: -1.0 }.validate().is_err());
        assert!(GraphSpec::PowerOdd { exponent: 2, coefficient: 1.0 }.validate().is_err());
        assert!(GraphSpec::Logarithmic { scale: 0.0 }.validate().is_err());
        assert!(GraphSpec::CUBIC.validate().is_ok());
    }

    #[test]
    fn nonfinite_inputs() {
        assert!(matches!(GraphSpec::CUBIC.resolvent(f64::NAN, 1.0), Err(Error::NonFinite(_))));
        assert!(GraphSpec::CUBIC.resolvent(1.0, 0.0).is_err());
    }

    #[test]
    fn graph_json_shape() {
        let g: GraphSpec =
            serde_json::from_str(r#"{"kind":"double_obstacle","lower":-1,"upper":1}"#).unwrap();
        assert_eq!(g, GraphSpec::DoubleObstacle { lower: -1.0, upper: 1.0 });
        let p: GraphSpec =
            serde_json::from_str(r#"{"kind":"power_odd","exponent":3,"coefficient":1}"#).unwrap();
        assert_eq!(p, GraphSpec::CUBIC);
    }

    #[test]
    fn tabulated_perturbation() {
        let p = Perturbation::Tabulated { points: vec![-1.0, 0.0, 2.0], values: vec![1.0, 0.0, -4.0] };
        p.validate().unwrap();
        assert_eq!(p.eval(-2.0), 2.0);
        assert_eq!(p.eval(1.0), -2.0);
        assert_eq!(p.lipschitz_constant(), 2.0);
        assert!(p.has_concave_primitive());
        // ∫₀^1 (−2s) ds = −1, ∫₀^{-1} (−s) ds = −1/2
        assert!((p.primitive(1.0) + 1.0).abs() < 1e-15);
        assert!((p.primitive(-1.0) + 0.5).abs() < 1e-15);
        assert!((p.primitive(3.0) + 9.0).abs() < 1e-14);
        assert!(Perturbation::Tabulated { points: vec![0.0, 0.0], values: vec![0.0, 1.0] }
            .validate()
            .is_err());
    }

    #[test]
    fn domination_identical_graphs() {
        let grid = linspace(-3.0, 3.0, 61);
        let rep = check_domination(&GraphSpec::CUBIC, &GraphSpec::CUBIC, &grid).unwrap();
        assert!(rep.feasible);
        assert!((rep.rho1 - 1.0).abs() < 1e-12);
        assert!(rep.c1.abs() < 1e-12);
    }

    #[test]
    fn domination_zero_bulk() {
        let grid = linspace(-0.99, 0.99, 41);
        let obstacle = GraphSpec::DoubleObstacle { lower: -1.0, upper: 1.0 };
        let rep = check_domination(&GraphSpec::Zero, &obstacle, &grid).unwrap();
        assert!(rep.feasible);
        assert_eq!(rep.c1, 0.0);
    }

    #[test]
    fn domination_violated_by_faster_bulk_growth() {
        let mut grid = linspace(0.0, 10.0, 101);
        grid.extend(linspace(-10.0, 0.0, 101));
        let quintic = GraphSpec::PowerOdd { exponent: 5, coefficient: 1.0 };
        let rep = check_domination(&quintic, &GraphSpec::CUBIC, &grid).unwrap();
        assert!(!rep.feasible);
        let w = rep.violation.unwrap();
        // brute force: the fitted pair fails at the witness
        assert!(w.powi(5).abs() > rep.rho1 * w.powi(3).abs() + rep.c1);
        assert!(w.abs() > 10.0);
    }

    #[test]
    fn domination_domain_escape() {
        let grid = linspace(-0.5, 0.5, 11);
        let obstacle = GraphSpec::DoubleObstacle { lower: -1.0, upper: 1.0 };
        let log = GraphSpec::Logarithmic { scale: 1.0 };
        let rep = check_domination(&log, &obstacle, &grid).unwrap();
        assert!(!rep.domain_contained);
        assert!(!rep.feasible);
        assert_eq!(rep.violation.map(f64::abs), Some(1.0));
        assert!(matches!(check_domination(&log, &obstacle, &[]), Err(Error::EmptySampleGrid)));
    }

    #[test]
    fn same_growth_scan() {
        let grid = linspace(-10.0, 10.0, 201);
        let rep = check_same_growth(&GraphSpec::CUBIC, &GraphSpec::CUBIC, &grid).unwrap();
        assert!(rep.feasible);
        assert_eq!(rep.m, 1.0);
        let rep = check_same_growth(&GraphSpec::Zero, &GraphSpec::Zero, &grid).unwrap();
        assert_eq!(rep.m, 1.0);
        let doubled = GraphSpec::PowerOdd { exponent: 3, coefficient: 2.0 };
        let rep = check_same_growth(&doubled, &GraphSpec::CUBIC, &grid).unwrap();
        assert!(rep.feasible);
        // direct ratio scan: sup 2b/(b + 1) over the grid
        let scan = grid.iter().map(|r| 2.0 * r.powi(3).abs() / (r.powi(3).abs() + 1.0)).fold(1.0, f64::max);
        assert!((rep.m - scan).abs() < 1e-12);
        assert!(rep.m <= 2.0);
    }
}
