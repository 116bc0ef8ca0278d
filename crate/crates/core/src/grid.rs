//! Cell-centered polar finite-volume grid on the unit disk and the
//! periodic node ring on its boundary circle.
//!
//! Cell `(i, j)` has center `r_i = (i + ½)Δr`, `θ_j = (j + ½)Δθ` and area
//! weight `r_i Δr Δθ`; the weights sum to `π` exactly because the midpoint
//! rule integrates `r` exactly. The boundary ring carries the trace unknowns
//! `v_j` at the same angles, each with arclength weight `Δθ`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outer boundary treatment for bulk differential operators.
#[derive(Debug, Clone, Copy)]
pub enum Boundary<'a> {
    /// Homogeneous Neumann: no flux through `r = 1`.
    ZeroFlux,
    /// The boundary ring values, reached by a half-cell one-sided flux.
    Dirichlet(&'a TraceField),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_r: usize,
    pub n_theta: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiskGrid {
    n_r: usize,
    n_theta: usize,
    dr: f64,
    dtheta: f64,
    radii: Vec<f64>,
    thetas: Vec<f64>,
    /// Cell area per ring.
    ring_weight: Vec<f64>,
}

/// Cell-centered values, ring-major (`i * n_theta + j`).
#[derive(Debug, Clone, PartialEq)]
pub struct BulkField {
    n_r: usize,
    n_theta: usize,
    pub values: Vec<f64>,
}

/// Periodic values on the boundary ring.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceField {
    pub values: Vec<f64>,
}

impl DiskGrid {
    pub fn new(n_r: usize, n_theta: usize) -> Result<Self> {
        if n_r < 4 {
            return Err(Error::InvalidGrid(format!("n_r must be at least 4, got {n_r}")));
        }
        if n_theta < 8 || n_theta % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n_theta must be even and at least 8, got {n_theta}")));
        }
        let dr = 1.0 / n_r as f64;
        let dtheta = 2.0 * PI / n_theta as f64;
        let radii: Vec<f64> = (0..n_r).map(|i| (i as f64 + 0.5) * dr).collect();
        let thetas = (0..n_theta).map(|j| (j as f64 + 0.5) * dtheta).collect();
        let ring_weight = radii.iter().map(|r| r * dr * dtheta).collect();
        Ok(DiskGrid { n_r, n_theta, dr, dtheta, radii, thetas, ring_weight })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Self::new(spec.n_r, spec.n_theta)
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn dr(&self) -> f64 {
        self.dr
    }
    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }
    /// Number of bulk cells.
    pub fn cells(&self) -> usize {
        self.n_r * self.n_theta
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }
    /// Area weight of any cell in ring `i`.
    pub fn cell_weight(&self, i: usize) -> f64 {
        self.ring_weight[i]
    }
    /// `|Ω| = π`.
    pub fn area(&self) -> f64 {
        PI
    }
    /// `|Γ| = 2π`.
    pub fn perimeter(&self) -> f64 {
        2.0 * PI
    }

    /// Radius of the outer face of ring `i` (`r_{i+½}`).
    fn outer_face(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dr
    }

    /// Coefficient of `u_{i+1} − u_i` in the Laplacian at ring `i`.
    pub fn radial_outer_coeff(&self, i: usize) -> f64 {
        self.outer_face(i) / (self.radii[i] * self.dr * self.dr)
    }
    /// Coefficient of `u_{i−1} − u_i` in the Laplacian at ring `i` (zero at the origin).
    pub fn radial_inner_coeff(&self, i: usize) -> f64 {
        i as f64 * self.dr / (self.radii[i] * self.dr * self.dr)
    }
    /// Coefficient of `u_{j±1} − u_j` in the Laplacian at ring `i`.
    pub fn angular_coeff(&self, i: usize) -> f64 {
        1.0 / (self.radii[i] * self.radii[i] * self.dtheta * self.dtheta)
    }
    /// Coefficient of `v_j − u_{n_r−1,j}` in the Laplacian of the outer ring
    /// under a Dirichlet ring.
    pub fn boundary_coupling_coeff(&self) -> f64 {
        2.0 / (self.radii[self.n_r - 1] * self.dr * self.dr)
    }
    /// Coefficient of `v_{j±1} − v_j` in the Laplace–Beltrami operator.
    pub fn trace_coeff(&self) -> f64 {
        1.0 / (self.dtheta * self.dtheta)
    }

    pub fn bulk_zeros(&self) -> BulkField {
        BulkField { n_r: self.n_r, n_theta: self.n_theta, values: vec![0.0; self.cells()] }
    }

    pub fn bulk_constant(&self, c: f64) -> BulkField {
        BulkField { n_r: self.n_r, n_theta: self.n_theta, values: vec![c; self.cells()] }
    }

    pub fn bulk_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> BulkField {
        let mut values = Vec::with_capacity(self.cells());
        for &r in &self.radii {
            for &theta in &self.thetas {
                values.push(f(r, theta));
            }
        }
        BulkField { n_r: self.n_r, n_theta: self.n_theta, values }
    }

    pub fn bulk_from_values(&self, values: Vec<f64>) -> Result<BulkField> {
        if values.len() != self.cells() {
            return Err(Error::ShapeMismatch { expected: self.cells(), got: values.len() });
        }
        Ok(BulkField { n_r: self.n_r, n_theta: self.n_theta, values })
    }

    pub fn trace_zeros(&self) -> TraceField {
        TraceField { values: vec![0.0; self.n_theta] }
    }

    pub fn trace_constant(&self, c: f64) -> TraceField {
        TraceField { values: vec![c; self.n_theta] }
    }

    pub fn trace_from_fn(&self, f: impl Fn(f64) -> f64) -> TraceField {
        TraceField { values: self.thetas.iter().map(|&t| f(t)).collect() }
    }

    pub fn trace_from_values(&self, values: Vec<f64>) -> Result<TraceField> {
        if values.len() != self.n_theta {
            return Err(Error::ShapeMismatch { expected: self.n_theta, got: values.len() });
        }
        Ok(TraceField { values })
    }

    pub fn check_bulk(&self, u: &BulkField) -> Result<()> {
        if u.n_r != self.n_r || u.n_theta != self.n_theta || u.values.len() != self.cells() {
            return Err(Error::ShapeMismatch { expected: self.cells(), got: u.values.len() });
        }
        Ok(())
    }

    pub fn check_trace(&self, v: &TraceField) -> Result<()> {
        if v.values.len() != self.n_theta {
            return Err(Error::ShapeMismatch { expected: self.n_theta, got: v.values.len() });
        }
        Ok(())
    }

    fn check_boundary(&self, boundary: Boundary<'_>) -> Result<()> {
        match boundary {
            Boundary::ZeroFlux => Ok(()),
            Boundary::Dirichlet(v) => self.check_trace(v),
        }
    }

    /// `Σ w_ij u_ij`.
    pub fn integrate_bulk(&self, u: &BulkField) -> Result<f64> {
        self.check_bulk(u)?;
        Ok(u.values
            .chunks_exact(self.n_theta)
            .zip(&self.ring_weight)
            .map(|(ring, w)| w * ring.iter().sum::<f64>())
            .sum())
    }

    /// `Σ Δθ v_j`.
    pub fn integrate_trace(&self, v: &TraceField) -> Result<f64> {
        self.check_trace(v)?;
        Ok(self.dtheta * v.values.iter().sum::<f64>())
    }

    /// Weighted inner product on the disk.
    pub fn inner_bulk(&self, a: &BulkField, b: &BulkField) -> Result<f64> {
        self.check_bulk(a)?;
        self.check_bulk(b)?;
        Ok(a.values
            .chunks_exact(self.n_theta)
            .zip(b.values.chunks_exact(self.n_theta))
            .zip(&self.ring_weight)
            .map(|((x, y), w)| w * x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .sum())
    }

    pub fn inner_trace(&self, a: &TraceField, b: &TraceField) -> Result<f64> {
        self.check_trace(a)?;
        self.check_trace(b)?;
        Ok(self.dtheta * a.values.iter().zip(&b.values).map(|(p, q)| p * q).sum::<f64>())
    }

    pub fn l2_norm_bulk(&self, u: &BulkField) -> Result<f64> {
        Ok(self.inner_bulk(u, u)?.sqrt())
    }

    pub fn l2_norm_trace(&self, v: &TraceField) -> Result<f64> {
        Ok(self.inner_trace(v, v)?.sqrt())
    }

    pub fn mean_bulk(&self, u: &BulkField) -> Result<f64> {
        Ok(self.integrate_bulk(u)? / self.area())
    }

    pub fn mean_trace(&self, v: &TraceField) -> Result<f64> {
        Ok(self.integrate_trace(v)? / self.perimeter())
    }

    /// Conservative five-point polar Laplacian.
    pub fn laplacian_bulk(&self, u: &BulkField, boundary: Boundary<'_>) -> Result<BulkField> {
        self.check_bulk(u)?;
        self.check_boundary(boundary)?;
        let (nr, nt) = (self.n_r, self.n_theta);
        let x = &u.values;
        let mut out = vec![0.0; self.cells()];
        for i in 0..nr {
            let ang = self.angular_coeff(i);
            let inner = self.radial_inner_coeff(i);
            let outer = self.radial_outer_coeff(i);
            for j in 0..nt {
                let c = i * nt + j;
                let jp = if j + 1 == nt { 0 } else { j + 1 };
                let jm = if j == 0 { nt - 1 } else { j - 1 };
                let mut acc = ang * ((x[i * nt + jp] - x[c]) + (x[i * nt + jm] - x[c]));
                if i > 0 {
                    acc += inner * (x[c - nt] - x[c]);
                }
                if i + 1 < nr {
                    acc += outer * (x[c + nt] - x[c]);
                } else if let Boundary::Dirichlet(v) = boundary {
                    acc += self.boundary_coupling_coeff() * (v.values[j] - x[c]);
                }
                out[c] = acc;
            }
        }
        Ok(BulkField { n_r: nr, n_theta: nt, values: out })
    }

    /// Periodic second difference `(v_{j−1} − 2v_j + v_{j+1})/Δθ²`.
    pub fn laplace_beltrami(&self, v: &TraceField) -> Result<TraceField> {
        self.check_trace(v)?;
        let n = self.n_theta;
        let k = self.trace_coeff();
        let values = (0..n)
            .map(|j| {
                let jp = if j + 1 == n { 0 } else { j + 1 };
                let jm = if j == 0 { n - 1 } else { j - 1 };
                k * (v.values[jm] - 2.0 * v.values[j] + v.values[jp])
            })
            .collect();
        Ok(TraceField { values })
    }

    /// Trace of `u` on Γ. The boundary ring is the trace, so this is `v` itself.
    pub fn trace(&self, u: &BulkField, v: &TraceField) -> Result<TraceField> {
        self.check_bulk(u)?;
        self.check_trace(v)?;
        Ok(v.clone())
    }

    /// One-sided outward normal derivative `(v_j − u_{n_r−1,j})/(Δr/2)`.
    pub fn normal_derivative(&self, u: &BulkField, v: &TraceField) -> Result<TraceField> {
        self.check_bulk(u)?;
        self.check_trace(v)?;
        let base = (self.n_r - 1) * self.n_theta;
        let h = 0.5 * self.dr;
        let values = v.values.iter().enumerate().map(|(j, vj)| (vj - u.values[base + j]) / h).collect();
        Ok(TraceField { values })
    }

    /// Linear extrapolation of the outer two rings to `r = 1`.
    pub fn extrapolate_to_boundary(&self, u: &BulkField) -> Result<TraceField> {
        self.check_bulk(u)?;
        let nt = self.n_theta;
        let outer = (self.n_r - 1) * nt;
        let values = (0..nt).map(|j| 1.5 * u.values[outer + j] - 0.5 * u.values[outer - nt + j]).collect();
        Ok(TraceField { values })
    }

    /// Discrete Dirichlet form `a_h(u, u)`: flux² × face weight summed over faces.
    pub fn dirichlet_energy_bulk(&self, u: &BulkField, boundary: Boundary<'_>) -> Result<f64> {
        self.check_bulk(u)?;
        self.check_boundary(boundary)?;
        let (nr, nt) = (self.n_r, self.n_theta);
        let (dr, dt) = (self.dr, self.dtheta);
        let x = &u.values;
        let mut sum = 0.0;
        for i in 0..nr {
            let ang = dr / (self.radii[i] * dt);
            let rad = self.outer_face(i) * dt / dr;
            for j in 0..nt {
                let c = i * nt + j;
                let jp = if j + 1 == nt { 0 } else { j + 1 };
                sum += ang * (x[i * nt + jp] - x[c]).powi(2);
                if i + 1 < nr {
                    sum += rad * (x[c + nt] - x[c]).powi(2);
                } else if let Boundary::Dirichlet(v) = boundary {
                    sum += dt / (0.5 * dr) * (v.values[j] - x[c]).powi(2);
                }
            }
        }
        Ok(sum)
    }

    pub fn h1_seminorm_bulk(&self, u: &BulkField, boundary: Boundary<'_>) -> Result<f64> {
        Ok(self.dirichlet_energy_bulk(u, boundary)?.sqrt())
    }

    /// `a_Γ,h(v, v) = Σ_j (v_{j+1} − v_j)²/Δθ`.
    pub fn dirichlet_energy_trace(&self, v: &TraceField) -> Result<f64> {
        self.check_trace(v)?;
        let n = self.n_theta;
        Ok((0..n).map(|j| (v.values[(j + 1) % n] - v.values[j]).powi(2)).sum::<f64>() / self.dtheta)
    }

    pub fn h1_seminorm_trace(&self, v: &TraceField) -> Result<f64> {
        Ok(self.dirichlet_energy_trace(v)?.sqrt())
    }

    /// Nonzero entries `(row, col, value)` of the Laplacian matrix acting on
    /// cell values; the Dirichlet ring contribution to the diagonal is included
    /// when `dirichlet` is set (its off-diagonal part couples to `v`).
    pub fn laplacian_triplets(&self, dirichlet: bool) -> Vec<(usize, usize, f64)> {
        let (nr, nt) = (self.n_r, self.n_theta);
        let mut out = Vec::with_capacity(5 * self.cells());
        for i in 0..nr {
            let ang = self.angular_coeff(i);
            let inner = self.radial_inner_coeff(i);
            let outer = self.radial_outer_coeff(i);
            for j in 0..nt {
                let c = i * nt + j;
                let jp = if j + 1 == nt { 0 } else { j + 1 };
                let jm = if j == 0 { nt - 1 } else { j - 1 };
                let mut diag = -2.0 * ang;
                out.push((c, i * nt + jp, ang));
                out.push((c, i * nt + jm, ang));
                if i > 0 {
                    diag -= inner;
                    out.push((c, c - nt, inner));
                }
                if i + 1 < nr {
                    diag -= outer;
                    out.push((c, c + nt, outer));
                } else if dirichlet {
                    diag -= self.boundary_coupling_coeff();
                }
                out.push((c, c, diag));
            }
        }
        out
    }
}

impl BulkField {
    pub fn shape(&self) -> (usize, usize) {
        (self.n_r, self.n_theta)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_theta + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BulkField {
        BulkField { n_r: self.n_r, n_theta: self.n_theta, values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &BulkField, f: impl Fn(f64, f64) -> f64) -> BulkField {
        assert_eq!(self.values.len(), other.values.len(), "bulk field shape mismatch");
        BulkField {
            n_r: self.n_r,
            n_theta: self.n_theta,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sub(&self, other: &BulkField) -> BulkField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> BulkField {
        self.map(|x| s * x)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn range(&self) -> (f64, f64) {
        min_max(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Writes rows `t,i,j,value`.
    pub fn write_csv<W: Write>(&self, out: &mut W, t: f64, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "t,i,j,value")?;
        }
        for (c, x) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{},{},{:.16e}", t, c / self.n_theta, c % self.n_theta, x)?;
        }
        Ok(())
    }
}

impl TraceField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TraceField {
        TraceField { values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &TraceField, f: impl Fn(f64, f64) -> f64) -> TraceField {
        assert_eq!(self.values.len(), other.values.len(), "trace field shape mismatch");
        TraceField { values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn sub(&self, other: &TraceField) -> TraceField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> TraceField {
        self.map(|x| s * x)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn range(&self) -> (f64, f64) {
        min_max(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// Writes rows `t,j,value`.
    pub fn write_csv<W: Write>(&self, out: &mut W, t: f64, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "t,j,value")?;
        }
        for (j, x) in self.values.iter().enumerate() {
            writeln!(out, "{:.16e},{},{:.16e}", t, j, x)?;
        }
        Ok(())
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(DiskGrid::new(3, 16).is_err());
        assert!(DiskGrid::new(8, 6).is_err());
        assert!(DiskGrid::new(8, 17).is_err());
        assert!(DiskGrid::new(4, 8).is_ok());
    }

    #[test]
    fn quadrature_totals() {
        let g = DiskGrid::new(64, 128).unwrap();
        assert!((g.integrate_bulk(&g.bulk_constant(1.0)).unwrap() - PI).abs() < 1e-13);
        assert!((g.integrate_trace(&g.trace_constant(1.0)).unwrap() - 2.0 * PI).abs() < 1e-13);
        let rc = g.bulk_from_fn(|r, t| r * t.cos());
        assert!(g.integrate_bulk(&rc).unwrap().abs() < 1e-14);
        // ∫∫ r²·r dr dθ = π/2, midpoint error (π/2)·O(Δr²)
        let r2 = g.bulk_from_fn(|r, _| r * r);
        let exact = PI / 2.0;
        let err = (g.integrate_bulk(&r2).unwrap() - exact).abs();
        assert!(err < 2.0 * g.dr().powi(2), "err {err}");
    }

    #[test]
    fn means() {
        let g = DiskGrid::new(16, 32).unwrap();
        assert!((g.mean_bulk(&g.bulk_constant(2.5)).unwrap() - 2.5).abs() < 1e-15);
        assert!((g.mean_trace(&g.trace_constant(-1.5)).unwrap() + 1.5).abs() < 1e-15);
        for k in 1..8 {
            let c = g.trace_from_fn(|t| (k as f64 * t).cos());
            assert!(g.mean_trace(&c).unwrap().abs() < 1e-14);
        }
        assert!(g.mean_bulk(&g.bulk_from_fn(|r, t| r * t.sin())).unwrap().abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let g = DiskGrid::new(8, 16).unwrap();
        let h = DiskGrid::new(8, 32).unwrap();
        assert!(matches!(g.integrate_bulk(&h.bulk_zeros()), Err(Error::ShapeMismatch { .. })));
        assert!(g.laplace_beltrami(&h.trace_zeros()).is_err());
        assert!(g.normal_derivative(&g.bulk_zeros(), &h.trace_zeros()).is_err());
    }

    #[test]
    fn laplacian_of_constant_and_conservation() {
        let g = DiskGrid::new(16, 32).unwrap();
        let c = g.bulk_constant(3.0);
        assert!(g.laplacian_bulk(&c, Boundary::ZeroFlux).unwrap().max_abs() < 1e-9);
        let u = g.bulk_from_fn(|r, t| (3.0 * r).sin() * (2.0 * t).cos() + r.powi(3));
        let lap = g.laplacian_bulk(&u, Boundary::ZeroFlux).unwrap();
        let total = g.integrate_bulk(&lap).unwrap();
        assert!(total.abs() < 1e-12, "{total}");
    }

    #[test]
    fn laplacian_of_r_squared() {
        // Δ(r²) = 4, reproduced exactly away from the Dirichlet ring
        let g = DiskGrid::new(64, 128).unwrap();
        let u = g.bulk_from_fn(|r, _| r * r);
        let lap = g.laplacian_bulk(&u, Boundary::Dirichlet(&g.trace_constant(1.0))).unwrap();
        let err = (0..63).flat_map(|i| (0..128).map(move |j| (i, j))).map(|(i, j)| (lap.get(i, j) - 4.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn laplacian_second_order_interior() {
        // Δ(r⁴ + r³cos θ) = 16r² + 8r cos θ
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = DiskGrid::new(n, 2 * n).unwrap();
            let u = g.bulk_from_fn(|r, t| r.powi(4) + r.powi(3) * t.cos());
            let v = g.trace_from_fn(|t| 1.0 + t.cos());
            let lap = g.laplacian_bulk(&u, Boundary::Dirichlet(&v)).unwrap();
            let exact = g.bulk_from_fn(|r, t| 16.0 * r * r + 8.0 * r * t.cos());
            // weighted L² error over every ring but the outermost
            let err: f64 = (0..n - 1)
                .flat_map(|i| (0..2 * n).map(move |j| (i, j)))
                .map(|(i, j)| g.cell_weight(i) * (lap.get(i, j) - exact.get(i, j)).powi(2))
                .sum();
            errs.push(err.sqrt());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio} from {errs:?}");
        }
    }

    #[test]
    fn laplace_beltrami_modes() {
        let g = DiskGrid::new(4, 256).unwrap();
        let c = g.trace_constant(1.7);
        assert!(g.laplace_beltrami(&c).unwrap().max_abs() < 1e-9);
        let k = 1.0;
        let v = g.trace_from_fn(|t| (k * t).cos());
        let lv = g.laplace_beltrami(&v).unwrap();
        let dt = g.dtheta();
        let discrete = -(2.0 - 2.0 * (k * dt).cos()) / (dt * dt);
        let err_exact = lv.zip_map(&v, |a, b| a - discrete * b).max_abs();
        assert!(err_exact < 1e-10);
        let err = lv.zip_map(&v, |a, b| a + k * k * b).max_abs();
        assert!(err <= 1e-4, "{err}");
        assert!(g.integrate_trace(&g.laplace_beltrami(&g.trace_from_fn(|t| (3.0 * t).sin() + t.cos().powi(3))).unwrap()).unwrap().abs() < 1e-13);
    }

    #[test]
    fn normal_derivative_refinement() {
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = DiskGrid::new(n, 32).unwrap();
            let u = g.bulk_from_fn(|r, _| r * r);
            let dn = g.normal_derivative(&u, &g.trace_constant(1.0)).unwrap();
            errs.push(dn.values.iter().map(|x| (x - 2.0).abs()).fold(0.0, f64::max));
            let u = g.bulk_from_fn(|r, t| r * t.cos());
            let v = g.trace_from_fn(|t| t.cos());
            let dn = g.normal_derivative(&u, &v).unwrap();
            assert!(dn.zip_map(&v, |a, b| a - b).max_abs() < 1e-9);
        }
        assert!(errs[1] < errs[0] && errs[2] < errs[1]);
        let g = DiskGrid::new(8, 16).unwrap();
        let dn = g.normal_derivative(&g.bulk_constant(0.4), &g.trace_constant(0.4)).unwrap();
        assert_eq!(dn.max_abs(), 0.0);
    }

    #[test]
    fn trace_seminorm_of_cosine() {
        let g = DiskGrid::new(4, 256).unwrap();
        let v = g.trace_from_fn(|t| t.cos());
        let s = g.h1_seminorm_trace(&v).unwrap();
        assert!((s - PI.sqrt()).abs() < 1e-3);
        let s2 = g.h1_seminorm_trace(&v.scaled(2.0)).unwrap();
        assert!((s2 - 2.0 * s).abs() < 1e-13);
        assert_eq!(g.h1_seminorm_trace(&g.trace_constant(5.0)).unwrap(), 0.0);
        assert_eq!(g.h1_seminorm_bulk(&g.bulk_constant(5.0), Boundary::ZeroFlux).unwrap(), 0.0);
    }

    #[test]
    fn summation_by_parts_with_boundary_ring() {
        let g = DiskGrid::new(8, 16).unwrap();
        let u = g.bulk_from_fn(|r, t| r * r * (2.0 * t).sin() + r);
        let v = g.trace_from_fn(|t| 0.3 * t.cos());
        let lap = g.laplacian_bulk(&u, Boundary::Dirichlet(&v)).unwrap();
        let dn = g.normal_derivative(&u, &v).unwrap();
        // −(Δu, u) + (∂ν u, v)_Γ = a_h(u, v)
        let lhs = -g.inner_bulk(&lap, &u).unwrap() + g.inner_trace(&dn, &v).unwrap();
        let rhs = g.dirichlet_energy_bulk(&u, Boundary::Dirichlet(&v)).unwrap();
        assert!((lhs - rhs).abs() < 1e-11 * rhs.max(1.0));
    }

    #[test]
    fn csv_rows() {
        let g = DiskGrid::new(4, 8).unwrap();
        let mut buf = Vec::new();
        g.bulk_constant(1.0).write_csv(&mut buf, 0.5, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 33);
        assert!(text.lines().nth(1).unwrap().starts_with("5.0000000000000000e-1,0,0,"));
    }
}
