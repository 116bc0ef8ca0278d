//! Dual and fractional norms on the disk and its boundary circle.
//!
//! The inverse duality map `F⁻¹` on zero-mean bulk fields is the zero-flux
//! Poisson solve `−Δ_h ψ = z`, `mean(ψ) = 0`. The polar stencil is circulant
//! in θ, so each angular Fourier mode decouples into a radial tridiagonal
//! system; this is an exact direct solve of the discrete operator. On the
//! boundary circle the duality map is realized spectrally with the symbol k².

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Boundary, BulkField, DiskGrid, TraceField};

/// Relative mean tolerance accepted by [`NormToolkit::f_inverse_bulk`].
pub const MEAN_TOLERANCE: f64 = 1e-10;

pub struct NormToolkit {
    grid: DiskGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for NormToolkit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormToolkit").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl NormToolkit {
    pub fn new(grid: &DiskGrid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_theta();
        NormToolkit {
            grid: grid.clone(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> &DiskGrid {
        &self.grid
    }

    /// Unnormalized forward DFT of every ring, ring-major.
    fn ring_spectra(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = values.iter().map(|&x| Complex::new(x, 0.0)).collect();
        for ring in buf.chunks_exact_mut(self.grid.n_theta()) {
            self.forward.process(ring);
        }
        buf
    }

    /// Circle frequency `|k|` of DFT bin `k`.
    fn frequency(&self, k: usize) -> f64 {
        let n = self.grid.n_theta();
        k.min(n - k) as f64
    }

    /// Normalized DFT coefficients `ẑ_k = (1/n) Σ_j z_j e^{−ikθ_j}`.
    fn trace_spectrum(&self, z: &TraceField) -> Result<Vec<Complex<f64>>> {
        self.grid.check_trace(z)?;
        let n = z.len() as f64;
        let mut buf: Vec<Complex<f64>> = z.values.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        Ok(buf.into_iter().map(|c| c / n).collect())
    }

    /// Solves `−Δ_h ψ = z` with zero flux at `r = 1` and `mean(ψ) = 0`.
    pub fn f_inverse_bulk(&self, z: &BulkField) -> Result<BulkField> {
        let g = &self.grid;
        let mean = g.mean_bulk(z)?;
        let rms = (g.inner_bulk(z, z)? / g.area()).sqrt();
        if mean.abs() > MEAN_TOLERANCE * rms {
            return Err(Error::NonzeroMean { mean });
        }
        let (nr, nt) = (g.n_r(), g.n_theta());
        let mut spec = self.ring_spectra(&z.values);

        let mut rhs = vec![Complex::new(0.0, 0.0); nr];
        let mut sol = vec![Complex::new(0.0, 0.0); nr];
        let mut c_prime = vec![0.0; nr];
        let mut d_prime = vec![Complex::new(0.0, 0.0); nr];
        for k in 0..nt {
            for i in 0..nr {
                rhs[i] = -spec[i * nt + k];
            }
            if k == 0 {
                // zero flux at the origin; integrate the flux outward
                let mut flux = Complex::new(0.0, 0.0);
                sol[0] = Complex::new(0.0, 0.0);
                for i in 0..nr - 1 {
                    flux += rhs[i] * (g.radii()[i] * g.dr());
                    sol[i + 1] = sol[i] + flux / (i + 1) as f64;
                }
            } else {
                let shift = 2.0 * (k as f64 * g.dtheta()).cos() - 2.0;
                // Thomas algorithm on the (diagonally dominant) radial system
                for i in 0..nr {
                    let lower = g.radial_inner_coeff(i);
                    let upper = if i + 1 < nr { g.radial_outer_coeff(i) } else { 0.0 };
                    let diag = -(lower + upper) + g.angular_coeff(i) * shift;
                    if i == 0 {
                        c_prime[0] = upper / diag;
                        d_prime[0] = rhs[0] / diag;
                    } else {
                        let denom = diag - lower * c_prime[i - 1];
                        c_prime[i] = upper / denom;
                        d_prime[i] = (rhs[i] - d_prime[i - 1] * lower) / denom;
                    }
                }
                sol[nr - 1] = d_prime[nr - 1];
                for i in (0..nr - 1).rev() {
                    sol[i] = d_prime[i] - sol[i + 1] * c_prime[i];
                }
            }
            for i in 0..nr {
                spec[i * nt + k] = sol[i];
            }
        }

        for ring in spec.chunks_exact_mut(nt) {
            self.inverse.process(ring);
        }
        let scale = 1.0 / nt as f64;
        let psi = g.bulk_from_values(spec.into_iter().map(|c| c.re * scale).collect())?;
        let shift = g.mean_bulk(&psi)?;
        Ok(psi.map(|x| x - shift))
    }

    /// The duality map `F ψ = −Δ_h ψ` (zero flux).
    pub fn f_bulk(&self, psi: &BulkField) -> Result<BulkField> {
        Ok(self.grid.laplacian_bulk(psi, Boundary::ZeroFlux)?.scaled(-1.0))
    }

    /// `|z|_* = ( |z − m(z)|²_{V₀*} + m(z)² )^{1/2}`.
    pub fn dual_norm_bulk(&self, z: &BulkField) -> Result<f64> {
        let g = &self.grid;
        let m = g.mean_bulk(z)?;
        let z0 = z.map(|x| x - m);
        let psi = self.f_inverse_bulk(&z0)?;
        let zero_mean_part = g.inner_bulk(&z0, &psi)?.max(0.0);
        Ok((zero_mean_part + m * m).sqrt())
    }

    /// `|z|_{Γ,*}` with the zero-mean part measured spectrally,
    /// `2π Σ_{k≠0} |ẑ_k|²/k²`.
    pub fn dual_norm_trace(&self, z: &TraceField) -> Result<f64> {
        let spec = self.trace_spectrum(z)?;
        let m = spec[0].re;
        let tail: f64 = spec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.norm_sqr() / self.frequency(k).powi(2))
            .sum();
        Ok((2.0 * PI * tail + m * m).sqrt())
    }

    /// `H^{1/2}(Γ)` norm with Fourier weight `1 + |k|`.
    pub fn h_half_norm_trace(&self, z: &TraceField) -> Result<f64> {
        let spec = self.trace_spectrum(z)?;
        let sum: f64 = spec.iter().enumerate().map(|(k, c)| (1.0 + self.frequency(k)) * c.norm_sqr()).sum();
        Ok((2.0 * PI * sum).sqrt())
    }

    /// `H¹(Ω)` norm, with the outer face flux taken against the ring `v`.
    pub fn v_norm_bulk(&self, u: &BulkField, v: &TraceField) -> Result<f64> {
        let g = &self.grid;
        Ok((g.dirichlet_energy_bulk(u, Boundary::Dirichlet(v))? + g.inner_bulk(u, u)?).sqrt())
    }

    /// `H¹(Γ)` norm.
    pub fn v_norm_trace(&self, v: &TraceField) -> Result<f64> {
        let g = &self.grid;
        Ok((g.dirichlet_energy_trace(v)? + g.inner_trace(v, v)?).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_linearity() {
        let g = DiskGrid::new(8, 16).unwrap();
        let t = NormToolkit::new(&g);
        assert_eq!(t.f_inverse_bulk(&g.bulk_zeros()).unwrap().max_abs(), 0.0);
        let z = g.bulk_from_fn(|r, th| r * th.cos() + (r * r - 0.5) * (2.0 * th).sin());
        let z = z.map(|x| x - g.mean_bulk(&z).unwrap());
        let a = t.f_inverse_bulk(&z).unwrap();
        let b = t.f_inverse_bulk(&z.scaled(3.0)).unwrap();
        assert!(b.zip_map(&a, |x, y| x - 3.0 * y).max_abs() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip() {
        let g = DiskGrid::new(32, 64).unwrap();
        let t = NormToolkit::new(&g);
        let z = g.bulk_from_fn(|r, th| (5.0 * r).cos() + r.powi(3) * (3.0 * th).sin() + (r * th).cos());
        let z = z.map(|x| x - g.mean_bulk(&z).unwrap());
        let psi = t.f_inverse_bulk(&z).unwrap();
        assert!(g.mean_bulk(&psi).unwrap().abs() < 1e-14);
        let back = t.f_bulk(&psi).unwrap();
        let rel = g.l2_norm_bulk(&back.sub(&z)).unwrap() / g.l2_norm_bulk(&z).unwrap();
        assert!(rel < 1e-11, "{rel}");
    }

    #[test]
    fn nonzero_mean_rejected() {
        let g = DiskGrid::new(8, 16).unwrap();
        let t = NormToolkit::new(&g);
        assert!(matches!(t.f_inverse_bulk(&g.bulk_constant(1.0)), Err(Error::NonzeroMean { .. })));
    }

    #[test]
    fn constants() {
        let g = DiskGrid::new(8, 16).unwrap();
        let t = NormToolkit::new(&g);
        assert!((t.dual_norm_bulk(&g.bulk_constant(-2.0)).unwrap() - 2.0).abs() < 1e-14);
        assert!((t.dual_norm_trace(&g.trace_constant(-2.0)).unwrap() - 2.0).abs() < 1e-14);
        let h = t.h_half_norm_trace(&g.trace_constant(3.0)).unwrap();
        assert!((h - 3.0 * (2.0 * PI).sqrt()).abs() < 1e-13);
        assert!((t.v_norm_bulk(&g.bulk_constant(2.0), &g.trace_constant(2.0)).unwrap() - 2.0 * PI.sqrt()).abs() < 1e-13);
        assert_eq!(t.v_norm_bulk(&g.bulk_zeros(), &g.trace_zeros()).unwrap(), 0.0);
    }

    #[test]
    fn trace_modes() {
        let g = DiskGrid::new(4, 64).unwrap();
        let t = NormToolkit::new(&g);
        for k in 1..=16 {
            let z = g.trace_from_fn(|th| (k as f64 * th).cos());
            let d = t.dual_norm_trace(&z).unwrap();
            assert!((d - PI.sqrt() / k as f64).abs() < 1e-12);
            let h = t.h_half_norm_trace(&z).unwrap();
            assert!((h - ((1.0 + k as f64) * PI).sqrt()).abs() < 1e-12);
            assert!(d <= g.l2_norm_trace(&z).unwrap() + 1e-14);
        }
        let c2 = t.h_half_norm_trace(&g.trace_from_fn(|th| (2.0 * th).cos())).unwrap();
        let c4 = t.h_half_norm_trace(&g.trace_from_fn(|th| (4.0 * th).cos())).unwrap();
        assert!(c4 > c2);
    }

    #[test]
    fn trace_v_norm_of_cosine() {
        let g = DiskGrid::new(4, 512).unwrap();
        let t = NormToolkit::new(&g);
        let v = t.v_norm_trace(&g.trace_from_fn(|th| th.cos())).unwrap();
        assert!((v - (2.0 * PI).sqrt()).abs() < 1e-4);
    }
}
