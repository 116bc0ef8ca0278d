use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `log e = slope · log δ + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::NonPositivePoint(x, y));
    }
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("rate fit needs at least two distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(RateFit { slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DELTAS: [f64; 5] = [0.1, 0.05, 0.025, 0.0125, 0.00625];

    #[test]
    fn exact_power_laws() {
        let f = fit_rate(&DELTAS.map(|d| (d, d))).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && f.intercept.abs() < 1e-12);
        let f = fit_rate(&DELTAS.map(|d| (d, 3.0 * d.sqrt()))).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_half_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> =
            DELTAS.iter().map(|&d| (d, d.sqrt() * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((0.48..=0.52).contains(&f.slope), "{}", f.slope);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(fit_rate(&[(0.1, 1.0), (0.2, 2.0)]), Err(Error::TooFewPoints(2))));
        assert!(matches!(fit_rate(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]), Err(Error::NonPositivePoint(..))));
        assert!(matches!(fit_rate(&[(-0.1, 1.0), (0.2, 1.0), (0.3, 1.0)]), Err(Error::NonPositivePoint(..))));
    }
}
