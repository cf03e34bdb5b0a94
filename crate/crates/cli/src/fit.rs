//! Power-law fits `ξ²_min ≈ A·N^b` in log–log space.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use spinsq_core::Error as CoreError;

pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub prefactor: f64,
    pub exponent: f64,
    /// RMS residual of `ln ξ²`.
    pub residual: f64,
    pub points: usize,
}

impl PowerLawFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.prefactor * n.powf(self.exponent)
    }
}

/// Ordinary least squares on `(ln N, ln ξ²)`.
pub fn fit_powerlaw(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(CoreError::Domain(format!("need at least {MIN_FIT_POINTS} points, got {}", points.len())).into());
    }
    if points.iter().any(|&(n, y)| !(n > 0.0 && y > 0.0 && n.is_finite() && y.is_finite())) {
        return Err(CoreError::Domain("power-law fit needs positive finite N and ξ²".into()).into());
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CoreError::Domain("all N identical".into()).into());
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    Ok(PowerLawFit { prefactor: a.exp(), exponent: b, residual: (rss / m).sqrt(), points: points.len() })
}

/// Refits after dropping the smallest N one at a time, while enough points
/// remain. Returns `(smallest N kept, fit)`.
pub fn exponent_sensitivity(points: &[(f64, f64)]) -> Result<Vec<(f64, PowerLawFit)>> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    for skip in 0..=sorted.len().saturating_sub(MIN_FIT_POINTS) {
        let tail = &sorted[skip..];
        out.push((tail[0].0, fit_powerlaw(tail)?));
    }
    if out.is_empty() {
        fit_powerlaw(points)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let pts: Vec<_> = [100.0, 200.0, 500.0, 1000.0, 2000.0].iter().map(|&n: &f64| (n, 1.7 * n.powf(-0.29))).collect();
        let f = fit_powerlaw(&pts).unwrap();
        assert!((f.prefactor - 1.7).abs() < 1e-12);
        assert!((f.exponent + 0.29).abs() < 1e-14);
        assert!(f.residual < 1e-14);
        let s = exponent_sensitivity(&pts).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].0, 200.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fit_powerlaw(&[(1.0, 1.0), (2.0, 0.5), (3.0, 0.3)]).is_err());
        assert!(fit_powerlaw(&[(1.0, 1.0), (2.0, 0.0), (3.0, 0.3), (4.0, 0.2)]).is_err());
        assert!(fit_powerlaw(&[(2.0, 1.0), (2.0, 0.5), (2.0, 0.3), (2.0, 0.2)]).is_err());
    }
}
