//! Minimum steady-state ξ² of the driven model over the drive strength.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use spinsq_core::lindblad::{build_liouvillian_collective, steady_state, Basis, SteadyOptions};
use spinsq_core::meanfield::ModelParams;
use spinsq_core::observables::xi2_from_rho;
use spinsq_core::Error as CoreError;

/// Width of the final Ω bracket, in units of γc.
pub const OMEGA_TOL: f64 = 1e-3;
const COARSE: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaMinimum {
    pub n_atoms: usize,
    pub vx: f64,
    pub omega: f64,
    pub xi2: f64,
    pub evaluations: usize,
    /// The coarse scan was not unimodal, so a dense scan was used instead.
    pub fallback_scan: bool,
    /// ξ² ≥ 1 everywhere searched.
    pub no_squeezing: bool,
}

/// ξ² of the exact collective steady state; `inf` when the mean spin vanishes.
pub fn steady_xi2(n: usize, vx: f64, omega: f64, gamma_c: f64, opts: &SteadyOptions) -> Result<f64> {
    let p = ModelParams::driven(vx, omega, gamma_c).with_n_atoms(n);
    let liou = build_liouvillian_collective(&Basis::dicke(n)?, &p)?;
    let ss = steady_state(&liou, opts)?;
    match xi2_from_rho(&ss.rho) {
        Ok(r) => Ok(r.xi2),
        Err(CoreError::Degenerate(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

fn unimodal(v: &[f64]) -> bool {
    let k = v.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    v[..=k].windows(2).all(|w| w[1] <= w[0]) && v[k..].windows(2).all(|w| w[1] >= w[0])
}

/// Minimizes ξ²(Ω) over `0 < Ω < γc/2` with `γc = 1`: a coarse scan, then a
/// golden-section search around its best point.
pub fn min_xi2_over_omega(n: usize, vx: f64, opts: &SteadyOptions) -> Result<OmegaMinimum> {
    let hi = 0.5;
    let mut evals = 0usize;
    let mut f = |om: f64| -> Result<f64> {
        evals += 1;
        steady_xi2(n, vx, om, 1.0, opts)
    };
    let coarse: Vec<f64> = (1..COARSE).map(|k| hi * k as f64 / COARSE as f64).collect();
    let vals = coarse.iter().map(|&om| f(om)).collect::<Result<Vec<_>>>()?;
    let (k, _) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty scan");

    let (omega, xi2, fallback) = if unimodal(&vals) {
        let mut a = if k == 0 { 0.0 } else { coarse[k - 1] };
        let mut b = if k + 1 == coarse.len() { hi * (1.0 - 1e-6) } else { coarse[k + 1] };
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (f(c)?, f(d)?);
        while b - a > OMEGA_TOL {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = f(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = f(d)?;
            }
        }
        let (om, v) = if fc <= fd { (c, fc) } else { (d, fd) };
        if v <= vals[k] { (om, v, false) } else { (coarse[k], vals[k], false) }
    } else {
        let steps = (hi / OMEGA_TOL).round() as usize;
        let mut best = (coarse[k], vals[k]);
        for s in 1..steps {
            let om = hi * s as f64 / steps as f64;
            let v = f(om)?;
            if v < best.1 {
                best = (om, v);
            }
        }
        (best.0, best.1, true)
    };
    Ok(OmegaMinimum {
        n_atoms: n,
        vx,
        omega,
        xi2,
        evaluations: evals,
        fallback_scan: fallback,
        no_squeezing: !(xi2 < 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unimodal_detection() {
        assert!(unimodal(&[3.0, 2.0, 1.0, 2.0]));
        assert!(unimodal(&[3.0, 2.0, 1.0]));
        assert!(!unimodal(&[1.0, 2.0, 0.5, 3.0]));
    }

    #[test]
    fn single_atom_flags_no_squeezing() {
        let m = min_xi2_over_omega(1, 0.0, &SteadyOptions::default()).unwrap();
        assert!(m.no_squeezing);
    }

    #[test]
    fn small_ensemble_minimum_is_interior() {
        let m = min_xi2_over_omega(20, 0.0, &SteadyOptions::default()).unwrap();
        assert!(!m.fallback_scan && !m.no_squeezing);
        assert!(m.omega > 0.0 && m.omega < 0.5);
        let opts = SteadyOptions::default();
        for dom in [-0.01, 0.01] {
            let om = (m.omega + dom).clamp(1e-3, 0.499);
            assert!(steady_xi2(20, 0.0, om, 1.0, &opts).unwrap() >= m.xi2 - 1e-6);
        }
    }
}
