//! Reduced backends against the full `2^N` space, on fixed parameter sets.

use crate::error::Result;
use serde::Serialize;
use spinsq_core::lindblad::embed::to_full;
use spinsq_core::lindblad::{
    brute_force_liouvillian, build_liouvillian_collective, build_liouvillian_independent, evolve, Basis, DensityMatrix,
    Liouvillian,
};
use spinsq_core::meanfield::ModelParams;

#[derive(Clone, Debug, Serialize)]
pub struct OracleCase {
    pub backend: &'static str,
    pub n_atoms: usize,
    pub params: ModelParams,
    /// Largest trace distance over the sampled times.
    pub max_distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
    pub max_distance: f64,
    pub samples: usize,
}

/// Quasi-random parameter sets from a Weyl sequence, so runs are reproducible
/// without a generator seed. Returns `(vx, vy, Ω, γ)`.
pub fn parameter_sets(count: usize) -> Vec<(f64, f64, f64, f64)> {
    let alpha = [0.754_877_666_246_692_7, 0.569_840_290_998_053_2, 0.438_530_865_379_346_5, 0.333_333_333_333_333_3];
    (1..=count)
        .map(|k| {
            let u = |d: usize| (0.5 + alpha[d] * k as f64).fract();
            (3.0 * u(0) - 1.5, 3.0 * u(1) - 1.5, 1.6 * u(2) - 0.8, 0.3 + 1.2 * u(3))
        })
        .collect()
}

/// Half down-polarized, half maximally mixed over the whole `2^N` space, so
/// every block starts populated.
fn initial_state(l: &Liouvillian) -> Result<DensityMatrix> {
    let basis = l.basis().clone();
    let down = DensityMatrix::all_down(basis.clone());
    let mut mixed = DensityMatrix::zeros(basis.clone());
    for (k, bl) in basis.blocks().iter().enumerate() {
        for a in 0..bl.dim {
            mixed.data_mut()[basis.index(k, a, a)] = bl.degeneracy().into();
        }
    }
    mixed.normalize()?;
    for (r, d) in mixed.data_mut().iter_mut().zip(down.data()) {
        *r = 0.5 * (*r + d);
    }
    Ok(mixed)
}

/// Evolves each reduced backend and the full space side by side and records
/// the trace distance at `samples` evenly spaced times up to `t_end`.
pub fn oracle_check(ns: &[usize], sets: usize, samples: usize, t_end: f64) -> Result<OracleReport> {
    let mut cases = Vec::new();
    for &n in ns {
        for (vx, vy, om, g) in parameter_sets(sets) {
            let p_perm = ModelParams { gamma_i: g, gamma_c: 0.0, ..ModelParams::general(vx, vy, om, 0.0) }.with_n_atoms(n);
            let p_dicke = ModelParams::general(vx, vy, om, g).with_n_atoms(n);
            let reduced = [
                ("perm", build_liouvillian_independent(&Basis::perm(n)?, &p_perm)?, p_perm),
                ("dicke", build_liouvillian_collective(&Basis::dicke(n)?, &p_dicke)?, p_dicke),
            ];
            for (name, l, p) in reduced {
                let rho0 = initial_state(&l)?;
                let full = brute_force_liouvillian(n, &p)?;
                let a = evolve(&l, &rho0, t_end, 1e-12, samples.saturating_sub(1).max(1))?;
                let b = evolve(&full, &to_full(&rho0)?, t_end, 1e-12, samples.saturating_sub(1).max(1))?;
                let mut worst = 0.0f64;
                for (x, y) in a.states.iter().zip(&b.states) {
                    worst = worst.max(to_full(x)?.trace_distance(y)?);
                }
                cases.push(OracleCase { backend: name, n_atoms: n, params: p, max_distance: worst });
            }
        }
    }
    let max_distance = cases.iter().map(|c| c.max_distance).fold(0.0, f64::max);
    Ok(OracleReport { cases, max_distance, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_are_spread_and_in_range() {
        let s = parameter_sets(5);
        assert_eq!(s.len(), 5);
        for &(vx, vy, om, g) in &s {
            assert!(vx.abs() <= 1.5 && vy.abs() <= 1.5 && om.abs() <= 0.8 && (0.3..=1.5).contains(&g));
        }
        assert_ne!(s[0], s[1]);
    }

    #[test]
    fn two_atoms_agree() {
        let r = oracle_check(&[2], 1, 5, 2.0).unwrap();
        assert_eq!(r.cases.len(), 2);
        assert!(r.max_distance < 1e-8, "{:e}", r.max_distance);
    }
}
