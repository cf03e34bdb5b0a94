use super::density::DensityMatrix;
use super::liouvillian::Liouvillian;
use crate::error::{invalid, Error, Result};
use crate::numerics::ode::{integrate, Control, OdeOptions};

/// States sampled at requested times.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
}

impl StateTrajectory {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Integrates `ρ̇ = L[ρ]` from `t = 0` to `t_end`, recording `samples + 1`
/// evenly spaced states including both ends.
pub fn evolve(
    liou: &Liouvillian,
    rho0: &DensityMatrix,
    t_end: f64,
    tol: f64,
    samples: usize,
) -> Result<StateTrajectory> {
    if rho0.basis() != liou.basis() {
        return Err(Error::BasisMismatch {
            expected: format!("{} N={}", liou.basis().kind(), liou.basis().n_atoms()),
            found: format!("{} N={}", rho0.basis().kind(), rho0.basis().n_atoms()),
        });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end must be finite and non-negative"));
    }
    if !(tol > 0.0 && tol < 1e-2) {
        return Err(invalid("tol must lie in (0, 1e-2)"));
    }
    let samples = samples.max(1);
    let stops: Vec<f64> = (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect();
    let opts = OdeOptions { rtol: tol, atol: tol * 1e-2, ..OdeOptions::default() };
    let basis = liou.basis().clone();
    let mut times = Vec::with_capacity(stops.len());
    let mut states = Vec::with_capacity(stops.len());
    let mut next = 0usize;
    integrate(
        |_, y, dy| liou.apply(y, dy),
        0.0,
        rho0.data(),
        t_end,
        &stops,
        &opts,
        |t, y| {
            if next < stops.len() && (t - stops[next]).abs() <= 1e-12 * t_end.max(1.0) {
                times.push(t);
                states.push(DensityMatrix::new(basis.clone(), y.to_vec()).expect("length preserved"));
                next += 1;
            }
            Control::Continue
        },
    )?;
    Ok(StateTrajectory { times, states })
}
