//! Mean-field Bloch equations, fixed points, stability and orbit statistics.
//!
//! One right-hand side covers every model: with `H = (Vx/N)Jx² + (Vy/N)Jy² + ΩJx`
//! and both decay channels,
//!
//! ```text
//! Ẋ = Vy·YZ + (γc/2)XZ − (γi/2)X
//! Ẏ = −Vx·XZ − ΩZ + (γc/2)YZ − (γi/2)Y
//! Ż = (Vx−Vy)XY + ΩY − (γc/2)(1−Z²) − γi(Z+1)
//! ```

use crate::error::{invalid, Error, Result};
use crate::numerics::ode::{self, Control, OdeOptions};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Model {
    IndependentXy,
    CollectiveXy,
    Driven,
    General,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::IndependentXy => "independent_xy",
            Model::CollectiveXy => "collective_xy",
            Model::Driven => "driven",
            Model::General => "general",
        })
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "independent_xy" | "independent" => Ok(Model::IndependentXy),
            "collective_xy" | "collective" => Ok(Model::CollectiveXy),
            "driven" => Ok(Model::Driven),
            "general" => Ok(Model::General),
            other => Err(invalid(format!("unknown model '{other}'"))),
        }
    }
}

/// Physical parameters. Frequencies and rates share one unit, usually γc = 1
/// (γi = 1 for the independent-decay model).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: Model,
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
    pub gamma_i: f64,
    pub gamma_c: f64,
    pub n_atoms: usize,
}

impl ModelParams {
    /// `H = (V/N)(Jx² − Jy²)` with independent decay at rate `gamma_i`.
    pub fn independent_xy(v: f64, gamma_i: f64) -> Self {
        ModelParams { model: Model::IndependentXy, vx: v, vy: -v, omega: 0.0, gamma_i, gamma_c: 0.0, n_atoms: 1 }
    }

    /// `H = (V/N)(Jx² − Jy²)` with collective decay at rate `gamma_c`.
    pub fn collective_xy(v: f64, gamma_c: f64) -> Self {
        ModelParams { model: Model::CollectiveXy, vx: v, vy: -v, omega: 0.0, gamma_i: 0.0, gamma_c, n_atoms: 1 }
    }

    /// `H = (Vx/N)Jx² + ΩJx` with collective decay.
    pub fn driven(vx: f64, omega: f64, gamma_c: f64) -> Self {
        ModelParams { model: Model::Driven, vx, vy: 0.0, omega, gamma_i: 0.0, gamma_c, n_atoms: 1 }
    }

    pub fn general(vx: f64, vy: f64, omega: f64, gamma_c: f64) -> Self {
        ModelParams { model: Model::General, vx, vy, omega, gamma_i: 0.0, gamma_c, n_atoms: 1 }
    }

    pub fn with_n_atoms(mut self, n: usize) -> Self {
        self.n_atoms = n;
        self
    }

    /// XY coupling V (meaningful for the two XY models).
    pub fn v(&self) -> f64 {
        self.vx
    }

    /// The decay rate that sets the unit for this model.
    pub fn gamma(&self) -> f64 {
        match self.model {
            Model::IndependentXy => self.gamma_i,
            _ => self.gamma_c,
        }
    }

    /// Bloch-sphere radius is conserved only without independent decay.
    pub fn conserves_sphere(&self) -> bool {
        self.gamma_i == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.vx, self.vy, self.omega, self.gamma_i, self.gamma_c];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(invalid("parameters must be finite"));
        }
        if self.gamma_i < 0.0 || self.gamma_c < 0.0 {
            return Err(invalid("decay rates must be non-negative"));
        }
        match self.model {
            Model::IndependentXy | Model::CollectiveXy => {
                if self.vy != -self.vx {
                    return Err(invalid("XY models require vy = -vx"));
                }
                if self.omega != 0.0 {
                    return Err(invalid("XY models have no drive"));
                }
                if self.model == Model::IndependentXy && self.gamma_c != 0.0 {
                    return Err(invalid("independent_xy requires gamma_c = 0"));
                }
                if self.model == Model::CollectiveXy && self.gamma_i != 0.0 {
                    return Err(invalid("collective_xy requires gamma_i = 0"));
                }
            }
            Model::Driven => {
                if self.vy != 0.0 {
                    return Err(invalid("driven model requires vy = 0"));
                }
            }
            Model::General => {}
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const SOUTH: BlochVector = BlochVector { x: 0.0, y: 0.0, z: -1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        BlochVector { x: a[0], y: a[1], z: a[2] }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(self, o: BlochVector) -> f64 {
        BlochVector::new(self.x - o.x, self.y - o.y, self.z - o.z).norm()
    }
}

pub fn rhs(p: &ModelParams, s: BlochVector) -> BlochVector {
    let BlochVector { x, y, z } = s;
    let (gc, gi) = (p.gamma_c, p.gamma_i);
    BlochVector {
        x: p.vy * y * z + 0.5 * gc * x * z - 0.5 * gi * x,
        y: -p.vx * x * z - p.omega * z + 0.5 * gc * y * z - 0.5 * gi * y,
        z: (p.vx - p.vy) * x * y + p.omega * y - 0.5 * gc * (1.0 - z * z) - gi * (z + 1.0),
    }
}

/// Row-major Jacobian of [`rhs`].
pub fn jacobian(p: &ModelParams, s: BlochVector) -> [[f64; 3]; 3] {
    let BlochVector { x, y, z } = s;
    let (gc, gi) = (p.gamma_c, p.gamma_i);
    let d = p.vx - p.vy;
    [
        [0.5 * gc * z - 0.5 * gi, p.vy * z, p.vy * y + 0.5 * gc * x],
        [-p.vx * z, 0.5 * gc * z - 0.5 * gi, -p.vx * x - p.omega + 0.5 * gc * y],
        [d * y, d * x + p.omega, gc * z - gi],
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    pub params: ModelParams,
    pub tol: f64,
}

/// Adaptive Dormand–Prince integration, recording every accepted step.
/// No projection back onto the sphere is applied.
pub fn integrate(p: &ModelParams, init: BlochVector, t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_sampled(p, init, t_end, tol, &[])
}

/// As [`integrate`], additionally landing exactly on each time in `samples`.
pub fn integrate_sampled(
    p: &ModelParams,
    init: BlochVector,
    t_end: f64,
    tol: f64,
    samples: &[f64],
) -> Result<Trajectory> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(invalid(format!("tol {tol:e} outside [1e-13, 1e-6]")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end must be finite and non-negative"));
    }
    let init_arr = init.to_array();
    if init_arr.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial state must be finite"));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    // `tol` bounds the error of the whole trajectory; the per-step controller
    // needs two more digits for the sphere radius to stay within 100·tol.
    let opts = OdeOptions { rtol: tol * 1e-2, atol: tol * 1e-4, ..Default::default() };
    ode::integrate(
        |_, y: &[f64], dy: &mut [f64]| {
            let d = rhs(p, BlochVector::new(y[0], y[1], y[2]));
            dy.copy_from_slice(&d.to_array());
        },
        0.0,
        &init_arr,
        t_end,
        samples,
        &opts,
        |t, y| {
            times.push(t);
            states.push(BlochVector::new(y[0], y[1], y[2]));
            Control::Continue
        },
    )?;
    Ok(Trajectory { times, states, params: *p, tol })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Center,
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub point: BlochVector,
    /// For sphere-conserving models: the two tangent-plane eigenvalues, then the
    /// radial one (`γc·Z`). Otherwise the full 3×3 spectrum.
    pub jacobian_eigenvalues: [Complex64; 3],
    pub classification: Stability,
}

const STAB_TOL: f64 = 1e-9;

fn classify(eigs: &[Complex64]) -> Stability {
    if eigs.iter().any(|e| e.re > STAB_TOL) {
        return Stability::Unstable;
    }
    if eigs.iter().all(|e| e.re < -STAB_TOL) {
        return Stability::Stable;
    }
    let imaginary: Vec<_> = eigs.iter().filter(|e| e.im.abs() > STAB_TOL).collect();
    let rest_ok = eigs
        .iter()
        .filter(|e| e.im.abs() <= STAB_TOL)
        .all(|e| e.re < -STAB_TOL || e.norm() <= STAB_TOL);
    if imaginary.len() == 2 && imaginary.iter().all(|e| e.re.abs() < STAB_TOL * e.norm()) && rest_ok {
        return Stability::Center;
    }
    Stability::Marginal
}

/// Orthonormal frame `(e1, e2)` of the plane orthogonal to `n`, built by
/// Gram–Schmidt against the Cartesian axis least aligned with `n`.
pub fn tangent_frame(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let u = [n[0] / len, n[1] / len, n[2] / len];
    let axis = (0..3)
        .min_by(|&a, &b| u[a].abs().partial_cmp(&u[b].abs()).unwrap())
        .unwrap();
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let d = e[0] * u[0] + e[1] * u[1] + e[2] * u[2];
    let mut e1 = [e[0] - d * u[0], e[1] - d * u[1], e[2] - d * u[2]];
    let l1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|v| *v /= l1);
    let e2 = [
        u[1] * e1[2] - u[2] * e1[1],
        u[2] * e1[0] - u[0] * e1[2],
        u[0] * e1[1] - u[1] * e1[0],
    ];
    (e1, e2)
}

fn quad_form(j: &[[f64; 3]; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|r| a[r] * (0..3).map(|c| j[r][c] * b[c]).sum::<f64>()).sum()
}

/// Eigenvalues of `[[a, b], [c, d]]` without cancellation in the discriminant.
pub(crate) fn eig2(a: f64, b: f64, c: f64, d: f64) -> [Complex64; 2] {
    let half_tr = 0.5 * (a + d);
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [Complex64::new(half_tr + s, 0.0), Complex64::new(half_tr - s, 0.0)]
    } else {
        let s = (-disc).sqrt();
        [Complex64::new(half_tr, s), Complex64::new(half_tr, -s)]
    }
}

fn eig3(j: &[[f64; 3]; 3]) -> [Complex64; 3] {
    let m = Mat::<f64>::from_fn(3, 3, |r, c| j[r][c]);
    let ev = m.eigenvalues().expect("3x3 eigenvalue solver converges");
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (o, e) in out.iter_mut().zip(ev) {
        *o = Complex64::new(e.re, e.im);
    }
    out.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
    out
}

/// Spectrum at `s`, tangent pair first when the flow preserves the sphere.
pub fn stability_spectrum(p: &ModelParams, s: BlochVector) -> [Complex64; 3] {
    let j = jacobian(p, s);
    if p.conserves_sphere() && (s.norm() - 1.0).abs() < 1e-9 {
        let n = s.to_array();
        let (e1, e2) = tangent_frame(n);
        let [l1, l2] = eig2(
            quad_form(&j, e1, e1),
            quad_form(&j, e1, e2),
            quad_form(&j, e2, e1),
            quad_form(&j, e2, e2),
        );
        let radial = quad_form(&j, n, n) / s.norm().powi(2);
        [l1, l2, Complex64::new(radial, 0.0)]
    } else {
        eig3(&j)
    }
}

fn report(p: &ModelParams, s: BlochVector) -> FixedPointReport {
    let eigs = stability_spectrum(p, s);
    let classification = if p.conserves_sphere() && (s.norm() - 1.0).abs() < 1e-9 {
        classify(&eigs[..2])
    } else {
        classify(&eigs)
    };
    FixedPointReport { point: s, jacobian_eigenvalues: eigs, classification }
}

/// Threshold of the steady-state transition: `Ωc` for DRIVEN/GENERAL, the
/// critical `|V| = γ/2` for the XY models.
pub fn critical_point(p: &ModelParams) -> f64 {
    match p.model {
        Model::IndependentXy => 0.5 * p.gamma_i,
        Model::CollectiveXy => 0.5 * p.gamma_c,
        Model::Driven | Model::General => critical_omega(p),
    }
}

/// `Ωc = (γc² + 4VxVy) / (2√(γc² + 4Vy²))`.
pub fn critical_omega(p: &ModelParams) -> f64 {
    let gc2 = p.gamma_c * p.gamma_c;
    (gc2 + 4.0 * p.vx * p.vy) / (2.0 * (gc2 + 4.0 * p.vy * p.vy).sqrt())
}

/// The lower-hemisphere fixed point of the collective-decay flow, if it exists
/// (`Ω ≤ Ωc`).
pub fn collective_fixed_point(p: &ModelParams) -> Option<BlochVector> {
    let gc = p.gamma_c;
    let den = gc * gc + 4.0 * p.vx * p.vy;
    if den <= 0.0 || p.omega.abs() > critical_omega(p) {
        return None;
    }
    let x = -4.0 * p.vy * p.omega / den;
    let y = 2.0 * gc * p.omega / den;
    let z2 = den * den - 4.0 * p.omega * p.omega * (gc * gc + 4.0 * p.vy * p.vy);
    let z = -(z2.max(0.0)).sqrt() / den;
    Some(BlochVector::new(x, y, z))
}

/// Roots of the flow on the equator `Z = 0`, where only `Ż` can be non-zero.
fn equator_fixed_points(p: &ModelParams) -> Vec<BlochVector> {
    let d = p.vx - p.vy;
    let g = |t: f64| d * t.cos() * t.sin() + p.omega * t.sin() - 0.5 * p.gamma_c;
    let samples = 8192;
    let step = std::f64::consts::TAU / samples as f64;
    let mut out = Vec::new();
    let mut t0 = 0.0;
    let mut g0 = g(t0);
    for k in 1..=samples {
        let t1 = k as f64 * step;
        let g1 = g(t1);
        if g0 == 0.0 {
            out.push(t0);
        } else if g0 * g1 < 0.0 && g1 != 0.0 {
            let (mut lo, mut hi, mut glo) = (t0, t1, g0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = g(mid);
                if gm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (gm < 0.0) == (glo < 0.0) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        t0 = t1;
        g0 = g1;
    }
    // double roots sit exactly at a threshold and are not fixed-point branches
    let slope = |t: f64| d * (2.0 * t).cos() + p.omega * t.cos();
    let scale = d.abs() + p.omega.abs() + p.gamma_c;
    out.into_iter()
        .filter(|&t| slope(t).abs() > 1e-7 * scale)
        .map(|t| BlochVector::new(t.cos(), t.sin(), 0.0))
        .collect()
}

/// Fixed points of the mean-field flow with their linear stability.
///
/// INDEPENDENT_XY: the paramagnet plus, for `|V| > γi/2`, the ferromagnetic pair.
/// Collective-decay models: the paramagnet whenever `Ω = 0`, the lower-hemisphere
/// point for `Ω ≤ Ωc`, and any equatorial fixed points (the centres of the
/// oscillatory phase). Models mixing both decay channels are rejected.
pub fn fixed_points(p: &ModelParams) -> Result<Vec<FixedPointReport>> {
    p.validate()?;
    let mut pts: Vec<BlochVector> = Vec::new();
    let push = |pts: &mut Vec<BlochVector>, s: BlochVector| {
        if pts.iter().all(|q| q.distance(s) > 1e-9) {
            pts.push(s);
        }
    };
    if p.gamma_i > 0.0 && p.gamma_c > 0.0 {
        return Err(invalid("mean-field fixed points need a single decay channel"));
    }
    if p.gamma_c == 0.0 {
        if p.omega != 0.0 || p.vy != -p.vx {
            return Err(invalid("independent-decay fixed points are available for the XY model only"));
        }
        push(&mut pts, BlochVector::SOUTH);
        let v = p.vx;
        let gi = p.gamma_i;
        if v.abs() > 0.5 * gi {
            let r = (gi * (2.0 * v.abs() - gi)).sqrt() / (2.0 * v);
            let z = -gi / (2.0 * v.abs());
            for s in [1.0, -1.0] {
                push(&mut pts, BlochVector::new(s * r, s * v.signum() * r, z));
            }
        }
    } else {
        if p.omega == 0.0 {
            push(&mut pts, BlochVector::SOUTH);
        }
        if let Some(s) = collective_fixed_point(p) {
            push(&mut pts, s);
        }
        for s in equator_fixed_points(p) {
            push(&mut pts, s);
        }
    }
    Ok(pts.into_iter().map(|s| report(p, s)).collect())
}

/// Sign pattern of `(X+Y, X−Y)`; orbits of the collective XY flow never leave one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Quadrant {
    pub sum_positive: bool,
    pub diff_positive: bool,
}

/// `log|C| = (2V/γc + 1)·log|X+Y| + (2V/γc − 1)·log|X−Y|` for the collective XY flow.
pub fn constant_of_motion(p: &ModelParams, s: BlochVector) -> Result<(f64, Quadrant)> {
    if p.model != Model::CollectiveXy {
        return Err(invalid("constant of motion exists for collective_xy only"));
    }
    if p.gamma_c <= 0.0 {
        return Err(invalid("gamma_c must be positive"));
    }
    let (sum, diff) = (s.x + s.y, s.x - s.y);
    let scale = s.x.abs().max(s.y.abs());
    if sum.abs() <= f64::EPSILON * scale || diff.abs() <= f64::EPSILON * scale || scale == 0.0 {
        return Err(Error::Degenerate("state lies on X = ±Y".into()));
    }
    let r = 2.0 * p.vx / p.gamma_c;
    let log_c = (r + 1.0) * sum.abs().ln() + (r - 1.0) * diff.abs().ln();
    Ok((log_c, Quadrant { sum_positive: sum > 0.0, diff_positive: diff > 0.0 }))
}

/// Trapezoidal time average after discarding the leading `discard` fraction of
/// the time span.
pub fn time_average(traj: &Trajectory, discard: f64) -> Result<BlochVector> {
    if !(0.0..1.0).contains(&discard) {
        return Err(invalid("discard fraction must be in [0, 1)"));
    }
    let (t_first, t_last) = match (traj.times.first(), traj.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(invalid("empty trajectory")),
    };
    let t_start = t_first + discard * (t_last - t_first);
    let span = t_last - t_start;
    if span <= 0.0 {
        // a single sample: nothing to average over
        if traj.times.len() == 1 {
            return Ok(traj.states[0]);
        }
        return Err(invalid("averaging window is empty"));
    }
    let lerp = |a: BlochVector, b: BlochVector, w: f64| {
        BlochVector::new(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), a.z + w * (b.z - a.z))
    };
    let mut acc = [0.0; 3];
    for k in 1..traj.times.len() {
        let (ta, tb) = (traj.times[k - 1], traj.times[k]);
        if tb <= t_start {
            continue;
        }
        let (mut a, b) = (traj.states[k - 1], traj.states[k]);
        let mut t0 = ta;
        if ta < t_start {
            a = lerp(a, b, (t_start - ta) / (tb - ta));
            t0 = t_start;
        }
        let dt = tb - t0;
        let (aa, bb) = (a.to_array(), b.to_array());
        for i in 0..3 {
            acc[i] += 0.5 * dt * (aa[i] + bb[i]);
        }
    }
    Ok(BlochVector::from_array(acc.map(|v| v / span)))
}

/// Mean period from upward crossings of `Z` through its time average, after
/// discarding the leading `discard` fraction. `None` with fewer than two crossings.
pub fn orbit_period(traj: &Trajectory, discard: f64) -> Option<f64> {
    let mean_z = time_average(traj, discard).ok()?.z;
    let t_start = traj.times.first()? + discard * (traj.times.last()? - traj.times.first()?);
    let mut crossings = Vec::new();
    for k in 1..traj.times.len() {
        if traj.times[k - 1] < t_start {
            continue;
        }
        let (za, zb) = (traj.states[k - 1].z - mean_z, traj.states[k].z - mean_z);
        if za < 0.0 && zb >= 0.0 {
            let w = -za / (zb - za);
            crossings.push(traj.times[k - 1] + w * (traj.times[k] - traj.times[k - 1]));
        }
    }
    (crossings.len() >= 2)
        .then(|| (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    /// `λ = −(γc/2)√(1 − 4Ω²/γc²)`
    pub lambda: f64,
    /// `τ = 1/|λ|`
    pub tau: f64,
    /// Numerical spectrum at the fixed point (tangent pair first).
    pub spectrum: [Complex64; 3],
}

/// Slowest relaxation rate of the driven model, closed form plus numerics.
pub fn relaxation(p: &ModelParams) -> Result<Relaxation> {
    p.validate()?;
    if p.model != Model::Driven {
        return Err(invalid("relaxation is defined for the driven model"));
    }
    let gc = p.gamma_c;
    if !(gc > 0.0) || p.omega.abs() >= 0.5 * gc {
        return Err(Error::NoStableFixedPoint(format!("Ω = {} ≥ γc/2 = {}", p.omega, 0.5 * gc)));
    }
    let root = (1.0 - 4.0 * p.omega * p.omega / (gc * gc)).sqrt();
    let lambda = -0.5 * gc * root;
    let point = collective_fixed_point(p).expect("fixed point exists below threshold");
    Ok(Relaxation { lambda, tau: 2.0 / (gc * root), spectrum: stability_spectrum(p, point) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: BlochVector, b: BlochVector, tol: f64) -> bool {
        a.distance(b) < tol
    }

    #[test]
    fn rhs_examples() {
        let zero = BlochVector::default();
        assert_eq!(rhs(&ModelParams::independent_xy(0.7, 1.0), BlochVector::SOUTH), zero);
        assert_eq!(rhs(&ModelParams::collective_xy(0.7, 1.0), BlochVector::SOUTH), zero);
        let om = 0.3;
        let s = BlochVector::new(0.0, 2.0 * om, -(1.0 - 4.0 * om * om).sqrt());
        assert!(rhs(&ModelParams::driven(2.0, om, 1.0), s).norm() < 1e-15);
    }

    #[test]
    fn independent_fm_points() {
        for v in [1.0, -1.0] {
            let fps = fixed_points(&ModelParams::independent_xy(v, 1.0)).unwrap();
            assert_eq!(fps.len(), 3);
            assert_eq!(fps[0].point, BlochVector::SOUTH);
            assert_eq!(fps[0].classification, Stability::Unstable);
            for (fp, s) in fps[1..].iter().zip([1.0, -1.0]) {
                let expect = BlochVector::new(s * 0.5 * v.signum(), s * 0.5, -0.5);
                assert!(close(fp.point, expect, 1e-12), "{:?}", fp.point);
                assert_eq!(fp.classification, Stability::Stable);
            }
        }
    }

    #[test]
    fn collective_centres() {
        let p = ModelParams::collective_xy(0.6, 1.0);
        let fps = fixed_points(&p).unwrap();
        assert_eq!(fps.len(), 5);
        assert_eq!(fps[0].classification, Stability::Unstable);
        for fp in &fps[1..] {
            assert_eq!(fp.classification, Stability::Center);
            assert!(fp.point.z.abs() < 1e-15);
            assert!((fp.point.x * fp.point.y - 1.0 / 2.4).abs() < 1e-12);
        }
        let below = fixed_points(&ModelParams::collective_xy(0.4, 1.0)).unwrap();
        assert_eq!(below.len(), 1);
        assert_eq!(below[0].classification, Stability::Stable);
        let pm = below[0].jacobian_eigenvalues;
        assert!((pm[0].re + 0.1).abs() < 1e-14 && (pm[1].re + 0.9).abs() < 1e-14);
    }

    #[test]
    fn pure_decay_has_only_south_pole() {
        let fps = fixed_points(&ModelParams::general(0.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(fps.len(), 1);
        assert_eq!(fps[0].point, BlochVector::SOUTH);
        assert_eq!(fps[0].classification, Stability::Stable);
    }

    #[test]
    fn critical_ties_are_marginal() {
        for p in [ModelParams::collective_xy(0.5, 1.0), ModelParams::independent_xy(-0.5, 1.0)] {
            let fps = fixed_points(&p).unwrap();
            assert_eq!(fps.len(), 1);
            assert_eq!(fps[0].classification, Stability::Marginal);
        }
    }

    #[test]
    fn critical_points() {
        for vx in [-3.0, 0.0, 0.4, 10.0] {
            assert_eq!(critical_point(&ModelParams::driven(vx, 0.1, 1.0)), 0.5);
        }
        assert_eq!(critical_point(&ModelParams::general(0.0, 0.0, 0.1, 1.0)), 0.5);
        assert!(critical_point(&ModelParams::general(0.5, -0.5, 0.0, 1.0)).abs() < 1e-16);
        assert_eq!(critical_point(&ModelParams::collective_xy(0.1, 2.0)), 1.0);
        assert_eq!(critical_point(&ModelParams::independent_xy(0.1, 3.0)), 1.5);
    }

    #[test]
    fn relaxation_values() {
        let r = relaxation(&ModelParams::driven(0.0, 0.0, 1.0)).unwrap();
        assert_eq!((r.lambda, r.tau), (-0.5, 2.0));
        let r = relaxation(&ModelParams::driven(1.0, 0.4, 1.0)).unwrap();
        assert!((r.tau - 2.0 / 0.6).abs() < 1e-12);
        let r2 = relaxation(&ModelParams::driven(7.0, 0.4, 1.0)).unwrap();
        assert!((r.tau - r2.tau).abs() < 1e-10);
        assert!(matches!(relaxation(&ModelParams::driven(0.0, 0.5, 1.0)), Err(Error::NoStableFixedPoint(_))));
    }

    #[test]
    fn relaxation_matches_spectrum() {
        for vx in [0.0, 0.3, 1.0, 5.0, -2.0] {
            for om in [0.0, 0.1, 0.3, 0.45, 0.49] {
                let r = relaxation(&ModelParams::driven(vx, om, 1.0)).unwrap();
                let slowest = r.spectrum[..2].iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
                assert!((slowest - r.lambda).abs() < 1e-9, "vx={vx} om={om}: {slowest} vs {}", r.lambda);
            }
        }
    }

    #[test]
    fn constant_of_motion_degenerate() {
        let p = ModelParams::collective_xy(0.6, 1.0);
        assert!(matches!(constant_of_motion(&p, BlochVector::new(0.3, 0.3, 0.9)), Err(Error::Degenerate(_))));
        assert!(constant_of_motion(&p, BlochVector::new(0.3, -0.1, 0.9)).is_ok());
    }

    #[test]
    fn constant_trajectory_at_fixed_point() {
        let p = ModelParams::driven(1.0, 0.3, 1.0);
        let s = collective_fixed_point(&p).unwrap();
        let traj = integrate(&p, s, 20.0, 1e-10).unwrap();
        assert!(traj.states.iter().all(|q| q.distance(s) < 1e-10));
        assert!(close(time_average(&traj, 0.2).unwrap(), s, 1e-10));
    }

    #[test]
    fn tol_range_enforced() {
        let p = ModelParams::collective_xy(0.6, 1.0);
        assert!(integrate(&p, BlochVector::SOUTH, 1.0, 1e-5).is_err());
        assert!(integrate(&p, BlochVector::SOUTH, 1.0, 1e-14).is_err());
    }

    #[test]
    fn pm_phase_converges_south() {
        let p = ModelParams::collective_xy(0.4, 1.0);
        let init = BlochVector::new(0.6, -0.3, (1.0f64 - 0.45).sqrt());
        let traj = integrate(&p, init, 200.0, 1e-10).unwrap();
        assert!(close(*traj.states.last().unwrap(), BlochVector::SOUTH, 1e-6));
    }

    #[test]
    fn model_round_trip() {
        for m in [Model::IndependentXy, Model::CollectiveXy, Model::Driven, Model::General] {
            assert_eq!(m.to_string().parse::<Model>().unwrap(), m);
        }
    }

    fn sphere_point(theta: f64, phi: f64) -> BlochVector {
        BlochVector::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    }

    proptest! {
        #[test]
        fn radial_identity(vx in -3.0..3.0f64, vy in -3.0..3.0f64, om in -2.0..2.0f64, gc in 0.0..2.0f64,
                           th in 0.0..std::f64::consts::PI, ph in -3.2..3.2f64) {
            let p = ModelParams::general(vx, vy, om, gc);
            let s = sphere_point(th, ph);
            let d = rhs(&p, s);
            let radial = s.x * d.x + s.y * d.y + s.z * d.z;
            prop_assert!(radial.abs() < 1e-13 * (1.0 + vx.abs() + vy.abs() + om.abs() + gc));
        }

        #[test]
        fn z2_equivariance(vx in -3.0..3.0f64, vy in -3.0..3.0f64, om in -2.0..2.0f64, gc in 0.0..2.0f64,
                           x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
            // Ω breaks (X,Y) → (−X,−Y) in the general model; the symmetry needs Ω = 0
            let _ = om;
            for p in [ModelParams::general(vx, vy, 0.0, gc), ModelParams::independent_xy(vx, gc)] {
                let a = rhs(&p, BlochVector::new(x, y, z));
                let b = rhs(&p, BlochVector::new(-x, -y, z));
                prop_assert!((a.x + b.x).abs() < 1e-14 && (a.y + b.y).abs() < 1e-14 && (a.z - b.z).abs() < 1e-14);
            }
        }

        #[test]
        fn collective_extra_symmetries(v in -3.0..3.0f64, gc in 0.0..2.0f64,
                                       x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
            let p = ModelParams::collective_xy(v, gc);
            let a = rhs(&p, BlochVector::new(x, y, z));
            let swap = rhs(&p, BlochVector::new(y, x, z));
            prop_assert!((a.x - swap.y).abs() < 1e-14 && (a.y - swap.x).abs() < 1e-14 && (a.z - swap.z).abs() < 1e-14);
            let anti = rhs(&p, BlochVector::new(-y, -x, z));
            prop_assert!((a.x + anti.y).abs() < 1e-14 && (a.y + anti.x).abs() < 1e-14 && (a.z - anti.z).abs() < 1e-14);
        }

        #[test]
        fn fixed_point_residuals(model in 0usize..4, a in -2.0..2.0f64, b in -2.0..2.0f64, om in 0.0..1.0f64) {
            let p = match model {
                0 => ModelParams::independent_xy(a, 1.0),
                1 => ModelParams::collective_xy(a, 1.0),
                2 => ModelParams::driven(a, om, 1.0),
                _ => ModelParams::general(a, b, om, 1.0),
            };
            for fp in fixed_points(&p).unwrap() {
                prop_assert!(rhs(&p, fp.point).norm() < 1e-12, "{:?} at {:?}", p, fp.point);
            }
        }

        #[test]
        fn fm_branch_formula(v in 0.5001..5.0f64, sign in prop::bool::ANY) {
            let v = if sign { v } else { -v };
            let fps = fixed_points(&ModelParams::independent_xy(v, 1.0)).unwrap();
            prop_assert_eq!(fps.len(), 3);
            let r = (2.0 * v.abs() - 1.0).sqrt() / (2.0 * v);
            let want = BlochVector::new(r, v.signum() * r, -1.0 / (2.0 * v.abs()));
            prop_assert!(close(fps[1].point, want, 1e-12));
        }
    }

    #[test]
    fn fm_branch_continuity() {
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let v = 0.5 + 10f64.powi(-k);
            let fps = fixed_points(&ModelParams::independent_xy(v, 1.0)).unwrap();
            let d = fps[1].point.distance(BlochVector::SOUTH);
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-3);
    }
}
