use super::basis::BasisKind;
use super::density::DensityMatrix;
use super::liouvillian::Liouvillian;
use crate::collective_spin::{raising_element, HalfInt};
use crate::error::{invalid, Error, Result};
use crate::meanfield::ModelParams;
use crate::numerics::nested::{self, SolveStats};
use crate::numerics::ode::{integrate, Control, OdeOptions};
use crate::numerics::sparse::Csr;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    /// Integrate from all spins down until `‖L[ρ]‖_F` drops below the target.
    TimeMarch,
    /// Solve `L[ρ] = 0` directly with one population pinned.
    NullSpace,
    /// Closed-form state for drive plus collective decay without interactions.
    Exact,
    /// `Exact` when it applies, `NullSpace` for small states, else `TimeMarch`.
    #[default]
    Auto,
}

impl fmt::Display for SteadyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SteadyMethod::TimeMarch => "time_march",
            SteadyMethod::NullSpace => "null_space",
            SteadyMethod::Exact => "exact",
            SteadyMethod::Auto => "auto",
        })
    }
}

impl FromStr for SteadyMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "time_march" | "march" => Ok(SteadyMethod::TimeMarch),
            "null_space" | "nullspace" => Ok(SteadyMethod::NullSpace),
            "exact" => Ok(SteadyMethod::Exact),
            "auto" => Ok(SteadyMethod::Auto),
            other => Err(invalid(format!("unknown steady-state method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    pub method: SteadyMethod,
    /// Target for `‖L[ρ]‖_F` when marching.
    pub residual_tol: f64,
    /// Time cap for marching; `None` uses [`default_time_cap`].
    pub t_max: Option<f64>,
    /// Relative tolerance of the integrator.
    pub ode_tol: f64,
    /// Largest state (complex entries) handed to the direct solver under `Auto`.
    pub null_space_max_len: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            method: SteadyMethod::Auto,
            residual_tol: 1e-9,
            t_max: None,
            ode_tol: 1e-10,
            null_space_max_len: 1_100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// Method actually used (never `Auto`).
    pub method: SteadyMethod,
    /// `‖L[ρ]‖_F` of the returned state.
    pub residual: f64,
    /// Integration time used by the march.
    pub t_reached: Option<f64>,
    pub initial_state: &'static str,
    pub solver: Option<SolveStats>,
}

/// Relaxation time of the mean-field flow where it has a closed form.
fn relaxation_time(p: &ModelParams) -> Option<f64> {
    let gc = p.gamma_c;
    if p.gamma_i != 0.0 || !(gc > 0.0) {
        return None;
    }
    if p.vy == 0.0 && p.omega.abs() < 0.5 * gc {
        return Some(2.0 / (gc * (1.0 - 4.0 * p.omega * p.omega / (gc * gc)).sqrt()));
    }
    if p.omega == 0.0 && p.vy == -p.vx && p.vx.abs() < 0.5 * gc {
        return Some(1.0 / (0.5 * gc - p.vx.abs()));
    }
    None
}

/// `50·τ` when the mean-field relaxation time is finite, else `500/γ`.
pub fn default_time_cap(p: &ModelParams) -> f64 {
    match relaxation_time(p) {
        Some(tau) => 50.0 * tau,
        None => 500.0 / p.gamma_c.max(p.gamma_i).max(f64::MIN_POSITIVE),
    }
}

fn exact_applies(liou: &Liouvillian) -> bool {
    let p = liou.params();
    liou.basis().kind() == BasisKind::Dicke && p.vx == 0.0 && p.vy == 0.0 && p.gamma_i == 0.0 && p.gamma_c > 0.0
}

pub fn steady_state(liou: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyState> {
    if !(opts.residual_tol > 0.0) {
        return Err(invalid("residual_tol must be positive"));
    }
    let method = match opts.method {
        SteadyMethod::Auto if exact_applies(liou) => SteadyMethod::Exact,
        SteadyMethod::Auto => {
            let direct_ok = match liou.basis().kind() {
                BasisKind::Full => liou.basis().len() <= 1024,
                BasisKind::Dicke => liou.basis().len() <= opts.null_space_max_len,
                // fronts grow faster on the three-dimensional Perm lattice
                BasisKind::Perm => liou.basis().len() * 5 / 2 <= opts.null_space_max_len,
            };
            if direct_ok {
                SteadyMethod::NullSpace
            } else {
                SteadyMethod::TimeMarch
            }
        }
        m => m,
    };
    match method {
        SteadyMethod::Exact => exact(liou),
        SteadyMethod::NullSpace => {
            let ss = null_space(liou)?;
            if ss.residual <= opts.residual_tol {
                Ok(ss)
            } else if opts.method == SteadyMethod::Auto {
                time_march(liou, opts)
            } else {
                Err(Error::Singular(format!("direct solve left residual {:e}", ss.residual)))
            }
        }
        SteadyMethod::TimeMarch => time_march(liou, opts),
        SteadyMethod::Auto => unreachable!(),
    }
}

fn finish(liou: &Liouvillian, mut rho: DensityMatrix, method: SteadyMethod) -> Result<SteadyState> {
    rho.symmetrize();
    rho.normalize()?;
    let residual = liou.residual_norm(rho.data());
    Ok(SteadyState { rho, method, residual, t_reached: None, initial_state: "none", solver: None })
}

/// `ρ ∝ T T†` with `T = Σ_k (J−/β)^k`, `β = −iΩN/γc`, the steady state of a
/// drive plus collective decay. Built in log space since the entries span
/// hundreds of decades at large N.
fn exact(liou: &Liouvillian) -> Result<SteadyState> {
    if !exact_applies(liou) {
        return Err(invalid("the exact state needs a Dicke basis with vx = vy = gamma_i = 0"));
    }
    let p = liou.params();
    let n = liou.basis().n_atoms();
    let dim = n + 1;
    let basis = liou.basis().clone();
    let mut rho = DensityMatrix::zeros(basis.clone());
    if p.omega == 0.0 {
        rho.data_mut()[basis.index(0, 0, 0)] = Complex64::new(1.0, 0.0);
        return finish(liou, rho, SteadyMethod::Exact);
    }
    let beta = Complex64::new(0.0, -p.omega * n as f64 / p.gamma_c);
    let (ln_b, arg_b) = (beta.norm().ln(), beta.arg());
    let j = HalfInt(n as i32);
    // ln P_a, P_a = Π_{c<a} ⟨c|J−|c+1⟩
    let mut ln_p = vec![0.0f64; dim];
    for a in 1..dim {
        let m = HalfInt(2 * (a as i32 - 1) - n as i32);
        ln_p[a] = ln_p[a - 1] + raising_element(j, m).ln();
    }
    // ln S_c = ln Σ_{b ≥ c} P_b² |β|^{−2b}
    let mut ln_s = vec![f64::NEG_INFINITY; dim + 1];
    for b in (0..dim).rev() {
        let w = 2.0 * ln_p[b] - 2.0 * b as f64 * ln_b;
        let (hi, lo) = if w > ln_s[b + 1] { (w, ln_s[b + 1]) } else { (ln_s[b + 1], w) };
        ln_s[b] = hi + (lo - hi).exp().ln_1p();
    }
    let ln_amp = |a: usize| a as f64 * ln_b - ln_p[a];
    let shift = (0..dim).map(|a| 2.0 * ln_amp(a) + ln_s[a]).fold(f64::NEG_INFINITY, f64::max);
    for b in 0..dim {
        for a in 0..dim {
            let l = ln_amp(a) + ln_amp(b) + ln_s[a.max(b)] - shift;
            if l > -745.0 {
                let phase = arg_b * (a as f64 - b as f64);
                rho.data_mut()[basis.index(0, a, b)] = Complex64::from_polar(l.exp(), phase);
            }
        }
    }
    finish(liou, rho, SteadyMethod::Exact)
}

fn time_march(liou: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyState> {
    let t_max = opts.t_max.unwrap_or_else(|| default_time_cap(liou.params()));
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid("t_max must be positive and finite"));
    }
    let rho0 = DensityMatrix::all_down(liou.basis().clone());
    let checks = 500usize;
    let stops: Vec<f64> = (1..=checks).map(|k| t_max * k as f64 / checks as f64).collect();
    let ode = OdeOptions { rtol: opts.ode_tol, atol: opts.ode_tol * 1e-2, ..OdeOptions::default() };
    let mut buf = vec![Complex64::new(0.0, 0.0); rho0.data().len()];
    let mut next = 0usize;
    let mut found: Option<(f64, Vec<Complex64>, f64)> = None;
    let mut last = (0.0, f64::INFINITY);
    integrate(
        |_, y, dy| liou.apply(y, dy),
        0.0,
        rho0.data(),
        t_max,
        &stops,
        &ode,
        |t, y| {
            if next < stops.len() && (t - stops[next]).abs() <= 1e-12 * t_max.max(1.0) {
                next += 1;
                liou.apply(y, &mut buf);
                let res = buf.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                last = (t, res);
                if res < opts.residual_tol {
                    found = Some((t, y.to_vec(), res));
                    return Control::Stop;
                }
            }
            Control::Continue
        },
    )?;
    let Some((t, data, _)) = found else {
        return Err(Error::NotConverged { t_reached: last.0, residual: last.1 });
    };
    let rho = DensityMatrix::new(liou.basis().clone(), data)?;
    let mut out = finish(liou, rho, SteadyMethod::TimeMarch)?;
    out.t_reached = Some(t);
    out.initial_state = "all_down";
    Ok(out)
}

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn find(&mut self, mut a: u32) -> u32 {
        while self.0[a as usize] != a {
            let up = self.0[self.0[a as usize] as usize];
            self.0[a as usize] = up;
            a = up;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

const NONE: u32 = u32::MAX;

/// Real unknowns of a Hermitian state: `x_ab = Re ρ_ab` for `a ≤ b` and
/// `y_ab = Im ρ_ab` for `a < b`, with the equations `Re L[ρ]_ab`, `Im L[ρ]_ab`
/// attached to the same slots.
struct RealLayout {
    x: Vec<u32>,
    y: Vec<u32>,
    coords: Vec<[i32; 3]>,
    /// Flat index and real/imaginary flag of each slot.
    origin: Vec<(usize, bool)>,
}

impl RealLayout {
    fn new(liou: &Liouvillian) -> Self {
        let basis = liou.basis();
        let n = basis.n_atoms() as i32;
        let mut x = vec![NONE; basis.len()];
        let mut y = vec![NONE; basis.len()];
        let mut coords = Vec::new();
        let mut origin = Vec::new();
        for (k, bl) in basis.blocks().iter().enumerate() {
            for b in 0..bl.dim {
                for a in 0..=b {
                    let flat = basis.index(k, a, b);
                    let c = match bl.j {
                        Some(j) if basis.kind() == BasisKind::Perm => {
                            [j.twice(), bl.m2(a, basis.n_atoms()) + n, bl.m2(b, basis.n_atoms()) + n]
                        }
                        _ => [a as i32, b as i32, 0],
                    };
                    x[flat] = origin.len() as u32;
                    origin.push((flat, false));
                    coords.push(c);
                    if a < b {
                        y[flat] = origin.len() as u32;
                        origin.push((flat, true));
                        coords.push(c);
                    }
                }
            }
        }
        RealLayout { x, y, coords, origin }
    }

    /// `(x slot, y slot, conjugated)` of the complex entry at `(k, c, d)`.
    fn slots(&self, liou: &Liouvillian, flat: usize) -> (u32, u32, bool) {
        let (k, c, d) = liou.basis().locate(flat);
        if c <= d {
            (self.x[flat], self.y[flat], false)
        } else {
            let t = liou.basis().index(k, d, c);
            (self.x[t], self.y[t], true)
        }
    }

    /// Real entries of equation slot `e`.
    fn equation(&self, liou: &Liouvillian, e: usize, buf: &mut Vec<(usize, Complex64)>, out: &mut Vec<(u32, f64)>) {
        out.clear();
        let (flat, imag) = self.origin[e];
        liou.row(flat, buf);
        for &(col, l) in buf.iter() {
            let (xs, ys, conj) = self.slots(liou, col);
            let (al, be) = (l.re, l.im);
            // ℓ (x ± i y)
            let sy = if conj { -1.0 } else { 1.0 };
            if imag {
                out.push((xs, be));
                if ys != NONE {
                    out.push((ys, sy * al));
                }
            } else {
                out.push((xs, al));
                if ys != NONE {
                    out.push((ys, -sy * be));
                }
            }
        }
        out.retain(|&(_, v)| v != 0.0);
    }
}

fn null_space(liou: &Liouvillian) -> Result<SteadyState> {
    let basis = liou.basis();
    if basis.kind() == BasisKind::Full && basis.len() > 4096 {
        return Err(Error::TooLarge("direct steady-state solve in the full space needs N ≤ 6".into()));
    }
    let layout = RealLayout::new(liou);
    let ns = layout.origin.len();
    let mut uf = UnionFind((0..ns as u32).collect());
    let mut buf = Vec::new();
    let mut eq = Vec::new();
    for e in 0..ns {
        layout.equation(liou, e, &mut buf, &mut eq);
        for &(s, _) in &eq {
            uf.union(e as u32, s);
        }
    }
    let diag: Vec<u32> = basis
        .blocks()
        .iter()
        .enumerate()
        .flat_map(|(k, bl)| (0..bl.dim).map(move |a| (k, a)))
        .map(|(k, a)| layout.x[basis.index(k, a, a)])
        .collect();
    let mut keep_root = vec![false; ns];
    for &d in &diag {
        let r = uf.find(d);
        keep_root[r as usize] = true;
    }
    let kept: Vec<u32> = (0..ns as u32).filter(|&s| keep_root[uf.find(s) as usize]).collect();

    let solve_pinned = |pin: u32| -> Result<(Vec<f64>, SolveStats)> {
        let mut local = vec![NONE; ns];
        let mut coords = Vec::with_capacity(kept.len());
        for &s in kept.iter().filter(|&&s| s != pin) {
            local[s as usize] = coords.len() as u32;
            coords.push(layout.coords[s as usize]);
        }
        let nk = coords.len();
        let mut rhs = vec![0.0; nk];
        let mut buf = Vec::new();
        let mut eq = Vec::new();
        let order: Vec<u32> = kept.iter().copied().filter(|&s| s != pin).collect();
        let a = Csr::from_rows(nk, nk, |r, out| {
            layout.equation(liou, order[r] as usize, &mut buf, &mut eq);
            for &(s, v) in &eq {
                if s == pin {
                    rhs[r] -= v;
                } else {
                    out.push((local[s as usize] as usize, v));
                }
            }
        });
        let (z, stats) = nested::solve(&a, &coords, &rhs)?;
        let mut full = vec![0.0; ns];
        full[pin as usize] = 1.0;
        for (r, &s) in order.iter().enumerate() {
            full[s as usize] = z[r];
        }
        Ok((full, stats))
    };

    let mut pin = diag[0];
    let (mut sol, mut stats) = solve_pinned(pin)?;
    let biggest = *diag.iter().max_by(|&&a, &&b| sol[a as usize].abs().total_cmp(&sol[b as usize].abs())).unwrap();
    if sol[biggest as usize].abs() * 1e-8 > 1.0 {
        pin = biggest;
        (sol, stats) = solve_pinned(pin)?;
    }
    let mut data = vec![Complex64::new(0.0, 0.0); basis.len()];
    for (s, &(flat, imag)) in layout.origin.iter().enumerate() {
        let v = sol[s];
        let (k, a, b) = basis.locate(flat);
        let t = basis.index(k, b, a);
        if imag {
            data[flat].im = v;
            data[t].im = -v;
        } else {
            data[flat].re = v;
            data[t].re = v;
        }
    }
    let rho = DensityMatrix::new(basis.clone(), data)?;
    let mut out = finish(liou, rho, SteadyMethod::NullSpace)?;
    out.solver = Some(stats);
    Ok(out)
}
