//! Large-N Gaussian fluctuations about the collective-decay steady state.
//!
//! The spin is rotated so that `z'` points along the mean-field Bloch vector,
//! fluctuations are written as a Holstein–Primakoff boson `a`, and the
//! quadratic master equation is solved for `⟨a²⟩` and `⟨a†a⟩`.

use crate::error::{invalid, Error, Result};
use crate::meanfield::{collective_fixed_point, critical_omega, Model, ModelParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyAngles {
    pub theta: f64,
    pub phi: f64,
}

impl SteadyAngles {
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoeffs {
    pub b1: Complex64,
    pub b2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondMoments {
    /// `⟨a²⟩`; `⟨a†²⟩` is its conjugate.
    pub a_sq: Complex64,
    /// `⟨a†a⟩`
    pub n_occ: f64,
}

impl SecondMoments {
    /// `|⟨a²⟩|² ≤ n(n+1)`, with slack.
    pub fn is_physical(&self) -> bool {
        self.n_occ >= -1e-12 && self.a_sq.norm_sqr() <= self.n_occ * (self.n_occ + 1.0) + 1e-9
    }
}

/// Rotated-frame spin moments per atom: `⟨J'x²⟩/N`, `⟨J'y²⟩/N`, `⟨{J'x,J'y}⟩/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatedSpinMoments {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

fn check_collective(p: &ModelParams) -> Result<()> {
    p.validate()?;
    if p.model == Model::IndependentXy || p.gamma_i != 0.0 {
        return Err(invalid("the fluctuation expansion needs collective decay only; use xi2_closed_form"));
    }
    if !(p.gamma_c > 0.0) {
        return Err(invalid("gamma_c must be positive"));
    }
    Ok(())
}

/// Polar angles of the stable mean-field fixed point.
pub fn steady_angles(p: &ModelParams) -> Result<SteadyAngles> {
    check_collective(p)?;
    let omega_c = critical_omega(p);
    if !(p.omega.abs() < omega_c) {
        return Err(Error::NoStableFixedPoint(format!("Ω = {} is not below Ωc = {omega_c}", p.omega)));
    }
    let s = collective_fixed_point(p).expect("fixed point exists below Ωc");
    let theta = s.z.clamp(-1.0, 1.0).acos();
    let phi = if s.x == 0.0 && s.y == 0.0 {
        0.0
    } else {
        let a = s.y.atan2(s.x);
        if a <= -std::f64::consts::PI {
            std::f64::consts::PI
        } else {
            a
        }
    };
    Ok(SteadyAngles { theta, phi })
}

/// `b1`, `b2` of the quadratic Hamiltonian `b1 a² + b1* a†² + b2 a†a`.
pub fn quad_coeffs(p: &ModelParams, a: &SteadyAngles) -> QuadraticCoeffs {
    let (st, ct) = a.theta.sin_cos();
    let (sp, cp) = a.phi.sin_cos();
    let i = Complex64::i();
    let u = Complex64::new(ct * cp, 0.0) + i * sp;
    let w = Complex64::new(cp, 0.0) + i * (ct * sp);
    let b1 = (-2.0 * i * a.phi).exp() / 4.0 * (p.vx * u * u - p.vy * w * w);
    let sum = p.vx + p.vy;
    let b2 = (sum + 3.0 * sum * (2.0 * a.theta).cos() - 8.0 * p.omega * st * cp
        + 6.0 * (p.vy - p.vx) * st * st * (2.0 * a.phi).cos())
        / 8.0;
    QuadraticCoeffs { b1, b2 }
}

/// Gaussian elimination with partial pivoting; also returns the 1-norm
/// condition number.
fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<([f64; 3], f64)> {
    let mut lu = a;
    let mut perm = [0usize, 1, 2];
    for k in 0..3 {
        let piv = (k..3).max_by(|&r, &s| lu[r][k].abs().partial_cmp(&lu[s][k].abs()).unwrap())?;
        if lu[piv][k] == 0.0 {
            return None;
        }
        lu.swap(k, piv);
        perm.swap(k, piv);
        for r in k + 1..3 {
            let f = lu[r][k] / lu[k][k];
            lu[r][k] = f;
            for c in k + 1..3 {
                lu[r][c] -= f * lu[k][c];
            }
        }
    }
    let apply = |rhs: [f64; 3]| {
        let mut y = [rhs[perm[0]], rhs[perm[1]], rhs[perm[2]]];
        for r in 0..3 {
            for c in 0..r {
                y[r] -= lu[r][c] * y[c];
            }
        }
        for r in (0..3).rev() {
            for c in r + 1..3 {
                y[r] -= lu[r][c] * y[c];
            }
            y[r] /= lu[r][r];
        }
        y
    };
    let norm1 = |m: &dyn Fn(usize, usize) -> f64| {
        (0..3).map(|c| (0..3).map(|r| m(r, c).abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    let inv_cols = [apply([1.0, 0.0, 0.0]), apply([0.0, 1.0, 0.0]), apply([0.0, 0.0, 1.0])];
    let cond = norm1(&|r, c| a[r][c]) * norm1(&|r, c| inv_cols[c][r]);
    Some((apply(b), cond))
}

/// Steady `⟨a²⟩`, `⟨a†a⟩` from the moment equations with zero left-hand side.
pub fn moment_steady_state(p: &ModelParams) -> Result<SecondMoments> {
    let ang = steady_angles(p)?;
    let QuadraticCoeffs { b1, b2 } = quad_coeffs(p, &ang);
    let gc = p.gamma_c;
    let (q_re, q_im) = (b1.re, b1.im);
    let c = gc * ang.theta.cos();
    let s = 0.25 * gc * ang.theta.sin().powi(2);
    let cos4 = (0.5 * ang.theta).cos().powi(4);
    // unknowns (Re⟨a²⟩, Im⟨a²⟩, ⟨a†a⟩)
    let a = [
        [c, 2.0 * b2, -4.0 * q_im],
        [-2.0 * b2, c, -4.0 * q_re],
        [-4.0 * q_im, -4.0 * q_re, c],
    ];
    let rhs = [
        2.0 * q_im - s * (2.0 * ang.phi).cos(),
        2.0 * q_re - s * (2.0 * ang.phi).sin(),
        -gc * cos4,
    ];
    let (x, cond) = solve3(a, rhs).ok_or_else(|| Error::CriticalDivergence("singular moment system".into()))?;
    if !(cond < 1e12) {
        return Err(Error::CriticalDivergence(format!("moment system condition number {cond:e}")));
    }
    let m = SecondMoments { a_sq: Complex64::new(x[0], x[1]), n_occ: x[2] };
    if m.n_occ < -1e-12 {
        return Err(Error::CriticalDivergence(format!("negative occupation {}", m.n_occ)));
    }
    Ok(m)
}

/// Boson moments to rotated spin moments (per atom, leading order in N).
pub fn rotated_spin_moments(m: &SecondMoments) -> RotatedSpinMoments {
    let two_re = 2.0 * m.a_sq.re;
    RotatedSpinMoments {
        xx: 0.25 * (two_re + 2.0 * m.n_occ + 1.0),
        yy: -0.25 * (two_re - 2.0 * m.n_occ - 1.0),
        // −(i/2)(⟨a²⟩ − ⟨a†²⟩) = Im⟨a²⟩
        xy: m.a_sq.im,
    }
}

/// `ξ² = [⟨J'x² + J'y²⟩ − √(⟨J'x² − J'y²⟩² + ⟨{J'x,J'y}⟩²)] / (N/2)` for a
/// maximal-length mean spin along `z'`.
pub fn xi2_from_rotated(s: &RotatedSpinMoments) -> f64 {
    let d = s.xx - s.yy;
    2.0 * ((s.xx + s.yy) - (d * d + s.xy * s.xy).sqrt())
}

/// Large-N steady-state squeezing parameter from the Gaussian theory.
pub fn xi2_analytic(p: &ModelParams) -> Result<f64> {
    let m = moment_steady_state(p)?;
    Ok(xi2_from_rotated(&rotated_spin_moments(&m)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// `γ/(γ + 2|V|)` in the paramagnet, either decay type.
    Paramagnet,
    /// Driven model, any `Vx`.
    Driven,
    /// Driven model at `Vx = 0`: `√(1 − 4Ω²/γc²)`.
    DrivenNoInteraction,
    /// Driven model as `Vx → ∞`: half the `Vx = 0` value.
    DrivenStrongInteraction,
}

pub fn xi2_closed_form(variant: ClosedForm, p: &ModelParams) -> Result<f64> {
    match variant {
        ClosedForm::Paramagnet => {
            let g = p.gamma();
            let v = p.vx.abs();
            if !(g > 0.0) || v > 0.5 * g {
                return Err(Error::Domain(format!("paramagnet needs |V| ≤ γ/2 (|V| = {v}, γ = {g})")));
            }
            Ok(g / (g + 2.0 * v))
        }
        ClosedForm::Driven | ClosedForm::DrivenNoInteraction | ClosedForm::DrivenStrongInteraction => {
            let gc = p.gamma_c;
            let om = p.omega;
            if !(gc > 0.0) || om.abs() >= 0.5 * gc {
                return Err(Error::Domain(format!("driven forms need Ω < γc/2 (Ω = {om}, γc = {gc})")));
            }
            let root = (1.0 - 4.0 * om * om / (gc * gc)).sqrt();
            Ok(match variant {
                ClosedForm::DrivenNoInteraction => root,
                ClosedForm::DrivenStrongInteraction => 0.5 * root,
                _ => {
                    let vx = p.vx;
                    let r = (gc * gc * vx * vx / 4.0 + vx.powi(4) / 4.0 + om.powi(4)).sqrt();
                    (gc * gc + vx * vx - 2.0 * om * om - 2.0 * r) / (gc * (gc * gc - 4.0 * om * om).sqrt())
                }
            })
        }
    }
}
