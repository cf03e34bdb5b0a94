//! Physical quantities from exact states: collective moments, the Wineland
//! squeezing parameter, spherical Wigner functions and Heisenberg-equation
//! residuals along trajectories.

use crate::collective_spin::{coupling_coefficient, spin_matrix, HalfInt, SpinKind};
use crate::error::{invalid, Error, Result};
use crate::lindblad::{BasisKind, DensityMatrix, StateTrajectory};
use crate::meanfield::{BlochVector, ModelParams};
use crate::numerics::sparse::Csr;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// First and symmetrized second moments of the collective spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub mean: [f64; 3],
    /// `½⟨{Jα, Jβ}⟩`
    pub second: [[f64; 3]; 3],
}

impl SpinMoments {
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let mut c = self.second;
        for (a, row) in c.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v -= self.mean[a] * self.mean[b];
            }
        }
        c
    }
}

fn full_ops(n: usize) -> [Csr<Complex64>; 3] {
    let dim = 1usize << n;
    let mut trip = Vec::new();
    for s in 0..dim {
        for site in 0..n {
            if s & (1 << site) == 0 {
                trip.push((s | (1 << site), s, Complex64::new(1.0, 0.0)));
            }
        }
    }
    let jp = Csr::from_triplets(dim, dim, trip);
    let jm = jp.transpose();
    let jx = jp.add_scaled(Complex64::new(0.5, 0.0), &jm, Complex64::new(0.5, 0.0));
    let jy = jp.add_scaled(Complex64::new(0.0, -0.5), &jm, Complex64::new(0.0, 0.5));
    let jz = Csr::from_triplets(
        dim,
        dim,
        (0..dim).map(|s| (s, s, Complex64::new(s.count_ones() as f64 - 0.5 * n as f64, 0.0))).collect(),
    );
    [jx, jy, jz]
}

/// `Jx, Jy, Jz` on block `k`.
fn block_ops(rho: &DensityMatrix, k: usize) -> [Csr<Complex64>; 3] {
    match rho.basis().blocks()[k].j {
        Some(j) => [SpinKind::Jx, SpinKind::Jy, SpinKind::Jz].map(|kind| spin_matrix(j, kind)),
        None => full_ops(rho.basis().n_atoms()),
    }
}

/// `Tr(ρ_k A)` for block `k`.
fn block_trace(rho: &DensityMatrix, k: usize, a: &Csr<Complex64>) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..a.nrows() {
        for (c, v) in a.row(r) {
            acc += v * rho.get(k, c, r);
        }
    }
    acc
}

pub fn spin_moments(rho: &DensityMatrix) -> SpinMoments {
    let mut mean = [0.0; 3];
    let mut second = [[0.0; 3]; 3];
    for k in 0..rho.basis().blocks().len() {
        let ops = block_ops(rho, k);
        for a in 0..3 {
            mean[a] += block_trace(rho, k, &ops[a]).re;
            for b in a..3 {
                let ab = block_trace(rho, k, &ops[a].matmul(&ops[b]));
                // ½⟨{A,B}⟩ = Re⟨AB⟩ for Hermitian A, B
                second[a][b] += ab.re;
            }
        }
    }
    for a in 0..3 {
        for b in 0..a {
            second[a][b] = second[b][a];
        }
    }
    SpinMoments { mean, second }
}

/// `⟨J⃗⟩/j` with `j = N/2`, plus the raw `⟨J⃗⟩`.
pub fn bloch_from_rho(rho: &DensityMatrix) -> (BlochVector, [f64; 3]) {
    let raw = spin_moments_first(rho);
    let j = 0.5 * rho.basis().n_atoms() as f64;
    (BlochVector::new(raw[0] / j, raw[1] / j, raw[2] / j), raw)
}

fn spin_moments_first(rho: &DensityMatrix) -> [f64; 3] {
    let mut mean = [0.0; 3];
    for k in 0..rho.basis().blocks().len() {
        let ops = block_ops(rho, k);
        for a in 0..3 {
            mean[a] += block_trace(rho, k, &ops[a]).re;
        }
    }
    mean
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub xi2: f64,
    /// `|⟨J⃗⟩|`
    pub bloch_length: f64,
    /// `⟨J⃗⟩`
    pub bloch: [f64; 3],
    /// Unit vector perpendicular to `⟨J⃗⟩` with the smallest variance.
    pub direction: [f64; 3],
    /// Eigenvalues of the transverse covariance, ascending.
    pub eigenvalues: [f64; 2],
    pub n_atoms: usize,
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Orthonormal pair perpendicular to `n`, from Gram–Schmidt on the Cartesian
/// axis least aligned with `n`.
pub fn transverse_frame(n: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let len = dot(n, n).sqrt();
    let u = [n[0] / len, n[1] / len, n[2] / len];
    let axis = (0..3).min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap();
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let p = dot(e, u);
    let mut e1 = [e[0] - p * u[0], e[1] - p * u[1], e[2] - p * u[2]];
    let l1 = dot(e1, e1).sqrt();
    e1.iter_mut().for_each(|v| *v /= l1);
    let e2 = [u[1] * e1[2] - u[2] * e1[1], u[2] * e1[0] - u[0] * e1[2], u[0] * e1[1] - u[1] * e1[0]];
    (e1, e2)
}

/// Squeezing from given moments; see [`xi2_from_rho`].
pub fn xi2_from_moments(m: &SpinMoments, n_atoms: usize) -> Result<SqueezingReport> {
    let len = dot(m.mean, m.mean).sqrt();
    if !(len > 1e-10 * n_atoms as f64) {
        return Err(Error::Degenerate(format!("|<J>| = {len:e}; squeezing is undefined")));
    }
    let (e1, e2) = transverse_frame(m.mean);
    let c = m.covariance();
    let quad = |u: [f64; 3], v: [f64; 3]| {
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += u[a] * c[a][b] * v[b];
            }
        }
        s
    };
    let (a, b, d) = (quad(e1, e1), quad(e1, e2), quad(e2, e2));
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let lo = mid - rad;
    // eigenvector of [[a, b], [b, d]] for `lo`
    let ang = 0.5 * (2.0 * b).atan2(a - d) + 0.5 * PI;
    let (ca, sa) = (ang.cos(), ang.sin());
    let direction = [ca * e1[0] + sa * e2[0], ca * e1[1] + sa * e2[1], ca * e1[2] + sa * e2[2]];
    let xi2 = (n_atoms as f64 * lo / (len * len)).max(0.0);
    Ok(SqueezingReport {
        xi2,
        bloch_length: len,
        bloch: m.mean,
        direction,
        eigenvalues: [lo, mid + rad],
        n_atoms,
    })
}

/// `ξ² = N·min(ΔJ⊥)²/|⟨J⃗⟩|²`, minimized over directions perpendicular to `⟨J⃗⟩`.
pub fn xi2_from_rho(rho: &DensityMatrix) -> Result<SqueezingReport> {
    xi2_from_moments(&spin_moments(rho), rho.basis().n_atoms())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WignerNormalization {
    /// The multipole sum itself.
    Raw,
    /// Rescaled so the maximum is 1.
    Plot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// `values[i][k]` at `(theta[i], phi[k])`.
    pub values: Vec<Vec<f64>>,
    pub normalization: WignerNormalization,
}

/// One local maximum of a Wigner grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub theta: f64,
    pub phi: f64,
    pub value: f64,
}

impl WignerGrid {
    /// `n_theta` points from 0 to π inclusive, `n_phi` points on [0, 2π).
    pub fn angles(n_theta: usize, n_phi: usize) -> (Vec<f64>, Vec<f64>) {
        let th = (0..n_theta).map(|i| PI * i as f64 / (n_theta.max(2) - 1) as f64).collect();
        let ph = (0..n_phi).map(|k| 2.0 * PI * k as f64 / n_phi as f64).collect();
        (th, ph)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn for_plot(&self) -> WignerGrid {
        let m = self.max();
        let values = self.values.iter().map(|r| r.iter().map(|v| v / m).collect()).collect();
        WignerGrid { values, normalization: WignerNormalization::Plot, ..self.clone() }
    }

    /// Grid points not smaller than any neighbour, largest first. φ wraps; each
    /// pole row counts as a single point.
    pub fn local_maxima(&self) -> Vec<Peak> {
        let (nt, np) = (self.theta.len(), self.phi.len());
        let at = |i: usize, k: usize| self.values[i][k % np];
        let mut peaks = Vec::new();
        for i in 0..nt {
            let pole = i == 0 || i + 1 == nt;
            if pole {
                let v = self.values[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let near = if i == 0 { 1.min(nt - 1) } else { nt.saturating_sub(2) };
                if self.values[near].iter().all(|&w| w <= v) {
                    peaks.push(Peak { theta: self.theta[i], phi: 0.0, value: v });
                }
                continue;
            }
            for k in 0..np {
                let v = at(i, k);
                let mut is_max = true;
                'scan: for di in [-1i64, 0, 1] {
                    for dk in [np - 1, 0, 1] {
                        if di == 0 && dk == 0 {
                            continue;
                        }
                        let ii = (i as i64 + di) as usize;
                        let w = if ii == 0 || ii + 1 == nt { self.values[ii][0] } else { at(ii, k + dk) };
                        if w > v {
                            is_max = false;
                            break 'scan;
                        }
                    }
                }
                if is_max {
                    peaks.push(Peak { theta: self.theta[i], phi: self.phi[k], value: v });
                }
            }
        }
        peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
        peaks
    }

    /// CSV with columns `theta,phi,w`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "theta,phi,w")?;
        for (i, row) in self.values.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                writeln!(w, "{},{},{}", self.theta[i], self.phi[k], v)?;
            }
        }
        Ok(())
    }

    /// One line per θ, whitespace-separated values over φ; `#` lines carry the axes.
    pub fn write_matrix(&self, w: &mut impl Write) -> Result<()> {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(w, "# normalization {:?}", self.normalization)?;
        writeln!(w, "# theta {}", join(&self.theta))?;
        writeln!(w, "# phi {}", join(&self.phi))?;
        for row in &self.values {
            writeln!(w, "{}", join(row))?;
        }
        Ok(())
    }
}

/// Normalized associated Legendre functions times the spherical-harmonic
/// prefactor, `p[k][q] = √((2k+1)/4π·(k−q)!/(k+q)!) P_k^q(x)` with the
/// Condon–Shortley phase, `0 ≤ q ≤ k ≤ kmax`.
fn legendre_table(kmax: usize, x: f64) -> Vec<Vec<f64>> {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut p = vec![Vec::new(); kmax + 1];
    for (k, row) in p.iter_mut().enumerate() {
        *row = vec![0.0; k + 1];
    }
    let mut diag = (0.25 / PI).sqrt();
    for q in 0..=kmax {
        if q > 0 {
            diag *= -((2 * q + 1) as f64 / (2 * q) as f64).sqrt() * s;
        }
        p[q][q] = diag;
        if q < kmax {
            p[q + 1][q] = ((2 * q + 3) as f64).sqrt() * x * diag;
        }
        for k in q + 2..=kmax {
            let kf = k as f64;
            let qf = q as f64;
            let a = ((4.0 * kf * kf - 1.0) / (kf * kf - qf * qf)).sqrt();
            let b = (((kf - 1.0) * (kf - 1.0) - qf * qf) / (4.0 * (kf - 1.0) * (kf - 1.0) - 1.0)).sqrt();
            p[k][q] = a * (x * p[k - 1][q] - b * p[k - 2][q]);
        }
    }
    p
}

/// Multipole coefficients `ρ_kq = Tr(T†_kq ρ)` with
/// `T_kq = √((2k+1)/(2j+1)) Σ ⟨j m'; k q | j m⟩ |j m⟩⟨j m'|`.
fn multipoles(rho: &DensityMatrix) -> Vec<Vec<Complex64>> {
    let n = rho.basis().n_atoms();
    let j = HalfInt(n as i32);
    let dim = n + 1;
    let mut out = Vec::with_capacity(2 * dim);
    for k in 0..dim {
        let kk = HalfInt::from_int(k as i32);
        let scale = ((2 * k + 1) as f64 / dim as f64).sqrt();
        let mut row = Vec::with_capacity(2 * k + 1);
        for q in -(k as i64)..=(k as i64) {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..dim {
                let b = a as i64 - q;
                if b < 0 || b >= dim as i64 {
                    continue;
                }
                let b = b as usize;
                let m = HalfInt(2 * a as i32 - n as i32);
                let mp = HalfInt(2 * b as i32 - n as i32);
                let cg = coupling_coefficient(j, mp, kk, HalfInt::from_int(q as i32), j, m);
                acc += rho.get(0, a, b) * (cg * scale);
            }
            row.push(acc);
        }
        out.push(row);
    }
    out
}

/// `W(θ,φ) = Σ_{k ≤ 2j} Σ_q ρ_kq Y_kq(θ,φ)` on the given angles.
pub fn wigner(rho: &DensityMatrix, theta: &[f64], phi: &[f64]) -> Result<WignerGrid> {
    if rho.basis().kind() != BasisKind::Dicke {
        return Err(invalid("the Wigner function needs a Dicke-basis state"));
    }
    let coeffs = multipoles(rho);
    let kmax = coeffs.len() - 1;
    let mut values = Vec::with_capacity(theta.len());
    let mut worst_im = 0.0f64;
    let mut scale = 0.0f64;
    for &th in theta {
        let leg = legendre_table(kmax, th.cos());
        let mut row = Vec::with_capacity(phi.len());
        for &ph in phi {
            let mut w = Complex64::new(0.0, 0.0);
            for (k, ck) in coeffs.iter().enumerate() {
                w += ck[k] * leg[k][0];
                for q in 1..=k {
                    let y = Complex64::from_polar(leg[k][q], q as f64 * ph);
                    // Y_{k,−q} = (−1)^q conj(Y_kq)
                    let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                    w += ck[k + q] * y + ck[k - q] * y.conj() * sign;
                }
            }
            worst_im = worst_im.max(w.im.abs());
            scale = scale.max(w.re.abs());
            row.push(w.re);
        }
        values.push(row);
    }
    if worst_im > 1e-6 * scale.max(1e-300) {
        return Err(Error::Consistency(format!("Wigner function has imaginary part {worst_im:e}")));
    }
    Ok(WignerGrid { theta: theta.to_vec(), phi: phi.to_vec(), values, normalization: WignerNormalization::Raw })
}

/// Finite-difference check of the collective Heisenberg equations along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentResiduals {
    /// Times where a centred stencil fits.
    pub times: Vec<f64>,
    /// `d⟨Jα⟩/dt` (finite difference) minus the exact right-hand side.
    pub residuals: Vec<[f64; 3]>,
    pub max_residual: f64,
    /// Set when the 4th- and 6th-order derivative estimates disagree by more
    /// than the residual scale, i.e. the sampling is too coarse to trust.
    pub aliasing: bool,
    pub stencil_disagreement: f64,
}

/// Exact right-hand sides of `d⟨Jα⟩/dt` under collective decay, from the
/// first and second moments.
pub fn moment_rhs(p: &ModelParams, n_atoms: usize, m: &SpinMoments) -> [f64; 3] {
    let nf = n_atoms as f64;
    let g = p.gamma_c / nf;
    let [jx, jy, jz] = m.mean;
    let anti = |a: usize, b: usize| 2.0 * m.second[a][b];
    [
        p.vy / nf * anti(1, 2) + 0.5 * g * (anti(0, 2) - jx),
        -p.vx / nf * anti(0, 2) - p.omega * jz + 0.5 * g * (anti(1, 2) - jy),
        (p.vx - p.vy) / nf * anti(0, 1) + p.omega * jy - g * (m.second[0][0] + m.second[1][1] + jz),
    ]
}

pub fn moment_residuals(traj: &StateTrajectory, params: &ModelParams) -> Result<MomentResiduals> {
    let Some(first) = traj.states.first() else {
        return Err(invalid("empty trajectory"));
    };
    if first.basis().kind() != BasisKind::Dicke || params.gamma_i != 0.0 {
        return Err(invalid("moment residuals are defined for collective decay on the Dicke manifold"));
    }
    let t = &traj.times;
    if t.len() < 7 {
        return Err(invalid("need at least 7 samples"));
    }
    let h = t[1] - t[0];
    if !(h > 0.0) || t.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
        return Err(invalid("samples must be evenly spaced"));
    }
    let n = first.basis().n_atoms();
    let moments: Vec<SpinMoments> = traj.states.iter().map(spin_moments).collect();
    let c6 = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let c4 = [0.0, 1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0, 0.0];
    let mut out = MomentResiduals {
        times: Vec::new(),
        residuals: Vec::new(),
        max_residual: 0.0,
        aliasing: false,
        stencil_disagreement: 0.0,
    };
    for i in 3..t.len() - 3 {
        let rhs = moment_rhs(params, n, &moments[i]);
        let mut res = [0.0; 3];
        for a in 0..3 {
            let (mut d6, mut d4) = (0.0, 0.0);
            for s in 0..7 {
                let v = moments[i + s - 3].mean[a];
                d6 += c6[s] * v;
                d4 += c4[s] * v;
            }
            d6 /= h;
            d4 /= h;
            res[a] = d6 - rhs[a];
            out.stencil_disagreement = out.stencil_disagreement.max((d6 - d4).abs());
            out.max_residual = out.max_residual.max(res[a].abs());
        }
        out.times.push(t[i]);
        out.residuals.push(res);
    }
    out.aliasing = out.stencil_disagreement > 1e-3 * (0.5 * n as f64).max(1.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::Basis;

    fn coherent_down(n: usize) -> DensityMatrix {
        DensityMatrix::all_down(Basis::dicke(n).unwrap())
    }

    #[test]
    fn coherent_state_basics() {
        let rho = coherent_down(10);
        let (b, raw) = bloch_from_rho(&rho);
        assert_eq!(b, BlochVector::new(0.0, 0.0, -1.0));
        assert_eq!(raw, [0.0, 0.0, -5.0]);
        let r = xi2_from_rho(&rho).unwrap();
        assert!((r.xi2 - 1.0).abs() < 1e-14);
        assert!(r.direction[2].abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(Basis::dicke(6).unwrap()).unwrap();
        let (b, _) = bloch_from_rho(&mixed);
        assert!(b.norm() < 1e-14);
        assert!(matches!(xi2_from_rho(&mixed), Err(Error::Degenerate(_))));
    }

    #[test]
    fn backends_give_same_moments() {
        let d = coherent_down(4);
        let p = DensityMatrix::all_down(Basis::perm(4).unwrap());
        let f = crate::lindblad::embed::to_full(&d).unwrap();
        let (md, mp, mf) = (spin_moments(&d), spin_moments(&p), spin_moments(&f));
        for a in 0..3 {
            assert!((md.mean[a] - mp.mean[a]).abs() < 1e-12 && (md.mean[a] - mf.mean[a]).abs() < 1e-12);
            for b in 0..3 {
                assert!((md.second[a][b] - mf.second[a][b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frame_is_orthonormal() {
        for n in [[0.0, 0.0, -1.0], [0.3, -0.2, 0.9], [1.0, 1.0, 1e-9]] {
            let (a, b) = transverse_frame(n);
            assert!(dot(a, n).abs() < 1e-12 && dot(b, n).abs() < 1e-12 && dot(a, b).abs() < 1e-12);
            assert!((dot(a, a) - 1.0).abs() < 1e-12 && (dot(b, b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn legendre_matches_low_orders() {
        let x = 0.3f64;
        let s = (1.0 - x * x).sqrt();
        let p = legendre_table(3, x);
        let c = |k: f64| ((2.0 * k + 1.0) / (4.0 * PI)).sqrt();
        assert!((p[1][0] - c(1.0) * x).abs() < 1e-15);
        assert!((p[1][1] + c(1.0) * (0.5f64).sqrt() * s).abs() < 1e-15);
        assert!((p[2][0] - c(2.0) * 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-15);
        // P_3^2 = 15 x (1 − x²), factor √(1/5!)
        assert!((p[3][2] - c(3.0) * (1.0f64 / 120.0).sqrt() * 15.0 * x * s * s).abs() < 1e-14);
    }

    #[test]
    fn coherent_wigner_peaks_at_south_pole() {
        let (th, ph) = WignerGrid::angles(37, 72);
        let w = wigner(&coherent_down(12), &th, &ph).unwrap();
        let peaks = w.local_maxima();
        assert!((peaks[0].theta - PI).abs() < 1e-12);
        let plot = w.for_plot();
        assert!((plot.max() - 1.0).abs() < 1e-15);
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 37 * 72 + 1);
    }
}
