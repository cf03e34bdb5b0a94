//! Maps Dicke and Perm states into the full `2^N` space, for comparison with
//! the brute-force backend.

use super::basis::{Basis, BasisKind};
use super::density::DensityMatrix;
use crate::collective_spin::{raising_element, HalfInt};
use crate::error::{invalid, Result};
use crate::numerics::sparse::Csr;
use num_complex::Complex64;

const C0: Complex64 = Complex64::new(0.0, 0.0);

fn raising(n: usize) -> Csr<Complex64> {
    let dim = 1usize << n;
    let mut trip = Vec::new();
    for s in 0..dim {
        for site in 0..n {
            if s & (1 << site) == 0 {
                trip.push((s | (1 << site), s, Complex64::new(1.0, 0.0)));
            }
        }
    }
    Csr::from_triplets(dim, dim, trip)
}

/// Column-major dense product `A · X` with sparse `A`.
fn apply_dense(a: &Csr<Complex64>, x: &[Complex64], dim: usize) -> Vec<Complex64> {
    let mut out = vec![C0; dim * dim];
    for c in 0..dim {
        a.mul_vec(&x[c * dim..(c + 1) * dim], &mut out[c * dim..(c + 1) * dim]);
    }
    out
}

pub fn to_full(rho: &DensityMatrix) -> Result<DensityMatrix> {
    match rho.basis().kind() {
        BasisKind::Full => Ok(rho.clone()),
        BasisKind::Dicke => dicke_to_full(rho),
        BasisKind::Perm => perm_to_full(rho),
    }
}

fn dicke_to_full(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let n = rho.basis().n_atoms();
    let full = Basis::full(n)?;
    let dim = 1usize << n;
    let norm: Vec<f64> = (0..=n)
        .map(|k| (-0.5 * crate::numerics::factorial::ln_binomial(n, k)).exp())
        .collect();
    let mut data = vec![C0; dim * dim];
    for t in 0..dim {
        let b = t.count_ones() as usize;
        for s in 0..dim {
            let a = s.count_ones() as usize;
            data[s + dim * t] = rho.get(0, a, b) * (norm[a] * norm[b]);
        }
    }
    DensityMatrix::new(full, data)
}

/// Block `j` of a Perm state becomes `Σ_{m,m'} (ρ̂_j)_{mm'}/d_j · E_j(m, m')`,
/// where `E_j(m, m')` sums `|j,m,α⟩⟨j,m',α|` over all copies `α`. For `m ≥ m'`
/// it is `J+^{m−m'}` applied to the projector onto spin `j` at `Jz = m'`,
/// divided by the ladder factors.
fn perm_to_full(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let basis = rho.basis();
    let n = basis.n_atoms();
    if n > 10 {
        return Err(invalid("embedding into the full space is limited to N ≤ 10"));
    }
    let full = Basis::full(n)?;
    let dim = 1usize << n;
    let jp = raising(n);
    let jm = jp.transpose();
    let jz2: Vec<f64> = (0..dim).map(|s| 2.0 * s.count_ones() as f64 - n as f64).collect();
    let jz_sq = Csr::from_triplets(
        dim,
        dim,
        (0..dim).map(|s| (s, s, Complex64::new(0.25 * jz2[s] * jz2[s] - 0.5 * jz2[s], 0.0))).collect(),
    );
    // J² = J+J− + Jz² − Jz
    let j_sq = jp.matmul(&jm).add_scaled(Complex64::new(1.0, 0.0), &jz_sq, Complex64::new(1.0, 0.0));
    let mut out = vec![C0; dim * dim];
    for (k, bl) in basis.blocks().iter().enumerate() {
        let j = bl.j.expect("perm blocks carry j");
        let cj = j.value() * (j.value() + 1.0);
        let mut proj = vec![C0; dim * dim];
        for s in 0..dim {
            proj[s + dim * s] = Complex64::new(1.0, 0.0);
        }
        for other in basis.blocks().iter().filter_map(|b| b.j).filter(|&o| o != j) {
            let co = other.value() * (other.value() + 1.0);
            let applied = apply_dense(&j_sq, &proj, dim);
            for (p, q) in proj.iter_mut().zip(applied) {
                *p = (q - *p * co) / (cj - co);
            }
        }
        let w = 1.0 / bl.degeneracy();
        for b in 0..bl.dim {
            let mb2 = bl.m2(b, n);
            let mut cur = proj.clone();
            for (c, col) in cur.chunks_mut(dim).enumerate() {
                if 2 * c.count_ones() as i32 - n as i32 != mb2 {
                    col.fill(C0);
                }
            }
            for a in b..bl.dim {
                if a > b {
                    let ladder = raising_element(j, HalfInt(bl.m2(a - 1, n)));
                    cur = apply_dense(&jp, &cur, dim);
                    cur.iter_mut().for_each(|z| *z /= ladder);
                }
                let (vab, vba) = (rho.get(k, a, b) * w, rho.get(k, b, a) * w);
                for c in 0..dim {
                    for r in 0..dim {
                        let e = cur[r + dim * c];
                        if e != C0 {
                            out[r + dim * c] += vab * e;
                            if a != b {
                                out[c + dim * r] += vba * e.conj();
                            }
                        }
                    }
                }
            }
        }
    }
    DensityMatrix::new(full, out)
}
