//! Collective angular momentum: Dicke basis, spin matrices, Clebsch–Gordan coefficients.

use crate::error::{invalid, Result};
use crate::numerics::factorial::ln_factorial;
use crate::numerics::sparse::Csr;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Half-integer stored as twice its value, so `HalfInt(3)` is 3/2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInt(pub i32);

impl HalfInt {
    pub const fn from_doubled(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(n: i32) -> Self {
        HalfInt(2 * n)
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// The symmetric (j = N/2) manifold of `n_atoms` spin-1/2 atoms.
/// Index `k` holds `m = -j + k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DickeBasis {
    n_atoms: usize,
}

impl DickeBasis {
    pub fn new(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("n_atoms must be at least 1"));
        }
        if n_atoms > i32::MAX as usize / 2 {
            return Err(invalid("n_atoms too large"));
        }
        Ok(DickeBasis { n_atoms })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn j(&self) -> HalfInt {
        HalfInt(self.n_atoms as i32)
    }

    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    pub fn m(&self, index: usize) -> HalfInt {
        assert!(index < self.dim());
        HalfInt(2 * index as i32 - self.n_atoms as i32)
    }

    pub fn index_of(&self, m: HalfInt) -> Option<usize> {
        let k = m.0 + self.n_atoms as i32;
        (k >= 0 && k % 2 == 0 && (k / 2) as usize <= self.n_atoms).then(|| (k / 2) as usize)
    }

    pub fn m_values(&self) -> impl Iterator<Item = HalfInt> + '_ {
        (0..self.dim()).map(|k| self.m(k))
    }
}

/// Same as [`DickeBasis::new`].
pub fn build_basis(n_atoms: usize) -> Result<DickeBasis> {
    DickeBasis::new(n_atoms)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpinKind {
    Jx,
    Jy,
    Jz,
    Plus,
    Minus,
}

/// `⟨j, m+1| J+ |j, m⟩ = √(j(j+1) − m(m+1))`.
pub fn raising_element(j: HalfInt, m: HalfInt) -> f64 {
    let (j2, m2) = (j.0 as f64, m.0 as f64);
    // 4(j(j+1) - m(m+1)) = (j2 - m2)(j2 + m2 + 2)
    (((j2 - m2) * (j2 + m2 + 2.0)).max(0.0)).sqrt() * 0.5
}

/// Sparse spin matrix for spin `j` in the ascending-m basis of dimension `2j+1`.
pub fn spin_matrix(j: HalfInt, kind: SpinKind) -> Csr<Complex64> {
    let dim = (j.0 + 1) as usize;
    let m_of = |k: usize| HalfInt(2 * k as i32 - j.0);
    let mut trip = Vec::with_capacity(2 * dim);
    match kind {
        SpinKind::Jz => {
            for k in 0..dim {
                trip.push((k, k, Complex64::new(m_of(k).value(), 0.0)));
            }
        }
        _ => {
            for k in 0..dim.saturating_sub(1) {
                let a = raising_element(j, m_of(k));
                // (row, col) of the J+ entry is (k+1, k)
                let (up, down) = match kind {
                    SpinKind::Plus => (Complex64::new(a, 0.0), Complex64::new(0.0, 0.0)),
                    SpinKind::Minus => (Complex64::new(0.0, 0.0), Complex64::new(a, 0.0)),
                    SpinKind::Jx => (Complex64::new(a / 2.0, 0.0), Complex64::new(a / 2.0, 0.0)),
                    SpinKind::Jy => (Complex64::new(0.0, -a / 2.0), Complex64::new(0.0, a / 2.0)),
                    SpinKind::Jz => unreachable!(),
                };
                trip.push((k + 1, k, up));
                trip.push((k, k + 1, down));
            }
        }
    }
    Csr::from_triplets(dim, dim, trip)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinOperator {
    pub basis: DickeBasis,
    pub kind: SpinKind,
    pub matrix: Csr<Complex64>,
}

pub fn build_operator(basis: DickeBasis, kind: SpinKind) -> SpinOperator {
    SpinOperator { basis, kind, matrix: spin_matrix(basis.j(), kind) }
}

/// Clebsch–Gordan coefficient `⟨j1 m1; j2 m2 | J M⟩` (Condon–Shortley phases).
///
/// Racah's single-sum formula, accumulated in log space with the alternating sum
/// scaled by its largest term. Returns exactly 0 whenever a selection rule fails.
pub fn coupling_coefficient(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    jj: HalfInt,
    mm: HalfInt,
) -> f64 {
    let (j1, m1, j2, m2, jj, mm) = (j1.0, m1.0, j2.0, m2.0, jj.0, mm.0);
    let parity_ok = |j: i32, m: i32| j >= 0 && m.abs() <= j && (j - m) % 2 == 0;
    if !parity_ok(j1, m1) || !parity_ok(j2, m2) || !parity_ok(jj, mm) {
        return 0.0;
    }
    if mm != m1 + m2 || jj < (j1 - j2).abs() || jj > j1 + j2 || (j1 + j2 + jj) % 2 != 0 {
        return 0.0;
    }
    // every quantity below is an integer once halved
    let h = |x: i32| -> usize {
        debug_assert!(x >= 0 && x % 2 == 0);
        (x / 2) as usize
    };
    let lf = ln_factorial;
    let ln_pref = 0.5
        * (((jj + 1) as f64).ln() + lf(h(jj + j1 - j2)) + lf(h(jj - j1 + j2)) + lf(h(j1 + j2 - jj))
            - lf(h(j1 + j2 + jj) + 1)
            + lf(h(jj + mm))
            + lf(h(jj - mm))
            + lf(h(j1 - m1))
            + lf(h(j1 + m1))
            + lf(h(j2 - m2))
            + lf(h(j2 + m2)));
    let a = h(j1 + j2 - jj) as i64;
    let b = h(j1 - m1) as i64;
    let c = h(j2 + m2) as i64;
    let d = ((jj - j2 + m1) / 2) as i64;
    let e = ((jj - j1 - m2) / 2) as i64;
    let k_min = 0.max(-d).max(-e);
    let k_max = a.min(b).min(c);
    if k_min > k_max {
        return 0.0;
    }
    let terms: Vec<(f64, bool)> = (k_min..=k_max)
        .map(|k| {
            let ln_den = lf(k as usize)
                + lf((a - k) as usize)
                + lf((b - k) as usize)
                + lf((c - k) as usize)
                + lf((d + k) as usize)
                + lf((e + k) as usize);
            (-ln_den, k % 2 != 0)
        })
        .collect();
    let top = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms
        .iter()
        .map(|&(l, neg)| {
            let v = (l - top).exp();
            if neg {
                -v
            } else {
                v
            }
        })
        .sum();
    sum * (ln_pref + top).exp()
}
