use super::basis::{Basis, BasisKind};
use crate::error::{invalid, Error, Result};
use crate::numerics::sparse::Csr;
use faer::{Mat, Side};
use num_complex::Complex64;

/// Vectorized (block-diagonal) density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    basis: Basis,
    data: Vec<Complex64>,
}

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Dense diagonalization up to this block dimension, Lanczos above.
const DENSE_EIG_MAX: usize = 400;

impl DensityMatrix {
    pub fn new(basis: Basis, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != basis.len() {
            return Err(invalid(format!("state length {} does not match basis length {}", data.len(), basis.len())));
        }
        Ok(DensityMatrix { basis, data })
    }

    pub fn zeros(basis: Basis) -> Self {
        let data = vec![C0; basis.len()];
        DensityMatrix { basis, data }
    }

    /// All atoms in the lower level.
    pub fn all_down(basis: Basis) -> Self {
        let mut rho = DensityMatrix::zeros(basis);
        let k = 0; // Dicke: m = −j; Perm: top block holds the symmetric states; Full: |0…0⟩
        let idx = rho.basis.index(k, 0, 0);
        rho.data[idx] = C1;
        rho
    }

    /// `|ψ⟩⟨ψ|` in block `k`.
    pub fn pure(basis: Basis, k: usize, psi: &[Complex64]) -> Result<Self> {
        let dim = basis.blocks()[k].dim;
        if psi.len() != dim {
            return Err(invalid("state vector has the wrong dimension"));
        }
        let mut rho = DensityMatrix::zeros(basis);
        for b in 0..dim {
            for a in 0..dim {
                let idx = rho.basis.index(k, a, b);
                rho.data[idx] = psi[a] * psi[b].conj();
            }
        }
        Ok(rho)
    }

    /// Identity over the Dicke manifold, normalized.
    pub fn maximally_mixed(basis: Basis) -> Result<Self> {
        if basis.kind() != BasisKind::Dicke && basis.kind() != BasisKind::Full {
            return Err(invalid("maximally mixed state is defined here for Dicke and Full bases"));
        }
        let dim = basis.blocks()[0].dim;
        let mut rho = DensityMatrix::zeros(basis);
        for a in 0..dim {
            let idx = rho.basis.index(0, a, a);
            rho.data[idx] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Ok(rho)
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, k: usize, a: usize, b: usize) -> Complex64 {
        self.data[self.basis.index(k, a, b)]
    }

    pub fn trace(&self) -> Complex64 {
        let mut t = C0;
        for (k, bl) in self.basis.blocks().iter().enumerate() {
            for a in 0..bl.dim {
                t += self.get(k, a, a);
            }
        }
        t
    }

    /// Population of each block, `Tr(d_j ρ_j)`.
    pub fn block_weights(&self) -> Vec<f64> {
        (0..self.basis.blocks().len())
            .map(|k| (0..self.basis.blocks()[k].dim).map(|a| self.get(k, a, a).re).sum())
            .collect()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let t = self.trace();
        if !(t.norm() > 0.0) || !t.re.is_finite() {
            return Err(Error::Consistency("cannot normalize a traceless state".into()));
        }
        let inv = 1.0 / t.re;
        self.data.iter_mut().for_each(|z| *z *= inv);
        Ok(())
    }

    /// Largest `|ρ_ab − ρ_ba*|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (k, bl) in self.basis.blocks().iter().enumerate() {
            for b in 0..bl.dim {
                for a in 0..=b {
                    worst = worst.max((self.get(k, a, b) - self.get(k, b, a).conj()).norm());
                }
            }
        }
        worst
    }

    /// Replaces each block by its Hermitian part.
    pub fn symmetrize(&mut self) {
        let blocks = self.basis.blocks().to_vec();
        for (k, bl) in blocks.iter().enumerate() {
            for b in 0..bl.dim {
                for a in 0..=b {
                    let (i, j) = (self.basis.index(k, a, b), self.basis.index(k, b, a));
                    let avg = 0.5 * (self.data[i] + self.data[j].conj());
                    self.data[i] = avg;
                    self.data[j] = avg.conj();
                }
            }
        }
    }

    pub fn block_matrix(&self, k: usize) -> Mat<Complex64> {
        let dim = self.basis.blocks()[k].dim;
        Mat::from_fn(dim, dim, |a, b| self.get(k, a, b))
    }

    /// Smallest eigenvalue over all blocks (per unit multiplicity for Perm, the
    /// sign is what matters). Large blocks use Lanczos, which bounds it from above.
    pub fn min_eigenvalue(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for (k, bl) in self.basis.blocks().iter().enumerate() {
            let ev = if bl.dim <= DENSE_EIG_MAX {
                hermitian_eigenvalues(&self.block_matrix(k)).into_iter().fold(f64::INFINITY, f64::min)
            } else {
                lanczos_min(&self.block_matrix(k), 60)
            };
            worst = worst.min(ev);
        }
        worst
    }

    /// Trace distance `½‖ρ − σ‖₁` for states on the same basis.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch {
                expected: format!("{} N={}", self.basis.kind(), self.basis.n_atoms()),
                found: format!("{} N={}", other.basis.kind(), other.basis.n_atoms()),
            });
        }
        let mut total = 0.0;
        for (k, bl) in self.basis.blocks().iter().enumerate() {
            let diff = Mat::from_fn(bl.dim, bl.dim, |a, b| self.get(k, a, b) - other.get(k, a, b));
            total += hermitian_eigenvalues(&diff).into_iter().map(f64::abs).sum::<f64>();
        }
        Ok(0.5 * total)
    }

    /// `Σ_k Tr(ρ_k A_k)` with one operator per block.
    pub fn expect(&self, op: impl Fn(usize) -> Csr<Complex64>) -> Complex64 {
        let mut acc = C0;
        for k in 0..self.basis.blocks().len() {
            let a = op(k);
            for r in 0..a.nrows() {
                for (c, v) in a.row(r) {
                    // Tr(ρA) = Σ ρ_cr A_rc
                    acc += self.get(k, c, r) * v;
                }
            }
        }
        acc
    }
}

pub(crate) fn hermitian_eigenvalues(m: &Mat<Complex64>) -> Vec<f64> {
    let h = Mat::<Complex64>::from_fn(m.nrows(), m.ncols(), |a, b| 0.5 * (m[(a, b)] + m[(b, a)].conj()));
    h.self_adjoint_eigenvalues(Side::Lower).expect("Hermitian eigensolver converges")
}

/// Smallest Ritz value after `steps` Lanczos iterations with full reorthogonalization.
fn lanczos_min(m: &Mat<Complex64>, steps: usize) -> f64 {
    let n = m.nrows();
    let steps = steps.min(n);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(steps);
    let mut v: Vec<Complex64> = (0..n).map(|k| Complex64::new(1.0 + ((k * 7919) % 13) as f64 * 0.01, 0.0)).collect();
    let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= nv);
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for _ in 0..steps {
        let mut w = vec![C0; n];
        for b in 0..n {
            let vb = v[b];
            if vb == C0 {
                continue;
            }
            for a in 0..n {
                w[a] += m[(a, b)] * vb;
            }
        }
        let a_k: f64 = v.iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        alpha.push(a_k);
        basis.push(v.clone());
        for q in &basis {
            let proj: Complex64 = q.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
            w.iter_mut().zip(q).for_each(|(y, x)| *y -= proj * x);
        }
        let b_k = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if b_k < 1e-12 {
            break;
        }
        beta.push(b_k);
        v = w.into_iter().map(|z| z / b_k).collect();
    }
    let k = alpha.len();
    let t = Mat::<f64>::from_fn(k, k, |a, b| {
        if a == b {
            alpha[a]
        } else if a + 1 == b || b + 1 == a {
            beta[a.min(b)]
        } else {
            0.0
        }
    });
    t.self_adjoint_eigenvalues(Side::Lower).expect("tridiagonal eigensolver converges")[0]
}
