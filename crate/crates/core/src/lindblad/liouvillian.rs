use super::basis::{Basis, BasisKind};
use super::density::DensityMatrix;
use crate::collective_spin::{coupling_coefficient, spin_matrix, HalfInt, SpinKind};
use crate::error::{invalid, Error, Result};
use crate::meanfield::ModelParams;
use crate::numerics::sparse::Csr;
use num_complex::Complex64;

pub const FULL_MAX_ATOMS: usize = 8;

/// Matrices with at most this many stored entries are materialized; larger
/// generators are applied row by row.
const MATERIALIZE_MAX_NNZ: usize = 10_000_000;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Gain from one source block into a Perm target block: element `(a, b)` of the
/// target receives `Σ_t w_t f_t[a] f_t[b]` times source element `(a+s, b+s)`.
#[derive(Clone, Debug)]
struct PermLink {
    source: usize,
    shift: i32,
    terms: Vec<(f64, Vec<f64>)>,
}

#[derive(Clone, Debug)]
enum Gain {
    None,
    /// `Σ r·L ρ L†` with operators acting inside the single block.
    Ops(Vec<(f64, Csr<Complex64>)>),
    /// Independent decay on permutation-invariant blocks, indexed by target block.
    Perm(Vec<Vec<PermLink>>),
}

/// Generator of `ρ̇ = −i(Kρ − ρK†) + gain`, `K = H − (i/2)Σ r L†L`.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    basis: Basis,
    params: ModelParams,
    k_blocks: Vec<Csr<Complex64>>,
    gain: Gain,
    materialized: Option<Csr<Complex64>>,
}

/// `(Vx/N)Jx² + (Vy/N)Jy² + ΩJx` from the given spin matrices.
fn hamiltonian(p: &ModelParams, n: usize, jx: &Csr<Complex64>, jy: &Csr<Complex64>) -> Csr<Complex64> {
    let nf = n as f64;
    let xx = jx.matmul(jx);
    let yy = jy.matmul(jy);
    let h = xx.add_scaled(Complex64::new(p.vx / nf, 0.0), &yy, Complex64::new(p.vy / nf, 0.0));
    h.add_scaled(Complex64::new(1.0, 0.0), jx, Complex64::new(p.omega, 0.0))
}

fn adjoint(a: &Csr<Complex64>) -> Csr<Complex64> {
    a.transpose().map(|z| z.conj())
}

/// Collective decay on the Dicke manifold:
/// `L[ρ] = −i[H,ρ] + (γc/2N)(2J−ρJ+ − J+J−ρ − ρJ+J−)`.
pub fn build_liouvillian_collective(basis: &Basis, params: &ModelParams) -> Result<Liouvillian> {
    if basis.kind() != BasisKind::Dicke {
        return Err(invalid("collective backend needs a Dicke basis"));
    }
    if params.gamma_i != 0.0 {
        return Err(invalid("collective backend requires gamma_i = 0"));
    }
    check_rates(params)?;
    let n = basis.n_atoms();
    let j = HalfInt(n as i32);
    let [jx, jy, jm] = [SpinKind::Jx, SpinKind::Jy, SpinKind::Minus].map(|k| spin_matrix(j, k));
    let jp = adjoint(&jm);
    let rate = params.gamma_c / n as f64;
    let h = hamiltonian(params, n, &jx, &jy);
    let k = h.add_scaled(Complex64::new(1.0, 0.0), &jp.matmul(&jm), Complex64::new(0.0, -0.5 * rate));
    let gain = if rate > 0.0 { Gain::Ops(vec![(rate, jm)]) } else { Gain::None };
    Ok(Liouvillian::finish(basis.clone(), params, vec![k], gain))
}

/// Independent decay on permutation-invariant blocks. The per-site jump
/// `Σ_n σ−ⁿρσ+ⁿ` equals N times the permutation average of a jump on the last
/// atom, which couples block `j` to `J ∈ {j−1, j, j+1}` through
/// Clebsch–Gordan coefficients of an (N−1)-atom block `j'` plus one spin-1/2.
pub fn build_liouvillian_independent(basis: &Basis, params: &ModelParams) -> Result<Liouvillian> {
    if basis.kind() != BasisKind::Perm {
        return Err(invalid("independent backend needs a Perm basis"));
    }
    if params.gamma_c != 0.0 {
        return Err(invalid("independent backend requires gamma_c = 0"));
    }
    check_rates(params)?;
    let n = basis.n_atoms();
    let gi = params.gamma_i;
    let half_n = Complex64::new(0.5 * n as f64, 0.0);
    let mut k_blocks = Vec::new();
    for bl in basis.blocks() {
        let j = bl.j.expect("perm blocks carry j");
        let [jx, jy, jz] = [SpinKind::Jx, SpinKind::Jy, SpinKind::Jz].map(|k| spin_matrix(j, k));
        let h = hamiltonian(params, n, &jx, &jy);
        // Σ_n σ+σ− = N/2 + Jz
        let id = Csr::from_triplets(bl.dim, bl.dim, (0..bl.dim).map(|a| (a, a, half_n)).collect());
        let up = id.add_scaled(Complex64::new(1.0, 0.0), &jz, Complex64::new(1.0, 0.0));
        k_blocks.push(h.add_scaled(Complex64::new(1.0, 0.0), &up, Complex64::new(0.0, -0.5 * gi)));
    }
    let gain = if gi > 0.0 { Gain::Perm(perm_links(basis, gi)) } else { Gain::None };
    Ok(Liouvillian::finish(basis.clone(), params, k_blocks, gain))
}

fn perm_links(basis: &Basis, gamma_i: f64) -> Vec<Vec<PermLink>> {
    let n = basis.n_atoms();
    let h = HalfInt::from_doubled;
    let mut out = Vec::with_capacity(basis.blocks().len());
    for target in basis.blocks() {
        let jt = target.j.unwrap();
        let mut links = Vec::new();
        for (ks, source) in basis.blocks().iter().enumerate() {
            let js = source.j.unwrap();
            if (js.twice() - jt.twice()).abs() > 2 {
                continue;
            }
            let mut terms = Vec::new();
            // intermediate (N−1)-atom spin j' = js ± 1/2, also within 1/2 of jt
            for jp2 in [js.twice() - 1, js.twice() + 1] {
                if jp2 < 0 || jp2 > n as i32 - 1 || (jp2 - jt.twice()).abs() != 1 {
                    continue;
                }
                let jp = h(jp2);
                let w = n as f64
                    * gamma_i
                    * (super::basis::ln_degeneracy(n - 1, jp) - source.ln_degeneracy).exp();
                // target element a has m_t = −jt + a; the source sits at m = m_t + 1
                let f: Vec<f64> = (0..target.dim)
                    .map(|a| {
                        let mt2 = 2 * a as i32 - jt.twice();
                        let m2 = mt2 + 2;
                        if m2.abs() > js.twice() {
                            return 0.0;
                        }
                        let up = coupling_coefficient(jp, h(m2 - 1), h(1), h(1), js, h(m2));
                        let down = coupling_coefficient(jp, h(mt2 + 1), h(1), h(-1), jt, h(mt2));
                        up * down
                    })
                    .collect();
                if f.iter().any(|&v| v != 0.0) {
                    terms.push((w, f));
                }
            }
            if !terms.is_empty() {
                // source index of m = m_t + 1 is a + 1 + js − jt
                let shift = 1 + (js.twice() - jt.twice()) / 2;
                links.push(PermLink { source: ks, shift, terms });
            }
        }
        out.push(links);
    }
    out
}

/// Every atom, both decay channels, `2^N` states.
pub fn brute_force_liouvillian(n_atoms: usize, params: &ModelParams) -> Result<Liouvillian> {
    if n_atoms > FULL_MAX_ATOMS {
        return Err(Error::TooLarge(format!("brute-force backend supports N ≤ {FULL_MAX_ATOMS}, got {n_atoms}")));
    }
    check_rates(params)?;
    let basis = Basis::full(n_atoms)?;
    let dim = 1usize << n_atoms;
    let sites: Vec<Csr<Complex64>> = (0..n_atoms)
        .map(|site| {
            let bit = 1usize << site;
            let trip = (0..dim)
                .filter(|s| s & bit != 0)
                .map(|s| (s ^ bit, s, Complex64::new(1.0, 0.0)))
                .collect();
            Csr::from_triplets(dim, dim, trip)
        })
        .collect();
    let one = Complex64::new(1.0, 0.0);
    let mut jm = Csr::from_triplets(dim, dim, Vec::new());
    for s in &sites {
        jm = jm.add_scaled(one, s, one);
    }
    let jp = adjoint(&jm);
    let jx = jp.add_scaled(Complex64::new(0.5, 0.0), &jm, Complex64::new(0.5, 0.0));
    let jy = jp.add_scaled(Complex64::new(0.0, -0.5), &jm, Complex64::new(0.0, 0.5));
    let h = hamiltonian(params, n_atoms, &jx, &jy);
    let rate_c = params.gamma_c / n_atoms as f64;
    let mut gamma = jp.matmul(&jm).map(|z| z * rate_c);
    let mut ops = Vec::new();
    if rate_c > 0.0 {
        ops.push((rate_c, jm.clone()));
    }
    if params.gamma_i > 0.0 {
        for s in &sites {
            gamma = gamma.add_scaled(one, &adjoint(s).matmul(s), Complex64::new(params.gamma_i, 0.0));
            ops.push((params.gamma_i, s.clone()));
        }
    }
    let k = h.add_scaled(one, &gamma, Complex64::new(0.0, -0.5));
    let gain = if ops.is_empty() { Gain::None } else { Gain::Ops(ops) };
    Ok(Liouvillian::finish(basis, params, vec![k], gain))
}

fn check_rates(p: &ModelParams) -> Result<()> {
    let vals = [p.vx, p.vy, p.omega, p.gamma_i, p.gamma_c];
    if vals.iter().any(|v| !v.is_finite()) || p.gamma_i < 0.0 || p.gamma_c < 0.0 {
        return Err(invalid("parameters must be finite with non-negative rates"));
    }
    Ok(())
}

impl Liouvillian {
    fn finish(basis: Basis, params: &ModelParams, k_blocks: Vec<Csr<Complex64>>, gain: Gain) -> Self {
        let mut params = *params;
        params.n_atoms = basis.n_atoms();
        let mut l = Liouvillian { basis, params, k_blocks, gain, materialized: None };
        if l.estimated_nnz() <= MATERIALIZE_MAX_NNZ {
            let m = Csr::from_rows(l.basis.len(), l.basis.len(), |r, out| l.row(r, out));
            l.materialized = Some(m);
        }
        l
    }

    fn estimated_nnz(&self) -> usize {
        let mut total = 0usize;
        for (k, bl) in self.basis.blocks().iter().enumerate() {
            let kn = self.k_blocks[k].nnz() as f64 / bl.dim as f64;
            let gain = match &self.gain {
                Gain::None => 0.0,
                Gain::Ops(ops) => ops.iter().map(|(_, o)| (o.nnz() as f64 / bl.dim as f64).powi(2)).sum(),
                Gain::Perm(links) => links[k].len() as f64,
            };
            total += ((2.0 * kn + gain) * (bl.dim * bl.dim) as f64) as usize;
        }
        total
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn is_materialized(&self) -> bool {
        self.materialized.is_some()
    }

    /// Entries `(column, value)` of row `r` of the vectorized generator.
    pub fn row(&self, r: usize, out: &mut Vec<(usize, Complex64)>) {
        out.clear();
        let (k, a, b) = self.basis.locate(r);
        let kb = &self.k_blocks[k];
        for (c, v) in kb.row(a) {
            out.push((self.basis.index(k, c, b), -I * v));
        }
        for (c, v) in kb.row(b) {
            out.push((self.basis.index(k, a, c), I * v.conj()));
        }
        match &self.gain {
            Gain::None => {}
            Gain::Ops(ops) => {
                for (rate, op) in ops {
                    for (c, lv) in op.row(a) {
                        for (d, lw) in op.row(b) {
                            out.push((self.basis.index(k, c, d), lv * lw.conj() * *rate));
                        }
                    }
                }
            }
            Gain::Perm(links) => {
                for link in &links[k] {
                    let dim_s = self.basis.blocks()[link.source].dim as i32;
                    let (sa, sb) = (a as i32 + link.shift, b as i32 + link.shift);
                    if sa < 0 || sb < 0 || sa >= dim_s || sb >= dim_s {
                        continue;
                    }
                    let coef: f64 = link.terms.iter().map(|(w, f)| w * f[a] * f[b]).sum();
                    if coef != 0.0 {
                        let col = self.basis.index(link.source, sa as usize, sb as usize);
                        out.push((col, Complex64::new(coef, 0.0)));
                    }
                }
            }
        }
    }

    /// `y = L x` on vectorized states.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        if let Some(m) = &self.materialized {
            m.mul_vec(x, y);
            return;
        }
        let mut buf = Vec::new();
        for (r, yr) in y.iter_mut().enumerate() {
            self.row(r, &mut buf);
            *yr = buf.iter().map(|&(c, v)| v * x[c]).sum();
        }
    }

    pub fn apply_to(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.basis() != &self.basis {
            return Err(Error::BasisMismatch {
                expected: format!("{} N={}", self.basis.kind(), self.basis.n_atoms()),
                found: format!("{} N={}", rho.basis().kind(), rho.basis().n_atoms()),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.basis.len()];
        self.apply(rho.data(), &mut out);
        DensityMatrix::new(self.basis.clone(), out)
    }

    /// Frobenius norm of `L[ρ]`.
    pub fn residual_norm(&self, x: &[Complex64]) -> f64 {
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut out);
        out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Explicit sparse matrix (built on demand when not cached).
    pub fn to_csr(&self) -> Csr<Complex64> {
        match &self.materialized {
            Some(m) => m.clone(),
            None => Csr::from_rows(self.basis.len(), self.basis.len(), |r, out| self.row(r, out)),
        }
    }

    /// Largest `|L_rc|`, a scale for the generator's stiffness.
    pub fn scale(&self) -> f64 {
        let mut buf = Vec::new();
        let mut worst = 0.0f64;
        let step = (self.basis.len() / 4096).max(1);
        for r in (0..self.basis.len()).step_by(step) {
            self.row(r, &mut buf);
            worst = worst.max(buf.iter().map(|(_, v)| v.norm()).sum());
        }
        worst
    }
}
