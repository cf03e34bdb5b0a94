use crate::collective_spin::HalfInt;
use crate::error::{invalid, Result};
use crate::numerics::factorial::ln_binomial;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Dicke,
    Perm,
    Full,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Dicke => "dicke",
            BasisKind::Perm => "perm",
            BasisKind::Full => "full",
        })
    }
}

impl FromStr for BasisKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dicke" => Ok(BasisKind::Dicke),
            "perm" => Ok(BasisKind::Perm),
            "full" | "brute" => Ok(BasisKind::Full),
            other => Err(invalid(format!("unknown basis '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    /// Total spin of the block; `None` for the full tensor-product space.
    pub j: Option<HalfInt>,
    pub dim: usize,
    /// Start of the block in the vectorized state.
    pub offset: usize,
    /// `ln d_j`; zero for Dicke and Full.
    pub ln_degeneracy: f64,
}

impl Block {
    pub fn degeneracy(&self) -> f64 {
        self.ln_degeneracy.exp()
    }

    /// `2m` of basis state `a` (the magnetization label in the full space).
    pub fn m2(&self, a: usize, n_atoms: usize) -> i32 {
        match self.j {
            Some(j) => 2 * a as i32 - j.twice(),
            None => 2 * (a.count_ones() as i32) - n_atoms as i32,
        }
    }
}

/// Multiplicity `d_j = C(N, N/2−j) − C(N, N/2−j−1)` of spin `j` among `N` spin-1/2.
pub fn degeneracy_exact(n_atoms: usize, j: HalfInt) -> Option<u128> {
    let k = (n_atoms as i32 - j.twice()) / 2;
    if j.twice() < 0 || k < 0 || (n_atoms as i32 - j.twice()) % 2 != 0 || n_atoms > 120 {
        return None;
    }
    let binom = |n: u128, k: i32| -> u128 {
        if k < 0 {
            return 0;
        }
        let mut acc: u128 = 1;
        for i in 0..k as u128 {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    };
    Some(binom(n_atoms as u128, k) - binom(n_atoms as u128, k - 1))
}

/// `ln d_j = ln[N!(2j+1) / ((N/2+j+1)!(N/2−j)!)]`.
pub fn ln_degeneracy(n_atoms: usize, j: HalfInt) -> f64 {
    let k = ((n_atoms as i32 - j.twice()) / 2) as usize;
    // N!(2j+1)/((N−k+1)! k!) = C(N+1, k)·(2j+1)/(N+1)
    ln_binomial(n_atoms + 1, k) + ((j.twice() + 1) as f64).ln() - ((n_atoms + 1) as f64).ln()
}

/// Block layout of a vectorized state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    kind: BasisKind,
    n_atoms: usize,
    blocks: Vec<Block>,
    len: usize,
}

impl Basis {
    pub fn dicke(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("n_atoms must be at least 1"));
        }
        let dim = n_atoms + 1;
        let block = Block { j: Some(HalfInt(n_atoms as i32)), dim, offset: 0, ln_degeneracy: 0.0 };
        Ok(Basis { kind: BasisKind::Dicke, n_atoms, blocks: vec![block], len: dim * dim })
    }

    /// Blocks ordered by descending `j`.
    pub fn perm(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("n_atoms must be at least 1"));
        }
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut j2 = n_atoms as i32;
        while j2 >= 0 {
            let j = HalfInt(j2);
            let dim = (j2 + 1) as usize;
            blocks.push(Block { j: Some(j), dim, offset, ln_degeneracy: ln_degeneracy(n_atoms, j) });
            offset += dim * dim;
            j2 -= 2;
        }
        Ok(Basis { kind: BasisKind::Perm, n_atoms, blocks, len: offset })
    }

    pub fn full(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(invalid("n_atoms must be at least 1"));
        }
        if n_atoms > 14 {
            return Err(crate::Error::TooLarge(format!("full space for N = {n_atoms}")));
        }
        let dim = 1usize << n_atoms;
        let block = Block { j: None, dim, offset: 0, ln_degeneracy: 0.0 };
        Ok(Basis { kind: BasisKind::Full, n_atoms, blocks: vec![block], len: dim * dim })
    }

    pub fn new(kind: BasisKind, n_atoms: usize) -> Result<Self> {
        match kind {
            BasisKind::Dicke => Basis::dicke(n_atoms),
            BasisKind::Perm => Basis::perm(n_atoms),
            BasisKind::Full => Basis::full(n_atoms),
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Length of the vectorized state.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Flat index of element `(a, b)` of block `k` (column stacking).
    pub fn index(&self, k: usize, a: usize, b: usize) -> usize {
        let bl = &self.blocks[k];
        debug_assert!(a < bl.dim && b < bl.dim);
        bl.offset + a + bl.dim * b
    }

    /// Inverse of [`Basis::index`].
    pub fn locate(&self, flat: usize) -> (usize, usize, usize) {
        let k = match self.blocks.binary_search_by(|b| b.offset.cmp(&flat)) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let bl = &self.blocks[k];
        let local = flat - bl.offset;
        (k, local % bl.dim, local / bl.dim)
    }

    /// Block holding spin `j`, if present.
    pub fn block_of(&self, j: HalfInt) -> Option<usize> {
        self.blocks.iter().position(|b| b.j == Some(j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_bookkeeping() {
        for n in 1..=60usize {
            let b = Basis::perm(n).unwrap();
            let total: u128 = b
                .blocks()
                .iter()
                .map(|bl| degeneracy_exact(n, bl.j.unwrap()).unwrap() * bl.dim as u128)
                .sum();
            assert_eq!(total, 1u128 << n, "N = {n}");
            for bl in b.blocks() {
                let exact = degeneracy_exact(n, bl.j.unwrap()).unwrap() as f64;
                assert!(exact >= 1.0);
                assert!((bl.ln_degeneracy - exact.ln()).abs() < 1e-11 * exact.ln().max(1.0));
            }
        }
    }

    #[test]
    fn index_round_trip() {
        let b = Basis::perm(5).unwrap();
        for flat in 0..b.len() {
            let (k, a, c) = b.locate(flat);
            assert_eq!(b.index(k, a, c), flat);
        }
        assert_eq!(b.blocks().len(), 3);
        assert_eq!(Basis::dicke(4).unwrap().len(), 25);
        assert_eq!(Basis::full(3).unwrap().len(), 64);
    }

    #[test]
    fn magnetization_labels() {
        let full = Basis::full(3).unwrap();
        assert_eq!(full.blocks()[0].m2(0, 3), -3);
        assert_eq!(full.blocks()[0].m2(7, 3), 3);
        let d = Basis::dicke(3).unwrap();
        assert_eq!(d.blocks()[0].m2(0, 3), -3);
    }
}
