//! Direct solver for sparse systems whose unknowns live on an integer lattice.
//!
//! Unknowns are ordered by geometric nested dissection: the point set is cut
//! along its longest axis by a separator band as wide as the coupling reach
//! along that axis, recursively. Elimination is multifrontal: each tree node
//! assembles a dense front, eliminates its own unknowns with threshold partial
//! pivoting and passes the Schur complement to its parent. Unknowns with no
//! acceptable pivot are delayed to the parent, which matters here: the
//! Hamiltonian part of a Liouvillian is close to skew-symmetric, so many
//! fronts are nearly singular on their own. Only the couplings needed for
//! back-substitution are kept, so one call solves one right-hand side.

use super::sparse::Csr;
use crate::error::{Error, Result};
use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{solve_unit_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::reborrow::{Reborrow, ReborrowMut};
use faer::{Accum, Mat, Par};

const LEAF_SIZE: usize = 96;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub fronts: usize,
    pub largest_front: usize,
    /// f64 values kept for back-substitution.
    pub stored_values: usize,
    /// Smallest |pivot| / largest |pivot| over all fronts.
    pub pivot_ratio: f64,
    /// Unknowns passed up to a parent front for want of a stable pivot.
    pub delayed: usize,
}

struct TreeNode {
    vars: Vec<u32>,
    children: Vec<usize>,
    first: usize,
}

struct Tree {
    nodes: Vec<TreeNode>,
}

fn reach_per_axis(a: &Csr<f64>, coords: &[[i32; 3]]) -> [i32; 3] {
    let mut reach = [0i32; 3];
    for r in 0..a.nrows() {
        for (c, _) in a.row(r) {
            for ax in 0..3 {
                reach[ax] = reach[ax].max((coords[r][ax] - coords[c][ax]).abs());
            }
        }
    }
    reach
}

fn split(set: &[u32], coords: &[[i32; 3]], reach: [i32; 3]) -> Option<(Vec<u32>, Vec<u32>, Vec<u32>)> {
    let mut lo = [i32::MAX; 3];
    let mut hi = [i32::MIN; 3];
    for &v in set {
        for ax in 0..3 {
            lo[ax] = lo[ax].min(coords[v as usize][ax]);
            hi[ax] = hi[ax].max(coords[v as usize][ax]);
        }
    }
    let mut axes = [0usize, 1, 2];
    let score = |ax: usize| (hi[ax] - lo[ax]) as f64 / reach[ax].max(1) as f64;
    axes.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap());
    for ax in axes {
        let extent = hi[ax] - lo[ax];
        if extent <= 2 * reach[ax] || extent == 0 {
            continue;
        }
        let mut vals: Vec<i32> = set.iter().map(|&v| coords[v as usize][ax]).collect();
        let mid_idx = vals.len() / 2;
        let (_, &mut median, _) = vals.select_nth_unstable(mid_idx);
        let cut = median - reach[ax] / 2;
        let (mut left, mut sep, mut right) = (Vec::new(), Vec::new(), Vec::new());
        for &v in set {
            let c = coords[v as usize][ax];
            if c < cut {
                left.push(v);
            } else if c < cut + reach[ax] {
                sep.push(v);
            } else {
                right.push(v);
            }
        }
        if !left.is_empty() && !right.is_empty() {
            return Some((left, sep, right));
        }
    }
    None
}

impl Tree {
    fn build(n: usize, coords: &[[i32; 3]], reach: [i32; 3]) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let all: Vec<u32> = (0..n as u32).collect();
        tree.grow(all, coords, reach);
        tree
    }

    /// Appends the subtree for `set` in postorder and returns its root.
    fn grow(&mut self, set: Vec<u32>, coords: &[[i32; 3]], reach: [i32; 3]) -> usize {
        let first = self.nodes.len();
        if set.len() > LEAF_SIZE {
            if let Some((left, sep, right)) = split(&set, coords, reach) {
                drop(set);
                let l = self.grow(left, coords, reach);
                let r = self.grow(right, coords, reach);
                if sep.is_empty() {
                    // decoupled halves: an empty front just joins them
                    self.nodes.push(TreeNode { vars: Vec::new(), children: vec![l, r], first });
                } else {
                    self.nodes.push(TreeNode { vars: sep, children: vec![l, r], first });
                }
                return self.nodes.len() - 1;
            }
        }
        self.nodes.push(TreeNode { vars: set, children: Vec::new(), first });
        self.nodes.len() - 1
    }
}

/// Solves `A x = b`; `coords[i]` is the lattice position of unknown `i`.
pub fn solve(a: &Csr<f64>, coords: &[[i32; 3]], b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(coords.len(), n);
    assert_eq!(b.len(), n);
    if n == 0 {
        return Ok((Vec::new(), SolveStats { pivot_ratio: 1.0, ..Default::default() }));
    }
    let at = a.transpose();
    let reach = reach_per_axis(a, coords);
    let tree = Tree::build(n, coords, reach);
    let nt = tree.nodes.len();

    let mut owner = vec![0u32; n];
    for (t, node) in tree.nodes.iter().enumerate() {
        for &v in &node.vars {
            owner[v as usize] = t as u32;
        }
    }

    // symbolic phase: update sets
    let mut update: Vec<Vec<u32>> = Vec::with_capacity(nt);
    let mut mark = vec![usize::MAX; n];
    for (t, node) in tree.nodes.iter().enumerate() {
        let inside = |v: u32| {
            let o = owner[v as usize] as usize;
            o >= node.first && o <= t
        };
        let mut u = Vec::new();
        let mut consider = |v: u32, u: &mut Vec<u32>| {
            if mark[v as usize] != t && !inside(v) {
                mark[v as usize] = t;
                u.push(v);
            }
        };
        for &v in &node.vars {
            for (c, _) in a.row(v as usize) {
                consider(c as u32, &mut u);
            }
            for (r, _) in at.row(v as usize) {
                consider(r as u32, &mut u);
            }
        }
        for &ch in &node.children {
            for &v in &update[ch] {
                consider(v, &mut u);
            }
        }
        u.sort_unstable();
        update.push(u);
    }

    // numeric phase
    let mut rhs = b.to_vec();
    let mut pos_r = vec![usize::MAX; n];
    let mut pos_c = vec![usize::MAX; n];
    let mut stack: Vec<Contribution> = Vec::new();
    let mut kept: Vec<Kept> = Vec::with_capacity(nt);
    let mut stats = SolveStats { pivot_ratio: f64::INFINITY, ..Default::default() };
    let mut piv = (f64::INFINITY, 0.0f64);

    for (t, node) in tree.nodes.iter().enumerate() {
        let vars = &node.vars;
        let upd = &update[t];
        let children: Vec<Contribution> = (0..node.children.len()).map(|_| stack.pop().expect("child contribution")).collect();
        let delayed: usize = children.iter().map(|c| c.delayed).sum();
        let (nv, q) = (vars.len(), upd.len());
        let p = nv + delayed;
        let m = p + q;

        let mut rl: Vec<u32> = Vec::with_capacity(m);
        let mut cl: Vec<u32> = Vec::with_capacity(m);
        rl.extend_from_slice(vars);
        cl.extend_from_slice(vars);
        for c in &children {
            rl.extend_from_slice(&c.rows[..c.delayed]);
            cl.extend_from_slice(&c.cols[..c.delayed]);
        }
        rl.extend_from_slice(upd);
        cl.extend_from_slice(upd);

        // Original entries first, with delayed labels not yet visible: those
        // entries were assembled where the delayed unknown was first owned.
        for (k, &v) in vars.iter().chain(upd.iter()).enumerate() {
            let at_pos = if k < nv { k } else { k + delayed };
            pos_r[v as usize] = at_pos;
            pos_c[v as usize] = at_pos;
        }
        let mut front = Mat::<f64>::zeros(m, m);
        for (k, &v) in vars.iter().enumerate() {
            for (c, val) in a.row(v as usize) {
                let pc = pos_c[c];
                if pc != usize::MAX {
                    front[(k, pc)] += val;
                }
            }
            for (r, val) in at.row(v as usize) {
                let pr = pos_r[r];
                if pr != usize::MAX && pr >= p {
                    front[(pr, k)] += val;
                }
            }
        }
        for k in nv..p {
            pos_r[rl[k] as usize] = k;
            pos_c[cl[k] as usize] = k;
        }
        for c in &children {
            let rmap: Vec<usize> = c.rows.iter().map(|&v| pos_r[v as usize]).collect();
            let cmap: Vec<usize> = c.cols.iter().map(|&v| pos_c[v as usize]).collect();
            debug_assert!(rmap.iter().chain(&cmap).all(|&k| k != usize::MAX));
            for (cj, &fj) in cmap.iter().enumerate() {
                for (ci, &fi) in rmap.iter().enumerate() {
                    front[(fi, fj)] += c.schur[(ci, cj)];
                }
            }
        }
        drop(children);
        for &v in rl.iter() {
            pos_r[v as usize] = usize::MAX;
        }
        for &v in cl.iter() {
            pos_c[v as usize] = usize::MAX;
        }

        let is_root = t + 1 == nt;
        let k = partial_factor(&mut front, p, &mut rl, &mut cl, if is_root { 0.0 } else { PIVOT_THRESHOLD }, &mut piv);
        if is_root && k < p {
            return Err(Error::Singular(format!("{} unknowns without a usable pivot", p - k)));
        }
        stats.delayed += p - k;

        // forward elimination of the right-hand side
        let mut y: Vec<f64> = rl[..k].iter().map(|&r| rhs[r as usize]).collect();
        {
            let mut ym = faer::MatMut::from_column_major_slice_mut(&mut y, k, 1);
            solve_unit_lower_triangular_in_place(front.as_ref().submatrix(0, 0, k, k), ym.rb_mut(), Par::Seq);
            if m > k {
                let mut corr = Mat::<f64>::zeros(m - k, 1);
                matmul(corr.as_mut(), Accum::Replace, front.as_ref().submatrix(k, 0, m - k, k), ym.rb(), 1.0, Par::Seq);
                for (i, &r) in rl[k..].iter().enumerate() {
                    rhs[r as usize] -= corr[(i, 0)];
                }
            }
            solve_upper_triangular_in_place(front.as_ref().submatrix(0, 0, k, k), ym.rb_mut(), Par::Seq);
        }
        let mut w = front.as_ref().submatrix(0, k, k, m - k).to_owned();
        solve_upper_triangular_in_place(front.as_ref().submatrix(0, 0, k, k), w.as_mut(), Par::Seq);
        let schur = front.as_ref().submatrix(k, k, m - k, m - k).to_owned();
        drop(front);

        stats.stored_values += k * (m - k) + k;
        if k > 0 {
            stats.fronts += 1;
        }
        stats.largest_front = stats.largest_front.max(m);
        let rows = rl.split_off(k);
        let cols = cl[k..].to_vec();
        cl.truncate(k);
        stack.push(Contribution { schur, rows, cols: cols.clone(), delayed: p - k });
        kept.push(Kept { w, y, vars: cl, rest: cols });
    }
    debug_assert_eq!(stack.len(), 1);

    if !(piv.0 > 0.0) && n > 0 {
        return Err(Error::Singular("zero pivot in a front".into()));
    }
    stats.pivot_ratio = piv.0 / piv.1;

    let mut x = vec![0.0; n];
    for t in (0..nt).rev() {
        let kp = &kept[t];
        for (i, &v) in kp.vars.iter().enumerate() {
            let mut acc = kp.y[i];
            for (j, &u) in kp.rest.iter().enumerate() {
                acc -= kp.w[(i, j)] * x[u as usize];
            }
            x[v as usize] = acc;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite solution".into()));
    }
    Ok((x, stats))
}

/// Schur complement handed to the parent. The first `delayed` row and column
/// labels are unknowns this front could not eliminate.
struct Contribution {
    schur: Mat<f64>,
    rows: Vec<u32>,
    cols: Vec<u32>,
    delayed: usize,
}

/// What back-substitution needs from one front: `x[vars] = y − W·x[rest]`.
struct Kept {
    w: Mat<f64>,
    y: Vec<f64>,
    vars: Vec<u32>,
    rest: Vec<u32>,
}

/// A pivot must reach this fraction of the largest entry in its column.
const PIVOT_THRESHOLD: f64 = 0.01;
const PANEL: usize = 32;

/// Eliminates as many of the `p` leading (fully summed) columns of `f` as pass
/// the threshold test, choosing pivot rows among the `p` leading rows. Rows and
/// columns are permuted in place along with their labels; on return the
/// leading `k × k` block holds `L\U`, `f[k.., ..k]` holds `L21`, `f[..k, k..]`
/// holds `U12` and `f[k.., k..]` the Schur complement, whose first `p − k` rows
/// and columns are the delayed ones. Returns `k`.
fn partial_factor(f: &mut Mat<f64>, p: usize, rl: &mut [u32], cl: &mut [u32], u: f64, piv: &mut (f64, f64)) -> usize {
    let m = f.nrows();
    let mut k = 0;
    let mut tmp = vec![0.0; m];
    loop {
        let round_start = k;
        let mut pc = p;
        while k < pc {
            let k0 = k;
            while k < pc && k - k0 < PANEL {
                // column k brought up to date with this panel's pivots, out of place
                tmp[k0..].copy_from_slice(&f.col_as_slice(k)[k0..]);
                for l in k0..k {
                    let ul = tmp[l];
                    if ul != 0.0 {
                        let lc = &f.col_as_slice(l)[l + 1..];
                        for (t, &lv) in tmp[l + 1..].iter_mut().zip(lc) {
                            *t -= lv * ul;
                        }
                    }
                }
                let (mut best, mut bmax) = (k, 0.0f64);
                for (i, &v) in tmp.iter().enumerate().take(p).skip(k) {
                    if v.abs() > bmax {
                        bmax = v.abs();
                        best = i;
                    }
                }
                let cmax = tmp[p..].iter().fold(bmax, |acc, v| acc.max(v.abs()));
                if bmax > 0.0 && bmax >= u * cmax {
                    if best != k {
                        for j in 0..m {
                            let (a, b) = (f[(best, j)], f[(k, j)]);
                            f[(best, j)] = b;
                            f[(k, j)] = a;
                        }
                        tmp.swap(best, k);
                        rl.swap(best, k);
                    }
                    let pivot = tmp[k];
                    piv.0 = piv.0.min(pivot.abs());
                    piv.1 = piv.1.max(pivot.abs());
                    let col = f.col_as_slice_mut(k);
                    col[k0..=k].copy_from_slice(&tmp[k0..=k]);
                    for (c, &t) in col[k + 1..].iter_mut().zip(&tmp[k + 1..]) {
                        *c = t / pivot;
                    }
                    k += 1;
                } else {
                    pc -= 1;
                    if pc != k {
                        for i in 0..m {
                            let (a, b) = (f[(i, pc)], f[(i, k)]);
                            f[(i, pc)] = b;
                            f[(i, k)] = a;
                        }
                        cl.swap(pc, k);
                    }
                }
            }
            if k > k0 && k < m {
                let view = f.as_mut().submatrix_mut(k0, k0, m - k0, m - k0);
                let (l11, mut u12, l21, a22) = view.split_at_mut(k - k0, k - k0);
                solve_unit_lower_triangular_in_place(l11.rb(), u12.rb_mut(), Par::Seq);
                matmul(a22, Accum::Add, l21.rb(), u12.rb(), -1.0, Par::Seq);
            }
        }
        // Rejected columns may have become acceptable; retry while that helps.
        if k == p || k == round_start {
            return k;
        }
    }
}
