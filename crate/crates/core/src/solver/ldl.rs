//! Sparse `LDL'` factorization of quasi-definite matrices with a
//! minimum-degree ordering.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::error::{Error, Result};

/// General sparse matrix in compressed sparse column form.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CscMatrix {
    /// Builds from triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut t: Vec<(usize, usize, f64)> = trip.to_vec();
        t.sort_by_key(|a| (a.1, a.0));
        let mut colptr = vec![0; ncols + 1];
        let mut rowidx = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut cols = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            debug_assert!(r < nrows && c < ncols);
            if let (Some(&lr), Some(&lc)) = (rowidx.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rowidx.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut keep_r = Vec::with_capacity(rowidx.len());
        let mut keep_v = Vec::with_capacity(rowidx.len());
        for ((r, c), v) in rowidx.into_iter().zip(cols).zip(vals) {
            if v != 0.0 {
                colptr[c + 1] += 1;
                keep_r.push(r);
                keep_v.push(v);
            }
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        Self { nrows, ncols, colptr, rowidx: keep_r, vals: keep_v }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y += A x`.
    pub fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowidx[p]] += self.vals[p] * xc;
            }
        }
    }

    /// `y += A' x`.
    pub fn mul_t_add(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[c]..self.colptr[c + 1] {
                acc += self.vals[p] * x[self.rowidx[p]];
            }
            y[c] += acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_add(x, &mut y);
        y
    }

    pub fn mul_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.mul_t_add(x, &mut y);
        y
    }

    /// Scales row `i` by `d[i]` and column `j` by `e[j]`.
    pub fn scale(&mut self, d: &[f64], e: &[f64]) {
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                self.vals[p] *= d[self.rowidx[p]] * e[c];
            }
        }
    }
}

/// Minimum-degree elimination order of the symmetric graph given by
/// `(i, j)` pairs. Ties go to the lowest index. Once the smallest degree
/// exceeds `dense_cutoff`, the remaining vertices are appended by current
/// degree to bound the cost of the elimination.
pub fn minimum_degree_order(n: usize, pairs: &[(usize, usize)], dense_cutoff: usize) -> Vec<usize> {
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in pairs {
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let mut done = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|v| Reverse((adj[v].len(), v))).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse((d, v))) = heap.pop() {
        if done[v] || adj[v].len() != d {
            continue;
        }
        let remaining = n - order.len();
        if d + 1 == remaining || d > dense_cutoff {
            let mut rest: Vec<(usize, usize)> = (0..n).filter(|&u| !done[u]).map(|u| (adj[u].len(), u)).collect();
            rest.sort_unstable();
            order.extend(rest.into_iter().map(|(_, u)| u));
            break;
        }
        done[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = adj[v].iter().copied().collect();
        for &u in &nbrs {
            adj[u].remove(&v);
        }
        for (p, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[p + 1..] {
                if adj[a].insert(b) {
                    adj[b].insert(a);
                }
            }
        }
        for &u in &nbrs {
            heap.push(Reverse((adj[u].len(), u)));
        }
    }
    order
}

/// `P A P' = L D L'` for a symmetric matrix given by its upper triangle.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    /// Position in the permuted upper-triangular storage of each input entry.
    map: Vec<usize>,
    ap: Vec<usize>,
    ai: Vec<usize>,
    ax: Vec<f64>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    positive: usize,
}

const NONE: usize = usize::MAX;

impl LdlFactor {
    /// Orders, analyses and factors the matrix whose upper-triangular
    /// entries are `upper` (each position at most once, diagonal included).
    pub fn new(n: usize, upper: &[(usize, usize, f64)]) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = upper.iter().map(|e| (e.0, e.1)).collect();
        let perm = minimum_degree_order(n, &pairs, 400);
        let mut iperm = vec![0; n];
        for (k, &i) in perm.iter().enumerate() {
            iperm[i] = k;
        }
        let mut count = vec![0usize; n + 1];
        let permuted: Vec<(usize, usize)> = upper
            .iter()
            .map(|&(i, j, _)| {
                let (a, b) = (iperm[i], iperm[j]);
                (a.min(b), a.max(b))
            })
            .collect();
        for &(_, c) in &permuted {
            count[c + 1] += 1;
        }
        for c in 0..n {
            count[c + 1] += count[c];
        }
        let ap = count.clone();
        let mut next = count;
        let mut ai = vec![0; upper.len()];
        let mut map = vec![0; upper.len()];
        for (k, &(r, c)) in permuted.iter().enumerate() {
            let pos = next[c];
            next[c] += 1;
            ai[pos] = r;
            map[k] = pos;
        }
        let (etree, lnz) = elimination_tree(n, &ap, &ai)?;
        let mut lp = vec![0; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let nnz_l = lp[n];
        let mut f = Self {
            n,
            perm,
            map,
            ap,
            ai,
            ax: vec![0.0; upper.len()],
            etree,
            lp,
            li: vec![0; nnz_l],
            lx: vec![0.0; nnz_l],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            positive: 0,
        };
        f.refactor(upper)?;
        Ok(f)
    }

    /// Numeric refactorization with new values on the same pattern.
    pub fn refactor(&mut self, upper: &[(usize, usize, f64)]) -> Result<()> {
        debug_assert_eq!(upper.len(), self.map.len());
        for (k, e) in upper.iter().enumerate() {
            self.ax[self.map[k]] = e.2;
        }
        self.numeric()
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Number of positive pivots.
    pub fn positive_pivots(&self) -> usize {
        self.positive
    }

    fn numeric(&mut self) -> Result<()> {
        let n = self.n;
        let mut y_vals = vec![0.0; n];
        let mut y_marker = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();
        self.positive = 0;
        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in self.ap[k]..self.ap[k + 1] {
                let b = self.ai[p];
                if b == k {
                    self.d[k] = self.ax[p];
                    continue;
                }
                y_vals[b] = self.ax[p];
                if !y_marker[b] {
                    y_marker[b] = true;
                    elim[0] = b;
                    let mut nnz_e = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if y_marker[next] {
                            break;
                        }
                        y_marker[next] = true;
                        elim[nnz_e] = next;
                        nnz_e += 1;
                        next = self.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..tmp {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                let l = yc * self.dinv[c];
                self.lx[tmp] = l;
                self.d[k] -= yc * l;
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_marker[c] = false;
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(Error::Numerical(format!("zero pivot at step {k} of LDL factorization")));
            }
            if self.d[k] > 0.0 {
                self.positive += 1;
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for (k, &i) in self.perm.iter().enumerate() {
            b[i] = x[k];
        }
    }
}

fn elimination_tree(n: usize, ap: &[usize], ai: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut work = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for p in ap[j]..ap[j + 1] {
            let mut i = ai[p];
            if i > j {
                return Err(Error::Numerical("matrix is not upper triangular".into()));
            }
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    Ok((etree, lnz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_quasi_definite(n1: usize, n2: usize, density: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = n1 + n2;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n1 {
            m[(i, i)] = 1.0 + rng.random::<f64>();
        }
        for i in n1..n {
            m[(i, i)] = -(0.5 + rng.random::<f64>());
        }
        for i in n1..n {
            for j in 0..n1 {
                if rng.random::<f64>() < density {
                    let v = rng.random::<f64>() * 2.0 - 1.0;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        m
    }

    fn upper_triplets(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..=j {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        t
    }

    #[test]
    fn solves_quasi_definite_systems() {
        for seed in 0..5 {
            let m = random_quasi_definite(30, 20, 0.15, seed);
            let f = LdlFactor::new(50, &upper_triplets(&m)).unwrap();
            assert_eq!(f.positive_pivots(), 30);
            let rhs: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
            let mut x = rhs.clone();
            f.solve(&mut x);
            let r = &m * DMatrix::from_column_slice(50, 1, &x) - DMatrix::from_column_slice(50, 1, &rhs);
            assert!(r.norm() < 1e-10, "residual {}", r.norm());
        }
    }

    #[test]
    fn refactor_reuses_pattern() {
        let m = random_quasi_definite(10, 6, 0.4, 9);
        let mut t = upper_triplets(&m);
        let mut f = LdlFactor::new(16, &t).unwrap();
        for e in t.iter_mut() {
            if e.0 == e.1 {
                e.2 *= 2.0;
            }
        }
        f.refactor(&t).unwrap();
        let mut m2 = m.clone();
        for i in 0..16 {
            m2[(i, i)] *= 2.0;
        }
        let mut x = vec![1.0; 16];
        f.solve(&mut x);
        let r = &m2 * DMatrix::from_column_slice(16, 1, &x) - DMatrix::from_element(16, 1, 1.0);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn min_degree_handles_arrow() {
        // arrow: hub 0 linked to all; the hub must wait until one leaf remains
        let pairs: Vec<(usize, usize)> = (1..8).map(|i| (0, i)).collect();
        let order = minimum_degree_order(8, &pairs, 100);
        assert!(order[6..].contains(&0));
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn csc_products() {
        let a = CscMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 2, 2.0), (0, 2, 3.0), (0, 0, 1.0)]);
        assert_eq!(a.mul(&[1.0, 1.0, 1.0]), vec![5.0, 2.0]);
        assert_eq!(a.mul_t(&[1.0, 1.0]), vec![2.0, 0.0, 5.0]);
    }
}
