//! Sparse symmetric matrices and the isometric `svec` vectorization.
//!
//! A [`SymMatrix`] stores the upper triangle of a symmetric matrix as sorted
//! `(row, col, value)` triplets with `row <= col`. Indices are 0-based inside
//! the crate; file formats convert to 1-based on the way out.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Sparse symmetric matrix in upper-triangular triplet form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSymMatrix", into = "RawSymMatrix")]
pub struct SymMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymMatrix {
    /// The zero matrix of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { n, entries: (0..n).map(|i| (i, i, 1.0)).collect() }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let entries = diag
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, i, *v))
            .collect();
        Self { n: diag.len(), entries }
    }

    /// Builds a matrix from triplets. Lower-triangle triplets are mirrored to
    /// the upper triangle; a key given twice (in either triangle) is an error.
    /// Exact zeros are dropped.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut map = BTreeMap::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::IndexOutOfRange { row: r, col: c, n });
            }
            let key = if r <= c { (r, c) } else { (c, r) };
            if map.insert(key, v).is_some() {
                return Err(Error::DuplicateEntry { row: key.0, col: key.1 });
            }
        }
        Ok(Self::from_map(n, map))
    }

    /// Builds a matrix from triplets, summing repeated keys. Used by internal
    /// assemblers that intentionally accumulate contributions.
    pub fn from_summed_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::IndexOutOfRange { row: r, col: c, n });
            }
            let key = if r <= c { (r, c) } else { (c, r) };
            *map.entry(key).or_insert(0.0) += v;
        }
        Ok(Self::from_map(n, map))
    }

    fn from_map(n: usize, map: BTreeMap<(usize, usize), f64>) -> Self {
        let entries = map
            .into_iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|((r, c), v)| (r, c, v))
            .collect();
        Self { n, entries }
    }

    /// Upper triangle of a dense matrix; entries with `|v| <= drop_tol` are skipped.
    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "from_dense needs a square matrix");
        let n = m.nrows();
        let mut entries = Vec::new();
        for r in 0..n {
            for c in r..n {
                let v = 0.5 * (m[(r, c)] + m[(c, r)]);
                if v.abs() > drop_tol {
                    entries.push((r, c, v));
                }
            }
        }
        Self { n, entries }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored upper-triangle triplets, sorted by `(row, col)`.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let key = if r <= c { (r, c) } else { (c, r) };
        match self.entries.binary_search_by(|e| (e.0, e.1).cmp(&key)) {
            Ok(pos) => self.entries[pos].2,
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            if r == c {
                d[r] = v;
            }
        }
        d
    }

    /// Frobenius inner product `sum_ij A_ij B_ij`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.entries.len() && j < other.entries.len() {
            let a = &self.entries[i];
            let b = &other.entries[j];
            match (a.0, a.1).cmp(&(b.0, b.1)) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    let w = if a.0 == a.1 { 1.0 } else { 2.0 };
                    acc += w * a.2 * b.2;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> SymMatrix {
        let entries = if alpha == 0.0 {
            Vec::new()
        } else {
            self.entries.iter().map(|&(r, c, v)| (r, c, alpha * v)).collect()
        };
        SymMatrix { n: self.n, entries }
    }

    /// `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: f64, other: &SymMatrix, beta: f64) -> Result<SymMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!("{} vs {}", self.n, other.n)));
        }
        let it = self
            .entries
            .iter()
            .map(|&(r, c, v)| (r, c, alpha * v))
            .chain(other.entries.iter().map(|&(r, c, v)| (r, c, beta * v)));
        SymMatrix::from_summed_triplets(self.n, it)
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// Principal submatrix `E_C M E_C^T` on the sorted index list `idx`.
    pub fn principal_submatrix(&self, idx: &[usize]) -> SymMatrix {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            pos[i] = k;
        }
        let mut entries: Vec<(usize, usize, f64)> = self
            .entries
            .iter()
            .filter(|e| pos[e.0] != usize::MAX && pos[e.1] != usize::MAX)
            .map(|&(r, c, v)| {
                let (a, b) = (pos[r], pos[c]);
                if a <= b {
                    (a, b, v)
                } else {
                    (b, a, v)
                }
            })
            .collect();
        entries.sort_by_key(|a| (a.0, a.1));
        SymMatrix { n: idx.len(), entries }
    }

    /// Embedding `E_C^T M E_C` of this `|C| x |C|` matrix into dimension `n`.
    pub fn embed(&self, idx: &[usize], n: usize) -> Result<SymMatrix> {
        if idx.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "embedding {}x{} block with {} indices",
                self.n,
                self.n,
                idx.len()
            )));
        }
        SymMatrix::from_triplets(n, self.entries.iter().map(|&(r, c, v)| (idx[r], idx[c], v)))
    }

    /// Off-diagonal positions `(i, j)`, `i < j`, holding nonzeros.
    pub fn off_diagonal_pattern(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().filter(|e| e.0 != e.1).map(|e| (e.0, e.1))
    }
}

#[derive(Serialize, Deserialize)]
struct RawSymMatrix {
    n: usize,
    /// 1-based `(row, col, value)` triplets.
    entries: Vec<(usize, usize, f64)>,
}

impl TryFrom<RawSymMatrix> for SymMatrix {
    type Error = Error;
    fn try_from(raw: RawSymMatrix) -> Result<Self> {
        let mut trip = Vec::with_capacity(raw.entries.len());
        for (r, c, v) in raw.entries {
            if r == 0 || c == 0 {
                return Err(Error::IndexOutOfRange { row: r, col: c, n: raw.n });
            }
            trip.push((r - 1, c - 1, v));
        }
        SymMatrix::from_triplets(raw.n, trip)
    }
}

impl From<SymMatrix> for RawSymMatrix {
    fn from(m: SymMatrix) -> Self {
        RawSymMatrix {
            n: m.n,
            entries: m.entries.into_iter().map(|(r, c, v)| (r + 1, c + 1, v)).collect(),
        }
    }
}

/// Position of `(i, j)`, `i <= j`, in the column-major upper-triangle order
/// used by [`svec`].
#[inline]
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

/// Inverse of [`svec_index`].
pub fn svec_position(k: usize) -> (usize, usize) {
    // largest j with j(j+1)/2 <= k
    let mut j = (((8 * k + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    while (j + 1) * (j + 2) / 2 <= k {
        j += 1;
    }
    while j * (j + 1) / 2 > k {
        j -= 1;
    }
    (k - j * (j + 1) / 2, j)
}

pub fn triangular_size(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Dimension `n` with `n(n+1)/2 == len`, if any.
pub fn triangular_root(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (triangular_size(n) == len).then_some(n)
}

/// Isometric vectorization of a symmetric matrix: upper triangle in
/// column-major order with off-diagonal entries scaled by `sqrt(2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SVec {
    n: usize,
    data: Vec<f64>,
}

impl SVec {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        let n = triangular_root(data.len()).ok_or(Error::NonTriangularLength(data.len()))?;
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &SVec) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

pub fn svec(m: &SymMatrix) -> SVec {
    let mut data = vec![0.0; triangular_size(m.n())];
    for &(r, c, v) in m.entries() {
        data[svec_index(r, c)] = if r == c { v } else { v * std::f64::consts::SQRT_2 };
    }
    SVec { n: m.n(), data }
}

pub fn smat(v: &SVec) -> SymMatrix {
    let mut entries = Vec::new();
    for c in 0..v.n {
        for r in 0..=c {
            let x = v.data[svec_index(r, c)];
            if x != 0.0 {
                entries.push((r, c, if r == c { x } else { x / std::f64::consts::SQRT_2 }));
            }
        }
    }
    entries.sort_by_key(|a| (a.0, a.1));
    SymMatrix { n: v.n, entries }
}

/// Dense svec of a dense symmetric matrix (used by the solver's cone projections).
pub fn svec_dense(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    for c in 0..n {
        for r in 0..=c {
            out[svec_index(r, c)] =
                if r == c { m[(r, c)] } else { std::f64::consts::SQRT_2 * m[(r, c)] };
        }
    }
}

pub fn smat_dense(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..=c {
            let x = v[svec_index(r, c)];
            if r == c {
                m[(r, c)] = x;
            } else {
                let x = x / std::f64::consts::SQRT_2;
                m[(r, c)] = x;
                m[(c, r)] = x;
            }
        }
    }
    m
}
