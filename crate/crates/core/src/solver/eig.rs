//! Smallest eigenvalue of a sparse symmetric matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use super::ldl::LdlFactor;
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

const DENSE_LIMIT: usize = 200;

/// Smallest eigenvalue of a dense symmetric matrix.
pub fn dense_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `lambda_min(M)` to within `tol`. Dense eigendecomposition for `n <= 200`;
/// otherwise inverse iteration shifted below the Gershgorin bound, with a
/// dense fallback when that does not converge.
pub fn min_eigenvalue(m: &SymMatrix, tol: f64) -> Result<f64> {
    let n = m.n();
    if n <= DENSE_LIMIT {
        return Ok(dense_min_eigenvalue(&m.to_dense()));
    }
    match inverse_iteration(m, tol, 2000) {
        Ok(l) => Ok(l),
        Err(_) if n <= 4000 => Ok(dense_min_eigenvalue(&m.to_dense())),
        Err(e) => Err(e),
    }
}

fn inverse_iteration(m: &SymMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.n();
    let mut radius = vec![0.0f64; n];
    let diag = m.diagonal();
    for &(r, c, v) in m.entries() {
        if r != c {
            radius[r] += v.abs();
            radius[c] += v.abs();
        }
    }
    let lower = (0..n).map(|i| diag[i] - radius[i]).fold(f64::INFINITY, f64::min);
    let scale = m.max_abs().max(1.0);
    let shift = lower - 1e-3 * scale;
    let mut upper: Vec<(usize, usize, f64)> = Vec::with_capacity(m.nnz() + n);
    let mut has_diag = vec![false; n];
    for &(r, c, v) in m.entries() {
        if r == c {
            has_diag[r] = true;
            upper.push((r, c, v - shift));
        } else {
            upper.push((r, c, v));
        }
    }
    for (i, h) in has_diag.iter().enumerate() {
        if !h {
            upper.push((i, i, -shift));
        }
    }
    let f = LdlFactor::new(n, &upper)?;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let mut lambda = f64::NAN;
    for _ in 0..max_iter {
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let mv = m.mul_vec(&v);
        lambda = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        let res = mv.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if res <= tol {
            return Ok(lambda);
        }
        f.solve(&mut v);
    }
    Err(Error::Numerical(format!("inverse iteration did not converge (last estimate {lambda})")))
}
