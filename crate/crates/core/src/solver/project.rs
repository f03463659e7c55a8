//! Euclidean projections onto primitive cones in `svec` coordinates.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::matrix::{smat_dense, svec_dense, triangular_size};

/// A run of consecutive rows carrying one primitive cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScsCone {
    /// `s = 0`; the multiplier is free.
    Zero(usize),
    Nonneg(usize),
    Soc(usize),
    /// PSD cone of `d x d` matrices stored as `svec` (length `d(d+1)/2`).
    Psd(usize),
}

impl ScsCone {
    pub fn len(&self) -> usize {
        match *self {
            ScsCone::Zero(k) | ScsCone::Nonneg(k) | ScsCone::Soc(k) => k,
            ScsCone::Psd(d) => triangular_size(d),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn project_soc(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let t = x[0];
    let nrm = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
    if nrm <= t {
        return;
    }
    if nrm <= -t {
        x.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let a = 0.5 * (t + nrm);
    x[0] = a;
    let s = a / nrm;
    x[1..].iter_mut().for_each(|v| *v *= s);
}

pub fn project_psd(x: &mut [f64], d: usize) {
    if d == 1 {
        x[0] = x[0].max(0.0);
        return;
    }
    let m = smat_dense(x, d);
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return;
    }
    let mut out = DMatrix::zeros(d, d);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            let v = eig.eigenvectors.column(k);
            out += l * v * v.transpose();
        }
    }
    svec_dense(&out, x);
}

/// Projects `y` onto the dual cone `K*` of the row cones.
pub fn project_dual(cones: &[ScsCone], y: &mut [f64]) {
    let mut off = 0;
    for c in cones {
        let len = c.len();
        let seg = &mut y[off..off + len];
        match *c {
            ScsCone::Zero(_) => {}
            ScsCone::Nonneg(_) => seg.iter_mut().for_each(|v| *v = v.max(0.0)),
            ScsCone::Soc(_) => project_soc(seg),
            ScsCone::Psd(d) => project_psd(seg, d),
        }
        off += len;
    }
}

/// Projects `s` onto the primal cone `K` of the row cones.
pub fn project_primal(cones: &[ScsCone], s: &mut [f64]) {
    let mut off = 0;
    for c in cones {
        let len = c.len();
        let seg = &mut s[off..off + len];
        match *c {
            ScsCone::Zero(_) => seg.iter_mut().for_each(|v| *v = 0.0),
            ScsCone::Nonneg(_) => seg.iter_mut().for_each(|v| *v = v.max(0.0)),
            ScsCone::Soc(_) => project_soc(seg),
            ScsCone::Psd(d) => project_psd(seg, d),
        }
        off += len;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soc_cases() {
        let mut x = vec![5.0, 3.0, 4.0];
        project_soc(&mut x);
        assert_eq!(x, vec![5.0, 3.0, 4.0]);
        let mut x = vec![-5.0, 3.0, 4.0];
        project_soc(&mut x);
        assert_eq!(x, vec![0.0, 0.0, 0.0]);
        let mut x = vec![0.0, 3.0, 4.0];
        project_soc(&mut x);
        assert!((x[0] - 2.5).abs() < 1e-15 && (x[1] - 1.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn psd_projection_is_idempotent_and_orthogonal(v in proptest::collection::vec(-3.0f64..3.0, 10)) {
            let mut p = v.clone();
            project_psd(&mut p, 4);
            let mut q = p.clone();
            project_psd(&mut q, 4);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            // Moreau: v - p lies in -PSD and is orthogonal to p
            let r: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
            let dot: f64 = r.iter().zip(&p).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() < 1e-9);
            let mut neg: Vec<f64> = r.iter().map(|x| -x).collect();
            let before = neg.clone();
            project_psd(&mut neg, 4);
            for (a, b) in neg.iter().zip(&before) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
