//! Independent residual checker for primal-dual triples.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::cones;
use crate::error::Result;
use crate::matrix::SymMatrix;
use crate::problem::{ConeFamily, ConeKind, ConicProblem, Solution};

/// Relative residuals of `(X, y, Z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `|A(X) - b| / (1 + |b|)`.
    pub primal_equality: f64,
    /// `|C - Z - sum y_i A_i|_F / (1 + |C|_F)`.
    pub dual_equality: f64,
    /// Distance of `X` to `K_P`, relative to `1 + |X|_F`.
    pub primal_cone: f64,
    /// Distance of `Z` to `K_D`, relative to `1 + |C|_F`.
    pub dual_cone: f64,
    /// `|<C,X> - b'y| / (1 + |<C,X>| + |b'y|)`.
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal_equality.max(self.dual_equality).max(self.primal_cone).max(self.dual_cone).max(self.gap)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn soc_distance(v: &[f64]) -> f64 {
    let t = v[0];
    let r = norm(&v[1..]);
    if r <= t {
        0.0
    } else if r <= -t {
        norm(v)
    } else {
        (r - t) / std::f64::consts::SQRT_2
    }
}

/// Euclidean distance from a dense block to a cone (exact for primitive
/// cones; for structured cones, the shift needed to enter the cone, scaled
/// by the block dimension).
pub fn cone_distance(m: &DMatrix<f64>, cone: &ConeKind) -> Result<f64> {
    let d = m.nrows();
    if d == 0 {
        return Ok(0.0);
    }
    let diag: Vec<f64> = (0..d).map(|i| m[(i, i)]).collect();
    Ok(match &cone.family {
        ConeFamily::Free => 0.0,
        ConeFamily::Zero => norm(&diag),
        ConeFamily::Nonneg => norm(&diag.iter().map(|v| v.min(0.0)).collect::<Vec<_>>()),
        ConeFamily::SecondOrder => soc_distance(&diag),
        ConeFamily::RotatedSecondOrder => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut v = diag.clone();
            v[0] = (diag[0] + diag[1]) * s;
            v[1] = (diag[0] - diag[1]) * s;
            soc_distance(&v)
        }
        ConeFamily::Psd => {
            let e = SymmetricEigen::new(m.clone()).eigenvalues;
            e.iter().map(|l| l.min(0.0).powi(2)).sum::<f64>().sqrt()
        }
        _ => {
            let margin = cones::margin_dense(m, cone)?;
            (-margin).max(0.0) * (d as f64).sqrt()
        }
    })
}

/// Recomputes every residual from the problem data.
pub fn residuals(p: &ConicProblem, x: &SymMatrix, y: &[f64], z: &SymMatrix) -> Result<Residuals> {
    let ax = p.apply_constraints(x);
    let r: Vec<f64> = ax.iter().zip(&p.b).map(|(a, b)| a - b).collect();
    let primal_equality = norm(&r) / (1.0 + norm(&p.b));
    let recomputed = p.slack(y);
    let diff = recomputed.axpby(1.0, z, -1.0)?;
    let cn = p.c.frobenius_norm();
    let dual_equality = diff.frobenius_norm() / (1.0 + cn);
    let mut pc = 0.0f64;
    let mut dc = 0.0f64;
    for k in 0..p.blocks.len() {
        let xk = p.block_dense(x, k);
        let zk = p.block_dense(z, k);
        pc = pc.hypot(cone_distance(&xk, &p.primal_cone(k))?);
        dc = dc.hypot(cone_distance(&zk, &p.dual_cone(k))?);
    }
    let pobj = p.c.inner(x);
    let dobj: f64 = p.b.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(Residuals {
        primal_equality,
        dual_equality,
        primal_cone: pc / (1.0 + x.frobenius_norm()),
        dual_cone: dc / (1.0 + cn),
        gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
    })
}

/// Replays a solution through [`residuals`] and accepts it when every
/// residual is at most `10 * eps`.
pub fn verify(p: &ConicProblem, s: &Solution, eps: f64) -> Result<bool> {
    Ok(residuals(p, &s.x, &s.y, &s.z)?.max() <= 10.0 * eps)
}
