//! Reference conic solver over primitive cones, problem checking and file
//! formats.
//!
//! A [`ConicProblem`] is solved through its slack form: the multipliers `y`
//! are the free variables and the entries of `Z = C - sum_i y_i A_i` are
//! constrained to the slack cone, so `X` is recovered as the multiplier of
//! the cone rows.

pub mod admm;
pub mod check;
pub mod csv;
pub mod eig;
pub mod json;
pub mod ldl;
pub mod project;
pub mod sdpa;

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::matrix::{smat_dense, svec_index, triangular_size, SymMatrix};
use crate::problem::{ConeFamily, ConicProblem, Form, Solution, Status};
use admm::{solve_scs, AdmmSettings, ScsProblem, ScsStatus};
use ldl::CscMatrix;
use project::ScsCone;

pub use csv::{sequence_csv, solution_csv};
pub use eig::min_eigenvalue;
pub use json::{export_json, export_solution_json, import_json, import_solution_json};
pub use sdpa::{export_sdpa, import_sdpa};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Relative tolerance `eps > 0`.
    pub eps: f64,
    /// Data equilibration toggle.
    pub scaling: bool,
    /// Seed for randomized internals (the reference method is deterministic).
    pub seed: u64,
    pub anderson_mem: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { max_iter: 50_000, eps: 1e-6, scaling: true, seed: 0, anderson_mem: 10 }
    }
}

impl SolverSettings {
    pub fn with_eps(eps: f64) -> Self {
        Self { eps, ..Self::default() }
    }
}

/// Backend seam: anything that solves problems over primitive cones.
pub trait ConicSolver {
    fn solve(&self, p: &ConicProblem) -> Result<Solution>;
}

/// The built-in operator-splitting backend.
#[derive(Debug, Clone, Default)]
pub struct AdmmSolver {
    pub settings: SolverSettings,
}

impl AdmmSolver {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings }
    }
}

impl ConicSolver for AdmmSolver {
    fn solve(&self, p: &ConicProblem) -> Result<Solution> {
        solve(p, &self.settings)
    }
}

/// Row layout of one block in the slack form.
#[derive(Debug, Clone)]
enum RowMap {
    /// Block has no rows (slack cone is free).
    Skip,
    /// Diagonal entries map to rows `start..start + dim`.
    Diagonal { start: usize },
    /// Rotated cone stored as a second-order cone after an orthogonal map.
    Rotated { start: usize },
    /// `svec` rows starting at `start`.
    Svec { start: usize },
}

struct Lowered {
    scs: ScsProblem,
    maps: Vec<RowMap>,
}

fn lower(p: &ConicProblem) -> Result<Lowered> {
    if !p.is_primitive() {
        return Err(Error::UnsupportedCone(
            "the solver accepts primitive cones only; lower structured cones with decomp first".into(),
        ));
    }
    let off = p.offsets();
    let mut maps = Vec::with_capacity(p.blocks.len());
    let mut cones = Vec::new();
    let mut rows = 0;
    for (k, blk) in p.blocks.iter().enumerate() {
        let cone = p.dual_cone(k);
        let d = blk.dim;
        let map = match cone.family {
            ConeFamily::Free => RowMap::Skip,
            ConeFamily::Zero => {
                cones.push(ScsCone::Zero(d));
                RowMap::Diagonal { start: rows }
            }
            ConeFamily::Nonneg => {
                cones.push(ScsCone::Nonneg(d));
                RowMap::Diagonal { start: rows }
            }
            ConeFamily::SecondOrder => {
                cones.push(ScsCone::Soc(d));
                RowMap::Diagonal { start: rows }
            }
            ConeFamily::RotatedSecondOrder => {
                cones.push(ScsCone::Soc(d));
                RowMap::Rotated { start: rows }
            }
            ConeFamily::Psd => {
                cones.push(ScsCone::Psd(d));
                RowMap::Svec { start: rows }
            }
            _ => unreachable!("primitive checked above"),
        };
        rows += match map {
            RowMap::Skip => 0,
            RowMap::Svec { .. } => triangular_size(d),
            _ => d,
        };
        maps.push(map);
    }
    let owner = {
        let mut o = Vec::with_capacity(p.n());
        for (k, b) in p.blocks.iter().enumerate() {
            o.extend(std::iter::repeat_n(k, b.dim));
        }
        o
    };
    let vectorize = |m: &SymMatrix, col: usize, out: &mut Vec<(usize, usize, f64)>| {
        for &(r, c, v) in m.entries() {
            let k = owner[r];
            let (lr, lc) = (r - off[k], c - off[k]);
            match maps[k] {
                RowMap::Skip => {}
                RowMap::Diagonal { start } => out.push((start + lr, col, v)),
                RowMap::Rotated { start } => match lr {
                    0 => {
                        out.push((start, col, v * FRAC_1_SQRT_2));
                        out.push((start + 1, col, v * FRAC_1_SQRT_2));
                    }
                    1 => {
                        out.push((start, col, v * FRAC_1_SQRT_2));
                        out.push((start + 1, col, -v * FRAC_1_SQRT_2));
                    }
                    _ => out.push((start + lr, col, v)),
                },
                RowMap::Svec { start } => {
                    let s = if lr == lc { v } else { v * std::f64::consts::SQRT_2 };
                    out.push((start + svec_index(lr, lc), col, s));
                }
            }
        }
    };
    let mut trip = Vec::new();
    for (i, a) in p.a.iter().enumerate() {
        vectorize(a, i, &mut trip);
    }
    let a = CscMatrix::from_triplets(rows, p.m(), &trip);
    let mut ct = Vec::new();
    vectorize(&p.c, 0, &mut ct);
    let mut b = vec![0.0; rows];
    for (r, _, v) in ct {
        b[r] += v;
    }
    let c: Vec<f64> = p.b.iter().map(|v| -v).collect();
    Ok(Lowered { scs: ScsProblem { a, b, c, cones }, maps })
}

/// Maps the row multipliers back to the block-diagonal `X`.
fn recover_x(p: &ConicProblem, maps: &[RowMap], ys: &[f64]) -> SymMatrix {
    let off = p.offsets();
    let mut trip = Vec::new();
    for (k, blk) in p.blocks.iter().enumerate() {
        let d = blk.dim;
        let o = off[k];
        match maps[k] {
            RowMap::Skip => {}
            RowMap::Diagonal { start } => {
                for i in 0..d {
                    trip.push((o + i, o + i, ys[start + i]));
                }
            }
            RowMap::Rotated { start } => {
                let (a, b) = (ys[start], ys[start + 1]);
                trip.push((o, o, (a + b) * FRAC_1_SQRT_2));
                trip.push((o + 1, o + 1, (a - b) * FRAC_1_SQRT_2));
                for i in 2..d {
                    trip.push((o + i, o + i, ys[start + i]));
                }
            }
            RowMap::Svec { start } => {
                let m = smat_dense(&ys[start..start + triangular_size(d)], d);
                for j in 0..d {
                    for i in 0..=j {
                        trip.push((o + i, o + j, m[(i, j)]));
                    }
                }
            }
        }
    }
    SymMatrix::from_triplets(p.n(), trip.into_iter().filter(|t| t.2 != 0.0)).expect("distinct positions")
}

/// Solves a problem over primitive cones.
pub fn solve(p: &ConicProblem, settings: &SolverSettings) -> Result<Solution> {
    if settings.eps <= 0.0 {
        return Err(Error::InvalidArgument("solver tolerance must be positive".into()));
    }
    p.validate()?;
    let low = lower(p)?;
    let st = AdmmSettings {
        max_iter: settings.max_iter,
        eps: settings.eps,
        normalize: settings.scaling,
        anderson_mem: settings.anderson_mem,
        ..AdmmSettings::default()
    };
    let r = solve_scs(&low.scs, &st)?;
    let status = match (r.status, p.form) {
        (ScsStatus::Solved, _) => Status::Optimal,
        (ScsStatus::MaxIter, _) => Status::MaxIter,
        (ScsStatus::Failed, _) => Status::NumericalError,
        (ScsStatus::Infeasible, Form::Dual) => Status::Infeasible,
        (ScsStatus::Infeasible, Form::Primal) => Status::Unbounded,
        (ScsStatus::Unbounded, Form::Dual) => Status::Unbounded,
        (ScsStatus::Unbounded, Form::Primal) => Status::Infeasible,
    };
    let finite = |v: &[f64]| v.iter().all(|t| t.is_finite());
    let y: Vec<f64> = if finite(&r.x) { r.x.clone() } else { vec![0.0; p.m()] };
    let ys: Vec<f64> = if finite(&r.y) { r.y.clone() } else { vec![0.0; low.scs.b.len()] };
    let x = recover_x(p, &low.maps, &ys);
    let z = p.slack(&y);
    let report = check::residuals(p, &x, &y, &z)?;
    Ok(Solution {
        status,
        primal_objective: p.c.inner(&x),
        dual_objective: p.b.iter().zip(&y).map(|(a, b)| a * b).sum(),
        x,
        y,
        z,
        primal_residual: report.primal_equality.max(report.primal_cone),
        dual_residual: report.dual_cone,
        iterations: r.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Block, ConeKind};

    #[test]
    fn lp_min_x_at_least_one() {
        // primal: min x s.t. x - t = 1 with x, t >= 0
        let c = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let a = SymMatrix::from_diagonal(&[1.0, -1.0]);
        let p = ConicProblem::new(Form::Primal, vec![Block::new(2, ConeKind::nonneg())], c, vec![a], vec![1.0]).unwrap();
        let s = solve(&p, &SolverSettings::with_eps(1e-7)).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.primal_objective - 1.0).abs() < 1e-6);
        assert!((s.dual_objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn soc_norm_bound() {
        // max -t s.t. (t, 3, 4) in SOC, as a dual-form problem in y = t
        let c = SymMatrix::from_diagonal(&[0.0, 3.0, 4.0]);
        let a = SymMatrix::from_diagonal(&[-1.0, 0.0, 0.0]);
        let p = ConicProblem::new(Form::Dual, vec![Block::new(3, ConeKind::soc())], c, vec![a], vec![-1.0]).unwrap();
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.y[0] - 5.0).abs() < 1e-5);
    }

    #[test]
    fn small_sdp() {
        // min X11 + X22 s.t. X12 = 1, X PSD
        let a = SymMatrix::from_triplets(2, [(0, 1, 0.5)]).unwrap();
        let p = ConicProblem::new(Form::Primal, vec![Block::new(2, ConeKind::psd())], SymMatrix::identity(2), vec![a], vec![1.0])
            .unwrap();
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.primal_objective - 2.0).abs() < 1e-5);
        assert!((s.x.get(0, 1) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn rotated_cone() {
        // max -t s.t. (t, 1, 1) in RSOC: 2 t >= 1, optimum t = 1/2
        let c = SymMatrix::from_diagonal(&[0.0, 1.0, 1.0]);
        let a = SymMatrix::from_diagonal(&[-1.0, 0.0, 0.0]);
        let p = ConicProblem::new(Form::Dual, vec![Block::new(3, ConeKind::rsoc())], c, vec![a], vec![-1.0]).unwrap();
        let s = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.y[0] - 0.5).abs() < 1e-5, "{}", s.y[0]);
    }

    #[test]
    fn infeasible_and_unbounded_statuses() {
        // primal: x >= 0 with x = -1 is infeasible
        let p = ConicProblem::new(
            Form::Primal,
            vec![Block::new(1, ConeKind::nonneg())],
            SymMatrix::from_diagonal(&[1.0]),
            vec![SymMatrix::from_diagonal(&[1.0])],
            vec![-1.0],
        )
        .unwrap();
        assert_eq!(solve(&p, &SolverSettings::default()).unwrap().status, Status::Infeasible);
        // primal: min -x with x free and no constraints is unbounded
        let p = ConicProblem::new(
            Form::Primal,
            vec![Block::new(1, ConeKind::free())],
            SymMatrix::from_diagonal(&[-1.0]),
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(solve(&p, &SolverSettings::default()).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn structured_cones_are_rejected() {
        let p = ConicProblem::new(Form::Primal, vec![Block::new(2, ConeKind::dd())], SymMatrix::identity(2), vec![], vec![])
            .unwrap();
        assert!(matches!(solve(&p, &SolverSettings::default()), Err(Error::UnsupportedCone(_))));
    }
}
