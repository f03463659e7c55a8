//! Tightness certification and iterative change of basis.

use nalgebra::{Cholesky, DMatrix};

use crate::decomp::{solve_decomposed, ConeAssignment, Recovered, Side};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::problem::{ConicProblem, Solution, Status};
use crate::solver::eig::dense_min_eigenvalue;
use crate::solver::SolverSettings;
use crate::sparsity::CliqueCover;

#[derive(Debug, Clone, PartialEq)]
pub struct TightnessReport {
    pub side: Side,
    /// `(problem block, clique)` of each checked matrix.
    pub labels: Vec<(usize, usize)>,
    pub lambda_min: Vec<f64>,
    pub tight: bool,
    pub tol: f64,
}

impl TightnessReport {
    fn new(side: Side, labels: Vec<(usize, usize)>, lambda_min: Vec<f64>, tol: f64) -> Self {
        let tight = lambda_min.iter().all(|&l| l >= -tol);
        Self { side, labels, lambda_min, tight, tol }
    }

    pub fn worst(&self) -> f64 {
        self.lambda_min.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Checks the blocks that prove the approximation optimal for the PSD
/// problem: the dual clique blocks `S_k` on the completion side, the
/// primal clique blocks `X_k` on the construction side.
pub fn certify(r: &Recovered, side: Side, tol: f64) -> Result<TightnessReport> {
    if r.status != Status::Optimal {
        return Err(Error::NotSolved(r.status.to_string()));
    }
    let blocks = match side {
        Side::Completion => &r.clique_z,
        Side::Construction => &r.clique_x,
    };
    let mut labels = Vec::new();
    let mut lambda = Vec::new();
    for (b, cl) in blocks.iter().enumerate() {
        for (k, m) in cl.iter().enumerate() {
            labels.push((r.blocks[b], k));
            lambda.push(dense_min_eigenvalue(&m.to_dense()));
        }
    }
    Ok(TightnessReport::new(side, labels, lambda, tol))
}

/// Certification from a plain solution of the original problem. On the
/// completion side the whole slack block `Z = C - sum y_i A_i` is checked,
/// which for a chordal cover is equivalent to a PSD clique split of `Z`.
pub fn certify_solution(p: &ConicProblem, s: &Solution, cover: &CliqueCover, block: usize, side: Side, tol: f64) -> Result<TightnessReport> {
    if s.status != Status::Optimal {
        return Err(Error::NotSolved(s.status.to_string()));
    }
    if s.y.len() != p.m() || s.x.n() != p.n() {
        return Err(Error::DimensionMismatch("solution does not match the problem".into()));
    }
    let off = p.offsets();
    if block >= p.blocks.len() || cover.n() != p.blocks[block].dim {
        return Err(Error::DimensionMismatch("cover does not match the block".into()));
    }
    let idx: Vec<usize> = (off[block]..off[block + 1]).collect();
    match side {
        Side::Completion => {
            let z = p.slack(&s.y).principal_submatrix(&idx);
            let l = dense_min_eigenvalue(&z.to_dense());
            Ok(TightnessReport::new(side, vec![(block, 0)], vec![l], tol))
        }
        Side::Construction => {
            let x = s.x.principal_submatrix(&idx);
            let mut labels = Vec::new();
            let mut lambda = Vec::new();
            for (k, c) in cover.cliques.iter().enumerate() {
                labels.push((block, k));
                lambda.push(dense_min_eigenvalue(&x.principal_submatrix(c).to_dense()));
            }
            Ok(TightnessReport::new(side, labels, lambda, tol))
        }
    }
}

/// Per-clique lower-triangular bases for one assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub factors: Vec<DMatrix<f64>>,
    pub iteration: usize,
}

/// Default relative shift for [`regularized_cholesky`].
pub const BASIS_SHIFT: f64 = 1e-3;
/// Largest shift tried before a change-of-basis run gives up on a step.
pub const MAX_BASIS_SHIFT: f64 = 1e-1;

impl BasisSet {
    pub fn identity(a: &ConeAssignment) -> Self {
        let factors = a.cover.cliques.iter().map(|c| DMatrix::identity(c.len(), c.len())).collect();
        Self { factors, iteration: 0 }
    }

    pub fn from_blocks(blocks: &[SymMatrix], shift: f64, iteration: usize) -> Result<Self> {
        let factors = blocks.iter().map(|b| regularized_cholesky(b, shift)).collect::<Result<Vec<_>>>()?;
        Ok(Self { factors, iteration })
    }

    /// Factors of the blocks of `r` that drive the next step: the primal
    /// clique blocks on the completion side, the dual ones on the
    /// construction side.
    pub fn from_recovered(a: &ConeAssignment, r: &Recovered, shift: f64, iteration: usize) -> Result<Self> {
        let pos = r
            .blocks
            .iter()
            .position(|&b| b == a.block)
            .ok_or_else(|| Error::InvalidArgument("assignment block not recovered".into()))?;
        let blocks = match a.side {
            Side::Completion => &r.clique_x[pos],
            Side::Construction => &r.clique_z[pos],
        };
        Self::from_blocks(blocks, shift, iteration)
    }
}

/// Cholesky factor of `M + mu I` with `mu = max(0, -lambda_min) + shift *
/// lambda_max`. The relative shift keeps the next basis well conditioned
/// when `M` is numerically rank deficient.
pub fn regularized_cholesky(m: &SymMatrix, shift: f64) -> Result<DMatrix<f64>> {
    let d = m.to_dense();
    let n = d.nrows();
    let eig = d.clone().symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    let mu = (-lo).max(0.0) + shift * hi.max(1e-9);
    let shifted = d + DMatrix::identity(n, n) * mu;
    Cholesky::new(shifted)
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("clique factorization failed after regularization".into()))
}

/// Cost in the original objective together with the recovered iterate.
#[derive(Debug, Clone)]
pub struct CobIterate {
    pub cost: f64,
    pub recovered: Recovered,
}

/// Solves with each clique cone replaced by `{L_k Q L_k' : Q in K_k}`.
pub fn cob_step(p: &ConicProblem, a: &ConeAssignment, basis: &BasisSet, settings: &SolverSettings) -> Result<CobIterate> {
    if basis.factors.len() != a.cover.len() {
        return Err(Error::DimensionMismatch(format!("{} factors for {} cliques", basis.factors.len(), a.cover.len())));
    }
    let mut a = a.clone();
    a.bases = a
        .kinds
        .iter()
        .zip(&basis.factors)
        .map(|(k, l)| if k.is_psd() { None } else { Some(l.clone()) })
        .collect();
    let r = solve_decomposed(p, std::slice::from_ref(&a), a.side, settings)?;
    match (r.status, r.recovered) {
        (Status::Optimal | Status::MaxIter, Some(rec)) => Ok(CobIterate { cost: rec.value, recovered: rec }),
        (s, _) => Err(Error::NotSolved(s.to_string())),
    }
}

#[derive(Debug, Clone)]
pub struct CobRun {
    /// Cost per iteration, starting with the plain solve at iteration 0.
    pub costs: Vec<f64>,
    pub last: Recovered,
    /// Basis of the last iterate.
    pub basis: BasisSet,
    /// Set only when the last iterate certifies as tight.
    pub certified: bool,
}

/// Consecutive small improvements after which the iteration stops.
pub const STALL_WINDOW: usize = 3;

/// Runs up to `max_iters` change-of-basis steps after the plain solve.
/// Stops early once the relative improvement stays below `stall_tol` for
/// [`STALL_WINDOW`] consecutive steps. Costs are nonincreasing on the
/// completion side and nondecreasing on the construction side. A step the
/// solver does not converge on is retried with a tenfold basis shift up to
/// [`MAX_BASIS_SHIFT`]; if none converges the run ends at the previous
/// iterate.
pub fn cob_run(p: &ConicProblem, a: &ConeAssignment, max_iters: usize, stall_tol: f64, settings: &SolverSettings) -> Result<CobRun> {
    let mut basis = BasisSet::identity(a);
    let first = cob_step(p, a, &basis, settings).map_err(|e| match e {
        Error::NotSolved(s) => Error::NotSolved(format!("initial solve: {s}")),
        e => e,
    })?;
    let mut costs = vec![first.cost];
    let mut last = first.recovered;
    if a.kinds.iter().all(|k| k.is_psd()) {
        let certified = certified(&last, a.side);
        return Ok(CobRun { costs, last, basis, certified });
    }
    let mut stalls = 0;
    for _ in 0..max_iters {
        let mut step = None;
        let mut shift = BASIS_SHIFT;
        while shift <= MAX_BASIS_SHIFT * (1.0 + 1e-9) {
            let b = BasisSet::from_recovered(a, &last, shift, basis.iteration + 1)?;
            let it = cob_step(p, a, &b, settings)?;
            if it.recovered.status == Status::Optimal {
                step = Some((it, b));
                break;
            }
            shift *= 10.0;
        }
        let Some((it, b)) = step else { break };
        let prev = *costs.last().unwrap();
        let gain = match a.side {
            Side::Completion => prev - it.cost,
            Side::Construction => it.cost - prev,
        };
        costs.push(it.cost);
        last = it.recovered;
        basis = b;
        if gain <= stall_tol * (1.0 + prev.abs()) {
            stalls += 1;
            if stalls >= STALL_WINDOW {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    let certified = certified(&last, a.side);
    Ok(CobRun { costs, last, basis, certified })
}

fn certified(r: &Recovered, side: Side) -> bool {
    certify(r, side, 1e-5).map(|t| t.tight).unwrap_or(false)
}
