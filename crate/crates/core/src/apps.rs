//! Problem generators: H-infinity LMIs for networked LTI systems, block-arrow
//! SDPs and sea-star networks.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomp::{assign_cones, block_cover, solve_decomposed, Side};
use crate::error::{Error, Result};
use crate::lmi::LmiBuilder;
use crate::matrix::SymMatrix;
use crate::problem::{Block, ConeKind, ConicProblem, Form, Status};
use crate::solver::SolverSettings;

/// `x' = A x + B u`, `y = C x + D u`, with states grouped into agents.
#[derive(Debug, Clone, PartialEq)]
pub struct LTISystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// State indices of each agent.
    pub partition: Vec<Vec<usize>>,
    /// Coupled agent pairs.
    pub adjacency: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct DenseFile {
    rows: usize,
    cols: usize,
    /// `[row, col, value]`, 1-based like problem files.
    entries: Vec<(usize, usize, f64)>,
}

impl DenseFile {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    entries.push((i + 1, j + 1, m[(i, j)]));
                }
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), entries }
    }

    fn to(&self) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            if i == 0 || j == 0 || i > self.rows || j > self.cols {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) outside a {}x{} matrix", self.rows, self.cols)));
            }
            m[(i - 1, j - 1)] = v;
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct SystemFile {
    a: DenseFile,
    b: DenseFile,
    c: DenseFile,
    d: DenseFile,
    /// 1-based state indices per agent.
    partition: Vec<Vec<usize>>,
    /// 1-based agent pairs.
    #[serde(default)]
    adjacency: Vec<(usize, usize)>,
}

fn shift_up(v: &[Vec<usize>]) -> Vec<Vec<usize>> {
    v.iter().map(|b| b.iter().map(|i| i + 1).collect()).collect()
}

fn shift_down(v: Vec<Vec<usize>>) -> Result<Vec<Vec<usize>>> {
    v.into_iter()
        .map(|b| b.into_iter().map(|i| i.checked_sub(1).ok_or_else(|| Error::InvalidArgument("indices are 1-based".into()))).collect())
        .collect()
}

impl LTISystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let s = Self { partition: vec![(0..n).collect()], adjacency: Vec::new(), a, b, c, d };
        s.validate()?;
        Ok(s)
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m, p) = (self.a.nrows(), self.b.ncols(), self.c.nrows());
        let dims = |what: &str, r: usize, c: usize, er: usize, ec: usize| {
            if r != er || c != ec {
                Err(Error::DimensionMismatch(format!("{what} is {r}x{c}, expected {er}x{ec}")))
            } else {
                Ok(())
            }
        };
        dims("A", self.a.nrows(), self.a.ncols(), n, n)?;
        dims("B", self.b.nrows(), self.b.ncols(), n, m)?;
        dims("C", self.c.nrows(), self.c.ncols(), p, n)?;
        dims("D", self.d.nrows(), self.d.ncols(), p, m)?;
        let mut seen = vec![false; n];
        for part in &self.partition {
            for &i in part {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidArgument("agent partition must split the states".into()));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("agent partition must split the states".into()));
        }
        Ok(())
    }

    /// Largest real part of the eigenvalues of `A`.
    pub fn spectral_abscissa(&self) -> f64 {
        spectral_abscissa(&self.a)
    }

    pub fn to_json(&self) -> String {
        let f = SystemFile {
            a: DenseFile::from(&self.a),
            b: DenseFile::from(&self.b),
            c: DenseFile::from(&self.c),
            d: DenseFile::from(&self.d),
            partition: shift_up(&self.partition),
            adjacency: self.adjacency.iter().map(|&(i, j)| (i + 1, j + 1)).collect(),
        };
        serde_json::to_string_pretty(&f).expect("system serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SystemFile = serde_json::from_str(text)?;
        let pairs: Vec<Vec<usize>> = f.adjacency.iter().map(|&(i, j)| vec![i, j]).collect();
        let adjacency = shift_down(pairs)?.into_iter().map(|p| (p[0], p[1])).collect();
        let s = Self { a: f.a.to()?, b: f.b.to()?, c: f.c.to()?, d: f.d.to()?, partition: shift_down(f.partition)?, adjacency };
        s.validate()?;
        Ok(s)
    }
}

fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    a.complex_eigenvalues().iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PStructure {
    Dense,
    /// One block of `P` per agent.
    BlockDiagonal,
}

/// Index of `gamma^2` among the LMI variables.
pub const GAMMA_SQ: usize = 0;

/// Bounded real lemma as a dual-form problem: maximize `-g` subject to
///
/// ```text
/// -[PA + A'P + C'C   PB + C'D ]
///  [B'P + D'C        D'D - g I]  in K,   P in PSD,   g >= 0
/// ```
///
/// so that `gamma = sqrt(g)` bounds the H-infinity norm. `K` is `cone`
/// fitted to the LMI block; block 0 of the result is the LMI block.
pub fn bounded_real_lmi(sys: &LTISystem, structure: PStructure, cone: &ConeKind) -> Result<ConicProblem> {
    sys.validate()?;
    if sys.spectral_abscissa() >= 0.0 {
        return Err(Error::Unstable(sys.spectral_abscissa()));
    }
    let (n, m) = (sys.states(), sys.inputs());
    let size = n + m;
    let mut lb = LmiBuilder::new();
    let g = lb.add_var(-1.0);
    debug_assert_eq!(g, GAMMA_SQ);
    let groups: Vec<Vec<usize>> = match structure {
        PStructure::Dense => vec![(0..n).collect()],
        PStructure::BlockDiagonal => sys.partition.clone(),
    };
    let lmi = lb.add_block(crate::decomp::adapt_kind(cone, size), size);
    // constant part -[C'C, C'D; D'C, D'D]
    let ctc = sys.c.transpose() * &sys.c;
    let ctd = sys.c.transpose() * &sys.d;
    let dtd = sys.d.transpose() * &sys.d;
    for j in 0..size {
        for i in 0..=j {
            let v = match (i < n, j < n) {
                (true, true) => ctc[(i, j)],
                (true, false) => ctd[(i, j - n)],
                (false, false) => dtd[(i - n, j - n)],
                (false, true) => unreachable!(),
            };
            lb.add_constant(lmi, i, j, -v);
        }
    }
    for i in n..size {
        lb.add_term(lmi, i, i, g, 1.0);
    }
    for group in &groups {
        let d = group.len();
        let pb = lb.add_block(ConeKind::psd(), d);
        for b in 0..d {
            for a in 0..=b {
                let (r, s) = (group[a], group[b]);
                let v = lb.add_var(0.0);
                lb.add_term(pb, a, b, v, 1.0);
                // E = e_r e_s' + e_s e_r' (or e_r e_r'); contribution -(E A + A' E) and -E B
                let pairs: &[(usize, usize)] = if r == s { &[(r, s)] } else { &[(r, s), (s, r)] };
                for &(u, w) in pairs {
                    // (E A)_{u,k} = A_{w,k}; (A' E)_{k,w} = A_{u,k}
                    for k in 0..n {
                        let awk = sys.a[(w, k)];
                        if awk != 0.0 {
                            lb.add_term(lmi, u, k, v, if u == k { -2.0 * awk } else { -awk });
                        }
                    }
                    for k in 0..m {
                        let bwk = sys.b[(w, k)];
                        if bwk != 0.0 {
                            lb.add_term(lmi, u, n + k, v, -bwk);
                        }
                    }
                }
            }
        }
    }
    let nn = lb.add_block(ConeKind::nonneg(), 1);
    lb.add_term(nn, 0, 0, g, 1.0);
    lb.build()
}

/// Sampled lower bound on the H-infinity norm: the largest singular value of
/// `C (jw I - A)^{-1} B + D` over `omegas`. Singular grid points are skipped.
pub fn hnorm_sweep(sys: &LTISystem, omegas: &[f64]) -> Result<f64> {
    sys.validate()?;
    if sys.spectral_abscissa() >= 0.0 {
        return Err(Error::Unstable(sys.spectral_abscissa()));
    }
    let n = sys.states();
    let cplx = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let (a, b, c, d) = (cplx(&sys.a), cplx(&sys.b), cplx(&sys.c), cplx(&sys.d));
    let mut best = 0.0f64;
    for &w in omegas {
        let mut r = -a.clone();
        for i in 0..n {
            r[(i, i)] += Complex64::new(0.0, w);
        }
        let Some(x) = r.lu().solve(&b) else { continue };
        let g = &c * x + &d;
        if g.nrows() == 0 || g.ncols() == 0 {
            continue;
        }
        let s = g.singular_values().max();
        if s.is_finite() {
            best = best.max(s);
        }
    }
    Ok(best)
}

/// `0` followed by `count` log-spaced frequencies in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mut w = vec![0.0];
    let (a, b) = (lo.ln(), hi.ln());
    for k in 0..count {
        let t = if count == 1 { 0.0 } else { k as f64 / (count - 1) as f64 };
        w.push((a + t * (b - a)).exp());
    }
    w
}

#[derive(Debug, Clone)]
pub struct HinfResult {
    pub status: Status,
    pub gamma: f64,
    pub elapsed: Duration,
    /// Clique sizes of the LMI block cover with their counts.
    pub histogram: Vec<(usize, usize)>,
}

/// Upper bound on the H-infinity norm with `cone` on the LMI block. With
/// `threshold` set, the LMI block is decomposed along its chordal cover and
/// cliques up to that size are kept PSD.
pub fn hinf_bound(
    sys: &LTISystem,
    structure: PStructure,
    cone: &ConeKind,
    threshold: Option<usize>,
    settings: &SolverSettings,
) -> Result<HinfResult> {
    let t0 = Instant::now();
    let p = bounded_real_lmi(sys, structure, &ConeKind::psd())?;
    let cover = block_cover(&p, 0)?;
    let a = match threshold {
        Some(t) => assign_cones(&cover, cone, t),
        None => {
            let single = crate::sparsity::CliqueCover::single(p.blocks[0].dim);
            crate::decomp::ConeAssignment::uniform(single, cone.clone(), Side::Construction)
        }
    }
    .on_block(0);
    let r = solve_decomposed(&p, &[a], Side::Construction, settings)?;
    let gamma = match r.status {
        Status::Infeasible => f64::INFINITY,
        _ => (-r.value).max(0.0).sqrt(),
    };
    Ok(HinfResult { status: r.status, gamma, elapsed: t0.elapsed(), histogram: cover.size_histogram() })
}

fn random_sym_on<R: Rng>(n: usize, edges: &[(usize, usize)], rng: &mut R, density: f64) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    for &(i, j) in edges.iter().chain(&(0..n).map(|i| (i, i)).collect::<Vec<_>>()) {
        if rng.random_bool(density) {
            t.push((i, j, rng.random_range(-1.0..1.0)));
        }
    }
    t
}

/// Strictly diagonally dominant matrix on `edges` (so also PSD).
fn dominant_on<R: Rng>(n: usize, edges: &[(usize, usize)], rng: &mut R) -> Result<SymMatrix> {
    let mut t: Vec<(usize, usize, f64)> = edges.iter().map(|&(i, j)| (i, j, rng.random_range(-1.0..1.0))).collect();
    let mut row = vec![0.0; n];
    for &(i, j, v) in &t {
        row[i] += v.abs();
        row[j] += v.abs();
    }
    for (i, r) in row.iter().enumerate() {
        t.push((i, i, r + rng.random_range(0.5..1.5)));
    }
    SymMatrix::from_triplets(n, t)
}

/// Off-diagonal pattern of a block-arrow matrix: `blocks` diagonal blocks of
/// size `blocksize` and `arrowhead` trailing rows coupled to everything.
pub fn block_arrow_pattern(blocks: usize, blocksize: usize, arrowhead: usize) -> Vec<(usize, usize)> {
    let n = blocks * blocksize + arrowhead;
    let head = blocks * blocksize;
    let mut e = Vec::new();
    for k in 0..blocks {
        let o = k * blocksize;
        for j in 0..blocksize {
            for i in 0..j {
                e.push((o + i, o + j));
            }
        }
    }
    for j in head..n {
        for i in 0..j {
            e.push((i, j));
        }
    }
    e.sort_unstable();
    e
}

/// Random primal-form SDP `min <C,X> s.t. <A_i,X> = b_i, X PSD` whose
/// aggregate pattern is a block arrow. `b` comes from a strictly diagonally
/// dominant point and `C` from a strictly diagonally dominant slack, so every
/// structured restriction is feasible and bounded.
pub fn gen_block_arrow(blocks: usize, blocksize: usize, arrowhead: usize, m: usize, seed: u64) -> Result<ConicProblem> {
    let n = blocks * blocksize + arrowhead;
    if n == 0 {
        return Err(Error::InvalidArgument("empty block-arrow instance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = block_arrow_pattern(blocks, blocksize, arrowhead);
    let a: Vec<SymMatrix> = (0..m)
        .map(|_| SymMatrix::from_triplets(n, random_sym_on(n, &edges, &mut rng, 0.3)))
        .collect::<Result<_>>()?;
    let x0 = dominant_on(n, &edges, &mut rng)?;
    let z0 = dominant_on(n, &edges, &mut rng)?;
    let b: Vec<f64> = a.iter().map(|ai| ai.inner(&x0)).collect();
    let mut c = z0;
    for ai in &a {
        c = c.axpby(1.0, ai, rng.random_range(-1.0..1.0))?;
    }
    ConicProblem::new(Form::Primal, vec![Block::new(n, ConeKind::psd())], c, a, b)
}

/// Sizes of a sea-star network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeaStar {
    pub head: usize,
    pub arms: usize,
    pub knuckles: usize,
    pub agents_per_knuckle: usize,
    pub coupling: f64,
}

impl Default for SeaStar {
    fn default() -> Self {
        Self { head: 10, arms: 3, knuckles: 2, agents_per_knuckle: 3, coupling: 0.3 }
    }
}

/// Networked system with a densely coupled head and arms made of chained
/// knuckles. Each agent has two states, one input and one output. `A` is a
/// random coupled matrix shifted left so its spectral abscissa is -0.5.
pub fn gen_sea_star(s: &SeaStar, seed: u64) -> Result<LTISystem> {
    if s.head == 0 {
        return Err(Error::InvalidArgument("the head needs at least one agent".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents = s.head;
    let mut adjacency = Vec::new();
    for g in 0..s.head {
        for h in 0..g {
            adjacency.push((h, g));
        }
    }
    for arm in 0..s.arms {
        let mut prev = arm % s.head;
        for _ in 0..s.knuckles {
            let k: Vec<usize> = (agents..agents + s.agents_per_knuckle).collect();
            agents += s.agents_per_knuckle;
            for (x, &i) in k.iter().enumerate() {
                for &j in &k[x + 1..] {
                    adjacency.push((i, j));
                }
            }
            if let Some(&first) = k.first() {
                adjacency.push((prev.min(first), prev.max(first)));
                prev = *k.last().unwrap();
            }
        }
    }
    let per = 2;
    let n = agents * per;
    let mut a = DMatrix::zeros(n, n);
    for ag in 0..agents {
        for i in 0..per {
            for j in 0..per {
                a[(ag * per + i, ag * per + j)] = rng.random_range(-1.0..1.0);
            }
        }
    }
    for &(p, q) in &adjacency {
        let (i, j) = (p * per + rng.random_range(0..per), q * per + rng.random_range(0..per));
        a[(i, j)] += s.coupling * rng.random_range(-1.0..1.0);
        a[(j, i)] += s.coupling * rng.random_range(-1.0..1.0);
    }
    let shift = spectral_abscissa(&a) + 0.5;
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let mut b = DMatrix::zeros(n, agents);
    let mut c = DMatrix::zeros(agents, n);
    for ag in 0..agents {
        b[(ag * per, ag)] = rng.random_range(0.5..1.0);
        c[(ag, ag * per + 1)] = rng.random_range(0.5..1.0);
    }
    let d = DMatrix::zeros(agents, agents);
    let partition = (0..agents).map(|ag| (ag * per..(ag + 1) * per).collect()).collect();
    let sys = LTISystem { a, b, c, d, partition, adjacency };
    sys.validate()?;
    Ok(sys)
}

/// Random stable system with `n` states, `m` inputs and `p` outputs.
pub fn gen_random_system(n: usize, m: usize, p: usize, seed: u64) -> Result<LTISystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let mut a: DMatrix<f64> = r(n, n);
    let b = r(n, m);
    let c = r(p, n);
    let d = r(p, m) * 0.2;
    let shift = spectral_abscissa(&a) + 0.5;
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    LTISystem::new(a, b, c, d)
}
