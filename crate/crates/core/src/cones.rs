//! Structured subsets of the PSD cone, their duals, and reformulations over
//! primitive cones.
//!
//! Subset families: diagonal, diagonally dominant (DD), scaled diagonally
//! dominant (SDD), factor-width `k` and block factor-width two. Each has a
//! dual superset obtained by flipping [`Orientation`].

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lmi::LmiBuilder;
use crate::matrix::{svec_index, triangular_size, SymMatrix};
use crate::problem::{contiguous_partition, ConeFamily, ConeKind, Orientation};
use crate::solver::eig::dense_min_eigenvalue;
use crate::solver::{solve, SolverSettings};
use crate::sparsity::{CliqueCover, PatternGraph};

const DD_TOL: f64 = 1e-12;

/// Row slacks `Delta_i = M_ii - sum_{j != i} |M_ij|` and the signs of the
/// off-diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DdCertificate {
    pub slack: Vec<f64>,
    pub positive: Vec<(usize, usize)>,
    pub negative: Vec<(usize, usize)>,
}

pub fn dd_certificate(m: &SymMatrix) -> DdCertificate {
    let mut slack = m.diagonal();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for &(r, c, v) in m.entries() {
        if r != c {
            slack[r] -= v.abs();
            slack[c] -= v.abs();
            if v > 0.0 {
                positive.push((r, c));
            } else {
                negative.push((r, c));
            }
        }
    }
    DdCertificate { slack, positive, negative }
}

/// Diagonal dominance with relative tolerance `1e-12 (1 + |M_ii|)`.
pub fn dd_membership(m: &SymMatrix) -> (bool, DdCertificate) {
    let cert = dd_certificate(m);
    let diag = m.diagonal();
    let ok = cert.slack.iter().zip(&diag).all(|(s, d)| *s >= -DD_TOL * (1.0 + d.abs()));
    (ok, cert)
}

/// Positive scaling `d` with `diag(d) M diag(d)` diagonally dominant.
#[derive(Debug, Clone, PartialEq)]
pub struct SddCertificate {
    pub d: Vec<f64>,
}

impl SddCertificate {
    pub fn apply(&self, m: &SymMatrix) -> SymMatrix {
        scale(m, &self.d)
    }
}

fn scale(m: &SymMatrix, d: &[f64]) -> SymMatrix {
    SymMatrix::from_triplets(m.n(), m.entries().iter().map(|&(r, c, v)| (r, c, v * d[r] * d[c]))).expect("same pattern")
}

/// `M_ii` on the diagonal and `-|M_ij|` off it.
pub fn comparison_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| if i == j { m[(i, i)] } else { -m[(i, j)].abs() })
}

/// Scaled diagonal dominance. `M` is SDD exactly when its comparison matrix
/// is PSD; the scaling solves `Mhat d = 1` (regularized on the boundary) on
/// each connected component of the off-diagonal pattern.
pub fn sdd_membership(m: &SymMatrix) -> (bool, Option<SddCertificate>) {
    let n = m.n();
    let (dd, _) = dd_membership(m);
    if dd {
        return (true, Some(SddCertificate { d: vec![1.0; n] }));
    }
    let dense = m.to_dense();
    let scale_ = 1.0 + m.max_abs();
    let graph = PatternGraph::from_edge_union(n, m.off_diagonal_pattern());
    let mut d = vec![1.0; n];
    for comp in graph.components() {
        let sub = DMatrix::from_fn(comp.len(), comp.len(), |i, j| dense[(comp[i], comp[j])]);
        let cmp = comparison_matrix(&sub);
        let lmin = dense_min_eigenvalue(&cmp);
        if lmin < -1e-11 * scale_ {
            return (false, None);
        }
        let part = SymMatrix::from_dense(&sub, 0.0);
        let candidates = [sdd_scaling_solve(&cmp, lmin, scale_), sdd_scaling_perron(&cmp)];
        let mut best: Option<(f64, Vec<f64>)> = None;
        for dc in candidates.into_iter().flatten() {
            let scaled = scale(&part, &dc);
            let cert = dd_certificate(&scaled);
            let worst = cert
                .slack
                .iter()
                .zip(scaled.diagonal())
                .map(|(s, dg)| s / (1.0 + dg.abs()))
                .fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|(w, _)| worst > *w) {
                best = Some((worst, dc));
            }
        }
        match best {
            Some((_, dc)) => comp.iter().zip(dc).for_each(|(&v, x)| d[v] = x),
            None => return (true, None),
        }
    }
    (true, Some(SddCertificate { d }))
}

fn sdd_scaling_solve(cmp: &DMatrix<f64>, lmin: f64, scale: f64) -> Option<Vec<f64>> {
    let n = cmp.nrows();
    let shift = if lmin > 1e-8 * scale { 0.0 } else { (-lmin).max(0.0) + 1e-12 * scale };
    let reg = cmp + DMatrix::identity(n, n) * shift;
    let chol = reg.cholesky()?;
    let d = chol.solve(&nalgebra::DVector::from_element(n, 1.0));
    let mx = d.iter().copied().fold(0.0f64, f64::max);
    if d.iter().all(|v| v.is_finite() && *v > 0.0) && mx > 0.0 {
        Some(d.iter().map(|v| v / mx).collect())
    } else {
        None
    }
}

fn sdd_scaling_perron(cmp: &DMatrix<f64>) -> Option<Vec<f64>> {
    let e = SymmetricEigen::new(cmp.clone());
    let (k, _) = e.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let v = e.eigenvectors.column(k);
    let mx = v.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
    if mx == 0.0 {
        return None;
    }
    Some(v.iter().map(|x| (x.abs() / mx).max(1e-300)).collect())
}

/// Extreme ray of the DD cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ray {
    /// `e_i e_i'`.
    Diagonal(usize),
    /// `(e_i + e_j)(e_i + e_j)'`.
    Plus(usize, usize),
    /// `(e_i - e_j)(e_i - e_j)'`.
    Minus(usize, usize),
}

impl Ray {
    pub fn matrix(&self, n: usize) -> SymMatrix {
        let t = match *self {
            Ray::Diagonal(i) => vec![(i, i, 1.0)],
            Ray::Plus(i, j) => vec![(i, i, 1.0), (j, j, 1.0), (i, j, 1.0)],
            Ray::Minus(i, j) => vec![(i, i, 1.0), (j, j, 1.0), (i, j, -1.0)],
        };
        SymMatrix::from_triplets(n, t).expect("valid ray")
    }
}

/// `Z = sum_i Delta_i v_i + sum_P Z_ij v+_ij + sum_N |Z_ij| v-_ij`.
pub fn dd_extreme_decomposition(z: &SymMatrix) -> Result<Vec<(f64, Ray)>> {
    let (ok, cert) = dd_membership(z);
    if !ok {
        return Err(Error::NotMember("dd".into()));
    }
    let mut out = Vec::new();
    for (i, &s) in cert.slack.iter().enumerate() {
        if s != 0.0 {
            out.push((s, Ray::Diagonal(i)));
        }
    }
    for &(r, c, v) in z.entries() {
        if r != c {
            if v > 0.0 {
                out.push((v, Ray::Plus(r, c)));
            } else {
                out.push((-v, Ray::Minus(r, c)));
            }
        }
    }
    Ok(out)
}

/// `sum_k E_k' Z_k E_k`.
pub fn clique_sum(blocks: &[SymMatrix], cover: &CliqueCover) -> Result<SymMatrix> {
    let n = cover.n();
    let mut trip = Vec::new();
    for (blk, clique) in blocks.iter().zip(&cover.cliques) {
        if blk.n() != clique.len() {
            return Err(Error::DimensionMismatch(format!("block of size {} for clique of size {}", blk.n(), clique.len())));
        }
        trip.extend(blk.entries().iter().map(|&(r, c, v)| (clique[r], clique[c], v)));
    }
    SymMatrix::from_summed_triplets(n, trip)
}

fn split_unchecked(z: &SymMatrix, cover: &CliqueCover) -> Result<Vec<SymMatrix>> {
    let cert = dd_certificate(z);
    let mult = cover.multiplicity();
    let mut trip: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); cover.len()];
    let mut diag: Vec<Vec<f64>> = cover.cliques.iter().map(|c| vec![0.0; c.len()]).collect();
    let local = |k: usize, v: usize| cover.cliques[k].binary_search(&v).expect("vertex in clique");
    for &(r, c, v) in z.entries() {
        if r == c {
            continue;
        }
        let k = cover.covering_clique(r, c).ok_or(Error::PatternNotCovered(r + 1, c + 1))?;
        let (lr, lc) = (local(k, r), local(k, c));
        trip[k].push((lr, lc, v));
        diag[k][lr] += v.abs();
        diag[k][lc] += v.abs();
    }
    for (k, clique) in cover.cliques.iter().enumerate() {
        for (l, &v) in clique.iter().enumerate() {
            diag[k][l] += cert.slack[v] / mult[v] as f64;
        }
    }
    cover
        .cliques
        .iter()
        .enumerate()
        .map(|(k, clique)| {
            let t = std::mem::take(&mut trip[k]);
            let d = (0..clique.len()).map(|l| (l, l, diag[k][l]));
            SymMatrix::from_triplets(clique.len(), t.into_iter().chain(d).filter(|e| e.2 != 0.0))
        })
        .collect()
}

/// Splits `Z` in `DD(E, 0)` into DD clique blocks: each off-diagonal entry
/// goes to the lowest-index covering clique and each row slack is shared
/// evenly among the cliques containing the row.
pub fn clique_dd_split(z: &SymMatrix, cover: &CliqueCover) -> Result<Vec<SymMatrix>> {
    if !dd_membership(z).0 {
        return Err(Error::NotMember("dd".into()));
    }
    split_unchecked(z, cover)
}

/// Splits `Z` in `SDD(E, 0)` into SDD clique blocks by splitting the DD
/// matrix `D Z D` and undoing the scaling per clique.
pub fn clique_sdd_split(z: &SymMatrix, cover: &CliqueCover) -> Result<Vec<SymMatrix>> {
    let (ok, cert) = sdd_membership(z);
    let cert = match (ok, cert) {
        (true, Some(c)) => c,
        _ => return Err(Error::NotMember("sdd".into())),
    };
    let scaled = cert.apply(z);
    let parts = split_unchecked(&scaled, cover)?;
    Ok(parts
        .iter()
        .zip(&cover.cliques)
        .map(|(p, clique)| {
            let inv: Vec<f64> = clique.iter().map(|&v| 1.0 / cert.d[v]).collect();
            scale(p, &inv)
        })
        .collect())
}

/// How a structured cone is expressed through primitive cone blocks.
#[derive(Debug, Clone, PartialEq)]
pub enum ReformMap {
    /// `M_e = sum coef * u_coord` for every upper entry `e` in `svec` order.
    Parametric(Vec<Vec<(usize, f64)>>),
    /// `u_coord = sum coef * M_ij`; `M` is a member when `u` lies in the blocks.
    Constraint(Vec<Vec<((usize, usize), f64)>>),
}

/// Primitive-cone system equivalent to membership in a structured cone.
///
/// Coordinates enumerate the blocks in order: a vector block of dimension
/// `d` has `d` coordinates and a PSD block has one per upper entry in `svec`
/// order (unscaled matrix entries).
#[derive(Debug, Clone, PartialEq)]
pub struct ConeReformulation {
    pub dim: usize,
    pub blocks: Vec<(ConeKind, usize)>,
    pub map: ReformMap,
}

impl ConeReformulation {
    /// `(block, i, j)` of every coordinate.
    pub fn coord_positions(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (b, (kind, d)) in self.blocks.iter().enumerate() {
            if kind.is_psd() {
                for j in 0..*d {
                    for i in 0..=j {
                        out.push((b, i, j));
                    }
                }
            } else {
                out.extend((0..*d).map(|i| (b, i, i)));
            }
        }
        out
    }

    pub fn num_coords(&self) -> usize {
        self.blocks.iter().map(|(k, d)| if k.is_psd() { triangular_size(*d) } else { *d }).sum()
    }

    /// Total number of primitive blocks of each kind, for reporting.
    pub fn is_parametric(&self) -> bool {
        matches!(self.map, ReformMap::Parametric(_))
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Index sets whose principal blocks define a factor-width or block
/// factor-width cone of dimension `n`.
fn psd_index_sets(n: usize, family: &ConeFamily) -> Option<Vec<Vec<usize>>> {
    match family {
        ConeFamily::FactorWidth { k } if *k >= n => Some(vec![(0..n).collect()]),
        ConeFamily::FactorWidth { k } if n <= 12 || *k <= 2 => Some(combinations(n, *k)),
        ConeFamily::FactorWidth { k } => Some(union_pairs(&contiguous_partition(n, *k))),
        ConeFamily::BlockFactorWidth2 { partition } => Some(union_pairs(partition)),
        _ => None,
    }
}

fn union_pairs(parts: &[Vec<usize>]) -> Vec<Vec<usize>> {
    if parts.len() == 1 {
        let mut p = parts[0].clone();
        p.sort_unstable();
        return vec![p];
    }
    let mut out = Vec::new();
    for a in 0..parts.len() {
        for b in a + 1..parts.len() {
            let mut u: Vec<usize> = parts[a].iter().chain(&parts[b]).copied().collect();
            u.sort_unstable();
            out.push(u);
        }
    }
    out
}

/// Reformulation of the cone `kind` on `n x n` matrices: parametric for
/// subset orientations, constraint form for dual supersets.
pub fn reformulate(n: usize, kind: &ConeKind) -> Result<ConeReformulation> {
    kind.validate(n)?;
    if kind.is_vector() {
        return Err(Error::UnsupportedCone(format!("{kind} is not a matrix cone")));
    }
    let family = match (&kind.family, n) {
        (ConeFamily::FactorWidth { k: 1 }, _) => ConeFamily::Diagonal,
        (ConeFamily::FactorWidth { k }, n) if *k >= n => ConeFamily::Psd,
        (ConeFamily::Sdd, 1) | (ConeFamily::FactorWidth { k: 2 }, 1) => ConeFamily::Diagonal,
        (f, _) => f.clone(),
    };
    if kind.orientation == Orientation::DualSuperset && family != ConeFamily::Psd {
        reformulate_superset(n, &family)
    } else {
        reformulate_subset(n, &family)
    }
}

/// Reformulation of the dual cone of `kind`.
pub fn reformulate_dual(n: usize, kind: &ConeKind) -> Result<ConeReformulation> {
    reformulate(n, &kind.dual())
}

fn reformulate_subset(n: usize, family: &ConeFamily) -> Result<ConeReformulation> {
    let t = triangular_size(n);
    let mut map: Vec<Vec<(usize, f64)>> = vec![Vec::new(); t];
    let mut blocks = Vec::new();
    match family {
        ConeFamily::Psd => {
            blocks.push((ConeKind::psd(), n));
            for (c, m) in map.iter_mut().enumerate() {
                m.push((c, 1.0));
            }
        }
        ConeFamily::Diagonal => {
            blocks.push((ConeKind::nonneg(), n));
            for i in 0..n {
                map[svec_index(i, i)].push((i, 1.0));
            }
        }
        ConeFamily::Dd => {
            let pairs = n * (n - 1) / 2;
            blocks.push((ConeKind::nonneg(), n + 2 * pairs));
            for i in 0..n {
                map[svec_index(i, i)].push((i, 1.0));
            }
            let mut c = n;
            for j in 0..n {
                for i in 0..j {
                    let (p, q) = (c, c + 1);
                    c += 2;
                    for v in [i, j] {
                        map[svec_index(v, v)].push((p, 1.0));
                        map[svec_index(v, v)].push((q, 1.0));
                    }
                    map[svec_index(i, j)].push((p, 1.0));
                    map[svec_index(i, j)].push((q, -1.0));
                }
            }
        }
        ConeFamily::Sdd => {
            let mut c = 0;
            for j in 0..n {
                for i in 0..j {
                    blocks.push((ConeKind::rsoc(), 3));
                    map[svec_index(i, i)].push((c, 1.0));
                    map[svec_index(j, j)].push((c + 1, 1.0));
                    map[svec_index(i, j)].push((c + 2, std::f64::consts::FRAC_1_SQRT_2));
                    c += 3;
                }
            }
        }
        f => {
            let sets = psd_index_sets(n, f).ok_or_else(|| Error::UnsupportedCone(format!("{f:?}")))?;
            let mut c = 0;
            for s in sets {
                let d = s.len();
                blocks.push((ConeKind::psd(), d));
                for b in 0..d {
                    for a in 0..=b {
                        map[svec_index(s[a], s[b])].push((c, 1.0));
                        c += 1;
                    }
                }
            }
        }
    }
    Ok(ConeReformulation { dim: n, blocks, map: ReformMap::Parametric(map) })
}

fn reformulate_superset(n: usize, family: &ConeFamily) -> Result<ConeReformulation> {
    let mut rows: Vec<Vec<((usize, usize), f64)>> = Vec::new();
    let mut blocks = Vec::new();
    match family {
        ConeFamily::Diagonal => {
            blocks.push((ConeKind::nonneg(), n));
            rows.extend((0..n).map(|i| vec![((i, i), 1.0)]));
        }
        ConeFamily::Dd => {
            blocks.push((ConeKind::nonneg(), n + n * (n - 1)));
            rows.extend((0..n).map(|i| vec![((i, i), 1.0)]));
            for j in 0..n {
                for i in 0..j {
                    rows.push(vec![((i, i), 1.0), ((j, j), 1.0), ((i, j), 2.0)]);
                    rows.push(vec![((i, i), 1.0), ((j, j), 1.0), ((i, j), -2.0)]);
                }
            }
        }
        ConeFamily::Sdd => {
            for j in 0..n {
                for i in 0..j {
                    blocks.push((ConeKind::rsoc(), 3));
                    rows.push(vec![((i, i), 1.0)]);
                    rows.push(vec![((j, j), 1.0)]);
                    rows.push(vec![((i, j), std::f64::consts::SQRT_2)]);
                }
            }
        }
        f => {
            let sets = psd_index_sets(n, f).ok_or_else(|| Error::UnsupportedCone(format!("{f:?}")))?;
            for s in sets {
                let d = s.len();
                blocks.push((ConeKind::psd(), d));
                for b in 0..d {
                    for a in 0..=b {
                        rows.push(vec![((s[a], s[b]), 1.0)]);
                    }
                }
            }
        }
    }
    Ok(ConeReformulation { dim: n, blocks, map: ReformMap::Constraint(rows) })
}

fn block_matrix(kind: &ConeKind, d: usize, coords: &[f64]) -> DMatrix<f64> {
    if kind.is_psd() {
        let mut m = DMatrix::zeros(d, d);
        let mut c = 0;
        for j in 0..d {
            for i in 0..=j {
                m[(i, j)] = coords[c];
                m[(j, i)] = coords[c];
                c += 1;
            }
        }
        m
    } else {
        // rotated (u, v, w) with 2uv >= w^2 is [[u, w/sqrt2], [w/sqrt2, v]] PSD
        let s = coords[2] * std::f64::consts::FRAC_1_SQRT_2;
        DMatrix::from_row_slice(2, 2, &[coords[0], s, s, coords[1]])
    }
}

/// Largest `t` with `M - t I` in the cone of a reformulation. Constraint
/// forms are evaluated directly; parametric forms are solved.
pub fn reformulation_margin(m: &DMatrix<f64>, r: &ConeReformulation) -> Result<f64> {
    match &r.map {
        ReformMap::Constraint(rows) => {
            let eval = |mat: &dyn Fn(usize, usize) -> f64| -> Vec<f64> {
                rows.iter().map(|row| row.iter().map(|&((i, j), c)| c * mat(i, j)).sum()).collect()
            };
            let cm = eval(&|i, j| m[(i, j)]);
            let ci = eval(&|i, j| if i == j { 1.0 } else { 0.0 });
            let mut best = f64::INFINITY;
            let mut off = 0;
            for (kind, d) in &r.blocks {
                let len = if kind.is_psd() { triangular_size(*d) } else { *d };
                let (sm, si) = (&cm[off..off + len], &ci[off..off + len]);
                let t = match kind.family {
                    ConeFamily::Nonneg => sm
                        .iter()
                        .zip(si)
                        .map(|(a, b)| if *b > 0.0 { a / b } else if *a >= 0.0 { f64::INFINITY } else { *a })
                        .fold(f64::INFINITY, f64::min),
                    // identity coordinates are the identity matrix of the block
                    _ => dense_min_eigenvalue(&block_matrix(kind, *d, sm)),
                };
                best = best.min(t);
                off += len;
            }
            Ok(best)
        }
        ReformMap::Parametric(map) => parametric_margin(m, r, map),
    }
}

fn parametric_margin(m: &DMatrix<f64>, r: &ConeReformulation, map: &[Vec<(usize, f64)>]) -> Result<f64> {
    let n = r.dim;
    let mut lb = LmiBuilder::new();
    let t = lb.add_var(1.0);
    let u0 = lb.add_vars(r.num_coords()).start;
    let ids: Vec<_> = r.blocks.iter().map(|(k, d)| lb.add_block(k.clone(), *d)).collect();
    for (coord, &(b, i, j)) in r.coord_positions().iter().enumerate() {
        lb.add_term(ids[b], i, j, u0 + coord, 1.0);
    }
    let eq = lb.add_block(ConeKind::zero(), triangular_size(n));
    let scale = 1.0 + m.amax();
    for j in 0..n {
        for i in 0..=j {
            let e = svec_index(i, j);
            lb.add_constant(eq, e, e, m[(i, j)] / scale);
            if i == j {
                lb.add_term(eq, e, e, t, -1.0);
            }
            for &(c, coef) in &map[e] {
                lb.add_term(eq, e, e, u0 + c, -coef);
            }
        }
    }
    let p = lb.build()?;
    // boundary points can stall the tight solve
    let mut last = crate::problem::Status::MaxIter;
    for eps in [1e-9, 1e-7] {
        let s = solve(&p, &SolverSettings { eps, ..SolverSettings::default() })?;
        match s.status {
            crate::problem::Status::Optimal => return Ok(s.y[t] * scale),
            crate::problem::Status::Infeasible => return Ok(f64::NEG_INFINITY),
            st => last = st,
        }
    }
    Err(Error::Numerical(format!("membership subproblem ended with status {last}")))
}

/// Largest `t` such that `M - t I` lies in `kind`; nonnegative exactly for
/// members. Closed forms are used for every cone except primal factor-width
/// `3 <= k < n` and block factor-width two with three or more blocks.
pub fn margin_dense(m: &DMatrix<f64>, kind: &ConeKind) -> Result<f64> {
    let n = m.nrows();
    kind.validate(n)?;
    if n == 0 {
        return Ok(f64::INFINITY);
    }
    if kind.is_vector() {
        return Err(Error::UnsupportedCone(format!("{kind} is not a matrix cone")));
    }
    let superset = kind.orientation == Orientation::DualSuperset;
    match (&kind.family, superset) {
        (ConeFamily::Psd, _) => Ok(dense_min_eigenvalue(m)),
        (ConeFamily::FactorWidth { k }, _) if *k >= n => Ok(dense_min_eigenvalue(m)),
        (ConeFamily::Diagonal, false) | (ConeFamily::FactorWidth { k: 1 }, false) => {
            let off = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).map(|(i, j)| m[(i, j)].abs()).fold(0.0, f64::max);
            let dmin = (0..n).map(|i| m[(i, i)]).fold(f64::INFINITY, f64::min);
            Ok(if off > 0.0 { dmin.min(-off) } else { dmin })
        }
        (ConeFamily::Dd, false) => Ok((0..n)
            .map(|i| m[(i, i)] - (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum::<f64>())
            .fold(f64::INFINITY, f64::min)),
        (ConeFamily::Sdd, false) | (ConeFamily::FactorWidth { k: 2 }, false) => {
            Ok(dense_min_eigenvalue(&comparison_matrix(m)))
        }
        (ConeFamily::BlockFactorWidth2 { partition }, false) if partition.len() <= 2 => Ok(dense_min_eigenvalue(m)),
        _ => reformulation_margin(m, &reformulate(n, kind)?),
    }
}

pub fn margin(m: &SymMatrix, kind: &ConeKind) -> Result<f64> {
    margin_dense(&m.to_dense(), kind)
}

/// Membership with tolerance `tol (1 + max |M_ij|)`.
pub fn is_member(m: &SymMatrix, kind: &ConeKind, tol: f64) -> Result<bool> {
    Ok(margin(m, kind)? >= -tol * (1.0 + m.max_abs()))
}

/// A random element of `kind` on `n x n` matrices. Subsets are sampled
/// through their parametrization, dual supersets by shifting a random
/// symmetric matrix onto or just inside the cone boundary.
pub fn random_member<R: Rng>(n: usize, kind: &ConeKind, rng: &mut R) -> Result<SymMatrix> {
    let r = reformulate(n, kind)?;
    match &r.map {
        ReformMap::Parametric(map) => {
            let mut coords = Vec::with_capacity(r.num_coords());
            for (k, d) in &r.blocks {
                match k.family {
                    ConeFamily::Nonneg => coords.extend((0..*d).map(|_| sparse_positive(rng))),
                    ConeFamily::RotatedSecondOrder => {
                        let (u, v) = (sparse_positive(rng), sparse_positive(rng));
                        let w = (2.0 * u * v).sqrt() * rng.random_range(-1.0..=1.0);
                        coords.extend([u, v, w]);
                    }
                    _ => {
                        let g = DMatrix::from_fn(*d, *d, |_, _| rng.random_range(-1.0..1.0));
                        let rank = rng.random_range(1..=*d);
                        let g = g.columns(0, rank).into_owned();
                        let q = &g * g.transpose();
                        for j in 0..*d {
                            for i in 0..=j {
                                coords.push(q[(i, j)]);
                            }
                        }
                    }
                }
            }
            let mut trip = Vec::new();
            for j in 0..n {
                for i in 0..=j {
                    let v: f64 = map[svec_index(i, j)].iter().map(|&(c, coef)| coef * coords[c]).sum();
                    trip.push((i, j, v));
                }
            }
            SymMatrix::from_triplets(n, trip.into_iter().filter(|t| t.2 != 0.0))
        }
        ReformMap::Constraint(_) => {
            let base = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let sym = (&base + base.transpose()) * 0.5;
            let t = margin_dense(&sym, kind)?;
            let push = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.5) };
            let shifted = sym - DMatrix::identity(n, n) * (t - push);
            Ok(SymMatrix::from_dense(&shifted, 0.0))
        }
    }
}

fn sparse_positive<R: Rng>(rng: &mut R) -> f64 {
    if rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(0.0..1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym(n: usize, t: &[(usize, usize, f64)]) -> SymMatrix {
        SymMatrix::from_triplets(n, t.iter().copied()).unwrap()
    }

    #[test]
    fn dd_examples() {
        let (ok, c) = dd_membership(&SymMatrix::identity(3));
        assert!(ok);
        assert_eq!(c.slack, vec![1.0, 1.0, 1.0]);
        let (ok, c) = dd_membership(&sym(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)]));
        assert!(!ok);
        assert_eq!(c.slack[0], -1.0);
        let m = sym(3, &[(0, 0, 2.0), (1, 1, 2.0), (2, 2, 2.0), (0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
        let (ok, c) = dd_membership(&m);
        assert!(ok);
        assert_eq!(c.slack, vec![0.0; 3]);
    }

    #[test]
    fn sdd_examples() {
        let m = sym(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 5.0)]);
        let (ok, cert) = sdd_membership(&m);
        assert!(ok);
        let d = cert.unwrap();
        assert!(dd_membership(&d.apply(&m)).0);
        assert!(!sdd_membership(&sym(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)])).0);
        let (ok, cert) = sdd_membership(&SymMatrix::identity(4));
        assert!(ok);
        assert_eq!(cert.unwrap().d, vec![1.0; 4]);
    }

    #[test]
    fn extreme_decomposition_reconstructs() {
        let z = sym(3, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0), (1, 2, -1.0), (2, 2, 2.0)]);
        let terms = dd_extreme_decomposition(&z).unwrap();
        assert!(terms.contains(&(1.0, Ray::Plus(0, 1))));
        assert!(terms.contains(&(1.0, Ray::Minus(1, 2))));
        let diag: Vec<_> = terms.iter().filter(|t| matches!(t.1, Ray::Diagonal(_))).map(|t| t.0).collect();
        assert_eq!(diag, vec![1.0, 1.0, 1.0]);
        let mut acc = SymMatrix::zeros(3);
        for (w, r) in &terms {
            acc = acc.axpby(1.0, &r.matrix(3), *w).unwrap();
        }
        assert!(acc.axpby(1.0, &z, -1.0).unwrap().max_abs() <= 1e-12);
        let terms = dd_extreme_decomposition(&sym(2, &[(0, 0, 2.0), (1, 1, 3.0)])).unwrap();
        assert_eq!(terms, vec![(2.0, Ray::Diagonal(0)), (3.0, Ray::Diagonal(1))]);
        let terms = dd_extreme_decomposition(&sym(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)])).unwrap();
        assert_eq!(terms, vec![(1.0, Ray::Plus(0, 1))]);
    }

    #[test]
    fn dd_split_example() {
        let z = sym(3, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0), (1, 2, 1.0), (2, 2, 2.0)]);
        let cover = CliqueCover::from_cliques(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let parts = clique_dd_split(&z, &cover).unwrap();
        assert_eq!(parts[0].to_dense(), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.5]));
        assert_eq!(parts[1].to_dense(), DMatrix::from_row_slice(2, 2, &[1.5, 1.0, 1.0, 2.0]));
        assert_eq!(clique_sum(&parts, &cover).unwrap(), z);
        let single = clique_dd_split(&z, &CliqueCover::single(3)).unwrap();
        assert_eq!(single, vec![z]);
    }

    #[test]
    fn dd_split_of_diagonal_shares_evenly() {
        let z = SymMatrix::from_diagonal(&[2.0, 4.0, 6.0]);
        let cover = CliqueCover::from_cliques(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let parts = clique_dd_split(&z, &cover).unwrap();
        assert_eq!(parts[0].diagonal(), vec![2.0, 2.0]);
        assert_eq!(parts[1].diagonal(), vec![2.0, 6.0]);
    }

    #[test]
    fn sdd_split_of_rescaled_dd() {
        let base = sym(3, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0), (1, 2, 1.0), (2, 2, 2.0)]);
        let z = scale(&base, &[1.0, 0.5, 1.0]);
        let cover = CliqueCover::from_cliques(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let parts = clique_sdd_split(&z, &cover).unwrap();
        for p in &parts {
            assert!(sdd_membership(p).0);
        }
        let back = clique_sum(&parts, &cover).unwrap();
        assert!(back.axpby(1.0, &z, -1.0).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn split_rejects_uncovered_entries() {
        let z = sym(3, &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 1.0), (2, 2, 2.0)]);
        let cover = CliqueCover::from_cliques(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        assert!(matches!(clique_dd_split(&z, &cover), Err(Error::PatternNotCovered(1, 3))));
    }

    #[test]
    fn dual_cone_examples() {
        let m = sym(2, &[(0, 0, 1.0), (0, 1, -2.0), (1, 1, 1.0)]);
        assert!(!is_member(&m, &ConeKind::dd().dual_superset(), 1e-12).unwrap());
        let m = sym(3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 1.0), (2, 2, 1.0)]);
        assert!(!is_member(&m, &ConeKind::sdd().dual_superset(), 1e-12).unwrap());
        let psd = sym(3, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 2.0), (2, 2, 1.0)]);
        for k in [
            ConeKind::diagonal(),
            ConeKind::dd(),
            ConeKind::sdd(),
            ConeKind::factor_width(2),
            ConeKind::block_factor_width2(vec![vec![0], vec![1], vec![2]]),
        ] {
            assert!(is_member(&psd, &k.clone().dual_superset(), 1e-12).unwrap(), "{k}");
        }
    }

    #[test]
    fn reformulation_sizes() {
        let r = reformulate(2, &ConeKind::dd()).unwrap();
        assert_eq!(r.blocks, vec![(ConeKind::nonneg(), 4)]);
        let r = reformulate(3, &ConeKind::sdd()).unwrap();
        assert_eq!(r.blocks, vec![(ConeKind::rsoc(), 3); 3]);
        let r = reformulate(4, &ConeKind::factor_width(4)).unwrap();
        assert_eq!(r.blocks, vec![(ConeKind::psd(), 4)]);
        let r = reformulate(4, &ConeKind::factor_width(3)).unwrap();
        assert_eq!(r.blocks.len(), 4);
        let r = reformulate(14, &ConeKind::factor_width(4)).unwrap();
        assert_eq!(r.blocks.len(), 6);
        assert!(reformulate(3, &ConeKind::nonneg()).is_err());
    }

    #[test]
    fn dd_reformulation_matches_membership_on_grid() {
        // 2x2 matrices [[1, b], [b, c]] over a 41 x 41 grid; compare margins
        let r = reformulate(2, &ConeKind::dd()).unwrap();
        for bi in 0..41 {
            for ci in 0..41 {
                let b = -2.0 + 0.1 * bi as f64;
                let c = -2.0 + 0.1 * ci as f64;
                let m = DMatrix::from_row_slice(2, 2, &[1.0, b, b, c]);
                let direct = margin_dense(&m, &ConeKind::dd()).unwrap();
                let dm = sym(2, &[(0, 0, 1.0), (0, 1, b), (1, 1, c)]);
                assert_eq!(direct >= -1e-12, dd_membership(&dm).0 || dm.max_abs() == 0.0);
                if bi % 8 == 0 && ci % 8 == 0 {
                    let via = reformulation_margin(&m, &r).unwrap();
                    assert!((via - direct).abs() < 1e-5, "b={b} c={c}: {via} vs {direct}");
                }
            }
        }
    }

    #[test]
    fn sdd_reformulation_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = reformulate(3, &ConeKind::sdd()).unwrap();
        for _ in 0..6 {
            let g = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let m = (&g + g.transpose()) * 0.5 + DMatrix::identity(3, 3);
            let direct = margin_dense(&m, &ConeKind::sdd()).unwrap();
            let via = reformulation_margin(&m, &r).unwrap();
            assert!((via - direct).abs() < 1e-5, "{via} vs {direct}");
        }
    }

    #[test]
    fn factor_width_three_is_between_sdd_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let g = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let m = (&g + g.transpose()) * 0.5;
            let sdd = margin_dense(&m, &ConeKind::sdd()).unwrap();
            let fw3 = margin_dense(&m, &ConeKind::factor_width(3)).unwrap();
            let psd = margin_dense(&m, &ConeKind::psd()).unwrap();
            assert!(sdd <= fw3 + 1e-5 && fw3 <= psd + 1e-5, "{sdd} {fw3} {psd}");
        }
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 4), vec![vec![0, 1, 2, 3]]);
        assert_eq!(combinations(6, 3).len(), 20);
    }

    proptest! {
        #[test]
        fn containment_chain(entries in proptest::collection::vec(-1.0f64..1.0, 10), shift in 0.0f64..3.0) {
            let mut t = Vec::new();
            let mut c = 0;
            for j in 0..4 {
                for i in 0..=j {
                    t.push((i, j, entries[c] + if i == j { shift } else { 0.0 }));
                    c += 1;
                }
            }
            let m = SymMatrix::from_triplets(4, t).unwrap();
            let dd = dd_membership(&m).0;
            let sdd = sdd_membership(&m).0;
            let lmin = dense_min_eigenvalue(&m.to_dense());
            prop_assert!(!dd || sdd);
            prop_assert!(!sdd || lmin >= -1e-9);
        }

        #[test]
        fn sdd_certificate_is_valid(entries in proptest::collection::vec(-1.0f64..1.0, 10), shift in 0.0f64..3.0) {
            let mut t = Vec::new();
            let mut c = 0;
            for j in 0..4 {
                for i in 0..=j {
                    t.push((i, j, entries[c] + if i == j { shift } else { 0.0 }));
                    c += 1;
                }
            }
            let m = SymMatrix::from_triplets(4, t).unwrap();
            if let (true, Some(cert)) = sdd_membership(&m) {
                let s = cert.apply(&m);
                let cd = dd_certificate(&s);
                for (sl, dg) in cd.slack.iter().zip(s.diagonal()) {
                    prop_assert!(*sl >= -1e-8 * (1.0 + dg.abs()));
                }
            }
        }

        #[test]
        fn duality_pairing(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kinds = [
                ConeKind::diagonal(),
                ConeKind::dd(),
                ConeKind::sdd(),
                ConeKind::factor_width(2),
                ConeKind::factor_width(3),
                ConeKind::block_factor_width2(vec![vec![0, 1], vec![2], vec![3]]),
            ];
            for k in kinds {
                let p = random_member(4, &k, &mut rng).unwrap();
                let m = random_member(4, &k.clone().dual_superset(), &mut rng).unwrap();
                prop_assert!(p.inner(&m) >= -1e-9, "{k}: {}", p.inner(&m));
            }
        }

        #[test]
        fn random_subset_members_pass_membership(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = random_member(5, &ConeKind::dd(), &mut rng).unwrap();
            prop_assert!(dd_membership(&d).0);
            let s = random_member(5, &ConeKind::sdd(), &mut rng).unwrap();
            prop_assert!(sdd_membership(&s).0);
        }
    }
}
