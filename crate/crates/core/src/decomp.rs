//! Decomposed structured-subset approximations of conic problems.
//!
//! A [`ConeAssignment`] puts one cone on every clique of a cover of a matrix
//! block. The completion side constrains the clique blocks `X_k` of the
//! primal variable; the construction side writes the slack as a clique sum
//! `Z = sum_k E_k' Z_k E_k`. Both builders emit a problem over primitive
//! cones for the reference solver.
//!
//! With subset kinds the completion side gives upper bounds and the
//! construction side lower bounds on the optimal value; dual-superset kinds
//! reverse the direction.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::cones::{reformulate, ConeReformulation, ReformMap};
use crate::error::{Error, Result};
use crate::lmi::{BlockId, LmiBuilder};
use crate::matrix::{svec_index, triangular_size, SymMatrix};
use crate::problem::{ConeFamily, ConeKind, ConicProblem, Form, Orientation, Solution, Status};
use crate::solver::{solve, SolverSettings};
use crate::sparsity::{cover_for, CliqueCover};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Cones on the clique blocks of `X`.
    Completion,
    /// Clique-sum cones on the slack `Z`.
    Construction,
}

/// Which side of the optimal value a decomposed problem bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Upper,
    Lower,
    Exact,
}

/// One cone per clique of a cover of problem block `block`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeAssignment {
    pub block: usize,
    pub cover: CliqueCover,
    pub kinds: Vec<ConeKind>,
    pub side: Side,
    /// Optional change of basis `L_k` per clique: the clique cone becomes
    /// `{L_k Q L_k' : Q in K_k}`. Applies to subset kinds.
    pub bases: Vec<Option<DMatrix<f64>>>,
}

impl ConeAssignment {
    pub fn new(cover: CliqueCover, kinds: Vec<ConeKind>, side: Side) -> Self {
        let bases = vec![None; kinds.len()];
        Self { block: 0, cover, kinds, side, bases }
    }

    pub fn uniform(cover: CliqueCover, kind: ConeKind, side: Side) -> Self {
        let kinds = cover.cliques.iter().map(|c| adapt_kind(&kind, c.len())).collect();
        Self::new(cover, kinds, side)
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn on_block(mut self, block: usize) -> Self {
        self.block = block;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.len() != self.cover.len() || self.bases.len() != self.cover.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cliques but {} kinds and {} bases",
                self.cover.len(),
                self.kinds.len(),
                self.bases.len()
            )));
        }
        for ((k, c), l) in self.kinds.iter().zip(&self.cover.cliques).zip(&self.bases) {
            if k.is_vector() {
                return Err(Error::InvalidCone(format!("{k} cannot be assigned to a clique")));
            }
            k.validate(c.len())?;
            if let Some(l) = l {
                if l.nrows() != c.len() || l.ncols() != c.len() {
                    return Err(Error::DimensionMismatch(format!("basis for clique of size {}", c.len())));
                }
            }
        }
        Ok(())
    }

    /// Bound direction on the optimal value.
    pub fn bound(&self) -> Bound {
        if self.kinds.iter().all(|k| k.is_psd()) {
            return Bound::Exact;
        }
        let subset = self.kinds.iter().all(|k| k.is_subset_of_psd());
        match (self.side, subset) {
            (Side::Completion, true) | (Side::Construction, false) => Bound::Upper,
            (Side::Completion, false) | (Side::Construction, true) => Bound::Lower,
        }
    }
}

/// Fits a cone kind to a clique of size `d`: factor widths are capped at
/// `d` and block partitions are rebuilt with the same block size.
pub fn adapt_kind(kind: &ConeKind, d: usize) -> ConeKind {
    let family = match &kind.family {
        ConeFamily::FactorWidth { k } => ConeFamily::FactorWidth { k: (*k).min(d).max(1) },
        ConeFamily::BlockFactorWidth2 { partition } => {
            let size = partition.iter().map(|p| p.len()).max().unwrap_or(1);
            ConeFamily::BlockFactorWidth2 { partition: crate::problem::contiguous_partition(d, size) }
        }
        f => f.clone(),
    };
    ConeKind { family, orientation: kind.orientation }
}

/// Chordal clique cover of the aggregate pattern of block `k`.
pub fn block_cover(p: &ConicProblem, k: usize) -> Result<CliqueCover> {
    let off = p.offsets();
    if k >= p.blocks.len() {
        return Err(Error::InvalidArgument(format!("block {} of {}", k + 1, p.blocks.len())));
    }
    let idx: Vec<usize> = (off[k]..off[k + 1]).collect();
    let c = p.c.principal_submatrix(&idx);
    let a: Vec<SymMatrix> = p.a.iter().map(|a| a.principal_submatrix(&idx)).collect();
    cover_for(&c, &a)
}

/// PSD on cliques of size at most `threshold`, `base` on larger cliques.
pub fn assign_cones(cover: &CliqueCover, base: &ConeKind, threshold: usize) -> ConeAssignment {
    let kinds = cover
        .cliques
        .iter()
        .map(|c| if c.len() <= threshold { ConeKind::psd() } else { adapt_kind(base, c.len()) })
        .collect();
    ConeAssignment::new(cover.clone(), kinds, Side::Completion)
}

/// Affine expression `sum coef * var` per upper entry of a clique matrix, in
/// `svec` order.
type Affine = Vec<Vec<(usize, f64)>>;

#[derive(Debug, Clone)]
struct CliquePlan {
    /// Clique vertices as global indices.
    vertices: Vec<usize>,
    /// Builder blocks carrying this clique's cone.
    blocks: Vec<BlockId>,
    /// Clique matrix in terms of builder variables: `X_k` on the completion
    /// side, `Z_k` on the construction side.
    matrix: Affine,
}

#[derive(Debug, Clone)]
struct BlockPlan {
    /// Index in `cliques` per clique of the block's cover.
    cliques: Vec<usize>,
    cover: Option<CliqueCover>,
}

/// A lowered approximation together with the maps needed to read back
/// `(X, y, Z)` and the clique blocks.
#[derive(Debug, Clone)]
pub struct DecomposedProblem {
    pub problem: ConicProblem,
    pub side: Side,
    pub bound: Bound,
    original: ConicProblem,
    cliques: Vec<CliquePlan>,
    plans: Vec<BlockPlan>,
    /// Completion side: variable of each stored entry of `X`.
    x_vars: BTreeMap<(usize, usize), usize>,
    /// Completion side: row block of `<A_i, X> = b_i`.
    eq_block: Option<BlockId>,
    /// Construction side: row `(block, index)` of each pattern entry of `Z`.
    z_rows: BTreeMap<(usize, usize), (BlockId, usize)>,
    /// Construction side: variables holding `y`.
    y_vars: Vec<usize>,
    /// Offsets of the builder blocks inside the lowered problem.
    built_offsets: Vec<usize>,
}

struct Shared<'a> {
    p: &'a ConicProblem,
    offsets: Vec<usize>,
}

impl Shared<'_> {
    /// Entries of `C` and each `A_i` inside block `k`, in global indices.
    fn block_entries(&self, k: usize) -> BTreeMap<(usize, usize), (f64, Vec<(usize, f64)>)> {
        let (lo, hi) = (self.offsets[k], self.offsets[k + 1]);
        let mut out: BTreeMap<(usize, usize), (f64, Vec<(usize, f64)>)> = BTreeMap::new();
        let inside = |r: usize| r >= lo && r < hi;
        for &(r, c, v) in self.p.c.entries() {
            if inside(r) {
                out.entry((r, c)).or_default().0 += v;
            }
        }
        for (i, a) in self.p.a.iter().enumerate() {
            for &(r, c, v) in a.entries() {
                if inside(r) {
                    out.entry((r, c)).or_default().1.push((i, v));
                }
            }
        }
        out
    }
}

fn default_cover(dim: usize) -> CliqueCover {
    CliqueCover::single(dim)
}

fn side_kind(p: &ConicProblem, k: usize, side: Side) -> ConeKind {
    match side {
        Side::Completion => p.primal_cone(k),
        Side::Construction => p.dual_cone(k),
    }
}

fn assignments_by_block(p: &ConicProblem, assignments: &[ConeAssignment], side: Side) -> Result<Vec<Option<ConeAssignment>>> {
    let mut by_block: Vec<Option<ConeAssignment>> = vec![None; p.blocks.len()];
    for a in assignments {
        a.validate()?;
        if a.block >= p.blocks.len() {
            return Err(Error::InvalidArgument(format!("assignment for block {} of {}", a.block + 1, p.blocks.len())));
        }
        if p.blocks[a.block].cone.is_vector() {
            return Err(Error::InvalidArgument(format!("block {} is a vector block", a.block + 1)));
        }
        if a.cover.n() != p.blocks[a.block].dim {
            return Err(Error::DimensionMismatch(format!(
                "cover on {} vertices for block of size {}",
                a.cover.n(),
                p.blocks[a.block].dim
            )));
        }
        if by_block[a.block].is_some() {
            return Err(Error::InvalidArgument(format!("two assignments for block {}", a.block + 1)));
        }
        by_block[a.block] = Some(a.clone().with_side(side));
    }
    for (k, blk) in p.blocks.iter().enumerate() {
        if by_block[k].is_none() && blk.cone.is_matrix() {
            let kind = side_kind(p, k, side);
            by_block[k] = Some(ConeAssignment::new(default_cover(blk.dim), vec![kind], side).on_block(k));
        }
    }
    Ok(by_block)
}

/// Applies `M -> L M L'` to a parametric map.
fn change_basis(r: &ConeReformulation, map: &[Vec<(usize, f64)>], l: &DMatrix<f64>) -> Vec<Vec<(usize, f64)>> {
    let d = r.dim;
    let mut per_coord: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
    for j in 0..d {
        for i in 0..=j {
            for &(c, coef) in &map[svec_index(i, j)] {
                per_coord.entry(c).or_default().push((i, j, coef));
            }
        }
    }
    let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); triangular_size(d)];
    for (c, entries) in per_coord {
        let mut m = DMatrix::zeros(d, d);
        for (i, j, v) in entries {
            m[(i, j)] += v;
            if i != j {
                m[(j, i)] += v;
            }
        }
        let t = l * m * l.transpose();
        for j in 0..d {
            for i in 0..=j {
                let v = t[(i, j)];
                if v.abs() > 1e-15 * (1.0 + t.amax()) {
                    out[svec_index(i, j)].push((c, v));
                }
            }
        }
    }
    out
}

/// Adds the cone of one clique. `entry` gives the clique matrix entries as
/// affine expressions when they already exist (completion side); otherwise
/// new variables are created and returned through the plan.
fn add_clique_cone(
    lb: &mut LmiBuilder,
    kind: &ConeKind,
    basis: Option<&DMatrix<f64>>,
    vertices: Vec<usize>,
    given: Option<Affine>,
) -> Result<CliquePlan> {
    let d = vertices.len();
    let r = reformulate(d, kind)?;
    let mut blocks = Vec::new();
    let is_identity_psd = matches!(&r.map, ReformMap::Parametric(_)) && r.blocks.len() == 1 && r.blocks[0].0.is_psd() && r.blocks[0].1 == d;
    let use_basis = basis.filter(|_| !is_identity_psd);
    if use_basis.is_some() && !r.is_parametric() {
        return Err(Error::InvalidArgument(format!("change of basis needs a subset cone, found {kind}")));
    }
    let positions = r.coord_positions();
    match (&r.map, given) {
        (ReformMap::Parametric(_), Some(x)) if is_identity_psd && use_basis.is_none() => {
            let b = lb.add_block(ConeKind::psd(), d);
            for j in 0..d {
                for i in 0..=j {
                    for &(v, c) in &x[svec_index(i, j)] {
                        lb.add_term(b, i, j, v, c);
                    }
                }
            }
            blocks.push(b);
            Ok(CliquePlan { vertices, blocks, matrix: x })
        }
        (ReformMap::Parametric(map), given) => {
            let map = match use_basis {
                Some(l) => change_basis(&r, map, l),
                None => map.clone(),
            };
            let u0 = lb.add_vars(r.num_coords()).start;
            let ids: Vec<BlockId> = r.blocks.iter().map(|(k, bd)| lb.add_block(k.clone(), *bd)).collect();
            for (c, &(b, i, j)) in positions.iter().enumerate() {
                lb.add_term(ids[b], i, j, u0 + c, 1.0);
            }
            blocks.extend(&ids);
            let param: Affine = map.iter().map(|e| e.iter().map(|&(c, coef)| (u0 + c, coef)).collect()).collect();
            match given {
                Some(x) => {
                    // linking rows X_e - L(u)_e = 0
                    let link = lb.add_block(ConeKind::zero(), triangular_size(d));
                    for e in 0..triangular_size(d) {
                        for &(v, c) in &x[e] {
                            lb.add_term(link, e, e, v, c);
                        }
                        for &(v, c) in &param[e] {
                            lb.add_term(link, e, e, v, -c);
                        }
                    }
                    blocks.push(link);
                    Ok(CliquePlan { vertices, blocks, matrix: x })
                }
                None => Ok(CliquePlan { vertices, blocks, matrix: param }),
            }
        }
        (ReformMap::Constraint(rows), given) => {
            let x = match given {
                Some(x) => x,
                None => {
                    let z0 = lb.add_vars(triangular_size(d)).start;
                    (0..triangular_size(d)).map(|e| vec![(z0 + e, 1.0)]).collect()
                }
            };
            let ids: Vec<BlockId> = r.blocks.iter().map(|(k, bd)| lb.add_block(k.clone(), *bd)).collect();
            for (c, &(b, i, j)) in positions.iter().enumerate() {
                for &((a, bb), coef) in &rows[c] {
                    let (a, bb) = if a <= bb { (a, bb) } else { (bb, a) };
                    for &(v, xc) in &x[svec_index(a, bb)] {
                        lb.add_term(ids[b], i, j, v, coef * xc);
                    }
                }
            }
            blocks.extend(&ids);
            Ok(CliquePlan { vertices, blocks, matrix: x })
        }
    }
}

fn pattern_error(r: usize, c: usize) -> Error {
    Error::PatternNotCovered(r + 1, c + 1)
}

/// Lowers `p` with the completion side on every assigned block. Matrix
/// blocks without an assignment keep their own cone as a single clique.
pub fn build_completion(p: &ConicProblem, a: &ConeAssignment) -> Result<DecomposedProblem> {
    build_completion_multi(p, std::slice::from_ref(a))
}

pub fn build_completion_multi(p: &ConicProblem, assignments: &[ConeAssignment]) -> Result<DecomposedProblem> {
    p.validate()?;
    let by_block = assignments_by_block(p, assignments, Side::Completion)?;
    let sh = Shared { p, offsets: p.offsets() };
    let mut lb = LmiBuilder::new();
    let mut x_vars: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut cliques = Vec::new();
    let mut plans = Vec::new();

    // variables for every stored position of X
    for (k, blk) in p.blocks.iter().enumerate() {
        let o = sh.offsets[k];
        match &by_block[k] {
            Some(a) => {
                for (i, j) in a.cover.entries() {
                    let v = lb.add_var(0.0);
                    x_vars.insert((o + i, o + j), v);
                }
            }
            None => {
                let kind = p.primal_cone(k);
                if kind.family != ConeFamily::Zero {
                    for i in 0..blk.dim {
                        let v = lb.add_var(0.0);
                        x_vars.insert((o + i, o + i), v);
                    }
                }
            }
        }
    }
    // data must live on stored positions
    let mut owner = Vec::with_capacity(p.n());
    for (k, b) in p.blocks.iter().enumerate() {
        owner.extend(std::iter::repeat_n(k, b.dim));
    }
    let zero_block = |r: usize| p.primal_cone(owner[r]).family == ConeFamily::Zero && p.blocks[owner[r]].cone.is_vector();
    for m in std::iter::once(&p.c).chain(&p.a) {
        for &(r, c, _) in m.entries() {
            if !x_vars.contains_key(&(r, c)) && !zero_block(r) {
                let o = sh.offsets[owner[r]];
                return Err(pattern_error(r - o, c - o));
            }
        }
    }
    for &(r, c, v) in p.c.entries() {
        if let Some(&var) = x_vars.get(&(r, c)) {
            let w = if r == c { 1.0 } else { 2.0 };
            lb.set_objective(var, -w * v);
        }
    }
    let eq_block = if p.m() > 0 {
        let eq = lb.add_block(ConeKind::zero(), p.m());
        for (i, (a, &bi)) in p.a.iter().zip(&p.b).enumerate() {
            lb.add_constant(eq, i, i, bi);
            for &(r, c, v) in a.entries() {
                if let Some(&var) = x_vars.get(&(r, c)) {
                    let w = if r == c { 1.0 } else { 2.0 };
                    lb.add_term(eq, i, i, var, -w * v);
                }
            }
        }
        Some(eq)
    } else {
        None
    };
    for (k, blk) in p.blocks.iter().enumerate() {
        let o = sh.offsets[k];
        match &by_block[k] {
            Some(a) => {
                let mut idx = Vec::new();
                for (ci, clique) in a.cover.cliques.iter().enumerate() {
                    let d = clique.len();
                    let mut x: Affine = vec![Vec::new(); triangular_size(d)];
                    for j in 0..d {
                        for i in 0..=j {
                            x[svec_index(i, j)] = vec![(x_vars[&(o + clique[i], o + clique[j])], 1.0)];
                        }
                    }
                    let verts = clique.iter().map(|v| o + v).collect();
                    let plan = add_clique_cone(&mut lb, &a.kinds[ci], a.bases[ci].as_ref(), verts, Some(x))?;
                    idx.push(cliques.len());
                    cliques.push(plan);
                }
                plans.push(BlockPlan { cliques: idx, cover: Some(a.cover.clone()) });
            }
            None => {
                let kind = p.primal_cone(k);
                if !matches!(kind.family, ConeFamily::Zero | ConeFamily::Free) {
                    let b = lb.add_block(kind, blk.dim);
                    for i in 0..blk.dim {
                        lb.add_term(b, i, i, x_vars[&(o + i, o + i)], 1.0);
                    }
                }
                plans.push(BlockPlan { cliques: Vec::new(), cover: None });
            }
        }
    }
    let bound = combined_bound(&by_block, Side::Completion);
    let built_offsets = lb.offsets();
    Ok(DecomposedProblem {
        problem: lb.build()?,
        side: Side::Completion,
        bound,
        original: p.clone(),
        cliques,
        plans,
        x_vars,
        eq_block,
        z_rows: BTreeMap::new(),
        y_vars: Vec::new(),
        built_offsets,
    })
}

fn combined_bound(by_block: &[Option<ConeAssignment>], side: Side) -> Bound {
    let mut upper = false;
    let mut lower = false;
    for a in by_block.iter().flatten() {
        for k in &a.kinds {
            if k.is_psd() {
                continue;
            }
            let subset = k.orientation == Orientation::PrimalSubset;
            match (side, subset) {
                (Side::Completion, true) | (Side::Construction, false) => upper = true,
                _ => lower = true,
            }
        }
    }
    match (upper, lower) {
        (false, false) => Bound::Exact,
        (true, false) => Bound::Upper,
        (false, true) => Bound::Lower,
        // mixed orientations give no guaranteed direction; report by side
        (true, true) => match side {
            Side::Completion => Bound::Upper,
            Side::Construction => Bound::Lower,
        },
    }
}

/// Lowers `p` with clique-sum cones on the slack of every assigned block.
pub fn build_construction(p: &ConicProblem, a: &ConeAssignment) -> Result<DecomposedProblem> {
    build_construction_multi(p, std::slice::from_ref(a))
}

pub fn build_construction_multi(p: &ConicProblem, assignments: &[ConeAssignment]) -> Result<DecomposedProblem> {
    p.validate()?;
    let by_block = assignments_by_block(p, assignments, Side::Construction)?;
    let sh = Shared { p, offsets: p.offsets() };
    let mut lb = LmiBuilder::new();
    let y_vars: Vec<usize> = p.b.iter().map(|&bi| lb.add_var(bi)).collect();
    let mut cliques = Vec::new();
    let mut plans = Vec::new();
    let mut z_rows = BTreeMap::new();
    for (k, blk) in p.blocks.iter().enumerate() {
        let o = sh.offsets[k];
        let data = sh.block_entries(k);
        match &by_block[k] {
            Some(a) => {
                let entries = a.cover.entries();
                let pos: HashMap<(usize, usize), usize> =
                    entries.iter().enumerate().map(|(t, &(i, j))| ((o + i, o + j), t)).collect();
                for &(r, c) in data.keys() {
                    if !pos.contains_key(&(r, c)) {
                        return Err(pattern_error(r - o, c - o));
                    }
                }
                let rows = lb.add_block(ConeKind::zero(), entries.len());
                let weight = |r: usize, c: usize| if r == c { 1.0 } else { 2.0 };
                for (&(r, c), (cv, terms)) in &data {
                    let t = pos[&(r, c)];
                    let w = weight(r, c);
                    lb.add_constant(rows, t, t, w * cv);
                    for &(i, v) in terms {
                        lb.add_term(rows, t, t, y_vars[i], -w * v);
                    }
                }
                for (t, &(i, j)) in entries.iter().enumerate() {
                    z_rows.insert((o + i, o + j), (rows, t));
                }
                let mut idx = Vec::new();
                for (ci, clique) in a.cover.cliques.iter().enumerate() {
                    let verts: Vec<usize> = clique.iter().map(|v| o + v).collect();
                    let plan = add_clique_cone(&mut lb, &a.kinds[ci], a.bases[ci].as_ref(), verts.clone(), None)?;
                    let d = clique.len();
                    for jj in 0..d {
                        for ii in 0..=jj {
                            let (r, c) = (verts[ii], verts[jj]);
                            let t = pos[&(r, c)];
                            let w = weight(r, c);
                            for &(v, coef) in &plan.matrix[svec_index(ii, jj)] {
                                lb.add_term(rows, t, t, v, -w * coef);
                            }
                        }
                    }
                    idx.push(cliques.len());
                    cliques.push(plan);
                }
                plans.push(BlockPlan { cliques: idx, cover: Some(a.cover.clone()) });
            }
            None => {
                let kind = p.dual_cone(k);
                if kind.family != ConeFamily::Free {
                    let b = lb.add_block(kind, blk.dim);
                    for (&(r, _), (cv, terms)) in &data {
                        let t = r - o;
                        lb.add_constant(b, t, t, *cv);
                        for &(i, v) in terms {
                            lb.add_term(b, t, t, y_vars[i], -v);
                        }
                    }
                    for i in 0..blk.dim {
                        z_rows.insert((o + i, o + i), (b, i));
                    }
                }
                plans.push(BlockPlan { cliques: Vec::new(), cover: None });
            }
        }
    }
    let bound = combined_bound(&by_block, Side::Construction);
    let built_offsets = lb.offsets();
    Ok(DecomposedProblem {
        problem: lb.build()?,
        side: Side::Construction,
        bound,
        original: p.clone(),
        cliques,
        plans,
        x_vars: BTreeMap::new(),
        eq_block: None,
        z_rows,
        y_vars,
        built_offsets,
    })
}

/// `(X, y, Z)` of the original problem read back from a lowered solution,
/// with per-clique blocks.
#[derive(Debug, Clone)]
pub struct Recovered {
    pub status: Status,
    /// Bound on the optimal value of the original problem.
    pub value: f64,
    /// `X` on the stored positions (pattern entries of decomposed blocks).
    pub x: SymMatrix,
    pub y: Vec<f64>,
    /// `C - sum_i y_i A_i`.
    pub z: SymMatrix,
    /// Clique blocks of `X`, per decomposed block.
    pub clique_x: Vec<Vec<SymMatrix>>,
    /// Clique blocks of the slack: the dual blocks `S_k` with
    /// `sum_k E_k' S_k E_k = Z` on the completion side, the clique terms
    /// `Z_k` on the construction side.
    pub clique_z: Vec<Vec<SymMatrix>>,
    /// Covers of the decomposed blocks, aligned with `clique_x`.
    pub covers: Vec<CliqueCover>,
    /// Problem block index of each entry of `covers`.
    pub blocks: Vec<usize>,
    pub solution: Solution,
}

impl Recovered {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

impl DecomposedProblem {
    pub fn original(&self) -> &ConicProblem {
        &self.original
    }

    pub fn num_cliques(&self) -> usize {
        self.cliques.len()
    }

    fn built_entry(&self, m: &SymMatrix, b: BlockId, i: usize, j: usize) -> f64 {
        let o = self.built_offsets[b.0];
        m.get(o + i, o + j)
    }

    fn eval(&self, vals: &[f64], a: &Affine, d: usize) -> SymMatrix {
        let mut t = Vec::new();
        for j in 0..d {
            for i in 0..=j {
                let v: f64 = a[svec_index(i, j)].iter().map(|&(var, c)| c * vals[var]).sum();
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        SymMatrix::from_triplets(d, t).expect("clique entries")
    }

    /// Value of the original objective implied by a lowered solution.
    pub fn value_of(&self, s: &Solution) -> f64 {
        let v = s.objective(Form::Dual);
        match self.side {
            Side::Completion => -v,
            Side::Construction => v,
        }
    }

    /// Reads `(X, y, Z)` and the clique blocks from a lowered solution.
    pub fn recover_entries(&self, s: &Solution) -> Result<Recovered> {
        if !matches!(s.status, Status::Optimal | Status::MaxIter) {
            return Err(Error::NotSolved(s.status.to_string()));
        }
        let p = &self.original;
        let n = p.n();
        let (x, y) = match self.side {
            Side::Completion => {
                let x = SymMatrix::from_triplets(
                    n,
                    self.x_vars.iter().map(|(&(r, c), &v)| (r, c, s.y[v])).filter(|t| t.2 != 0.0),
                )?;
                let y = match self.eq_block {
                    Some(b) => (0..p.m()).map(|i| -self.built_entry(&s.x, b, i, i)).collect(),
                    None => Vec::new(),
                };
                (x, y)
            }
            Side::Construction => {
                let y: Vec<f64> = self.y_vars.iter().map(|&v| s.y[v]).collect();
                let x = SymMatrix::from_triplets(
                    n,
                    self.z_rows
                        .iter()
                        .map(|(&(r, c), &(b, t))| (r, c, self.built_entry(&s.x, b, t, t)))
                        .filter(|t| t.2 != 0.0),
                )?;
                (x, y)
            }
        };
        let z = p.slack(&y);
        let mut clique_x = Vec::new();
        let mut clique_z = Vec::new();
        let mut covers = Vec::new();
        let mut blocks = Vec::new();
        for (k, plan) in self.plans.iter().enumerate() {
            let Some(cover) = &plan.cover else { continue };
            let mut xs = Vec::new();
            let mut zs = Vec::new();
            for &ci in &plan.cliques {
                let cp = &self.cliques[ci];
                let d = cp.vertices.len();
                match self.side {
                    Side::Completion => {
                        xs.push(x.principal_submatrix(&cp.vertices));
                        zs.push(self.completion_dual_block(s, cp)?);
                    }
                    Side::Construction => {
                        xs.push(x.principal_submatrix(&cp.vertices));
                        zs.push(self.eval(&s.y, &cp.matrix, d));
                    }
                }
            }
            clique_x.push(xs);
            clique_z.push(zs);
            covers.push(cover.clone());
            blocks.push(k);
        }
        Ok(Recovered {
            status: s.status,
            value: self.value_of(s),
            x,
            y,
            z,
            clique_x,
            clique_z,
            covers,
            blocks,
            solution: s.clone(),
        })
    }

    /// `S_k` from the multipliers of the clique's cone rows: stationarity in
    /// each entry variable `X_e` gives `sum_k S_k,e = Z_e`.
    fn completion_dual_block(&self, s: &Solution, cp: &CliquePlan) -> Result<SymMatrix> {
        let d = cp.vertices.len();
        let own: Vec<(usize, usize)> = cp.blocks.iter().map(|b| (self.built_offsets[b.0], self.built_offsets[b.0 + 1])).collect();
        let inside = |r: usize| own.iter().any(|&(lo, hi)| r >= lo && r < hi);
        let mut t = Vec::new();
        for jj in 0..d {
            for ii in 0..=jj {
                let var = self.x_vars[&(cp.vertices[ii], cp.vertices[jj])];
                let mut contrib = 0.0;
                for &(r, c, v) in self.problem.a[var].entries() {
                    if inside(r) {
                        let w = if r == c { 1.0 } else { 2.0 };
                        contrib += w * v * s.x.get(r, c);
                    }
                }
                let w = if ii == jj { 1.0 } else { 2.0 };
                let val = -contrib / w;
                if val != 0.0 {
                    t.push((ii, jj, val));
                }
            }
        }
        SymMatrix::from_triplets(d, t)
    }
}

/// Result of a decomposed solve with timing.
#[derive(Debug, Clone)]
pub struct ApproxResult {
    pub recovered: Option<Recovered>,
    pub status: Status,
    pub value: f64,
    pub bound: Bound,
    pub elapsed: Duration,
    pub lowered_size: (usize, usize),
}

/// Builds, solves and recovers in one call.
pub fn solve_decomposed(p: &ConicProblem, assignments: &[ConeAssignment], side: Side, settings: &SolverSettings) -> Result<ApproxResult> {
    let t0 = Instant::now();
    let d = match side {
        Side::Completion => build_completion_multi(p, assignments)?,
        Side::Construction => build_construction_multi(p, assignments)?,
    };
    let s = solve(&d.problem, settings)?;
    let value = d.value_of(&s);
    let recovered = d.recover_entries(&s).ok();
    Ok(ApproxResult {
        recovered,
        status: s.status,
        value,
        bound: d.bound,
        elapsed: t0.elapsed(),
        lowered_size: (d.problem.n(), d.problem.m()),
    })
}

/// Solves a problem that may list structured cones, using each block's own
/// cone as a single clique: primal-form problems through the completion
/// side, dual-form problems through the construction side.
pub fn solve_structured(p: &ConicProblem, settings: &SolverSettings) -> Result<ApproxResult> {
    let side = match p.form {
        Form::Primal => Side::Completion,
        Form::Dual => Side::Construction,
    };
    solve_decomposed(p, &[], side, settings)
}
