//! Sum-of-squares relaxations of polynomial optimization problems.
//!
//! `p(x) - gamma = sigma(x) + sum_i zeta_i(x) g_i(x) + sum_j phi_j(x) h_j(x)`
//! with `sigma = v' Q v` and `zeta_i` SOS, `phi_j` free. Programs are
//! primal-form conic problems: block 0 is a free vector holding `gamma` and
//! the coefficients of every `phi_j`, the remaining blocks are Gram
//! matrices. Each monomial gives one coefficient-matching equality.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::decomp::{adapt_kind, solve_structured, Recovered};
use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::cones::margin_dense;
use crate::problem::{Block, ConeFamily, ConeKind, ConicProblem, Form, Status};
use crate::solver::SolverSettings;
use crate::sparsity::{chordal_extend, CliqueCover, PatternGraph};

pub type Monomial = Vec<u32>;

/// Sparse polynomial in `nvars` variables; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The variable `x_i` (0-based).
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(Error::DimensionMismatch(format!("exponent of length {} for {nvars} variables", e.len())));
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn add_term(&mut self, e: Monomial, c: f64) {
        debug_assert_eq!(e.len(), self.nvars);
        let v = self.terms.entry(e.clone()).or_insert(0.0);
        *v += c;
        if *v == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, f64> {
        &self.terms
    }

    pub fn coefficient(&self, e: &[u32]) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Variables with a positive exponent somewhere.
    pub fn support(&self) -> BTreeSet<usize> {
        self.terms.keys().flat_map(|e| e.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, _)| i)).collect()
    }

    pub fn add(&self, o: &Polynomial) -> Polynomial {
        let mut r = self.clone();
        for (e, &c) in &o.terms {
            r.add_term(e.clone(), c);
        }
        r
    }

    pub fn sub(&self, o: &Polynomial) -> Polynomial {
        self.add(&o.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut r = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            r.add_term(e.clone(), s * c);
        }
        r
    }

    pub fn mul(&self, o: &Polynomial) -> Polynomial {
        let mut r = Self::zero(self.nvars);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &o.terms {
                r.add_term(mono_mul(a, b), ca * cb);
            }
        }
        r
    }

    pub fn square(&self) -> Polynomial {
        self.mul(self)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.nvars];
        for (e, c) in &self.terms {
            for i in 0..self.nvars {
                if e[i] == 0 {
                    continue;
                }
                let mut t = c * e[i] as f64;
                for (j, (&k, &xj)) in e.iter().zip(x).enumerate() {
                    t *= xj.powi(if j == i { k as i32 - 1 } else { k as i32 });
                }
                g[i] += t;
            }
        }
        g
    }

    /// One monomial per line: `coeff e_1 ... e_N`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Polynomial> {
        let mut nvars = None;
        let mut terms = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let l = line.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let t: Vec<&str> = l.split_whitespace().collect();
            let perr = |msg: String| Error::Parse { line: no + 1, msg };
            let c: f64 = t[0].parse().map_err(|e| perr(format!("bad coefficient {:?}: {e}", t[0])))?;
            let e = t[1..]
                .iter()
                .map(|s| s.parse::<u32>().map_err(|e| perr(format!("bad exponent {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            match nvars {
                None => nvars = Some(e.len()),
                Some(n) if n != e.len() => return Err(perr(format!("expected {n} exponents, found {}", e.len()))),
                _ => {}
            }
            terms.push((e, c));
        }
        let n = nvars.ok_or_else(|| Error::Parse { line: 0, msg: "no monomials".into() })?;
        Polynomial::from_terms(n, terms)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (e, c) in &self.terms {
            let _ = write!(out, "{c}");
            for k in e {
                let _ = write!(out, " {k}");
            }
            out.push('\n');
        }
        out
    }
}

fn mono_mul(a: &[u32], b: &[u32]) -> Monomial {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// All monomials in the variables `vars` of total degree at most `deg`,
/// graded then lexicographic.
pub fn monomial_basis(nvars: usize, vars: &[usize], deg: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=deg {
        let mut cur = vec![0u32; vars.len()];
        fill(&mut cur, 0, d, &mut |c| {
            let mut e = vec![0; nvars];
            for (k, &v) in vars.iter().enumerate() {
                e[v] = c[k];
            }
            out.push(e);
        });
    }
    out
}

fn fill(cur: &mut [u32], pos: usize, left: u32, emit: &mut dyn FnMut(&[u32])) {
    if pos == cur.len() {
        if left == 0 {
            emit(cur);
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k;
        fill(cur, pos + 1, left - k, emit);
    }
    cur[pos] = 0;
}

/// Correlative sparsity graph: variables co-occurring in a monomial of `p`
/// or appearing together in one constraint.
pub fn csp_graph(p: &Polynomial, gs: &[Polynomial], hs: &[Polynomial]) -> PatternGraph {
    let mut edges = Vec::new();
    let mut pairs = |vars: &[usize]| {
        for (a, &i) in vars.iter().enumerate() {
            for &j in &vars[a + 1..] {
                edges.push((i, j));
            }
        }
    };
    for e in p.terms.keys() {
        let vars: Vec<usize> = e.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, _)| i).collect();
        pairs(&vars);
    }
    for q in gs.iter().chain(hs) {
        let vars: Vec<usize> = q.support().into_iter().collect();
        pairs(&vars);
    }
    PatternGraph::from_edge_union(p.nvars, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramRole {
    /// `sigma_k`.
    Sigma,
    /// Multiplier `zeta_i` of inequality `i`.
    Inequality(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramBlock {
    /// Problem block index.
    pub block: usize,
    pub basis: Vec<Monomial>,
    pub role: GramRole,
    /// Clique the block lives on (0 for dense programs).
    pub clique: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SOSProgram {
    pub nvars: usize,
    pub problem: ConicProblem,
    pub grams: Vec<GramBlock>,
    /// Matched monomial of each equality row.
    pub monomials: Vec<Monomial>,
    /// `(equality j, monomial)` of each coefficient of `phi_j`, stored after
    /// `gamma` in block 0.
    pub free_coefficients: Vec<(usize, Monomial)>,
    pub cover: Option<CliqueCover>,
}

impl SOSProgram {
    /// `gamma` from the primal variable.
    pub fn gamma_of(&self, x: &SymMatrix) -> f64 {
        x.get(0, 0)
    }

    pub fn gram(&self, x: &SymMatrix, g: usize) -> SymMatrix {
        let off = self.problem.offsets();
        let b = self.grams[g].block;
        let idx: Vec<usize> = (off[b]..off[b + 1]).collect();
        x.principal_submatrix(&idx)
    }

    /// `v' Q v` for Gram block `g`.
    pub fn gram_polynomial(&self, g: usize, q: &SymMatrix) -> Polynomial {
        let basis = &self.grams[g].basis;
        let mut p = Polynomial::zero(self.nvars);
        for &(i, j, v) in q.entries() {
            let w = if i == j { 1.0 } else { 2.0 };
            p.add_term(mono_mul(&basis[i], &basis[j]), w * v);
        }
        p
    }
}

struct Assembler {
    rows: HashMap<Monomial, usize>,
    monomials: Vec<Monomial>,
    trip: Vec<Vec<(usize, usize, f64)>>,
}

impl Assembler {
    fn row(&mut self, e: Monomial) -> usize {
        if let Some(&r) = self.rows.get(&e) {
            return r;
        }
        let r = self.monomials.len();
        self.rows.insert(e.clone(), r);
        self.monomials.push(e);
        self.trip.push(Vec::new());
        r
    }

    /// Adds `v' Q v * mult` for a Gram block at offset `off`.
    fn gram(&mut self, off: usize, basis: &[Monomial], mult: &Polynomial) {
        for j in 0..basis.len() {
            for i in 0..=j {
                let base = mono_mul(&basis[i], &basis[j]);
                for (e, &c) in &mult.terms {
                    let r = self.row(mono_mul(&base, e));
                    self.trip[r].push((off + i, off + j, c));
                }
            }
        }
    }
}

/// Degree of the Gram basis for a multiplier of `g` at relaxation degree `d`.
fn half_degree(d: u32, deg_g: u32, i: usize) -> Result<u32> {
    if deg_g > d {
        return Err(Error::InvalidDegree(format!("constraint {} has degree {deg_g} above {d}", i + 1)));
    }
    Ok((d - deg_g) / 2)
}

fn check_degree(p: &Polynomial, d: u32) -> Result<()> {
    if d % 2 == 1 {
        return Err(Error::InvalidDegree(format!("relaxation degree {d} is odd")));
    }
    if p.degree() > d {
        return Err(Error::InvalidDegree(format!("degree {} exceeds relaxation degree {d}", p.degree())));
    }
    Ok(())
}

/// Drops `m` from the SOS bases while `m^2` is absent from `p` and arises
/// only from diagonal Gram entries of SOS blocks: those entries are then
/// zero, which zeroes the whole row of any Gram matrix inside the PSD cone.
fn prune_bases(p: &Polynomial, gs: &[Polynomial], hs: &[Polynomial], free: &[(usize, Monomial)], grams: &mut [GramBlock]) {
    let zero = vec![0; p.nvars];
    loop {
        let mut other: HashSet<Monomial> = HashSet::new();
        other.insert(zero.clone());
        for (j, mu) in free {
            other.extend(hs[*j].terms.keys().map(|e| mono_mul(mu, e)));
        }
        for g in grams.iter() {
            let mult = match g.role {
                GramRole::Sigma => None,
                GramRole::Inequality(i) => Some(&gs[i]),
            };
            for j in 0..g.basis.len() {
                for i in 0..=j {
                    let base = mono_mul(&g.basis[i], &g.basis[j]);
                    match mult {
                        Some(m) => other.extend(m.terms.keys().map(|e| mono_mul(&base, e))),
                        None if i != j => {
                            other.insert(base);
                        }
                        None => {}
                    }
                }
            }
        }
        let mut changed = false;
        for g in grams.iter_mut().filter(|g| g.role == GramRole::Sigma) {
            let before = g.basis.len();
            g.basis.retain(|m| {
                let sq = mono_mul(m, m);
                *m == zero || other.contains(&sq) || p.coefficient(&sq) != 0.0
            });
            changed |= g.basis.len() != before;
        }
        if !changed {
            return;
        }
    }
}

struct Part {
    vars: Vec<usize>,
    ineqs: Vec<usize>,
    eqs: Vec<usize>,
}

fn assemble(p: &Polynomial, gs: &[Polynomial], hs: &[Polynomial], d: u32, parts: &[Part], cover: Option<CliqueCover>) -> Result<SOSProgram> {
    check_degree(p, d)?;
    for q in gs.iter().chain(hs) {
        if q.nvars != p.nvars {
            return Err(Error::DimensionMismatch("constraint variable count differs from the objective".into()));
        }
    }
    let n = p.nvars;
    let mut free_coefficients = Vec::new();
    let mut grams = Vec::new();
    // free block: gamma then phi coefficients
    for part in parts {
        for &j in &part.eqs {
            let deg = d.checked_sub(hs[j].degree()).ok_or_else(|| {
                Error::InvalidDegree(format!("equality {} has degree {} above {d}", j + 1, hs[j].degree()))
            })?;
            for e in monomial_basis(n, &part.vars, deg) {
                free_coefficients.push((j, e));
            }
        }
    }
    for (k, part) in parts.iter().enumerate() {
        let basis = monomial_basis(n, &part.vars, d / 2);
        grams.push(GramBlock { block: 0, basis, role: GramRole::Sigma, clique: k });
        for &i in &part.ineqs {
            let basis = monomial_basis(n, &part.vars, half_degree(d, gs[i].degree(), i)?);
            grams.push(GramBlock { block: 0, basis, role: GramRole::Inequality(i), clique: k });
        }
    }
    prune_bases(p, gs, hs, &free_coefficients, &mut grams);
    let mut blocks = vec![Block::new(1 + free_coefficients.len(), ConeKind::free())];
    for g in &mut grams {
        g.block = blocks.len();
        blocks.push(Block::new(g.basis.len(), ConeKind::psd()));
    }
    let mut asm = Assembler { rows: HashMap::new(), monomials: Vec::new(), trip: Vec::new() };
    for e in p.terms.keys() {
        asm.row(e.clone());
    }
    let r0 = asm.row(vec![0; n]);
    asm.trip[r0].push((0, 0, 1.0));
    for (t, (j, mu)) in free_coefficients.iter().enumerate() {
        for (e, &c) in &hs[*j].terms {
            let r = asm.row(mono_mul(mu, e));
            asm.trip[r].push((1 + t, 1 + t, c));
        }
    }
    let mut off = vec![0usize];
    for b in &blocks {
        off.push(off.last().unwrap() + b.dim);
    }
    let one = Polynomial::constant(n, 1.0);
    for g in &grams {
        let mult = match g.role {
            GramRole::Sigma => &one,
            GramRole::Inequality(i) => &gs[i],
        };
        asm.gram(off[g.block], &g.basis, mult);
    }
    let total = *off.last().unwrap();
    let a = asm
        .trip
        .into_iter()
        .map(|t| SymMatrix::from_summed_triplets(total, t))
        .collect::<Result<Vec<_>>>()?;
    let b: Vec<f64> = asm.monomials.iter().map(|e| p.coefficient(e)).collect();
    let c = SymMatrix::from_triplets(total, [(0, 0, -1.0)])?;
    let problem = ConicProblem::new(Form::Primal, blocks, c, a, b)?;
    Ok(SOSProgram { nvars: n, problem, grams, monomials: asm.monomials, free_coefficients, cover })
}

/// Dense SOS relaxation `max gamma s.t. p - gamma` SOS of degree `d`.
pub fn build_sos(p: &Polynomial, d: u32) -> Result<SOSProgram> {
    build_putinar(p, &[], &[], d)
}

/// Dense Putinar relaxation over `g_i >= 0`, `h_j = 0`.
pub fn build_putinar(p: &Polynomial, gs: &[Polynomial], hs: &[Polynomial], d: u32) -> Result<SOSProgram> {
    let part = Part { vars: (0..p.nvars).collect(), ineqs: (0..gs.len()).collect(), eqs: (0..hs.len()).collect() };
    assemble(p, gs, hs, d, &[part], None)
}

/// Sparse Putinar relaxation with one `sigma_k` per clique of `cover` and
/// every constraint's multiplier on the first clique holding its variables.
pub fn build_sparse_putinar(p: &Polynomial, gs: &[Polynomial], hs: &[Polynomial], d: u32, cover: &CliqueCover) -> Result<SOSProgram> {
    if cover.n() != p.nvars {
        return Err(Error::DimensionMismatch(format!("cover on {} vertices for {} variables", cover.n(), p.nvars)));
    }
    let mut parts: Vec<Part> = cover.cliques.iter().map(|c| Part { vars: c.clone(), ineqs: Vec::new(), eqs: Vec::new() }).collect();
    let home = |q: &Polynomial| {
        let s = q.support();
        cover.cliques.iter().position(|c| s.iter().all(|v| c.contains(v)))
    };
    for (i, g) in gs.iter().enumerate() {
        parts[home(g).ok_or(Error::ConstraintStraddlesCliques(i + 1))?].ineqs.push(i);
    }
    for (j, h) in hs.iter().enumerate() {
        parts[home(h).ok_or(Error::ConstraintStraddlesCliques(gs.len() + j + 1))?].eqs.push(j);
    }
    assemble(p, gs, hs, d, &parts, Some(cover.clone()))
}

/// Sparse relaxation on the chordal extension of the CSP graph.
pub fn build_sparse_putinar_auto(p: &Polynomial, gs: &[Polynomial], hs: &[Polynomial], d: u32) -> Result<SOSProgram> {
    let cover = chordal_extend(&csp_graph(p, gs, hs));
    build_sparse_putinar(p, gs, hs, d, &cover)
}

/// Replaces every Gram cone with `kind`, fitted to each block size.
pub fn restrict_gram(prog: &SOSProgram, kind: &ConeKind) -> Result<ConicProblem> {
    let kinds = vec![kind.clone(); prog.grams.len()];
    restrict_gram_each(prog, &kinds)
}

/// Replaces the cone of Gram block `g` with `kinds[g]`.
pub fn restrict_gram_each(prog: &SOSProgram, kinds: &[ConeKind]) -> Result<ConicProblem> {
    if kinds.len() != prog.grams.len() {
        return Err(Error::DimensionMismatch(format!("{} kinds for {} Gram blocks", kinds.len(), prog.grams.len())));
    }
    let mut p = prog.problem.clone();
    for (g, k) in prog.grams.iter().zip(kinds) {
        if k.is_vector() {
            return Err(Error::InvalidCone(format!("{k} cannot hold a Gram matrix")));
        }
        let dim = p.blocks[g.block].dim;
        let k = adapt_kind(k, dim);
        k.validate(dim)?;
        p.blocks[g.block].cone = k;
    }
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct SosResult {
    pub status: Status,
    /// `-inf` when the restricted program is infeasible.
    pub gamma: f64,
    pub recovered: Option<Recovered>,
}

/// Relative cone tolerance accepted for an infeasibility certificate.
pub const CERTIFICATE_TOL: f64 = 1e-5;

/// Solves a (possibly restricted) SOS program. When the solver does not
/// converge, [`infeasibility_certificate`] decides whether the restriction
/// is infeasible.
pub fn solve_sos(prog: &SOSProgram, problem: &ConicProblem, settings: &SolverSettings) -> Result<SosResult> {
    let r = solve_structured(problem, settings)?;
    let status = match r.status {
        Status::MaxIter | Status::NumericalError if infeasibility_certificate(problem, settings)?.is_some() => {
            Status::Infeasible
        }
        s => s,
    };
    let gamma = match status {
        Status::Infeasible => f64::NEG_INFINITY,
        Status::Unbounded => f64::INFINITY,
        _ => match &r.recovered {
            Some(rec) => prog.gamma_of(&rec.x),
            None => -r.value,
        },
    };
    let recovered = if status == Status::Infeasible { None } else { r.recovered };
    Ok(SosResult { status, gamma, recovered })
}

/// Farkas certificate for a primal-form program: `y` with `-sum_i y_i A_i`
/// in the dual cones and `b'y = 1`. Solves `max b'y` over that cone cut by
/// `b'y <= 1`, whose optimum is 1 when a certificate exists and 0
/// otherwise. Returns the multipliers when the optimum exceeds one half.
pub fn infeasibility_certificate(problem: &ConicProblem, settings: &SolverSettings) -> Result<Option<Vec<f64>>> {
    if problem.form != Form::Primal {
        return Err(Error::InvalidArgument("certificate search expects a primal-form program".into()));
    }
    let n = problem.n();
    let idx: Vec<usize> = (0..n).collect();
    let a = problem
        .a
        .iter()
        .zip(&problem.b)
        .map(|(ai, &bi)| {
            let mut t: Vec<(usize, usize, f64)> = ai.embed(&idx, n + 1)?.entries().to_vec();
            t.push((n, n, bi));
            SymMatrix::from_triplets(n + 1, t.into_iter().filter(|e| e.2 != 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut blocks: Vec<Block> = (0..problem.blocks.len()).map(|k| Block::new(problem.blocks[k].dim, problem.dual_cone(k))).collect();
    blocks.push(Block::new(1, ConeKind::nonneg()));
    let c = SymMatrix::from_triplets(n + 1, [(n, n, 1.0)])?;
    let dual = ConicProblem::new(Form::Dual, blocks, c, a, problem.b.clone())?;
    let r = solve_structured(&dual, settings)?;
    Ok(match (r.status, r.recovered) {
        (Status::Optimal, Some(rec)) if r.value > 0.5 && certifies(problem, &rec.y)? => Some(rec.y),
        _ => None,
    })
}

/// Checks `b'y >= 1/2` and `-sum_i y_i A_i` in the dual cones, block by
/// block, to relative tolerance [`CERTIFICATE_TOL`].
fn certifies(problem: &ConicProblem, y: &[f64]) -> Result<bool> {
    let by: f64 = problem.b.iter().zip(y).map(|(b, y)| b * y).sum();
    if by < 0.5 {
        return Ok(false);
    }
    let n = problem.n();
    let mut z = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (ai, &yi) in problem.a.iter().zip(y) {
        for &(i, j, v) in ai.entries() {
            z[(i, j)] -= yi * v;
            if i != j {
                z[(j, i)] -= yi * v;
            }
        }
    }
    let tol = CERTIFICATE_TOL * (1.0 + z.amax());
    let off = problem.offsets();
    for k in 0..problem.blocks.len() {
        let zk = z.view((off[k], off[k]), (off[k + 1] - off[k], off[k + 1] - off[k])).into_owned();
        let cone = problem.dual_cone(k);
        let ok = match cone.family {
            ConeFamily::Free => true,
            ConeFamily::Zero => zk.amax() <= tol,
            ConeFamily::Nonneg => (0..zk.nrows()).all(|i| zk[(i, i)] >= -tol),
            _ if cone.is_vector() => false,
            _ => margin_dense(&zk, &cone)? >= -tol,
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `f_Q + f_R` with the Lehmer matrix `min(i/j, j/i)` on `x_1..x_{N/6}` and
/// `f_R = sum_{i<=N-3} 10 (x_{i+2} + 2 x_{i+1} - x_i^2)^2 + (1 - x_i - x_{i+3})^2`.
pub fn gen_lehmer_rosenbrock(n: usize) -> Result<Polynomial> {
    if n == 0 || !n.is_multiple_of(6) {
        return Err(Error::InvalidArgument(format!("variable count {n} is not a positive multiple of 6")));
    }
    let x = |i: usize| Polynomial::var(n, i);
    let mut f = Polynomial::zero(n);
    let q = n / 6;
    for i in 0..q {
        for j in 0..q {
            let (a, b) = ((i + 1) as f64, (j + 1) as f64);
            f = f.add(&x(i).mul(&x(j)).scale((a / b).min(b / a)));
        }
    }
    for i in 0..n - 3 {
        let r = x(i + 2).add(&x(i + 1).scale(2.0)).sub(&x(i).square());
        f = f.add(&r.square().scale(10.0));
        let s = Polynomial::constant(n, 1.0).sub(&x(i)).sub(&x(i + 3));
        f = f.add(&s.square());
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st() -> SolverSettings {
        SolverSettings::with_eps(1e-8)
    }

    fn uni(coeffs: &[(u32, f64)]) -> Polynomial {
        Polynomial::from_terms(1, coeffs.iter().map(|&(k, c)| (vec![k], c))).unwrap()
    }

    fn gamma(prog: &SOSProgram, kind: &ConeKind) -> f64 {
        let p = restrict_gram(prog, kind).unwrap();
        solve_sos(prog, &p, &st()).unwrap().gamma
    }

    #[test]
    fn quartic_minimum() {
        let p = uni(&[(4, 1.0), (2, -2.0)]);
        let prog = build_sos(&p, 4).unwrap();
        assert!((gamma(&prog, &ConeKind::psd()) + 1.0).abs() < 1e-5);
        assert!(gamma(&prog, &ConeKind::dd()) <= -1.0 + 1e-6);
    }

    #[test]
    fn squares_have_zero_minimum() {
        assert!(gamma(&build_sos(&uni(&[(2, 1.0)]), 2).unwrap(), &ConeKind::psd()).abs() < 1e-5);
        let x = |i| Polynomial::var(2, i);
        let p = x(0).sub(&x(1)).square();
        assert!(gamma(&build_sos(&p, 2).unwrap(), &ConeKind::psd()).abs() < 1e-5);
    }

    #[test]
    fn odd_degree_is_rejected() {
        assert!(matches!(build_sos(&uni(&[(2, 1.0)]), 3), Err(Error::InvalidDegree(_))));
        assert!(matches!(build_sos(&uni(&[(4, 1.0)]), 2), Err(Error::InvalidDegree(_))));
    }

    #[test]
    fn putinar_on_unit_interval() {
        let g = uni(&[(1, 1.0), (2, -1.0)]);
        let prog = build_putinar(&uni(&[(1, 1.0)]), std::slice::from_ref(&g), &[], 2).unwrap();
        assert!(gamma(&prog, &ConeKind::psd()).abs() < 1e-4);
        let prog = build_putinar(&uni(&[(2, -1.0)]), &[g], &[], 4).unwrap();
        assert!((gamma(&prog, &ConeKind::psd()) + 1.0).abs() < 1e-4);
    }

    #[test]
    fn equality_multiplier() {
        // min x s.t. x - 2 = 0
        let h = uni(&[(1, 1.0), (0, -2.0)]);
        let prog = build_putinar(&uni(&[(1, 1.0)]), &[], &[h], 2).unwrap();
        assert!((gamma(&prog, &ConeKind::psd()) - 2.0).abs() < 1e-4);
    }

    #[test]
    fn chained_sparse_program() {
        let x = |i| Polynomial::var(3, i);
        let p = x(0).sub(&x(1)).square().add(&x(1).sub(&x(2)).square());
        let g = csp_graph(&p, &[], &[]);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let prog = build_sparse_putinar_auto(&p, &[], &[], 2).unwrap();
        assert_eq!(prog.grams.len(), 2);
        assert!(gamma(&prog, &ConeKind::psd()).abs() < 1e-5);
    }

    #[test]
    fn csp_edges_from_constraints() {
        let x = |i| Polynomial::var(3, i);
        let p = x(0).square().mul(&x(1).square()).add(&x(1).square().mul(&x(2).square()));
        assert_eq!(csp_graph(&p, &[], &[]).edges(), &[(0, 1), (1, 2)]);
        let g = x(0).mul(&x(2));
        assert!(csp_graph(&p, &[g], &[]).has_edge(0, 2));
    }

    #[test]
    fn straddling_constraint_is_rejected() {
        let x = |i| Polynomial::var(3, i);
        let p = x(0).square().add(&x(2).square());
        let cover = CliqueCover::from_cliques(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let g = Polynomial::constant(3, 1.0).sub(&x(0).mul(&x(2)));
        assert!(matches!(
            build_sparse_putinar(&p, &[g], &[], 2, &cover),
            Err(Error::ConstraintStraddlesCliques(1))
        ));
    }

    #[test]
    fn gram_reconstructs_sigma() {
        let p = uni(&[(4, 1.0), (2, -2.0)]);
        let prog = build_sos(&p, 4).unwrap();
        let r = solve_sos(&prog, &prog.problem, &st()).unwrap();
        let x = &r.recovered.unwrap().x;
        let q = prog.gram(x, 0);
        let sigma = prog.gram_polynomial(0, &q);
        let diff = p.sub(&Polynomial::constant(1, prog.gamma_of(x))).sub(&sigma);
        assert!(diff.terms().values().all(|c| c.abs() < 1e-6), "{diff:?}");
    }

    #[test]
    fn text_format_round_trip() {
        let p = gen_lehmer_rosenbrock(6).unwrap();
        assert_eq!(Polynomial::parse(&p.to_text()).unwrap(), p);
        assert!(matches!(Polynomial::parse("1 2\n1 2 3\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn lehmer_rosenbrock_coefficients() {
        let f = gen_lehmer_rosenbrock(6).unwrap();
        let mut e = vec![0; 6];
        e[0] = 2;
        // Lehmer term plus (1 - x_1 - x_4)^2
        assert_eq!(f.coefficient(&e), 1.0 + 1.0);
        let f = gen_lehmer_rosenbrock(12).unwrap();
        let mut e = vec![0; 12];
        e[0] = 4;
        assert_eq!(f.coefficient(&e), 10.0);
        assert!(gen_lehmer_rosenbrock(7).is_err());
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(monomial_basis(4, &[0, 1, 2, 3], 2).len(), 15);
        assert_eq!(monomial_basis(20, &(0..20).collect::<Vec<_>>(), 2).len(), 231);
    }
}
