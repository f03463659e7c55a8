//! Incremental construction of dual-form problems from affine cone blocks.
//!
//! Every block entry is an affine function `const + sum_v coef_v * y_v` of
//! the scalar variables, and the block must lie in its cone. The
//! result is a dual-form [`ConicProblem`] maximizing `sum_v obj_v * y_v`,
//! with `C` the constants and `A_v` the negated coefficients.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::matrix::SymMatrix;
use crate::problem::{Block, ConeKind, ConicProblem, Form};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Default)]
pub struct LmiBuilder {
    objective: Vec<f64>,
    blocks: Vec<(ConeKind, usize)>,
    constant: BTreeMap<(usize, usize, usize), f64>,
    coef: BTreeMap<(usize, usize, usize, usize), f64>,
}

impl LmiBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with objective weight `obj` and returns its index.
    pub fn add_var(&mut self, obj: f64) -> usize {
        self.objective.push(obj);
        self.objective.len() - 1
    }

    pub fn add_vars(&mut self, count: usize) -> std::ops::Range<usize> {
        let s = self.objective.len();
        self.objective.resize(s + count, 0.0);
        s..s + count
    }

    pub fn set_objective(&mut self, var: usize, obj: f64) {
        self.objective[var] = obj;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_block(&mut self, cone: ConeKind, dim: usize) -> BlockId {
        self.blocks.push((cone, dim));
        BlockId(self.blocks.len() - 1)
    }

    pub fn block_dim(&self, b: BlockId) -> usize {
        self.blocks[b.0].1
    }

    /// Adds `value` to the constant of entry `(i, j)` of block `b`.
    pub fn add_constant(&mut self, b: BlockId, i: usize, j: usize, value: f64) {
        if value != 0.0 {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            *self.constant.entry((b.0, i, j)).or_insert(0.0) += value;
        }
    }

    /// Adds `coef * y_var` to entry `(i, j)` of block `b`.
    pub fn add_term(&mut self, b: BlockId, i: usize, j: usize, var: usize, coef: f64) {
        if coef != 0.0 {
            let (i, j) = if i <= j { (i, j) } else { (j, i) };
            *self.coef.entry((var, b.0, i, j)).or_insert(0.0) += coef;
        }
    }

    pub fn build(&self) -> Result<ConicProblem> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut n = 0;
        for &(_, d) in &self.blocks {
            off.push(n);
            n += d;
        }
        let c = SymMatrix::from_summed_triplets(
            n,
            self.constant.iter().map(|(&(b, i, j), &v)| (off[b] + i, off[b] + j, v)),
        )?;
        let mut per_var: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); self.objective.len()];
        for (&(v, b, i, j), &x) in &self.coef {
            per_var[v].push((off[b] + i, off[b] + j, -x));
        }
        let a = per_var
            .into_iter()
            .map(|t| SymMatrix::from_summed_triplets(n, t))
            .collect::<Result<Vec<_>>>()?;
        let blocks = self.blocks.iter().map(|(k, d)| Block::new(*d, k.clone())).collect();
        ConicProblem::new(Form::Dual, blocks, c, a, self.objective.clone())
    }

    /// Offset of each block in the built problem.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len() + 1);
        let mut n = 0;
        off.push(0);
        for &(_, d) in &self.blocks {
            n += d;
            off.push(n);
        }
        off
    }
}
