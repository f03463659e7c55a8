//! Conic problem containers, cone kinds and solutions.
//!
//! A [`ConicProblem`] holds the data `(C, {A_i}, b)` of the pair
//!
//! ```text
//!   primal:  min <C,X>  s.t. <A_i,X> = b_i,  X in K_P
//!   dual:    max b'y    s.t. Z = C - sum_i y_i A_i in K_D
//! ```
//!
//! The matrix variable is block diagonal; `blocks` lists the block sizes and
//! cones. With `Form::Primal` the listed cones are `K_P` and `K_D` is their
//! dual; with `Form::Dual` the listed cones are `K_D`. Vector cones (zero,
//! free, nonnegative, second-order) occupy the diagonal of their block.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConeFamily {
    Zero,
    Free,
    Nonneg,
    SecondOrder,
    /// `{(u, v, w) : 2uv >= |w|^2, u, v >= 0}`.
    RotatedSecondOrder,
    Psd,
    Diagonal,
    Dd,
    Sdd,
    FactorWidth {
        k: usize,
    },
    BlockFactorWidth2 {
        #[serde(with = "one_based_partition")]
        partition: Vec<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// The structured subset itself (inner approximation of PSD).
    #[default]
    PrimalSubset,
    /// Its dual cone (outer approximation of PSD).
    DualSuperset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeKind {
    #[serde(flatten)]
    pub family: ConeFamily,
    #[serde(default)]
    pub orientation: Orientation,
}

impl ConeKind {
    pub fn new(family: ConeFamily) -> Self {
        Self { family, orientation: Orientation::PrimalSubset }
    }
    pub fn zero() -> Self {
        Self::new(ConeFamily::Zero)
    }
    pub fn free() -> Self {
        Self::new(ConeFamily::Free)
    }
    pub fn nonneg() -> Self {
        Self::new(ConeFamily::Nonneg)
    }
    pub fn soc() -> Self {
        Self::new(ConeFamily::SecondOrder)
    }
    pub fn rsoc() -> Self {
        Self::new(ConeFamily::RotatedSecondOrder)
    }
    pub fn psd() -> Self {
        Self::new(ConeFamily::Psd)
    }
    pub fn diagonal() -> Self {
        Self::new(ConeFamily::Diagonal)
    }
    pub fn dd() -> Self {
        Self::new(ConeFamily::Dd)
    }
    pub fn sdd() -> Self {
        Self::new(ConeFamily::Sdd)
    }
    pub fn factor_width(k: usize) -> Self {
        Self::new(ConeFamily::FactorWidth { k })
    }
    pub fn block_factor_width2(partition: Vec<Vec<usize>>) -> Self {
        Self::new(ConeFamily::BlockFactorWidth2 { partition })
    }

    /// `B_k`: block factor-width-two with contiguous blocks of `k` indices;
    /// the last block holds the remainder.
    pub fn bk(n: usize, k: usize) -> Self {
        Self::block_factor_width2(contiguous_partition(n, k))
    }

    /// The same family with the dual orientation.
    pub fn dual_superset(mut self) -> Self {
        self.orientation = Orientation::DualSuperset;
        self
    }

    pub fn is_primitive(&self) -> bool {
        matches!(
            self.family,
            ConeFamily::Zero
                | ConeFamily::Free
                | ConeFamily::Nonneg
                | ConeFamily::SecondOrder
                | ConeFamily::RotatedSecondOrder
                | ConeFamily::Psd
        )
    }

    /// Cones stored as a vector on the block diagonal.
    pub fn is_vector(&self) -> bool {
        matches!(
            self.family,
            ConeFamily::Zero
                | ConeFamily::Free
                | ConeFamily::Nonneg
                | ConeFamily::SecondOrder
                | ConeFamily::RotatedSecondOrder
        )
    }

    /// Matrix cones: PSD and the structured families.
    pub fn is_matrix(&self) -> bool {
        !self.is_vector()
    }

    pub fn is_psd(&self) -> bool {
        self.family == ConeFamily::Psd
    }

    /// Whether this cone is contained in the PSD cone.
    pub fn is_subset_of_psd(&self) -> bool {
        self.is_psd() || (!self.is_vector() && self.orientation == Orientation::PrimalSubset)
    }

    /// Dual cone. Primitive cones other than zero/free are self-dual.
    pub fn dual(&self) -> ConeKind {
        match self.family {
            ConeFamily::Zero => ConeKind::free(),
            ConeFamily::Free => ConeKind::zero(),
            ConeFamily::Nonneg
            | ConeFamily::SecondOrder
            | ConeFamily::RotatedSecondOrder
            | ConeFamily::Psd => self.clone(),
            _ => ConeKind {
                family: self.family.clone(),
                orientation: match self.orientation {
                    Orientation::PrimalSubset => Orientation::DualSuperset,
                    Orientation::DualSuperset => Orientation::PrimalSubset,
                },
            },
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::InvalidCone(format!("{self} with dimension 0")));
        }
        match &self.family {
            ConeFamily::SecondOrder if dim < 1 => Err(Error::InvalidCone("empty second-order cone".into())),
            ConeFamily::RotatedSecondOrder if dim < 2 => {
                Err(Error::InvalidCone("rotated second-order cone needs dimension >= 2".into()))
            }
            ConeFamily::FactorWidth { k } if *k == 0 || *k > dim => {
                Err(Error::InvalidCone(format!("factor width {k} for dimension {dim}")))
            }
            ConeFamily::BlockFactorWidth2 { partition } => {
                let mut seen = vec![false; dim];
                for part in partition {
                    if part.is_empty() {
                        return Err(Error::InvalidCone("empty partition block".into()));
                    }
                    for &i in part {
                        if i >= dim || seen[i] {
                            return Err(Error::InvalidCone(format!(
                                "partition does not cover 1..{dim} disjointly"
                            )));
                        }
                        seen[i] = true;
                    }
                }
                if seen.iter().all(|s| *s) {
                    Ok(())
                } else {
                    Err(Error::InvalidCone(format!("partition does not cover 1..{dim}")))
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match &self.family {
            ConeFamily::Zero => "zero".to_string(),
            ConeFamily::Free => "free".to_string(),
            ConeFamily::Nonneg => "nonneg".to_string(),
            ConeFamily::SecondOrder => "soc".to_string(),
            ConeFamily::RotatedSecondOrder => "rsoc".to_string(),
            ConeFamily::Psd => "psd".to_string(),
            ConeFamily::Diagonal => "diag".to_string(),
            ConeFamily::Dd => "dd".to_string(),
            ConeFamily::Sdd => "sdd".to_string(),
            ConeFamily::FactorWidth { k } => format!("fw{k}"),
            ConeFamily::BlockFactorWidth2 { partition } => format!("bfw2[{} blocks]", partition.len()),
        };
        if !self.is_primitive() && self.orientation == Orientation::DualSuperset {
            write!(f, "{base}*")
        } else {
            write!(f, "{base}")
        }
    }
}

/// Parses `psd`, `diag`, `dd`, `sdd`, `fwK` and `bfwK` (block size `K`),
/// with an optional `*` suffix for the dual superset. `fw:K` and `fw K` are
/// accepted too. Block partitions are fitted to a clique by
/// [`crate::decomp::adapt_kind`].
impl std::str::FromStr for ConeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let (body, dual) = match t.strip_suffix('*') {
            Some(b) => (b.trim_end(), true),
            None => (t.as_str(), false),
        };
        let width = |rest: &str| -> Result<usize> {
            let r = rest.trim_start_matches([':', ' ']);
            match r.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k),
                _ => Err(Error::InvalidCone(format!("bad width in {s:?}"))),
            }
        };
        let kind = match body {
            "psd" => ConeKind::psd(),
            "diag" | "diagonal" => ConeKind::diagonal(),
            "dd" => ConeKind::dd(),
            "sdd" => ConeKind::sdd(),
            b if b.starts_with("bfw") => {
                let k = width(&b[3..])?;
                ConeKind::bk(k, k)
            }
            b if b.starts_with("fw") => ConeKind::factor_width(width(&b[2..])?),
            _ => return Err(Error::InvalidCone(format!("unknown cone {s:?}"))),
        };
        Ok(if dual { kind.dual_superset() } else { kind })
    }
}

/// Contiguous blocks of size `k` covering `0..n`.
pub fn contiguous_partition(n: usize, k: usize) -> Vec<Vec<usize>> {
    let k = k.max(1);
    (0..n).collect::<Vec<_>>().chunks(k).map(|c| c.to_vec()).collect()
}

mod one_based_partition {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &[Vec<usize>], s: S) -> Result<S::Ok, S::Error> {
        let shifted: Vec<Vec<usize>> = p.iter().map(|b| b.iter().map(|i| i + 1).collect()).collect();
        shifted.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<usize>>, D::Error> {
        let raw: Vec<Vec<usize>> = Vec::deserialize(d)?;
        raw.into_iter()
            .map(|b| {
                b.into_iter()
                    .map(|i| i.checked_sub(1).ok_or_else(|| serde::de::Error::custom("partition index 0")))
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub dim: usize,
    pub cone: ConeKind,
}

impl Block {
    pub fn new(dim: usize, cone: ConeKind) -> Self {
        Self { dim, cone }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Primal,
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub form: Form,
    pub blocks: Vec<Block>,
    pub c: SymMatrix,
    pub a: Vec<SymMatrix>,
    pub b: Vec<f64>,
}

impl ConicProblem {
    pub fn new(form: Form, blocks: Vec<Block>, c: SymMatrix, a: Vec<SymMatrix>, b: Vec<f64>) -> Result<Self> {
        let p = Self { form, blocks, c, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.a.len() != self.b.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constraint matrices but {} right-hand sides",
                self.a.len(),
                self.b.len()
            )));
        }
        for blk in &self.blocks {
            blk.cone.validate(blk.dim)?;
        }
        let owner = self.block_of_index();
        let check = |m: &SymMatrix, what: &str| -> Result<()> {
            if m.n() != n {
                return Err(Error::DimensionMismatch(format!("{what} has dimension {} but blocks total {n}", m.n())));
            }
            for &(r, c, _) in m.entries() {
                let br = owner[r];
                if owner[c] != br {
                    return Err(Error::InvalidCone(format!("{what} couples blocks at ({}, {})", r + 1, c + 1)));
                }
                if self.blocks[br].cone.is_vector() && r != c {
                    return Err(Error::InvalidCone(format!(
                        "{what} has off-diagonal entry ({}, {}) in a vector block",
                        r + 1,
                        c + 1
                    )));
                }
            }
            Ok(())
        };
        check(&self.c, "C")?;
        for (i, a) in self.a.iter().enumerate() {
            check(a, &format!("A_{}", i + 1))?;
        }
        Ok(())
    }

    /// Total dimension of the block-diagonal variable.
    pub fn n(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len() + 1);
        let mut acc = 0;
        off.push(0);
        for b in &self.blocks {
            acc += b.dim;
            off.push(acc);
        }
        off
    }

    fn block_of_index(&self) -> Vec<usize> {
        let mut owner = Vec::with_capacity(self.n());
        for (k, b) in self.blocks.iter().enumerate() {
            owner.extend(std::iter::repeat_n(k, b.dim));
        }
        owner
    }

    /// Cone of the `X` variable for block `k`.
    pub fn primal_cone(&self, k: usize) -> ConeKind {
        match self.form {
            Form::Primal => self.blocks[k].cone.clone(),
            Form::Dual => self.blocks[k].cone.dual(),
        }
    }

    /// Cone of the slack `Z` for block `k`.
    pub fn dual_cone(&self, k: usize) -> ConeKind {
        match self.form {
            Form::Primal => self.blocks[k].cone.dual(),
            Form::Dual => self.blocks[k].cone.clone(),
        }
    }

    pub fn is_primitive(&self) -> bool {
        self.blocks.iter().all(|b| b.cone.is_primitive())
    }

    /// `C - sum_i y_i A_i`.
    pub fn slack(&self, y: &[f64]) -> SymMatrix {
        let it = self
            .c
            .entries()
            .iter()
            .copied()
            .chain(self.a.iter().zip(y).flat_map(|(a, &yi)| a.entries().iter().map(move |&(r, c, v)| (r, c, -yi * v))));
        SymMatrix::from_summed_triplets(self.n(), it).expect("slack stays within dimension")
    }

    /// `(<A_i, X>)_i`.
    pub fn apply_constraints(&self, x: &SymMatrix) -> Vec<f64> {
        self.a.iter().map(|a| a.inner(x)).collect()
    }

    /// Dense copy of block `k` of a block-diagonal matrix.
    pub fn block_dense(&self, m: &SymMatrix, k: usize) -> DMatrix<f64> {
        let off = self.offsets();
        let idx: Vec<usize> = (off[k]..off[k + 1]).collect();
        m.principal_submatrix(&idx).to_dense()
    }
}

/// The problem read with the opposite form: the same data with every cone
/// replaced by its dual, so `dualize(dualize(p)) == p`.
pub fn dualize(p: &ConicProblem) -> ConicProblem {
    ConicProblem {
        form: match p.form {
            Form::Primal => Form::Dual,
            Form::Dual => Form::Primal,
        },
        blocks: p.blocks.iter().map(|b| Block::new(b.dim, b.cone.dual())).collect(),
        c: p.c.clone(),
        a: p.a.clone(),
        b: p.b.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    NumericalError,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::MaxIter => "max_iter",
            Status::NumericalError => "numerical_error",
        };
        f.write_str(s)
    }
}

/// Primal-dual triple `(X, y, Z)` with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub x: SymMatrix,
    pub y: Vec<f64>,
    pub z: SymMatrix,
    /// `|<A_i,X> - b_i|_2 / (1 + |b|_2)`.
    pub primal_residual: f64,
    /// Distance of `Z` to its cone relative to `1 + |C|`.
    pub dual_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

impl Solution {
    /// Relative duality gap `|p - d| / (1 + |p| + |d|)`.
    pub fn gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
            / (1.0 + self.primal_objective.abs() + self.dual_objective.abs())
    }

    /// Objective of the problem as posed: `<C,X>` for the primal form and
    /// `b'y` for the dual form. Infeasible and unbounded problems map to the
    /// matching infinity.
    pub fn objective(&self, form: Form) -> f64 {
        match (self.status, form) {
            (Status::Infeasible, Form::Primal) => f64::INFINITY,
            (Status::Infeasible, Form::Dual) => f64::NEG_INFINITY,
            (Status::Unbounded, Form::Primal) => f64::NEG_INFINITY,
            (Status::Unbounded, Form::Dual) => f64::INFINITY,
            (_, Form::Primal) => self.primal_objective,
            (_, Form::Dual) => self.dual_objective,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
