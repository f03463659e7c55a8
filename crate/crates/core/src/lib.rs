//! Bounds for sparse semidefinite programs from chordal decomposition and
//! structured-subset cones.
//!
//! The crate builds inner and outer approximations of
//! `min <C,X> s.t. <A_i,X> = b_i, X PSD` by restricting each clique block of
//! the sparsity pattern to a structured cone (diagonal, diagonally dominant,
//! scaled diagonally dominant, factor-width, block factor-width) or to its
//! dual. It ships a first-order conic solver, tightness certification,
//! change-of-basis refinement, sum-of-squares frontends and H-infinity LMIs.

pub mod apps;
pub mod cones;
pub mod decomp;
pub mod error;
pub mod lmi;
pub mod matrix;
pub mod problem;
pub mod refine;
pub mod solver;
pub mod sos;
pub mod sparsity;

pub use error::{Error, Result};
pub use matrix::{smat, svec, SVec, SymMatrix};
pub use problem::{dualize, Block, ConeFamily, ConeKind, ConicProblem, Form, Orientation, Solution, Status};
