//! JSON problem and solution files.
//!
//! Matrices are `{"n": 3, "entries": [[row, col, value], ...]}` with 1-based
//! upper-triangular triplets. Cones are tagged objects such as
//! `{"type": "psd"}`, `{"type": "factor_width", "k": 2}` or
//! `{"type": "dd", "orientation": "dual_superset"}`.

use crate::error::Result;
use crate::problem::{ConicProblem, Solution};

pub fn export_json(p: &ConicProblem) -> Result<String> {
    Ok(serde_json::to_string_pretty(p)?)
}

pub fn import_json(text: &str) -> Result<ConicProblem> {
    let p: ConicProblem = serde_json::from_str(text)?;
    p.validate()?;
    Ok(p)
}

pub fn export_solution_json(s: &Solution) -> Result<String> {
    Ok(serde_json::to_string_pretty(s)?)
}

pub fn import_solution_json(text: &str) -> Result<Solution> {
    Ok(serde_json::from_str(text)?)
}
