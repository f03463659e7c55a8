//! CSV dumps of solutions and cost sequences.

use std::fmt::Write;

use crate::problem::Solution;

/// Header plus one row per stored entry: `matrix,row,col,value`, 1-based,
/// followed by `y` rows as `y,i,,value`.
pub fn solution_csv(s: &Solution) -> String {
    let mut out = String::from("matrix,row,col,value\n");
    for (name, m) in [("X", &s.x), ("Z", &s.z)] {
        for &(r, c, v) in m.entries() {
            let _ = writeln!(out, "{name},{},{},{v:e}", r + 1, c + 1);
        }
    }
    for (i, v) in s.y.iter().enumerate() {
        let _ = writeln!(out, "y,{},,{v:e}", i + 1);
    }
    out
}

/// `iteration,cost` rows.
pub fn sequence_csv(costs: &[f64]) -> String {
    let mut out = String::from("iteration,cost\n");
    for (t, c) in costs.iter().enumerate() {
        let _ = writeln!(out, "{t},{c:e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_rows() {
        let s = sequence_csv(&[1.0, 0.5]);
        assert_eq!(s, "iteration,cost\n0,1e0\n1,5e-1\n");
    }
}
