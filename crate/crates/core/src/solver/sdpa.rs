//! SDPA sparse format (`.dat-s`).
//!
//! ```text
//! m
//! nblocks
//! size_1 size_2 ...      (negative size: nonnegative diagonal block)
//! b_1 ... b_m
//! matno blkno i j value  (matno 0 is C, matno i is A_i; i <= j, 1-based)
//! ```
//!
//! The file describes `min <C,X> s.t. <A_i,X> = b_i` with `X` block diagonal.
//! Problems in either form export the same data, since PSD and nonnegative
//! blocks are self-dual; import always returns the primal form.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::problem::{Block, ConeFamily, ConeKind, ConicProblem, Form};

pub fn export_sdpa(p: &ConicProblem) -> Result<String> {
    let mut out = String::new();
    let mut sizes = Vec::with_capacity(p.blocks.len());
    for b in &p.blocks {
        match b.cone.family {
            ConeFamily::Psd => sizes.push(b.dim.to_string()),
            ConeFamily::Nonneg => sizes.push(format!("-{}", b.dim)),
            _ => return Err(Error::UnsupportedCone(format!("SDPA export supports psd and nonneg blocks, found {}", b.cone))),
        }
    }
    let _ = writeln!(out, "{}", p.m());
    let _ = writeln!(out, "{}", p.blocks.len());
    let _ = writeln!(out, "{}", sizes.join(" "));
    let _ = writeln!(out, "{}", p.b.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
    let off = p.offsets();
    let mut owner = Vec::with_capacity(p.n());
    for (k, b) in p.blocks.iter().enumerate() {
        owner.extend(std::iter::repeat_n(k, b.dim));
    }
    for (matno, m) in std::iter::once(&p.c).chain(&p.a).enumerate() {
        for &(r, c, v) in m.entries() {
            let k = owner[r];
            let _ = writeln!(out, "{matno} {} {} {} {v}", k + 1, r - off[k] + 1, c - off[k] + 1);
        }
    }
    Ok(out)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn import_sdpa(text: &str) -> Result<ConicProblem> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.replace([',', '{', '}', '(', ')'], " ")))
        .filter(|(_, l)| !l.trim().is_empty())
        .skip_while(|(_, l)| l.trim_start().starts_with('"') || l.trim_start().starts_with('*'));

    let mut header = |what: &str| -> Result<(usize, Vec<String>)> {
        let (no, l) = lines.next().ok_or_else(|| perr(0, format!("missing {what}")))?;
        Ok((no, l.split_whitespace().map(str::to_owned).collect()))
    };
    let first = |no: usize, t: &[String], what: &str| -> Result<i64> {
        t.first()
            .ok_or_else(|| perr(no, format!("missing {what}")))?
            .parse::<i64>()
            .map_err(|e| perr(no, format!("bad {what}: {e}")))
    };

    let (no, t) = header("constraint count")?;
    let m = first(no, &t, "constraint count")?;
    if m < 0 {
        return Err(perr(no, "negative constraint count"));
    }
    let m = m as usize;
    let (no, t) = header("block count")?;
    let nb = first(no, &t, "block count")?;
    if nb <= 0 {
        return Err(perr(no, "block count must be positive"));
    }
    let nb = nb as usize;
    let (no, t) = header("block sizes")?;
    if t.len() < nb {
        return Err(perr(no, format!("expected {nb} block sizes, found {}", t.len())));
    }
    let mut blocks = Vec::with_capacity(nb);
    for s in &t[..nb] {
        let v: i64 = s.parse().map_err(|e| perr(no, format!("bad block size {s:?}: {e}")))?;
        match v {
            0 => return Err(perr(no, "zero block size")),
            v if v > 0 => blocks.push(Block::new(v as usize, ConeKind::psd())),
            v => blocks.push(Block::new((-v) as usize, ConeKind::nonneg())),
        }
    }
    let mut b = Vec::with_capacity(m);
    if m > 0 {
        let (no, t) = header("right-hand side")?;
        if t.len() < m {
            return Err(perr(no, format!("expected {m} right-hand side values, found {}", t.len())));
        }
        for s in &t[..m] {
            b.push(s.parse::<f64>().map_err(|e| perr(no, format!("bad value {s:?}: {e}")))?);
        }
    }
    let mut off = vec![0usize];
    for blk in &blocks {
        off.push(off.last().unwrap() + blk.dim);
    }
    let n = *off.last().unwrap();
    let mut trip: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); m + 1];
    let mut seen = std::collections::HashSet::new();
    for (no, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 5 {
            return Err(perr(no, format!("expected 5 fields, found {}", t.len())));
        }
        let int = |s: &str, what: &str| s.parse::<usize>().map_err(|e| perr(no, format!("bad {what} {s:?}: {e}")));
        let matno = int(t[0], "matrix number")?;
        let blk = int(t[1], "block number")?;
        let (mut i, mut j) = (int(t[2], "row")?, int(t[3], "column")?);
        let v: f64 = t[4].parse().map_err(|e| perr(no, format!("bad value {:?}: {e}", t[4])))?;
        if matno > m {
            return Err(perr(no, format!("matrix number {matno} exceeds {m}")));
        }
        if blk == 0 || blk > nb {
            return Err(perr(no, format!("block number {blk} out of range")));
        }
        let dim = blocks[blk - 1].dim;
        if i == 0 || j == 0 || i > dim || j > dim {
            return Err(perr(no, format!("index ({i}, {j}) out of range for block of size {dim}")));
        }
        if i > j {
            std::mem::swap(&mut i, &mut j);
        }
        if blocks[blk - 1].cone.is_vector() && i != j {
            return Err(perr(no, "off-diagonal entry in a diagonal block"));
        }
        if !seen.insert((matno, blk, i, j)) {
            return Err(perr(no, format!("duplicate entry ({i}, {j}) in matrix {matno}")));
        }
        if v != 0.0 {
            let o = off[blk - 1];
            trip[matno].push((o + i - 1, o + j - 1, v));
        }
    }
    let mut mats = trip.into_iter().map(|t| SymMatrix::from_triplets(n, t));
    let c = mats.next().expect("objective slot")?;
    let a = mats.collect::<Result<Vec<_>>>()?;
    ConicProblem::new(Form::Primal, blocks, c, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_constraint_set() {
        let p = ConicProblem::new(Form::Primal, vec![Block::new(2, ConeKind::psd())], SymMatrix::zeros(2), vec![], vec![])
            .unwrap();
        let s = export_sdpa(&p).unwrap();
        assert_eq!(s, "0\n1\n2\n\n");
        assert_eq!(import_sdpa(&s).unwrap(), p);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "1\n1\n2\n1.0\n1 1 1 1 1\n1 1 x 2 1\n";
        match import_sdpa(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_and_duplicate_entries() {
        assert!(matches!(import_sdpa("1\n1\n2\n1\n1 1 3 3 1\n"), Err(Error::Parse { line: 5, .. })));
        assert!(matches!(import_sdpa("1\n1\n2\n1\n1 1 1 2 1\n1 1 2 1 1\n"), Err(Error::Parse { line: 6, .. })));
    }

    #[test]
    fn comments_and_punctuation() {
        let text = "\"example\n*more\n1\n2\n{2, -1}\n{3.0}\n0 1 1 1 1\n1 1 1 2 0.5\n1 2 1 1 1\n";
        let p = import_sdpa(text).unwrap();
        assert_eq!(p.blocks, vec![Block::new(2, ConeKind::psd()), Block::new(1, ConeKind::nonneg())]);
        assert_eq!(p.b, vec![3.0]);
        assert_eq!(p.a[0].get(0, 1), 0.5);
        assert_eq!(p.a[0].get(2, 2), 1.0);
    }

    #[test]
    fn structured_cones_are_not_exportable() {
        let p = ConicProblem::new(Form::Primal, vec![Block::new(2, ConeKind::dd())], SymMatrix::zeros(2), vec![], vec![]).unwrap();
        assert!(matches!(export_sdpa(&p), Err(Error::UnsupportedCone(_))));
    }
}
