//! Text formats for matrices and transformation blocks.
//!
//! `GFMAT v1`:
//!
//! ```text
//! GFMAT v1
//! field p=3 k=1
//! rows=2 cols=3
//! 0 1 2
//! 2 2 0
//! ```
//!
//! Extension fields add `modulus=c0,...,ck` to the field line. `GFTRAFO v1`
//! holds the `M` and `K` blocks of a transformation: a field line, a
//! `blocks a=<a> b=<b>` line, then for each block a `M j h` or `K i h` line
//! followed by a complete GFMAT document.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::Lines;

use crate::error::{Error, Result};
use crate::field::{Field, FieldSpec};
use crate::matrix::Matrix;

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn field_line(spec: &FieldSpec) -> String {
    if spec.k() == 1 {
        format!("field p={} k=1", spec.p())
    } else {
        let m: Vec<String> = spec.modulus().iter().map(u32::to_string).collect();
        format!("field p={} k={} modulus={}", spec.p(), spec.k(), m.join(","))
    }
}

fn keyed<'a>(tok: Option<&'a str>, key: &str) -> Result<&'a str> {
    tok.and_then(|t| t.strip_prefix(key)).and_then(|t| t.strip_prefix('=')).ok_or_else(|| parse_err(format!("expected {key}=...")))
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(format!("bad {what}: {s:?}")))
}

fn parse_field(line: &str) -> Result<Field> {
    let mut toks = line.split_whitespace();
    if toks.next() != Some("field") {
        return Err(parse_err(format!("expected field line, got {line:?}")));
    }
    let p: u32 = number(keyed(toks.next(), "p")?, "p")?;
    let k: u32 = number(keyed(toks.next(), "k")?, "k")?;
    let spec = if k == 1 {
        if let Some(extra) = toks.next() {
            return Err(parse_err(format!("unexpected {extra:?} on prime field line")));
        }
        FieldSpec::prime(p)?
    } else {
        let coeffs = keyed(toks.next(), "modulus")?.split(',').map(|c| number(c, "modulus coefficient")).collect::<Result<Vec<u32>>>()?;
        if coeffs.len() != k as usize + 1 {
            return Err(parse_err(format!("modulus of degree {k} needs {} coefficients", k + 1)));
        }
        FieldSpec::with_modulus(p, coeffs)?
    };
    Ok(Field::new(spec))
}

fn next_line<'a>(lines: &mut Lines<'a>, what: &str) -> Result<&'a str> {
    for l in lines.by_ref() {
        if !l.trim().is_empty() {
            return Ok(l.trim());
        }
    }
    Err(parse_err(format!("unexpected end of input, expected {what}")))
}

/// Serialize a matrix as `GFMAT v1`.
pub fn write_matrix(m: &Matrix) -> String {
    let mut out = String::new();
    out.push_str("GFMAT v1\n");
    out.push_str(&field_line(m.field().spec()));
    out.push('\n');
    let _ = writeln!(out, "rows={} cols={}", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(u32::to_string).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn read_matrix_from(lines: &mut Lines<'_>) -> Result<Matrix> {
    let magic = next_line(lines, "GFMAT header")?;
    if magic != "GFMAT v1" {
        return Err(parse_err(format!("expected \"GFMAT v1\", got {magic:?}")));
    }
    let field = parse_field(next_line(lines, "field line")?)?;
    let dims = next_line(lines, "dimension line")?;
    let mut toks = dims.split_whitespace();
    let rows: usize = number(keyed(toks.next(), "rows")?, "row count")?;
    let cols: usize = number(keyed(toks.next(), "cols")?, "column count")?;
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = if cols == 0 { lines.next().unwrap_or("") } else { next_line(lines, "matrix row")? };
        let before = data.len();
        for t in line.split_whitespace() {
            data.push(number::<u32>(t, "entry")?);
        }
        if data.len() - before != cols {
            return Err(parse_err(format!("row {r} has {} entries, expected {cols}", data.len() - before)));
        }
    }
    Matrix::new(&field, rows, cols, data).map_err(|e| parse_err(e.to_string()))
}

/// Parse a `GFMAT v1` document; trailing blank lines are ignored.
pub fn read_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text.lines();
    let m = read_matrix_from(&mut lines)?;
    if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
        return Err(parse_err(format!("trailing content {extra:?}")));
    }
    Ok(m)
}

/// Transformation blocks as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrafoBlocks {
    pub field: Field,
    pub a: usize,
    pub b: usize,
    /// `m[j][h]`, a `b x a` grid.
    pub m: Vec<Vec<Matrix>>,
    /// `k[i][h]` for `h <= i`.
    pub k: Vec<Vec<Matrix>>,
}

pub fn write_trafo(t: &TrafoBlocks) -> String {
    let mut out = String::new();
    out.push_str("GFTRAFO v1\n");
    out.push_str(&field_line(t.field.spec()));
    out.push('\n');
    let _ = writeln!(out, "blocks a={} b={}", t.a, t.b);
    for (j, row) in t.m.iter().enumerate() {
        for (h, blk) in row.iter().enumerate() {
            let _ = writeln!(out, "M {j} {h}");
            out.push_str(&write_matrix(blk));
        }
    }
    for (i, row) in t.k.iter().enumerate() {
        for (h, blk) in row.iter().enumerate() {
            let _ = writeln!(out, "K {i} {h}");
            out.push_str(&write_matrix(blk));
        }
    }
    out
}

pub fn read_trafo(text: &str) -> Result<TrafoBlocks> {
    let mut lines = text.lines();
    let magic = next_line(&mut lines, "GFTRAFO header")?;
    if magic != "GFTRAFO v1" {
        return Err(parse_err(format!("expected \"GFTRAFO v1\", got {magic:?}")));
    }
    let field = parse_field(next_line(&mut lines, "field line")?)?;
    let grid = next_line(&mut lines, "blocks line")?;
    let mut toks = grid.split_whitespace();
    if toks.next() != Some("blocks") {
        return Err(parse_err(format!("expected blocks line, got {grid:?}")));
    }
    let a: usize = number(keyed(toks.next(), "a")?, "a")?;
    let b: usize = number(keyed(toks.next(), "b")?, "b")?;

    let mut found: BTreeMap<(char, usize, usize), Matrix> = BTreeMap::new();
    while let Ok(head) = next_line(&mut lines, "block header") {
        let parts: Vec<&str> = head.split_whitespace().collect();
        let (tag, x, y) = match parts.as_slice() {
            [t @ ("M" | "K"), x, y] => (t.chars().next().unwrap(), number::<usize>(x, "block index")?, number::<usize>(y, "block index")?),
            _ => return Err(parse_err(format!("bad block header {head:?}"))),
        };
        let blk = read_matrix_from(&mut lines)?;
        if *blk.field() != field {
            return Err(parse_err(format!("block {head} is over {}, file header says {field}", blk.field())));
        }
        if found.insert((tag, x, y), blk).is_some() {
            return Err(parse_err(format!("duplicate block {head}")));
        }
    }
    let mut take = |tag: char, x: usize, y: usize| found.remove(&(tag, x, y)).ok_or_else(|| parse_err(format!("missing block {tag} {x} {y}")));
    let m = (0..b).map(|j| (0..a).map(|h| take('M', j, h)).collect()).collect::<Result<Vec<Vec<_>>>>()?;
    let k = (0..a).map(|i| (0..=i).map(|h| take('K', i, h)).collect()).collect::<Result<Vec<Vec<_>>>>()?;
    if let Some((tag, x, y)) = found.keys().next() {
        return Err(parse_err(format!("block {tag} {x} {y} outside the {a}x{b} grid")));
    }
    Ok(TrafoBlocks { field, a, b, m, k })
}
