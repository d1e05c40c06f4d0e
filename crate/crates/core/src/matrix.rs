//! Dense row-major matrices, ordered index subsets, and riffle bitstrings.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::{Field, FieldElem};

/// Dense matrix over a single field. Zero rows or zero columns are allowed.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix<{}> {}x{} ", self.field, self.rows, self.cols)?;
        f.debug_list().entries(self.data.chunks(self.cols.max(1)).take(self.rows)).finish()
    }
}

impl Matrix {
    /// Build from row-major encodings. Fails on a length mismatch or an
    /// out-of-range encoding.
    pub fn new(field: &Field, rows: usize, cols: usize, entries: Vec<u32>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::shape("mat_build", format!("{rows}x{cols} needs {} entries, got {}", rows * cols, entries.len())));
        }
        if let Some(&bad) = entries.iter().find(|&&v| v >= field.order()) {
            return Err(Error::InvalidField(format!("{bad} is not an element of {field}")));
        }
        Ok(Matrix { field: field.clone(), rows, cols, data: entries })
    }

    /// Build from nested rows; all rows must have equal length.
    pub fn from_rows(field: &Field, rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("mat_build", "ragged rows"));
        }
        Self::new(field, rows.len(), cols, rows.concat())
    }

    pub(crate) fn from_raw(field: &Field, rows: usize, cols: usize, data: Vec<u32>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { field: field.clone(), rows, cols, data }
    }

    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Self {
        Matrix::from_raw(field, rows, cols, vec![0; rows * cols])
    }

    pub fn identity(field: &Field, n: usize) -> Self {
        let mut m = Matrix::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// `-1` on the diagonal.
    pub fn minus_identity(field: &Field, n: usize) -> Self {
        let mut m = Matrix::zeros(field, n, n);
        let v = field.minus_one().0;
        for i in 0..n {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElem {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of {}x{}", self.rows, self.cols);
        FieldElem(self.data[r * self.cols + c])
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn set(&mut self, r: usize, c: usize, v: u32) {
        self.data[r * self.cols + c] = v;
    }

    /// Row-major encodings.
    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Copy with one entry replaced.
    pub fn with_entry(&self, r: usize, c: usize, v: FieldElem) -> Result<Matrix> {
        if r >= self.rows || c >= self.cols {
            return Err(Error::shape("with_entry", format!("({r},{c}) outside {}x{}", self.rows, self.cols)));
        }
        let v = self.field.elem(v.0)?;
        let mut out = self.clone();
        out.set(r, c, v.0);
        Ok(out)
    }

    /// Bytes held by the entry storage.
    pub fn byte_size(&self) -> usize {
        self.data.len() * std::mem::size_of::<u32>()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub(crate) fn check_field(&self, other: &Matrix, op: &'static str) -> Result<()> {
        if self.field == other.field {
            Ok(())
        } else {
            Err(Error::FieldMismatch { op })
        }
    }

    /// `self + a * b`.
    pub fn mul_add(&self, a: &Matrix, b: &Matrix) -> Result<Matrix> {
        self.check_field(a, "mad")?;
        self.check_field(b, "mad")?;
        if a.cols != b.rows || self.rows != a.rows || self.cols != b.cols {
            return Err(Error::shape(
                "mad",
                format!("{}x{} + {}x{} * {}x{}", self.rows, self.cols, a.rows, a.cols, b.rows, b.cols),
            ));
        }
        let mut out = self.data.clone();
        self.field.gemm_acc(&mut out, &a.data, &b.data, a.rows, a.cols, b.cols);
        Ok(Matrix::from_raw(&self.field, self.rows, self.cols, out))
    }

    /// `self * b`.
    pub fn mul(&self, b: &Matrix) -> Result<Matrix> {
        self.check_field(b, "mul")?;
        if self.cols != b.rows {
            return Err(Error::shape("mul", format!("{}x{} * {}x{}", self.rows, self.cols, b.rows, b.cols)));
        }
        let mut out = vec![0; self.rows * b.cols];
        self.field.gemm_acc(&mut out, &self.data, &b.data, self.rows, self.cols, b.cols);
        Ok(Matrix::from_raw(&self.field, self.rows, b.cols, out))
    }

    pub fn add(&self, b: &Matrix) -> Result<Matrix> {
        self.check_field(b, "add")?;
        if self.shape() != b.shape() {
            return Err(Error::shape("add", format!("{:?} + {:?}", self.shape(), b.shape())));
        }
        let mut out = self.data.clone();
        self.field.axpy(&mut out, 1, &b.data);
        Ok(Matrix::from_raw(&self.field, self.rows, self.cols, out))
    }

    /// Rows listed by `idx` (any order, repeats allowed).
    pub(crate) fn pick_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            out.extend_from_slice(self.row(r));
        }
        Matrix::from_raw(&self.field, idx.len(), self.cols, out)
    }

    /// Columns listed by `idx`.
    pub(crate) fn pick_cols(&self, idx: &[usize]) -> Matrix {
        let mut out = Vec::with_capacity(idx.len() * self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            out.extend(idx.iter().map(|&c| row[c]));
        }
        Matrix::from_raw(&self.field, self.rows, idx.len(), out)
    }

    /// Stack `self` above `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        self.check_field(other, "vstack")?;
        if self.cols != other.cols {
            return Err(Error::shape("vstack", format!("{} vs {} columns", self.cols, other.cols)));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix::from_raw(&self.field, self.rows + other.rows, self.cols, data))
    }

    /// Place `self` left of `other`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        self.check_field(other, "hstack")?;
        if self.rows != other.rows {
            return Err(Error::shape("hstack", format!("{} vs {} rows", self.rows, other.rows)));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix::from_raw(&self.field, self.rows, cols, data))
    }

    /// Copy `src` into the block starting at (`r0`, `c0`).
    pub(crate) fn put_block(&mut self, r0: usize, c0: usize, src: &Matrix) {
        for r in 0..src.rows {
            let dst = r0 + r;
            self.data[dst * self.cols + c0..dst * self.cols + c0 + src.cols].copy_from_slice(src.row(r));
        }
    }

    /// Sub-block `[r0, r0+rows) x [c0, c0+cols)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Matrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        let mut data = Vec::with_capacity(rows * cols);
        for r in r0..r0 + rows {
            data.extend_from_slice(&self.row(r)[c0..c0 + cols]);
        }
        Matrix::from_raw(&self.field, rows, cols, data)
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix::from_raw(&self.field, self.cols, self.rows, data)
    }
}

/// Strictly increasing subset of `{0, ..., universe-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexSet {
    universe: usize,
    members: Vec<usize>,
}

impl IndexSet {
    pub fn new(universe: usize, members: Vec<usize>) -> Result<Self> {
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidIndexSet(format!("{members:?} is not strictly increasing")));
        }
        if let Some(&last) = members.last() {
            if last >= universe {
                return Err(Error::InvalidIndexSet(format!("{last} outside universe {universe}")));
            }
        }
        Ok(IndexSet { universe, members })
    }

    pub(crate) fn from_sorted(universe: usize, members: Vec<usize>) -> Self {
        debug_assert!(IndexSet::new(universe, members.clone()).is_ok());
        IndexSet { universe, members }
    }

    pub fn empty(universe: usize) -> Self {
        IndexSet { universe, members: Vec::new() }
    }

    pub fn full(universe: usize) -> Self {
        IndexSet { universe, members: (0..universe).collect() }
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn complement(&self) -> IndexSet {
        let mut out = Vec::with_capacity(self.universe - self.members.len());
        let mut it = self.members.iter().peekable();
        for x in 0..self.universe {
            if it.peek() == Some(&&x) {
                it.next();
            } else {
                out.push(x);
            }
        }
        IndexSet { universe: self.universe, members: out }
    }

    /// Members followed by the complement: the permutation `P` with `P h`
    /// putting selected rows first.
    pub fn permutation(&self) -> Vec<usize> {
        let mut p = self.members.clone();
        p.extend(self.complement().members);
        p
    }

    /// Translate members by `offset` into a larger universe.
    pub fn shifted(&self, offset: usize, universe: usize) -> Result<IndexSet> {
        IndexSet::new(universe, self.members.iter().map(|&x| x + offset).collect())
    }
}

/// Finite sequence of bits directing a riffle.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    pub fn from_01(bits: &[u8]) -> Self {
        BitString { bits: bits.iter().map(|&b| b != 0).collect() }
    }

    pub fn zeros(n: usize) -> Self {
        BitString { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        BitString { bits: vec![true; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn count_zeros(&self) -> usize {
        self.len() - self.count_ones()
    }

    pub fn ones_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.bits[i]).collect()
    }

    pub fn zeros_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.bits[i]).collect()
    }

    pub fn complement(&self) -> BitString {
        BitString { bits: self.bits.iter().map(|b| !b).collect() }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
