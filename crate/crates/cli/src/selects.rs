use blockech::chief::ChopSpec;
use blockech::{EchelonOutput, IndexSet};
use serde::{Deserialize, Serialize};

/// Row and column selections of a run, 0-based.
#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct Selects {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub block_rows: Vec<usize>,
    pub block_cols: Vec<usize>,
    /// Selected rows per block row, local indices.
    pub varrho_blocks: Vec<Vec<usize>>,
    /// Pivot columns per block column, local indices.
    pub upsilon_blocks: Vec<Vec<usize>>,
    pub varrho: Vec<usize>,
    pub upsilon: Vec<usize>,
}

impl Selects {
    pub fn from_output(out: &EchelonOutput) -> Self {
        let (rows, cols) = out.shape();
        Selects {
            rows,
            cols,
            rank: out.rank(),
            block_rows: out.chop.rows.clone(),
            block_cols: out.chop.cols.clone(),
            varrho_blocks: out.varrho.iter().map(|s| s.members().to_vec()).collect(),
            upsilon_blocks: out.upsilon.iter().map(|s| s.members().to_vec()).collect(),
            varrho: out.global_varrho().members().to_vec(),
            upsilon: out.global_upsilon().members().to_vec(),
        }
    }

    /// Chop and per-block selections, validated against the stated sizes.
    pub fn parts(&self) -> Result<(ChopSpec, Vec<IndexSet>, Vec<IndexSet>), String> {
        if self.block_rows.iter().sum::<usize>() != self.rows || self.block_cols.iter().sum::<usize>() != self.cols {
            return Err("block sizes do not add up to the matrix shape".into());
        }
        if self.varrho_blocks.len() != self.block_rows.len() || self.upsilon_blocks.len() != self.block_cols.len() {
            return Err("selection lists do not match the block grid".into());
        }
        let sets = |parts: &[Vec<usize>], sizes: &[usize]| {
            parts
                .iter()
                .zip(sizes)
                .map(|(m, &n)| IndexSet::new(n, m.clone()).map_err(|e| e.to_string()))
                .collect::<Result<Vec<_>, String>>()
        };
        let chop = ChopSpec { rows: self.block_rows.clone(), cols: self.block_cols.clone() };
        Ok((chop, sets(&self.varrho_blocks, &self.block_rows)?, sets(&self.upsilon_blocks, &self.block_cols)?))
    }
}
