//! Seeded test-matrix generators. All randomness comes from SplitMix64, so a
//! seed reproduces the same matrix on every platform.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::field::Field;
use crate::matrix::Matrix;

fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

/// Uniformly random entries.
pub fn random(field: &Field, rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let q = field.order();
    Matrix::from_raw(field, rows, cols, (0..rows * cols).map(|_| r.gen_range(0..q)).collect())
}

/// Product of random `rows x rank` and `rank x cols` factors; rank at most `rank`.
pub fn product(field: &Field, rows: usize, cols: usize, rank: usize, seed: u64) -> Matrix {
    let left = random(field, rows, rank, seed);
    let right = random(field, rank, cols, seed ^ 0x9e37_79b9_7f4a_7c15);
    left.mul(&right).expect("factor shapes agree")
}

/// `L * U` with `L` unit lower triangular and `U` upper triangular with a
/// nonzero diagonal. Every leading square submatrix is nonsingular.
pub fn well_conditioned(field: &Field, rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    let q = field.order();
    let mut l = vec![0u32; rows * rows];
    for i in 0..rows {
        l[i * rows + i] = 1;
        for j in 0..i {
            l[i * rows + j] = r.gen_range(0..q);
        }
    }
    let mut u = vec![0u32; rows * cols];
    for i in 0..rows {
        for j in i..cols {
            u[i * cols + j] = if i == j { r.gen_range(1..q) } else { r.gen_range(0..q) };
        }
    }
    let l = Matrix::from_raw(field, rows, rows, l);
    let u = Matrix::from_raw(field, rows, cols, u);
    l.mul(&u).expect("factor shapes agree")
}
