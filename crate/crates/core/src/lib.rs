//! Blocked parallel Gaussian elimination over finite fields.
//!
//! Computes the negative reduced row echelon form of a dense matrix together
//! with its rank, pivot row and column selections, and a sparse factored
//! transformation matrix. The input is chopped into blocks, and a task graph
//! of block operations runs on a fixed worker pool.

pub mod analysis;
pub mod chief;
pub mod ech;
pub mod error;
pub mod field;
pub mod gen;
pub mod io;
pub mod jobs;
pub mod matrix;
pub mod scheduler;
pub mod tasks;

pub use chief::{echelonize, oracle_rref, verify, ChiefOptions, EchelonOutput};
pub use ech::{EchKernel, EchResult, KernelRegistry};
pub use error::{Error, Result};
pub use field::{Field, FieldElem, FieldSpec};
pub use matrix::{BitString, IndexSet, Matrix};
