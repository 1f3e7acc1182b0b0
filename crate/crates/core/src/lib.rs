//! Sparse signal recovery when the sparsifying basis is itself
//! unknown. Three attacks on the problem live here: voting over a
//! finite catalog of candidate bases, pursuit over a combined
//! dictionary when the basis is sparse in a known one, and alternating
//! dictionary learning when the basis is block-diagonal orthogonal.
//! Supporting modules cover dense and sparse matrix plumbing, greedy
//! pursuit, classical bases, dictionary diagnostics, and seeded
//! problem generators.

pub mod bases;
pub mod error;
pub mod fbcs;
pub mod linalg;
pub mod matrix;
pub mod obd;
pub mod sparse;
pub mod sparse_bcs;
pub mod structured;
pub mod synth;

pub use error::{Budgeted, Error, Result};
pub use matrix::{DenseMatrix, Tolerance};
pub use sparse::{omp, omp_batch, KSparseMatrix, OmpBatch, OmpOutcome, SparseVector};
pub use structured::{BlockDiagOrthoBasis, UnionOrthoMatrix};
