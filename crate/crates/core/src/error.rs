//! Shared error type for the numerical routines.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),
    #[error("rank deficient at column {0}")]
    RankDeficient(usize),
    #[error("SVD iteration failed to converge")]
    ConvergenceFailure,
    #[error("block {index} is not orthogonal (defect {defect:.3e})")]
    NotOrthogonalBlock { index: usize, defect: f64 },
    #[error("{0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("bad wavelet filter: {0}")]
    BadFilter(String),
    #[error("no catalog basis produced a usable solution")]
    NoCandidate,
    #[error("signal matrix has zero norm, SNR scaling is undefined")]
    ZeroSignal,
    #[error("{what} ({value}) is not divisible by {by}")]
    Divisibility {
        what: &'static str,
        value: usize,
        by: usize,
    },
    #[error("basis block orthogonality lost at iteration {iter} (defect {defect:.3e})")]
    BlockOrthogonalityLost { iter: usize, defect: f64 },
    #[error("invalid sparse structure: {0}")]
    BadSparseStructure(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Outcome of a combinatorial check that may stop early once `budget`
/// subset evaluations have been spent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budgeted<T> {
    Done(T),
    Exceeded,
}

impl<T> Budgeted<T> {
    pub fn done(self) -> Option<T> {
        match self {
            Budgeted::Done(v) => Some(v),
            Budgeted::Exceeded => None,
        }
    }

    pub fn is_exceeded(&self) -> bool {
        matches!(self, Budgeted::Exceeded)
    }
}
