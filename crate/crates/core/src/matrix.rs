//! Dense real matrices plus the tolerance knobs used by every rank and
//! orthogonality decision in the crate.
//!
//! Storage is column-major so that per-column access (the hot path in
//! greedy pursuit) is contiguous; constructors speak row-major because
//! that is the order the CSV format and the literals in tests use.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Numerical cutoffs. `rank_tol` is relative to the largest singular
/// value; `zero_tol` is an absolute cutoff for treating a scalar as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rank_tol: f64,
    pub zero_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rank_tol: 1e-10,
            zero_tol: 1e-12,
        }
    }
}

/// Dense matrix with finite entries and positive dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    /// Builds from entries listed row by row. Rejects non-finite entries
    /// and zero dimensions.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(DenseMatrix {
            inner: DMatrix::from_row_slice(rows, cols, entries),
        })
    }

    /// Builds from column vectors of equal length.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        if columns.is_empty() || columns[0].is_empty() {
            return Err(Error::DimensionMismatch(
                "matrix dimensions must be positive".into(),
            ));
        }
        let rows = columns[0].len();
        let cols = columns.len();
        let mut inner = DMatrix::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has length {}, expected {rows}",
                    col.len()
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                inner[(i, j)] = v;
            }
        }
        Ok(DenseMatrix { inner })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(
                "matrix dimensions must be positive".into(),
            ));
        }
        let mut inner = DMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                inner[(i, j)] = v;
            }
        }
        Ok(DenseMatrix { inner })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        DenseMatrix {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix dimensions must be positive");
        DenseMatrix {
            inner: DMatrix::identity(n, n),
        }
    }

    pub(crate) fn from_na(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.iter().all(|v| v.is_finite()));
        DenseMatrix { inner }
    }

    pub(crate) fn na(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(value.is_finite(), "matrix entries must be finite");
        self.inner[(row, col)] = value;
    }

    /// Contiguous view of column `j`.
    pub fn col_slice(&self, j: usize) -> &[f64] {
        let rows = self.rows();
        &self.inner.as_slice()[j * rows..(j + 1) * rows]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        self.col_slice(j).to_vec()
    }

    pub fn set_col(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows());
        assert!(values.iter().all(|v| v.is_finite()));
        let rows = self.rows();
        self.inner.as_mut_slice()[j * rows..(j + 1) * rows].copy_from_slice(values);
    }

    /// New matrix keeping the listed columns in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        assert!(!indices.is_empty());
        let rows = self.rows();
        let mut inner = DMatrix::zeros(rows, indices.len());
        for (k, &j) in indices.iter().enumerate() {
            inner.column_mut(k).copy_from(&self.inner.column(j));
        }
        DenseMatrix { inner }
    }

    /// Contiguous block of `len` rows starting at `start`.
    pub fn row_block(&self, start: usize, len: usize) -> Self {
        assert!(len > 0 && start + len <= self.rows());
        DenseMatrix {
            inner: self.inner.rows(start, len).into_owned(),
        }
    }

    pub fn transpose(&self) -> Self {
        DenseMatrix {
            inner: self.inner.transpose(),
        }
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Self {
        assert_eq!(
            self.cols(),
            rhs.rows(),
            "inner dimensions must agree for a product"
        );
        DenseMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Self {
        assert_eq!((self.rows(), self.cols()), (rhs.rows(), rhs.cols()));
        DenseMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Self {
        assert_eq!((self.rows(), self.cols()), (rhs.rows(), rhs.cols()));
        DenseMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        assert!(factor.is_finite());
        DenseMatrix {
            inner: &self.inner * factor,
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Largest entry of |selfᵀ·self − I|; zero for orthonormal columns.
    pub fn orthogonality_defect(&self) -> f64 {
        let gram = self.inner.transpose() * &self.inner;
        let n = gram.nrows();
        let mut worst = 0.0_f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Entries row by row, the order used by the CSV form.
    pub fn iter_row_major(&self) -> impl Iterator<Item = f64> + '_ {
        let (rows, cols) = (self.rows(), self.cols());
        (0..rows).flat_map(move |i| (0..cols).map(move |j| self.inner[(i, j)]))
    }
}
