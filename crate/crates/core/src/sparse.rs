//! Sparse coefficient containers and orthogonal matching pursuit.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Tolerance};

/// Sparse column vector. Support indices are strictly increasing and no
/// stored value is numerically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(dim: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadSparseStructure("dimension must be positive".into()));
        }
        if support.len() != values.len() {
            return Err(Error::BadSparseStructure(format!(
                "support has {} indices but {} values",
                support.len(),
                values.len()
            )));
        }
        for w in support.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::BadSparseStructure(
                    "support indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = support.last() {
            if last >= dim {
                return Err(Error::BadSparseStructure(format!(
                    "support index {last} out of range for dimension {dim}"
                )));
            }
        }
        let zero_tol = Tolerance::default().zero_tol;
        for &v in &values {
            if !v.is_finite() {
                return Err(Error::BadSparseStructure("values must be finite".into()));
            }
            if v.abs() <= zero_tol {
                return Err(Error::BadSparseStructure(
                    "explicit zeros are not stored".into(),
                ));
            }
        }
        Ok(SparseVector { dim, support, values })
    }

    pub fn empty(dim: usize) -> Self {
        SparseVector {
            dim,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Sorts pairs by index and drops entries at or below `zero_tol`.
    pub fn from_pairs(dim: usize, pairs: &[(usize, f64)], zero_tol: f64) -> Result<Self> {
        let mut kept: Vec<(usize, f64)> = pairs
            .iter()
            .copied()
            .filter(|(_, v)| v.abs() > zero_tol)
            .collect();
        kept.sort_by_key(|&(i, _)| i);
        let support: Vec<usize> = kept.iter().map(|&(i, _)| i).collect();
        let values: Vec<f64> = kept.iter().map(|&(_, v)| v).collect();
        if support.is_empty() {
            if dim == 0 {
                return Err(Error::BadSparseStructure("dimension must be positive".into()));
            }
            return Ok(SparseVector::empty(dim));
        }
        SparseVector::new(dim, support, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.support.iter().copied().zip(self.values.iter().copied())
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// Column-sparse matrix: every column carries at most `k_max` nonzeros.
#[derive(Debug, Clone, PartialEq)]
pub struct KSparseMatrix {
    rows: usize,
    k_max: usize,
    columns: Vec<SparseVector>,
}

impl KSparseMatrix {
    pub fn new(rows: usize, k_max: usize, columns: Vec<SparseVector>) -> Result<Self> {
        if rows == 0 || columns.is_empty() {
            return Err(Error::BadSparseStructure(
                "matrix dimensions must be positive".into(),
            ));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.dim() != rows {
                return Err(Error::BadSparseStructure(format!(
                    "column {j} has dimension {}, expected {rows}",
                    col.dim()
                )));
            }
            if col.nnz() > k_max {
                return Err(Error::BadSparseStructure(format!(
                    "column {j} has {} nonzeros, limit is {k_max}",
                    col.nnz()
                )));
            }
        }
        Ok(KSparseMatrix { rows, k_max, columns })
    }

    /// Keeps the `k` largest-magnitude entries of every column of `m`.
    /// Magnitude ties keep the lower row index.
    pub fn from_dense_top_k(m: &DenseMatrix, k: usize, zero_tol: f64) -> Result<Self> {
        let mut columns = Vec::with_capacity(m.cols());
        for j in 0..m.cols() {
            let col = m.col_slice(j);
            let mut order: Vec<usize> = (0..col.len()).collect();
            order.sort_by(|&a, &b| {
                col[b]
                    .abs()
                    .partial_cmp(&col[a].abs())
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let pairs: Vec<(usize, f64)> = order
                .iter()
                .take(k)
                .map(|&i| (i, col[i]))
                .collect();
            columns.push(SparseVector::from_pairs(m.rows(), &pairs, zero_tol)?);
        }
        KSparseMatrix::new(m.rows(), k, columns)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn column(&self, j: usize) -> &SparseVector {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[SparseVector] {
        &self.columns
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols());
        for (j, col) in self.columns.iter().enumerate() {
            for (i, v) in col.iter() {
                out.set(i, j, v);
            }
        }
        out
    }

    /// Dense copy of rows `start..start+len`.
    pub fn row_block_dense(&self, start: usize, len: usize) -> DenseMatrix {
        assert!(len > 0 && start + len <= self.rows);
        let mut out = DenseMatrix::zeros(len, self.cols());
        for (j, col) in self.columns.iter().enumerate() {
            for (i, v) in col.iter() {
                if i >= start && i < start + len {
                    out.set(i - start, j, v);
                }
            }
        }
        out
    }

    /// Product d · self, using the column sparsity.
    pub fn left_mul(&self, d: &DenseMatrix) -> DenseMatrix {
        assert_eq!(d.cols(), self.rows);
        let mut out = DenseMatrix::zeros(d.rows(), self.cols());
        for (j, col) in self.columns.iter().enumerate() {
            let mut acc = vec![0.0; d.rows()];
            for (i, v) in col.iter() {
                let dc = d.col_slice(i);
                for (a, &x) in acc.iter_mut().zip(dc) {
                    *a += v * x;
                }
            }
            out.set_col(j, &acc);
        }
        out
    }
}

/// Result of one pursuit run.
#[derive(Debug, Clone)]
pub struct OmpOutcome {
    pub coeffs: SparseVector,
    pub residual_norm: f64,
    /// Set when a least-squares re-fit met a rank-deficient sub-matrix
    /// and fell back to the minimum-norm solution.
    pub singular_support: bool,
}

/// Batch pursuit over the columns of `b`.
#[derive(Debug, Clone)]
pub struct OmpBatch {
    pub coeffs: KSparseMatrix,
    pub residual_norms: Vec<f64>,
    /// Columns whose re-fit hit a rank-deficient support.
    pub singular_columns: Vec<usize>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct NormalizedDict {
    cols: Vec<Vec<f64>>,
}

fn normalize_dictionary(d: &DenseMatrix, zero_tol: f64) -> Result<NormalizedDict> {
    let mut cols = Vec::with_capacity(d.cols());
    for j in 0..d.cols() {
        let c = d.col_slice(j);
        let n = norm(c);
        if n <= zero_tol {
            return Err(Error::ZeroColumn(j));
        }
        cols.push(c.iter().map(|v| v / n).collect());
    }
    Ok(NormalizedDict { cols })
}

/// Incremental Cholesky state for the normal equations of the selected
/// sub-dictionary. Falls back to an SVD minimum-norm solve once a pivot
/// collapses.
struct SupportSolver {
    lower: Vec<Vec<f64>>,
    gram_rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    singular: bool,
}

impl SupportSolver {
    fn new() -> Self {
        SupportSolver {
            lower: Vec::new(),
            gram_rows: Vec::new(),
            rhs: Vec::new(),
            singular: false,
        }
    }

    fn push_atom(&mut self, d: &DenseMatrix, support: &[usize], b: &[f64], pivot_tol: f64) {
        let new = *support.last().unwrap();
        let new_col = d.col_slice(new);
        let mut gram_row = Vec::with_capacity(support.len());
        for &j in support.iter() {
            gram_row.push(dot(d.col_slice(j), new_col));
        }
        self.rhs.push(dot(new_col, b));
        self.gram_rows.push(gram_row.clone());
        if self.singular {
            return;
        }
        // Append one row to the Cholesky factor: solve L l = g, pivot
        // lambda^2 = gamma - l'l.
        let j = support.len() - 1;
        let mut l_row = vec![0.0; j];
        for i in 0..j {
            let mut s = gram_row[i];
            for t in 0..i {
                s -= self.lower[i][t] * l_row[t];
            }
            l_row[i] = s / self.lower[i][i];
        }
        let pivot2 = gram_row[j] - dot(&l_row, &l_row);
        if pivot2 <= pivot_tol {
            self.singular = true;
            return;
        }
        l_row.push(pivot2.sqrt());
        self.lower.push(l_row);
    }

    fn solve(&self, d: &DenseMatrix, support: &[usize], b: &[f64]) -> Vec<f64> {
        if self.singular {
            return min_norm_ls(d, support, b);
        }
        let n = support.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.rhs[i];
            for t in 0..i {
                s -= self.lower[i][t] * y[t];
            }
            y[i] = s / self.lower[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for t in i + 1..n {
                s -= self.lower[t][i] * x[t];
            }
            x[i] = s / self.lower[i][i];
        }
        x
    }
}

fn min_norm_ls(d: &DenseMatrix, support: &[usize], b: &[f64]) -> Vec<f64> {
    let sub = d.select_columns(support);
    let svd = sub.na().clone().svd(true, true);
    let rhs = DVector::from_column_slice(b);
    let eps = Tolerance::default().rank_tol * svd.singular_values.max();
    let sol = svd.solve(&rhs, eps.max(f64::MIN_POSITIVE)).expect("u and v were requested");
    sol.iter().copied().collect()
}

/// Orthogonal matching pursuit: greedily selects up to `k` atoms of `d`
/// by the largest absolute correlation with the residual, re-fitting the
/// coefficients on the support after every selection. Correlations use
/// unit-normalized atom copies; returned coefficients are in the scale
/// of `d`. Stops early once the residual norm drops to `residual_tol`.
/// Correlation ties pick the lowest column index.
pub fn omp(d: &DenseMatrix, b: &[f64], k: usize, residual_tol: f64) -> Result<OmpOutcome> {
    if b.len() != d.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal length {} does not match {} dictionary rows",
            b.len(),
            d.rows()
        )));
    }
    if k > d.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sparsity {k} exceeds dictionary rows {}",
            d.rows()
        )));
    }
    if !residual_tol.is_finite() || residual_tol < 0.0 {
        return Err(Error::DimensionMismatch(
            "residual tolerance must be finite and non-negative".into(),
        ));
    }
    if let Some(bad) = b.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: bad, col: 0 });
    }
    let tol = Tolerance::default();
    let dict = normalize_dictionary(d, tol.zero_tol)?;
    omp_prenormalized(d, &dict, b, k, residual_tol, &tol)
}

fn omp_prenormalized(
    d: &DenseMatrix,
    dict: &NormalizedDict,
    b: &[f64],
    k: usize,
    residual_tol: f64,
    tol: &Tolerance,
) -> Result<OmpOutcome> {
    let m = d.cols();
    let mut residual = b.to_vec();
    let mut support: Vec<usize> = Vec::new();
    let mut selected = vec![false; m];
    let mut coeffs: Vec<f64> = Vec::new();
    let mut solver = SupportSolver::new();
    // Pivot collapse threshold for unit-normalized Gram entries.
    let pivot_tol = tol.zero_tol;

    while support.len() < k {
        if norm(&residual) <= residual_tol {
            break;
        }
        let mut best = None;
        let mut best_corr = 0.0;
        for (j, col) in dict.cols.iter().enumerate() {
            if selected[j] {
                continue;
            }
            let c = dot(col, &residual).abs();
            if c > best_corr {
                best_corr = c;
                best = Some(j);
            }
        }
        let Some(j) = best else {
            break; // residual orthogonal to every remaining atom
        };
        if best_corr <= tol.zero_tol {
            break;
        }
        selected[j] = true;
        support.push(j);
        solver.push_atom(d, &support, b, pivot_tol);
        coeffs = solver.solve(d, &support, b);
        residual.copy_from_slice(b);
        for (&idx, &c) in support.iter().zip(&coeffs) {
            let col = d.col_slice(idx);
            for (r, &x) in residual.iter_mut().zip(col) {
                *r -= c * x;
            }
        }
    }

    let pairs: Vec<(usize, f64)> = support.iter().copied().zip(coeffs.iter().copied()).collect();
    Ok(OmpOutcome {
        coeffs: SparseVector::from_pairs(d.cols(), &pairs, tol.zero_tol)?,
        residual_norm: norm(&residual),
        singular_support: solver.singular,
    })
}

/// Runs `omp` on every column of `b`. Rank-deficient supports are
/// recorded per column instead of aborting the batch.
pub fn omp_batch(d: &DenseMatrix, b: &DenseMatrix, k: usize, residual_tol: f64) -> Result<OmpBatch> {
    if b.rows() != d.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal rows {} do not match {} dictionary rows",
            b.rows(),
            d.rows()
        )));
    }
    if k > d.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sparsity {k} exceeds dictionary rows {}",
            d.rows()
        )));
    }
    let tol = Tolerance::default();
    let dict = normalize_dictionary(d, tol.zero_tol)?;
    let outcomes: Vec<Result<OmpOutcome>> = (0..b.cols())
        .into_par_iter()
        .map(|j| omp_prenormalized(d, &dict, b.col_slice(j), k, residual_tol, &tol))
        .collect();
    let mut columns = Vec::with_capacity(b.cols());
    let mut residual_norms = Vec::with_capacity(b.cols());
    let mut singular_columns = Vec::new();
    for (j, out) in outcomes.into_iter().enumerate() {
        let out = out?;
        if out.singular_support {
            singular_columns.push(j);
        }
        residual_norms.push(out.residual_norm);
        columns.push(out.coeffs);
    }
    Ok(OmpBatch {
        coeffs: KSparseMatrix::new(d.cols(), k, columns)?,
        residual_norms,
        singular_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cols(cols: &[Vec<f64>]) -> DenseMatrix {
        DenseMatrix::from_columns(cols).unwrap()
    }

    #[test]
    fn picks_the_matching_atom() {
        // b equals atom 3 of an orthonormal dictionary
        let d = DenseMatrix::identity(5);
        let b = [0.0, 0.0, 0.0, 2.5, 0.0];
        let out = omp(&d, &b, 1, 0.0).unwrap();
        assert_eq!(out.coeffs.support(), &[3]);
        assert!((out.coeffs.values()[0] - 2.5).abs() < 1e-14);
        assert!(out.residual_norm < 1e-14);
        assert!(!out.singular_support);
    }

    #[test]
    fn coefficients_keep_original_scale() {
        // atom stored with norm 10, coefficient must come back as 0.5
        let d = unit_cols(&[vec![10.0, 0.0], vec![0.0, 1.0]]);
        let b = [5.0, 0.0];
        let out = omp(&d, &b, 1, 0.0).unwrap();
        assert_eq!(out.coeffs.support(), &[0]);
        assert!((out.coeffs.values()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn correlation_tie_takes_lowest_index() {
        let s = 1.0 / 2.0_f64.sqrt();
        let d = unit_cols(&[vec![s, s], vec![s, s], vec![1.0, 0.0]]);
        let b = [1.0, 1.0];
        let out = omp(&d, &b, 1, 0.0).unwrap();
        assert_eq!(out.coeffs.support(), &[0]);
    }

    #[test]
    fn zero_signal_gives_empty_support() {
        let d = DenseMatrix::identity(4);
        let out = omp(&d, &[0.0; 4], 2, 0.0).unwrap();
        assert_eq!(out.coeffs.nnz(), 0);
        assert_eq!(out.residual_norm, 0.0);
    }

    #[test]
    fn zero_column_is_rejected() {
        let d = unit_cols(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(omp(&d, &[1.0, 1.0], 1, 0.0).unwrap_err(), Error::ZeroColumn(1));
    }

    #[test]
    fn exact_duplicate_is_never_reselected() {
        // the residual is orthogonal to chosen atoms, so a copy of one
        // never carries correlation again
        let d = unit_cols(&[vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let b = [1.0, 1.0, 0.3];
        let out = omp(&d, &b, 3, 0.0).unwrap();
        assert!(!out.singular_support);
        assert_eq!(out.coeffs.support(), &[0, 2]);
        assert!((out.residual_norm - 0.3).abs() < 1e-12);
    }

    #[test]
    fn near_dependent_support_flags_singular() {
        // second atom is numerically parallel to the first, yet keeps
        // enough correlation with the residual to get selected
        let d = unit_cols(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1e-10, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let b = [1.0, 0.1, 0.0];
        let out = omp(&d, &b, 3, 0.0).unwrap();
        assert!(out.singular_support);
        // minimum-norm split across the near-parallel pair
        let dense = out.coeffs.to_dense();
        assert!((dense[0] - 0.5).abs() < 1e-6, "got {}", dense[0]);
        assert!((dense[1] - 0.5).abs() < 1e-6, "got {}", dense[1]);
    }

    #[test]
    fn early_exit_on_residual_tolerance() {
        let d = DenseMatrix::identity(4);
        let b = [3.0, 0.0, 0.0, 0.0];
        let out = omp(&d, &b, 4, 1e-8).unwrap();
        assert_eq!(out.coeffs.nnz(), 1);
    }

    #[test]
    fn batch_matches_single_runs() {
        let d = unit_cols(&[
            vec![1.0, 0.0, 0.0],
            vec![0.6, 0.8, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let b = DenseMatrix::from_columns(&[vec![1.0, 0.0, 2.0], vec![0.6, 0.8, 0.0]]).unwrap();
        let batch = omp_batch(&d, &b, 2, 1e-12).unwrap();
        for j in 0..2 {
            let single = omp(&d, b.col_slice(j), 2, 1e-12).unwrap();
            assert_eq!(batch.coeffs.column(j), &single.coeffs);
        }
    }

    #[test]
    fn sparse_vector_validation() {
        assert!(SparseVector::new(4, vec![1, 1], vec![1.0, 2.0]).is_err());
        assert!(SparseVector::new(4, vec![2, 1], vec![1.0, 2.0]).is_err());
        assert!(SparseVector::new(4, vec![4], vec![1.0]).is_err());
        assert!(SparseVector::new(4, vec![1], vec![0.0]).is_err());
        assert!(SparseVector::new(4, vec![1], vec![f64::NAN]).is_err());
        let ok = SparseVector::new(4, vec![0, 3], vec![1.0, -2.0]).unwrap();
        assert_eq!(ok.to_dense(), vec![1.0, 0.0, 0.0, -2.0]);
    }

    #[test]
    fn top_k_threshold_keeps_largest() {
        let m = DenseMatrix::from_row_major(4, 1, &[0.1, -3.0, 2.0, 0.5]).unwrap();
        let s = KSparseMatrix::from_dense_top_k(&m, 2, 1e-12).unwrap();
        assert_eq!(s.column(0).support(), &[1, 2]);
        assert_eq!(s.column(0).values(), &[-3.0, 2.0]);
    }

    #[test]
    fn row_block_and_left_mul() {
        let cols = vec![
            SparseVector::new(4, vec![0, 2], vec![1.0, 2.0]).unwrap(),
            SparseVector::new(4, vec![3], vec![-1.0]).unwrap(),
        ];
        let s = KSparseMatrix::new(4, 2, cols).unwrap();
        let block = s.row_block_dense(2, 2);
        assert_eq!(block.get(0, 0), 2.0);
        assert_eq!(block.get(1, 1), -1.0);
        let d = DenseMatrix::identity(4);
        assert_eq!(s.left_mul(&d), s.to_dense());
    }
}
