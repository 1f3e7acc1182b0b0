//! Recovery when the unknown basis is itself sparse under a known base
//! dictionary: the two sparsity levels multiply, so the problem reduces
//! to ordinary pursuit against the combined dictionary.

use crate::error::{Budgeted, Error, Result};
use crate::linalg::{spark_exact, spark_lower_bound};
use crate::matrix::{DenseMatrix, Tolerance};
use crate::sparse::{omp_batch, KSparseMatrix, OmpBatch};

/// Result of recovering signals whose basis has at most `k_p` nonzeros
/// per column over the base dictionary.
#[derive(Debug, Clone)]
pub struct SparseBcsResult {
    /// Coefficients over the combined dictionary, one column per signal.
    pub combined_coeffs: KSparseMatrix,
    /// Reconstructed signals in the base-dictionary domain.
    pub x_hat: DenseMatrix,
    /// Residual norm of each pursuit.
    pub residual_norms: Vec<f64>,
    /// Columns whose support became numerically dependent mid-pursuit.
    pub singular_columns: Vec<usize>,
}

/// Recovers `B = A X` where each column of `X` has at most `k_p * k`
/// nonzeros over `phi`. Solves against `A * phi` with that combined
/// sparsity, then maps the coefficients back through `phi`.
pub fn sparse_bcs_direct(
    a: &DenseMatrix,
    phi: &DenseMatrix,
    b: &DenseMatrix,
    k: usize,
    k_p: usize,
) -> Result<SparseBcsResult> {
    if a.cols() != phi.rows() {
        return Err(Error::DimensionMismatch(format!(
            "measurement matrix has {} columns, base dictionary has {} rows",
            a.cols(),
            phi.rows()
        )));
    }
    if b.rows() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal rows {} do not match {} measurement rows",
            b.rows(),
            a.rows()
        )));
    }
    if k == 0 || k_p == 0 {
        return Err(Error::DimensionMismatch(
            "sparsity levels must be positive".into(),
        ));
    }
    let combined = a.matmul(phi);
    let k_total = (k_p * k).min(combined.rows()).min(combined.cols());
    let OmpBatch {
        coeffs,
        residual_norms,
        singular_columns,
    } = omp_batch(&combined, b, k_total, 0.0)?;
    let x_hat = coeffs.left_mul(phi);
    Ok(SparseBcsResult {
        combined_coeffs: coeffs,
        x_hat,
        residual_norms,
        singular_columns,
    })
}

/// Whether a spark value certifies unique `k_p * k`-sparse solutions.
pub fn spark_threshold_satisfied(spark: usize, k: usize, k_p: usize) -> bool {
    spark > 2 * k_p * k
}

/// Decides whether every `k_p * k`-sparse representation over
/// `A * phi` is unique. Tries the exact spark within `budget` subsets,
/// then falls back to the coherence bound, which can only certify the
/// positive direction.
pub fn uniqueness_condition_sparse(
    a: &DenseMatrix,
    phi: &DenseMatrix,
    k: usize,
    k_p: usize,
    tol: &Tolerance,
    budget: usize,
) -> Result<Budgeted<bool>> {
    if a.cols() != phi.rows() {
        return Err(Error::DimensionMismatch(format!(
            "measurement matrix has {} columns, base dictionary has {} rows",
            a.cols(),
            phi.rows()
        )));
    }
    let combined = a.matmul(phi);
    match spark_exact(&combined, tol, budget)? {
        Budgeted::Done(spark) => Ok(Budgeted::Done(spark_threshold_satisfied(spark, k, k_p))),
        Budgeted::Exceeded => {
            let bound = spark_lower_bound(&combined)?;
            if !bound.is_finite() {
                return Ok(Budgeted::Done(true));
            }
            if spark_threshold_satisfied(bound.ceil() as usize, k, k_p) {
                Ok(Budgeted::Done(true))
            } else {
                Ok(Budgeted::Exceeded)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::dct_basis;
    use crate::synth::{gen_gaussian_matrix, gen_sparse_matrix, seeded_rng, SupportSize};

    #[test]
    fn recovers_doubly_sparse_signals() {
        let mut rng = seeded_rng(5);
        let m = 32;
        let a = gen_gaussian_matrix(16, m, &mut rng).unwrap();
        let dct = dct_basis(m).unwrap();
        // basis columns: 2-sparse combinations of base-dictionary atoms
        let basis_coeffs = gen_sparse_matrix(m, m, SupportSize::Exactly(2), &mut rng).unwrap();
        let p = basis_coeffs.left_mul(&dct);
        let s = gen_sparse_matrix(m, 20, SupportSize::Exactly(1), &mut rng).unwrap();
        let x = s.left_mul(&p);
        let b = a.matmul(&x);
        let out = sparse_bcs_direct(&a, &dct, &b, 1, 2).unwrap();
        let err = out.x_hat.sub(&x).max_abs();
        assert!(err < 1e-8, "max abs error {err}");
        for (j, c) in (0..20).map(|j| (j, out.combined_coeffs.column(j))) {
            assert!(c.nnz() <= 2, "column {j} has {} nonzeros", c.nnz());
        }
    }

    #[test]
    fn threshold_matches_strict_inequality() {
        assert!(spark_threshold_satisfied(5, 1, 2));
        assert!(!spark_threshold_satisfied(4, 1, 2));
    }

    #[test]
    fn uniqueness_decided_exactly_on_small_problem() {
        let mut rng = seeded_rng(9);
        let a = gen_gaussian_matrix(6, 8, &mut rng).unwrap();
        let phi = dct_basis(8).unwrap();
        // spark of a 6x8 generic product is 7: unique for k_p*k <= 3
        let yes = uniqueness_condition_sparse(&a, &phi, 3, 1, &Tolerance::default(), 1_000_000)
            .unwrap();
        let no = uniqueness_condition_sparse(&a, &phi, 4, 1, &Tolerance::default(), 1_000_000)
            .unwrap();
        assert_eq!(yes.done(), Some(true));
        assert_eq!(no.done(), Some(false));
    }

    #[test]
    fn exhausted_budget_falls_back_to_bound() {
        let mut rng = seeded_rng(13);
        let a = gen_gaussian_matrix(24, 48, &mut rng).unwrap();
        let phi = dct_basis(48).unwrap();
        // budget 1 forces the fallback; the coherence bound cannot
        // certify k_p*k = 12 for this size, so the answer stays open
        let verdict =
            uniqueness_condition_sparse(&a, &phi, 12, 1, &Tolerance::default(), 1).unwrap();
        assert!(verdict.is_exceeded());
    }

    #[test]
    fn rejects_zero_sparsity() {
        let mut rng = seeded_rng(1);
        let a = gen_gaussian_matrix(4, 8, &mut rng).unwrap();
        let phi = dct_basis(8).unwrap();
        let b = DenseMatrix::zeros(4, 1);
        assert!(sparse_bcs_direct(&a, &phi, &b, 0, 2).is_err());
    }
}
