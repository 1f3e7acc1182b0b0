//! Learns an unknown block-diagonal orthogonal basis from measurements
//! taken under a union of orthogonal bases. Alternates batch pursuit
//! with per-block orthogonal Procrustes updates, sweeping the blocks in
//! Gauss-Seidel fashion.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::matrix::{DenseMatrix, Tolerance};
use crate::sparse::{omp_batch, KSparseMatrix};
use crate::structured::{BlockDiagOrthoBasis, UnionOrthoMatrix};

/// Orthogonality drift beyond this aborts the alternation.
pub const RUNTIME_ORTHO_TOL: f64 = 1e-6;

/// Alternation controls.
#[derive(Debug, Clone)]
pub struct ObdOptions {
    pub max_iter: usize,
    /// Stop when both the basis and the coefficients move less than this.
    pub delta_tol: f64,
    /// Keep a column's previous coefficients when a fresh pursuit fits
    /// that column worse.
    pub keep_previous_on_worse: bool,
    /// Extra attempts from seeded random bases when the misfit stays
    /// above `restart_rel_tol` times the measurement norm. Off by
    /// default: a single identity-start run is the reference protocol,
    /// and its failures at small signal counts are informative.
    pub restarts: usize,
    pub restart_rel_tol: f64,
    pub restart_seed: u64,
}

impl Default for ObdOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            delta_tol: 1e-6,
            keep_previous_on_worse: true,
            restarts: 0,
            restart_rel_tol: 1e-6,
            restart_seed: 0x0bd0_5eed,
        }
    }
}

/// One alternation step of the learning loop.
#[derive(Debug, Clone)]
pub struct ObdIteration {
    pub iteration: usize,
    pub objective_after_coding: f64,
    pub objective_after_update: f64,
    /// Largest Frobenius movement of any basis block.
    pub basis_change: f64,
    /// Frobenius movement of the coefficient matrix.
    pub coeff_change: f64,
    pub max_block_defect: f64,
}

/// Outcome of the alternation.
#[derive(Debug, Clone)]
pub struct ObdResult {
    pub basis: BlockDiagOrthoBasis,
    pub coeffs: KSparseMatrix,
    /// Signals reconstructed as basis times coefficients.
    pub x_hat: DenseMatrix,
    /// Final measurement misfit in Frobenius norm.
    pub objective: f64,
    pub converged: bool,
    /// Random re-initializations consumed before settling.
    pub restarts_used: usize,
    pub trace: Vec<ObdIteration>,
}

/// Closest rotation to the correlation matrix `r` in the trace sense.
fn polar_rotation(r: &DenseMatrix) -> Result<DenseMatrix> {
    let f = svd(r)?;
    Ok(f.v.matmul(&f.u.transpose()))
}

/// Optimal orthogonal block for one half-basis given everything else:
/// `s_block` holds the block's coefficient rows, `residual` the
/// measurements minus all other blocks' contributions, `a_half` the
/// half-basis columns. Returns the identity when the correlation
/// vanishes and nothing constrains the block.
pub fn basis_update_block(
    s_block: &DenseMatrix,
    residual: &DenseMatrix,
    a_half: &DenseMatrix,
) -> Result<DenseMatrix> {
    let h = a_half.cols();
    if s_block.rows() != h || residual.rows() != a_half.rows() || residual.cols() != s_block.cols()
    {
        return Err(Error::DimensionMismatch(format!(
            "block update shapes disagree: coeffs {}x{}, residual {}x{}, half-basis {}x{}",
            s_block.rows(),
            s_block.cols(),
            residual.rows(),
            residual.cols(),
            a_half.rows(),
            a_half.cols()
        )));
    }
    let r = s_block.matmul(&residual.transpose().matmul(a_half));
    if r.max_abs() <= Tolerance::default().zero_tol {
        return Ok(DenseMatrix::identity(h));
    }
    polar_rotation(&r)
}

fn assemble_dictionary(halves: &[DenseMatrix], blocks: &[DenseMatrix]) -> DenseMatrix {
    let n = halves[0].rows();
    let h = halves[0].cols();
    let mut dict = DenseMatrix::zeros(n, h * halves.len());
    for (i, (half, block)) in halves.iter().zip(blocks).enumerate() {
        let prod = half.matmul(block);
        for c in 0..h {
            dict.set_col(i * h + c, prod.col_slice(c));
        }
    }
    dict
}

fn misfit(b: &DenseMatrix, dict: &DenseMatrix, coeffs: &KSparseMatrix) -> f64 {
    b.sub(&coeffs.left_mul(dict)).frob_norm()
}

fn column_misfit(b: &DenseMatrix, dict: &DenseMatrix, col: &crate::sparse::SparseVector, j: usize) -> f64 {
    let mut r = b.col_vec(j);
    for (i, v) in col.iter() {
        for (rx, &dx) in r.iter_mut().zip(dict.col_slice(i)) {
            *rx -= v * dx;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Pursuit followed by a per-column comparison against the previous
/// coefficients, keeping whichever fits each column better.
fn coding_step(
    dict: &DenseMatrix,
    b: &DenseMatrix,
    k: usize,
    prev: Option<&KSparseMatrix>,
    keep_previous: bool,
) -> Result<KSparseMatrix> {
    let batch = omp_batch(dict, b, k, 0.0)?;
    let (Some(prev), true) = (prev, keep_previous) else {
        return Ok(batch.coeffs);
    };
    let mut columns = Vec::with_capacity(b.cols());
    for j in 0..b.cols() {
        let old = prev.column(j);
        if column_misfit(b, dict, old, j) < batch.residual_norms[j] {
            columns.push(old.clone());
        } else {
            columns.push(batch.coeffs.column(j).clone());
        }
    }
    KSparseMatrix::new(batch.coeffs.rows(), batch.coeffs.k_max(), columns)
}

/// Learns the basis and coefficients behind `b`, measured through the
/// union `a`, assuming each signal combines at most `k` columns of the
/// unknown block-diagonal basis. `init` seeds the alternation.
pub fn obd_bcs(
    a: &UnionOrthoMatrix,
    b: &DenseMatrix,
    k: usize,
    init: &BlockDiagOrthoBasis,
    opts: &ObdOptions,
) -> Result<ObdResult> {
    let n = a.n();
    let h = n / 2;
    if b.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "measurements have {} rows, bases act on {}",
            b.rows(),
            n
        )));
    }
    if init.dim() != a.cols() || init.block_size() != h {
        return Err(Error::DimensionMismatch(format!(
            "initial basis is {}x{} with {} blocks, need {}x{} with blocks of {}",
            init.dim(),
            init.dim(),
            init.num_blocks(),
            a.cols(),
            a.cols(),
            h
        )));
    }
    if k == 0 || k > n {
        return Err(Error::DimensionMismatch(format!(
            "sparsity {k} must lie in 1..={n}"
        )));
    }
    let num_half = init.num_blocks();
    let halves: Vec<DenseMatrix> = (0..num_half).map(|i| a.half_block(i)).collect();

    let good_enough = opts.restart_rel_tol * b.frob_norm();
    let mut best: Option<ObdResult> = None;
    for attempt in 0..=opts.restarts {
        let init_blocks = if attempt == 0 {
            init.blocks().to_vec()
        } else {
            let seed = crate::synth::derive_seed(opts.restart_seed, 0xb10c, attempt as u64);
            let mut rng = crate::synth::seeded_rng(seed);
            crate::synth::gen_block_diag_basis(
                n,
                a.num_blocks(),
                crate::synth::BlockBasisKind::Random,
                &mut rng,
            )?
            .blocks()
            .to_vec()
        };
        let mut run = run_alternation(&halves, b, k, init_blocks, opts)?;
        run.restarts_used = attempt;
        let done = run.objective <= good_enough;
        if best.as_ref().is_none_or(|r| run.objective < r.objective) {
            best = Some(run);
        }
        if done {
            break;
        }
    }
    Ok(best.expect("at least one attempt runs"))
}

fn run_alternation(
    halves: &[DenseMatrix],
    b: &DenseMatrix,
    k: usize,
    mut blocks: Vec<DenseMatrix>,
    opts: &ObdOptions,
) -> Result<ObdResult> {
    let num_half = halves.len();
    let h = halves[0].cols();
    let zero_tol = Tolerance::default().zero_tol;

    let mut trace = Vec::new();
    let mut prev_coeffs: Option<KSparseMatrix> = None;
    let mut converged = false;

    for iteration in 0..opts.max_iter {
        let dict = assemble_dictionary(halves, &blocks);
        let coeffs = coding_step(
            &dict,
            b,
            k,
            prev_coeffs.as_ref(),
            opts.keep_previous_on_worse,
        )?;
        let objective_after_coding = misfit(b, &dict, &coeffs);

        // running sum of per-block contributions, updated in place
        let mut contribs: Vec<DenseMatrix> = (0..num_half)
            .map(|i| halves[i].matmul(&blocks[i].matmul(&coeffs.row_block_dense(i * h, h))))
            .collect();
        let mut total = contribs[0].clone();
        for c in &contribs[1..] {
            total = total.add(c);
        }

        let mut basis_change: f64 = 0.0;
        for i in 0..num_half {
            let residual = b.sub(&total.sub(&contribs[i]));
            let s_block = coeffs.row_block_dense(i * h, h);
            let r = s_block.matmul(&residual.transpose().matmul(&halves[i]));
            if r.max_abs() <= zero_tol {
                continue; // block unused this sweep, keep it
            }
            let new_block = polar_rotation(&r)?;
            basis_change = basis_change.max(new_block.sub(&blocks[i]).frob_norm());
            let new_contrib = halves[i].matmul(&new_block.matmul(&s_block));
            total = total.sub(&contribs[i]).add(&new_contrib);
            contribs[i] = new_contrib;
            blocks[i] = new_block;
        }

        let objective_after_update = b.sub(&total).frob_norm();
        let max_block_defect = blocks
            .iter()
            .map(|p| p.orthogonality_defect())
            .fold(0.0, f64::max);
        if max_block_defect > RUNTIME_ORTHO_TOL {
            return Err(Error::BlockOrthogonalityLost {
                iter: iteration,
                defect: max_block_defect,
            });
        }
        let coeff_change = match &prev_coeffs {
            Some(prev) => coeffs.to_dense().sub(&prev.to_dense()).frob_norm(),
            None => f64::INFINITY,
        };
        trace.push(ObdIteration {
            iteration,
            objective_after_coding,
            objective_after_update,
            basis_change,
            coeff_change,
            max_block_defect,
        });
        prev_coeffs = Some(coeffs);
        if basis_change <= opts.delta_tol && coeff_change <= opts.delta_tol {
            converged = true;
            break;
        }
    }

    // final coding pass so coefficients match the settled basis
    let dict = assemble_dictionary(halves, &blocks);
    let coeffs = coding_step(
        &dict,
        b,
        k,
        prev_coeffs.as_ref(),
        opts.keep_previous_on_worse,
    )?;
    let objective = misfit(b, &dict, &coeffs);
    let basis = BlockDiagOrthoBasis::new(blocks)?;
    let x_hat = basis.mul_ksparse(&coeffs);
    Ok(ObdResult {
        basis,
        coeffs,
        x_hat,
        objective,
        converged,
        restarts_used: 0,
        trace,
    })
}

/// Orthogonal dictionary learning on fully observed signals: alternates
/// hard thresholding of the analysis coefficients with a Procrustes
/// rotation fit. Baseline for the measured variant.
#[derive(Debug, Clone)]
pub struct DlResult {
    pub basis: DenseMatrix,
    pub coeffs: KSparseMatrix,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Fits `x` with an orthogonal basis times `k`-sparse coefficients.
pub fn orthogonal_dl(
    x: &DenseMatrix,
    k: usize,
    max_iter: usize,
    delta_tol: f64,
) -> Result<DlResult> {
    let m = x.rows();
    if k == 0 || k > m {
        return Err(Error::DimensionMismatch(format!(
            "sparsity {k} must lie in 1..={m}"
        )));
    }
    let zero_tol = Tolerance::default().zero_tol;
    let mut basis = DenseMatrix::identity(m);
    let mut objective_trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let analysis = basis.transpose().matmul(x);
        let coeffs = KSparseMatrix::from_dense_top_k(&analysis, k, zero_tol)?;
        objective_trace.push(x.sub(&coeffs.left_mul(&basis)).frob_norm());
        let m_corr = coeffs.to_dense().matmul(&x.transpose());
        let f = svd(&m_corr)?;
        let new_basis = f.v.matmul(&f.u.transpose());
        let change = new_basis.sub(&basis).frob_norm();
        basis = new_basis;
        if change <= delta_tol {
            converged = true;
            break;
        }
    }
    let analysis = basis.transpose().matmul(x);
    let coeffs = KSparseMatrix::from_dense_top_k(&analysis, k, zero_tol)?;
    objective_trace.push(x.sub(&coeffs.left_mul(&basis)).frob_norm());
    Ok(DlResult {
        basis,
        coeffs,
        objective_trace,
        converged,
    })
}

/// Outcome of learning a block diagonal orthogonal basis from fully
/// observed signals.
#[derive(Debug, Clone)]
pub struct BlockDlResult {
    pub basis: BlockDiagOrthoBasis,
    pub coeffs: KSparseMatrix,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Fits fully observed signals with a block diagonal orthogonal basis
/// times `k`-sparse coefficients. Each column keeps its `k` largest
/// coefficients across all blocks jointly, so the blocks compete for
/// the sparsity budget. Budgeting each block separately instead leaves
/// the threshold nothing to cut once a block roughly fits its rows,
/// and the alternation then settles short of the planted basis.
pub fn block_orthogonal_dl(
    x: &DenseMatrix,
    n: usize,
    l: usize,
    k: usize,
    max_iter: usize,
    delta_tol: f64,
) -> Result<BlockDlResult> {
    if n == 0 || n % 2 != 0 || l == 0 {
        return Err(Error::DimensionMismatch(format!(
            "need an even block dimension and at least one block, got n={n}, L={l}"
        )));
    }
    let dim = n * l;
    if x.rows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "training rows {} do not match basis dimension {dim}",
            x.rows()
        )));
    }
    if k == 0 || k > dim {
        return Err(Error::DimensionMismatch(format!(
            "sparsity {k} must lie in 1..={dim}"
        )));
    }
    let h = n / 2;
    let zero_tol = Tolerance::default().zero_tol;
    let mut blocks: Vec<DenseMatrix> = (0..2 * l).map(|_| DenseMatrix::identity(h)).collect();
    let mut objective_trace = Vec::new();
    let mut converged = false;

    let coding = |blocks: &[DenseMatrix]| -> Result<(KSparseMatrix, f64)> {
        let mut analysis = DenseMatrix::zeros(dim, x.cols());
        for (i, blk) in blocks.iter().enumerate() {
            let rows = blk.transpose().matmul(&x.row_block(i * h, h));
            for r in 0..h {
                for c in 0..x.cols() {
                    analysis.set(i * h + r, c, rows.get(r, c));
                }
            }
        }
        let coeffs = KSparseMatrix::from_dense_top_k(&analysis, k, zero_tol)?;
        let dense = coeffs.to_dense();
        let mut misfit_sq = 0.0;
        for (i, blk) in blocks.iter().enumerate() {
            let fit = blk.matmul(&dense.row_block(i * h, h));
            misfit_sq += x.row_block(i * h, h).sub(&fit).frob_norm().powi(2);
        }
        Ok((coeffs, misfit_sq.sqrt()))
    };

    for _ in 0..max_iter {
        let (coeffs, misfit) = coding(&blocks)?;
        objective_trace.push(misfit);
        let dense = coeffs.to_dense();
        // the objective splits over blocks, so each Procrustes fit is
        // exact for its block given the shared coefficients
        let mut change: f64 = 0.0;
        for (i, blk) in blocks.iter_mut().enumerate() {
            let corr = dense
                .row_block(i * h, h)
                .matmul(&x.row_block(i * h, h).transpose());
            let f = svd(&corr)?;
            let next = f.v.matmul(&f.u.transpose());
            change = change.max(next.sub(blk).frob_norm());
            *blk = next;
        }
        if change <= delta_tol {
            converged = true;
            break;
        }
    }
    let (coeffs, misfit) = coding(&blocks)?;
    objective_trace.push(misfit);
    Ok(BlockDlResult {
        basis: BlockDiagOrthoBasis::new(blocks)?,
        coeffs,
        objective_trace,
        converged,
    })
}

/// Column matching between two same-shaped matrices, allowing sign
/// flips and reordering.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// `permutation[j]` is the estimate column matched to reference column `j`.
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    /// Largest Euclidean distance after matching.
    pub max_column_error: f64,
}

/// Greedily matches estimate columns to reference columns by absolute
/// inner product, largest first.
pub fn signed_permutation_alignment(
    reference: &DenseMatrix,
    estimate: &DenseMatrix,
) -> Result<Alignment> {
    if reference.rows() != estimate.rows() || reference.cols() != estimate.cols() {
        return Err(Error::DimensionMismatch(format!(
            "cannot align {}x{} against {}x{}",
            estimate.rows(),
            estimate.cols(),
            reference.rows(),
            reference.cols()
        )));
    }
    let c = reference.cols();
    let gram = estimate.transpose().matmul(reference);
    let mut entries: Vec<(f64, usize, usize)> = (0..c)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .map(|(i, j)| (gram.get(i, j), i, j))
        .collect();
    entries.sort_by(|a, b| {
        b.0.abs()
            .partial_cmp(&a.0.abs())
            .expect("finite gram entries")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut permutation = vec![usize::MAX; c];
    let mut signs = vec![0.0; c];
    let mut est_used = vec![false; c];
    let mut assigned = 0;
    for (g, i, j) in entries {
        if est_used[i] || permutation[j] != usize::MAX {
            continue;
        }
        permutation[j] = i;
        signs[j] = if g < 0.0 { -1.0 } else { 1.0 };
        est_used[i] = true;
        assigned += 1;
        if assigned == c {
            break;
        }
    }
    let mut max_column_error: f64 = 0.0;
    for j in 0..c {
        let i = permutation[j];
        let err = reference
            .col_slice(j)
            .iter()
            .zip(estimate.col_slice(i))
            .map(|(r, e)| (r - signs[j] * e).powi(2))
            .sum::<f64>()
            .sqrt();
        max_column_error = max_column_error.max(err);
    }
    Ok(Alignment {
        permutation,
        signs,
        max_column_error,
    })
}

fn factorial(n: usize) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 2..=n {
        acc *= BigUint::from(i);
    }
    acc
}

/// Number of permutation matrices commuting with the block structure:
/// each of the `2l` diagonal blocks may permute freely.
pub fn admissible_permutation_count(m: usize, l: usize) -> Result<BigUint> {
    if l == 0 {
        return Err(Error::DimensionMismatch(
            "need at least one base block".into(),
        ));
    }
    if m == 0 || m % (2 * l) != 0 {
        return Err(Error::Divisibility {
            what: "basis dimension",
            value: m,
            by: 2 * l,
        });
    }
    let block = m / (2 * l);
    Ok(factorial(block).pow(2 * l as u32))
}

/// Admissible permutations as a fraction of all `m!` permutations.
/// Underflows to zero below 1e-30.
pub fn admissible_permutation_fraction(m: usize, l: usize) -> Result<f64> {
    let count = admissible_permutation_count(m, l)?;
    let scale = BigUint::from(10u32).pow(30);
    let scaled = count * scale / factorial(m);
    let parsed: f64 = scaled.to_string().parse().expect("decimal digits");
    Ok(parsed / 1e30)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gram_schmidt;
    use crate::synth::{
        gen_block_diag_basis, gen_gaussian_matrix, gen_sparse_matrix, gen_union_ortho, seeded_rng,
        BlockBasisKind, SupportSize,
    };

    fn random_rotation(n: usize, rng: &mut crate::synth::SeededRng) -> DenseMatrix {
        let g = gen_gaussian_matrix(n, n, rng).unwrap();
        gram_schmidt(&g, &Tolerance::default()).unwrap()
    }

    #[test]
    fn polar_factor_maximizes_trace() {
        let mut rng = seeded_rng(17);
        let r = gen_gaussian_matrix(4, 4, &mut rng).unwrap();
        let best = polar_rotation(&r).unwrap();
        let trace = |p: &DenseMatrix| {
            let prod = p.matmul(&r);
            (0..4).map(|i| prod.get(i, i)).sum::<f64>()
        };
        let best_val = trace(&best);
        for _ in 0..200 {
            let q = random_rotation(4, &mut rng);
            assert!(trace(&q) <= best_val + 1e-9);
        }
        assert!(best.orthogonality_defect() < 1e-10);
    }

    #[test]
    fn block_update_fits_planted_block() {
        let mut rng = seeded_rng(23);
        let n = 8;
        let h = 4;
        let a_half = {
            let full = random_rotation(n, &mut rng);
            full.select_columns(&[0, 1, 2, 3])
        };
        let p_true = random_rotation(h, &mut rng);
        let s = gen_gaussian_matrix(h, 32, &mut rng).unwrap();
        let b = a_half.matmul(&p_true.matmul(&s));
        let p_hat = basis_update_block(&s, &b, &a_half).unwrap();
        assert!(p_hat.sub(&p_true).max_abs() < 1e-10);
    }

    #[test]
    fn block_update_identity_when_unconstrained() {
        let zeros = DenseMatrix::zeros(4, 16);
        let b = DenseMatrix::zeros(8, 16);
        let a_half = {
            let mut rng = seeded_rng(2);
            random_rotation(8, &mut rng).select_columns(&[0, 1, 2, 3])
        };
        let p = basis_update_block(&zeros, &b, &a_half).unwrap();
        assert!(p.sub(&DenseMatrix::identity(4)).max_abs() == 0.0);
    }

    fn planted_obd(
        n: usize,
        l: usize,
        k: usize,
        cols: usize,
        seed: u64,
    ) -> (UnionOrthoMatrix, DenseMatrix, DenseMatrix) {
        let mut rng = seeded_rng(seed);
        let a = gen_union_ortho(n, l, &mut rng).unwrap();
        let p = gen_block_diag_basis(n, l, BlockBasisKind::Random, &mut rng).unwrap();
        let s = gen_sparse_matrix(n * l, cols, SupportSize::Exactly(k), &mut rng).unwrap();
        let x = p.mul_ksparse(&s);
        let b = a.to_dense().matmul(&x);
        (a, b, x)
    }

    #[test]
    fn alternation_recovers_planted_signals() {
        let (a, b, x) = planted_obd(8, 2, 1, 256, 31);
        let init = BlockDiagOrthoBasis::identity(8, 2).unwrap();
        let out = obd_bcs(&a, &b, 1, &init, &ObdOptions::default()).unwrap();
        let err = crate::synth::recon_error(&x, &out.x_hat).unwrap();
        assert!(
            err.mean < 1e-6,
            "mean reconstruction error {} after {} iterations",
            err.mean,
            out.trace.len()
        );
    }

    #[test]
    fn objective_never_increases() {
        let (a, b, _) = planted_obd(8, 2, 2, 128, 5);
        let init = BlockDiagOrthoBasis::identity(8, 2).unwrap();
        let opts = ObdOptions {
            max_iter: 25,
            ..ObdOptions::default()
        };
        let out = obd_bcs(&a, &b, 2, &init, &opts).unwrap();
        let mut prev = f64::INFINITY;
        for row in &out.trace {
            assert!(row.objective_after_coding <= prev + 1e-9);
            assert!(row.objective_after_update <= row.objective_after_coding + 1e-9);
            assert!(row.max_block_defect < 1e-10);
            prev = row.objective_after_update;
        }
        assert!(out.objective <= prev + 1e-9);
    }

    #[test]
    fn rejects_mismatched_initial_basis() {
        let (a, b, _) = planted_obd(8, 2, 2, 16, 1);
        let wrong = BlockDiagOrthoBasis::identity(8, 1).unwrap();
        assert!(matches!(
            obd_bcs(&a, &b, 2, &wrong, &ObdOptions::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn dictionary_learning_recovers_rotation() {
        let mut rng = seeded_rng(41);
        let m = 8;
        let p_true = random_rotation(m, &mut rng);
        let s = gen_sparse_matrix(m, 96, SupportSize::Exactly(1), &mut rng).unwrap();
        let x = s.left_mul(&p_true);
        let out = orthogonal_dl(&x, 1, 200, 1e-10).unwrap();
        let final_obj = *out.objective_trace.last().unwrap();
        assert!(final_obj < 1e-8, "final objective {final_obj}");
        let align = signed_permutation_alignment(&p_true, &out.basis).unwrap();
        assert!(align.max_column_error < 1e-8);
    }

    #[test]
    fn block_learning_recovers_a_planted_tiled_basis() {
        let mut rng = seeded_rng(11);
        let planted = BlockDiagOrthoBasis::tiled_rotation(16, 2).unwrap();
        let s = gen_sparse_matrix(32, 400, SupportSize::Exactly(3), &mut rng).unwrap();
        let x = planted.mul_ksparse(&s);
        let out = block_orthogonal_dl(&x, 16, 2, 3, 300, 1e-11).unwrap();
        assert!(out.converged);
        let final_obj = *out.objective_trace.last().unwrap();
        assert!(final_obj < 1e-8, "final objective {final_obj}");
        let align =
            signed_permutation_alignment(&planted.to_dense(), &out.basis.to_dense()).unwrap();
        assert!(align.max_column_error < 1e-8);
        for w in out.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn alignment_detects_signed_permutation() {
        let mut rng = seeded_rng(3);
        let p = random_rotation(6, &mut rng);
        let shuffled = {
            let perm = [4usize, 0, 5, 2, 1, 3];
            let mut m = p.select_columns(&perm);
            for j in [1usize, 3] {
                let col: Vec<f64> = m.col_slice(j).iter().map(|v| -v).collect();
                m.set_col(j, &col);
            }
            m
        };
        let align = signed_permutation_alignment(&p, &shuffled).unwrap();
        assert!(align.max_column_error < 1e-12);
        let noisy = {
            let mut m = shuffled.clone();
            m.set(0, 0, m.get(0, 0) + 0.5);
            m
        };
        let align = signed_permutation_alignment(&p, &noisy).unwrap();
        assert!(align.max_column_error > 0.1);
    }

    #[test]
    fn permutation_counts_match_hand_values() {
        assert_eq!(admissible_permutation_count(4, 1).unwrap(), BigUint::from(4u32));
        assert_eq!(
            admissible_permutation_count(16, 2).unwrap(),
            BigUint::from(331776u32)
        );
        let frac = admissible_permutation_fraction(16, 2).unwrap();
        let exact = 331776.0 / 20_922_789_888_000.0;
        assert!((frac - exact).abs() / exact < 1e-9);
        assert!(admissible_permutation_count(9, 2).is_err());
        assert!(admissible_permutation_count(8, 0).is_err());
    }
}
