//! Recovery over a finite catalog of candidate bases: every signal is
//! solved under each basis, the signals vote, and the ensemble is
//! re-reconstructed under the winning basis.

use rayon::prelude::*;

use crate::bases::BasisCatalog;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::sparse::{omp, OmpOutcome, SparseVector};

/// Per-basis selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMode {
    /// Run the pursuit to the residual tolerance under every basis and
    /// vote for the one needing the fewest nonzeros. A basis reaching
    /// `k` or fewer nonzeros wins immediately, catalog order deciding.
    SparsestFirst,
    /// Fit exactly `k` atoms under every basis and vote for the
    /// smallest residual.
    MinResidual,
}

/// Residual stop, relative to each signal's norm.
pub const REL_RESIDUAL_TOL: f64 = 1e-10;

/// One signal's solve under the basis it voted for.
#[derive(Debug, Clone)]
pub struct SignalVote {
    /// Catalog index this signal voted for.
    pub basis_vote: usize,
    /// Coefficients under the ensemble-chosen basis.
    pub coeffs: SparseVector,
    /// Residual norm of the solve under the chosen basis.
    pub residual: f64,
}

/// Single-signal recovery outcome.
#[derive(Debug, Clone)]
pub struct FbcsSingle {
    pub basis_index: usize,
    pub coeffs: SparseVector,
    pub x_hat: Vec<f64>,
    pub residual: f64,
}

/// Ensemble recovery outcome.
#[derive(Debug, Clone)]
pub struct FbcsResult {
    pub chosen_basis: usize,
    pub chosen_name: String,
    pub per_signal: Vec<SignalVote>,
    /// Reconstructions of every signal under the chosen basis.
    pub x_hat: DenseMatrix,
    /// Fraction of signals that voted for another basis.
    pub miss_detected_fraction: f64,
}

struct BasisSolve {
    residual: f64,
    outcome: OmpOutcome,
}

/// Solves one signal under every usable basis and returns the vote plus
/// the cached per-basis solves.
fn vote_for_signal(
    dicts: &[Option<DenseMatrix>],
    b: &[f64],
    k: usize,
    mode: RecoveryMode,
) -> Result<(usize, Vec<Option<BasisSolve>>)> {
    let n = b.len();
    let tol = REL_RESIDUAL_TOL * b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut solves: Vec<Option<BasisSolve>> = Vec::with_capacity(dicts.len());
    let mut vote: Option<usize> = None;
    match mode {
        RecoveryMode::SparsestFirst => {
            let mut best_nnz = usize::MAX;
            for (idx, dict) in dicts.iter().enumerate() {
                let Some(dict) = dict else {
                    solves.push(None);
                    continue;
                };
                let out = omp(dict, b, n.min(dict.cols()), tol)?;
                let nnz = out.coeffs.nnz();
                solves.push(Some(BasisSolve {
                    residual: out.residual_norm,
                    outcome: out,
                }));
                if nnz < best_nnz {
                    best_nnz = nnz;
                    vote = Some(idx);
                }
                if nnz <= k {
                    break; // sparse enough, stop the search
                }
            }
        }
        RecoveryMode::MinResidual => {
            let mut best_res = f64::INFINITY;
            for (idx, dict) in dicts.iter().enumerate() {
                let Some(dict) = dict else {
                    solves.push(None);
                    continue;
                };
                let out = omp(dict, b, k, tol)?;
                let res = out.residual_norm;
                solves.push(Some(BasisSolve {
                    residual: res,
                    outcome: out,
                }));
                if res < best_res {
                    best_res = res;
                    vote = Some(idx);
                }
            }
        }
    }
    let vote = vote.ok_or(Error::NoCandidate)?;
    Ok((vote, solves))
}

fn usable_dictionaries(a: &DenseMatrix, catalog: &BasisCatalog) -> Result<Vec<Option<DenseMatrix>>> {
    if a.cols() != catalog.dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurement matrix has {} columns, catalog dimension is {}",
            a.cols(),
            catalog.dim()
        )));
    }
    let zero_tol = crate::matrix::Tolerance::default().zero_tol;
    let mut dicts = Vec::with_capacity(catalog.len());
    for (_, p) in catalog.iter() {
        let d = a.matmul(p);
        let usable = (0..d.cols()).all(|j| {
            d.col_slice(j).iter().map(|v| v * v).sum::<f64>().sqrt() > zero_tol
        });
        dicts.push(usable.then_some(d));
    }
    if dicts.iter().all(|d| d.is_none()) {
        return Err(Error::NoCandidate);
    }
    Ok(dicts)
}

/// Recovers a single signal: votes among the catalog bases and returns
/// the winning reconstruction.
pub fn fbcs_single(
    a: &DenseMatrix,
    catalog: &BasisCatalog,
    b: &[f64],
    k: usize,
    mode: RecoveryMode,
) -> Result<FbcsSingle> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal length {} does not match {} measurement rows",
            b.len(),
            a.rows()
        )));
    }
    let dicts = usable_dictionaries(a, catalog)?;
    let (vote, solves) = vote_for_signal(&dicts, b, k, mode)?;
    let solve = solves
        .into_iter()
        .nth(vote)
        .flatten()
        .expect("voted basis was solved");
    let coeffs = solve.outcome.coeffs;
    let x_hat = synthesize(catalog.basis(vote), &coeffs);
    Ok(FbcsSingle {
        basis_index: vote,
        coeffs,
        x_hat,
        residual: solve.residual,
    })
}

/// Ensemble recovery: every signal votes, the plurality basis wins
/// (ties resolved toward the lower catalog index), and every signal is
/// re-reconstructed under the winner.
pub fn fbcs_ensemble(
    a: &DenseMatrix,
    catalog: &BasisCatalog,
    b: &DenseMatrix,
    k: usize,
    mode: RecoveryMode,
) -> Result<FbcsResult> {
    if b.rows() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "signal rows {} do not match {} measurement rows",
            b.rows(),
            a.rows()
        )));
    }
    let dicts = usable_dictionaries(a, catalog)?;
    let votes: Vec<Result<(usize, Vec<Option<BasisSolve>>)>> = (0..b.cols())
        .into_par_iter()
        .map(|j| vote_for_signal(&dicts, b.col_slice(j), k, mode))
        .collect();
    let mut per_signal_raw = Vec::with_capacity(b.cols());
    let mut counts = vec![0usize; catalog.len()];
    for v in votes {
        let (vote, solves) = v?;
        counts[vote] += 1;
        per_signal_raw.push((vote, solves));
    }
    let chosen = counts
        .iter()
        .enumerate()
        .max_by(|(ia, ca), (ib, cb)| ca.cmp(cb).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .expect("catalog is not empty");

    let chosen_dict = dicts[chosen]
        .as_ref()
        .expect("a basis with votes has a dictionary");
    let mut per_signal = Vec::with_capacity(b.cols());
    let mut x_hat = DenseMatrix::zeros(catalog.dim(), b.cols());
    let miss = per_signal_raw
        .iter()
        .filter(|(vote, _)| *vote != chosen)
        .count();
    for (j, (vote, mut solves)) in per_signal_raw.into_iter().enumerate() {
        let solve = match solves.get_mut(chosen).and_then(|s| s.take()) {
            Some(s) => s,
            // sparsest-first may have stopped before reaching the winner
            None => {
                let col = b.col_slice(j);
                let tol = REL_RESIDUAL_TOL * col.iter().map(|v| v * v).sum::<f64>().sqrt();
                let out = match mode {
                    RecoveryMode::SparsestFirst => {
                        omp(chosen_dict, col, b.rows().min(chosen_dict.cols()), tol)?
                    }
                    RecoveryMode::MinResidual => omp(chosen_dict, col, k, tol)?,
                };
                BasisSolve {
                    residual: out.residual_norm,
                    outcome: out,
                }
            }
        };
        x_hat.set_col(j, &synthesize(catalog.basis(chosen), &solve.outcome.coeffs));
        per_signal.push(SignalVote {
            basis_vote: vote,
            coeffs: solve.outcome.coeffs,
            residual: solve.residual,
        });
    }
    Ok(FbcsResult {
        chosen_basis: chosen,
        chosen_name: catalog.name(chosen).to_string(),
        per_signal,
        x_hat,
        miss_detected_fraction: miss as f64 / b.cols() as f64,
    })
}

fn synthesize(p: &DenseMatrix, coeffs: &SparseVector) -> Vec<f64> {
    let mut x = vec![0.0; p.rows()];
    for (i, v) in coeffs.iter() {
        for (xj, &pj) in x.iter_mut().zip(p.col_slice(i)) {
            *xj += v * pj;
        }
    }
    x
}
