//! Rank, coherence and spark diagnostics, plus the structural matrix
//! properties the recovery guarantees rest on.

use itertools::Itertools;
use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Budgeted, Error, Result};
use crate::matrix::{DenseMatrix, Tolerance};
use crate::sparse::KSparseMatrix;
use crate::structured::UnionOrthoMatrix;

/// Default cap on subset evaluations for the combinatorial checks.
pub const DEFAULT_BUDGET: usize = 2_000_000;

/// Orthonormalizes the columns of `m` in order. Fails with
/// `RankDeficient` at the first column whose residual against the
/// preceding ones falls below `zero_tol` relative to its norm.
pub fn gram_schmidt(m: &DenseMatrix, tol: &Tolerance) -> Result<DenseMatrix> {
    let rows = m.rows();
    let cols = m.cols();
    if cols > rows {
        return Err(Error::DimensionMismatch(format!(
            "cannot orthonormalize {cols} columns in dimension {rows}"
        )));
    }
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let col = m.col_slice(j);
        let col_norm = norm(col);
        if col_norm <= tol.zero_tol {
            return Err(Error::RankDeficient(j));
        }
        let mut v = col.to_vec();
        // Two projection passes keep the result orthogonal to working
        // precision even for nearly dependent inputs.
        for _ in 0..2 {
            for prev in &q {
                let c = dot(prev, &v);
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= c * pi;
                }
            }
        }
        let r = norm(&v);
        if r <= tol.zero_tol * col_norm {
            return Err(Error::RankDeficient(j));
        }
        for vi in v.iter_mut() {
            *vi /= r;
        }
        q.push(v);
    }
    DenseMatrix::from_columns(&q)
}

/// Thin singular value decomposition, singular values non-increasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

const SVD_MAX_SWEEPS: usize = 100_000;

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    let decomp = m
        .na()
        .clone()
        .try_svd(true, true, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or(Error::ConvergenceFailure)?;
    let u = decomp.u.ok_or(Error::ConvergenceFailure)?;
    let v_t = decomp.v_t.ok_or(Error::ConvergenceFailure)?;
    let p = decomp.singular_values.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        decomp.singular_values[b]
            .partial_cmp(&decomp.singular_values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut u_sorted = DMatrix::zeros(u.nrows(), p);
    let mut v_sorted = DMatrix::zeros(v_t.ncols(), p);
    let mut sv = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        sv.push(decomp.singular_values[src]);
        u_sorted.column_mut(dst).copy_from(&u.column(src));
        v_sorted
            .column_mut(dst)
            .copy_from(&v_t.row(src).transpose());
    }
    Ok(Svd {
        u: DenseMatrix::from_na(u_sorted),
        singular_values: sv,
        v: DenseMatrix::from_na(v_sorted),
    })
}

/// Number of singular values above `rank_tol` relative to the largest.
pub fn numerical_rank(m: &DenseMatrix, tol: &Tolerance) -> Result<usize> {
    let sv = svd(m)?.singular_values;
    let top = sv[0];
    if top == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol.rank_tol * top).count())
}

/// Orthonormal basis of the kernel, or `None` when it is trivial.
/// The kernel is the orthogonal complement of the row space, so it is
/// built by orthonormalizing the rows and completing that set to a full
/// basis with greedily chosen coordinate directions.
pub fn null_space(m: &DenseMatrix, tol: &Tolerance) -> Result<Option<DenseMatrix>> {
    let dim = m.cols();
    let at = m.transpose();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..at.cols() {
        let col = at.col_slice(j);
        let col_norm = norm(col);
        if col_norm <= tol.zero_tol {
            continue;
        }
        if let Some(v) = orthogonal_part(col, &basis, tol.rank_tol * col_norm) {
            basis.push(v);
        }
    }
    let rank = basis.len();
    if rank >= dim {
        return Ok(None);
    }
    let mut kernel: Vec<Vec<f64>> = Vec::with_capacity(dim - rank);
    while basis.len() < dim {
        // take the coordinate direction farthest from the current span
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            if let Some(v) = orthogonal_part(&e, &basis, tol.rank_tol) {
                let r = residual_norm(&e, &basis);
                if best.as_ref().map(|(b, _)| r > *b).unwrap_or(true) {
                    best = Some((r, v));
                }
            }
        }
        let (_, v) = best.expect("basis completion always finds a direction");
        kernel.push(v.clone());
        basis.push(v);
    }
    Ok(Some(DenseMatrix::from_columns(&kernel)?))
}

/// Unit vector along the component of `v` orthogonal to `basis`, or
/// `None` when that component is shorter than `cutoff`.
fn orthogonal_part(v: &[f64], basis: &[Vec<f64>], cutoff: f64) -> Option<Vec<f64>> {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &w);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
    }
    let r = norm(&w);
    if r <= cutoff {
        return None;
    }
    for wi in w.iter_mut() {
        *wi /= r;
    }
    Some(w)
}

fn residual_norm(v: &[f64], basis: &[Vec<f64>]) -> f64 {
    let mut w = v.to_vec();
    for b in basis {
        let c = dot(b, &w);
        for (wi, bi) in w.iter_mut().zip(b) {
            *wi -= c * bi;
        }
    }
    norm(&w)
}

/// Largest normalized inner product between distinct columns.
pub fn mutual_coherence(m: &DenseMatrix) -> Result<f64> {
    let zero_tol = Tolerance::default().zero_tol;
    let mut norms = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let n = norm(m.col_slice(j));
        if n <= zero_tol {
            return Err(Error::ZeroColumn(j));
        }
        norms.push(n);
    }
    let mut worst = 0.0_f64;
    for i in 0..m.cols() {
        for j in i + 1..m.cols() {
            let c = dot(m.col_slice(i), m.col_slice(j)).abs() / (norms[i] * norms[j]);
            worst = worst.max(c);
        }
    }
    Ok(worst)
}

/// Coherence lower bound on the spark, 1 + 1/mu. Infinite for an
/// orthogonal matrix (mu = 0).
pub fn spark_lower_bound(m: &DenseMatrix) -> Result<f64> {
    let mu = mutual_coherence(m)?;
    if mu == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 + 1.0 / mu)
    }
}

/// Smallest number of linearly dependent columns, found by exhausting
/// subset sizes in increasing order. Every rank evaluation spends one
/// unit of `budget`; `Exceeded` is returned once it runs out. A full
/// column-rank matrix reports cols + 1.
pub fn spark_exact(m: &DenseMatrix, tol: &Tolerance, budget: usize) -> Result<Budgeted<usize>> {
    let cols = m.cols();
    let zero_tol = tol.zero_tol;
    let mut spent = 0usize;
    // size-1 subsets: a zero column is already a dependent set
    for j in 0..cols {
        spent += 1;
        if spent > budget {
            return Ok(Budgeted::Exceeded);
        }
        if norm(m.col_slice(j)) <= zero_tol {
            return Ok(Budgeted::Done(1));
        }
    }
    // any rank+1 columns are dependent, so sizes beyond rank+1 never matter
    let rank = numerical_rank(m, tol)?;
    for size in 2..=rank.min(cols) {
        for subset in (0..cols).combinations(size) {
            spent += 1;
            if spent > budget {
                return Ok(Budgeted::Exceeded);
            }
            let sub = m.select_columns(&subset);
            if numerical_rank(&sub, tol)? < size {
                return Ok(Budgeted::Done(size));
            }
        }
    }
    if rank < cols {
        Ok(Budgeted::Done(rank + 1))
    } else {
        Ok(Budgeted::Done(cols + 1))
    }
}

/// Checks that concatenations of k-column slices taken from the bases
/// keep their rank under the action of `a`. Every (T, J) pair costs one
/// unit of `budget`.
pub fn is_k_rank_preserving(
    a: &DenseMatrix,
    bases: &[DenseMatrix],
    k: usize,
    tol: &Tolerance,
    budget: usize,
) -> Result<Budgeted<bool>> {
    let m = a.cols();
    if bases.is_empty() {
        return Err(Error::DimensionMismatch("need at least one basis".into()));
    }
    if k == 0 || k > m {
        return Err(Error::DimensionMismatch(format!(
            "subset size {k} out of range for {m} columns"
        )));
    }
    for (i, p) in bases.iter().enumerate() {
        if p.rows() != m || p.cols() != m {
            return Err(Error::DimensionMismatch(format!(
                "basis {i} is {}x{}, expected {m}x{m}",
                p.rows(),
                p.cols()
            )));
        }
        if numerical_rank(p, tol)? < m {
            return Err(Error::RankDeficient(i));
        }
    }
    let images: Vec<DenseMatrix> = bases.iter().map(|p| a.matmul(p)).collect();
    let subsets: Vec<Vec<usize>> = (0..m).combinations(k).collect();
    let mut spent = 0usize;
    for bi in 0..bases.len() {
        for bj in bi..bases.len() {
            for (ti, t) in subsets.iter().enumerate() {
                // same-basis pairs are symmetric in (T, J)
                let start = if bi == bj { ti } else { 0 };
                for j in subsets[start..].iter() {
                    spent += 1;
                    if spent > budget {
                        return Ok(Budgeted::Exceeded);
                    }
                    let plain = concat_columns(&bases[bi], t, &bases[bj], j);
                    let mapped = concat_columns(&images[bi], t, &images[bj], j);
                    if numerical_rank(&mapped, tol)? != numerical_rank(&plain, tol)? {
                        return Ok(Budgeted::Done(false));
                    }
                }
            }
        }
    }
    Ok(Budgeted::Done(true))
}

fn concat_columns(left: &DenseMatrix, t: &[usize], right: &DenseMatrix, j: &[usize]) -> DenseMatrix {
    let rows = left.rows();
    let mut out = DenseMatrix::zeros(rows, t.len() + j.len());
    for (dst, &src) in t.iter().enumerate() {
        out.set_col(dst, left.col_slice(src));
    }
    for (dst, &src) in j.iter().enumerate() {
        out.set_col(t.len() + dst, right.col_slice(src));
    }
    out
}

/// Tests whether some pair of blocks couples through rank-degenerate
/// quadrants: splitting A_i' A_j into four n/2 quadrants, the diagonal
/// quadrants must share a rank r and the off-diagonal ones must both
/// have rank n/2 - r.
pub fn is_inter_block_diagonal(a: &UnionOrthoMatrix, tol: &Tolerance) -> Result<bool> {
    let l = a.num_blocks();
    if l < 2 {
        return Ok(false);
    }
    let h = a.n() / 2;
    for i in 0..l {
        for j in 0..l {
            if i == j {
                continue;
            }
            let cross = a.block(i).transpose().matmul(a.block(j));
            let r1 = quadrant_rank(&cross, 0, 0, h, tol)?;
            let r4 = quadrant_rank(&cross, h, h, h, tol)?;
            if r1 != r4 {
                continue;
            }
            let r2 = quadrant_rank(&cross, 0, h, h, tol)?;
            let r3 = quadrant_rank(&cross, h, 0, h, tol)?;
            if r2 == h - r1 && r3 == h - r1 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

fn quadrant_rank(
    m: &DenseMatrix,
    row0: usize,
    col0: usize,
    h: usize,
    tol: &Tolerance,
) -> Result<usize> {
    let mut q = DenseMatrix::zeros(h, h);
    for j in 0..h {
        for i in 0..h {
            q.set(i, j, m.get(row0 + i, col0 + j));
        }
    }
    // an all-zero quadrant has rank 0 regardless of the relative cutoff
    if q.max_abs() <= tol.zero_tol {
        return Ok(0);
    }
    numerical_rank(&q, tol)
}

/// Verdict for one richness condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RichnessVerdict {
    Holds,
    /// No violation found in a random sample after the exhaustive budget
    /// ran out.
    HoldsSampled,
    Fails,
    Exceeded,
}

/// Outcome of the four sparse-matrix richness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RichnessReport {
    /// Every column has exactly k nonzeros.
    pub cond1: RichnessVerdict,
    /// Every size-k support owns at least k+1 columns.
    pub cond2: RichnessVerdict,
    /// Any k+1 columns sharing a support span k dimensions.
    pub cond3: RichnessVerdict,
    /// Any k+1 columns with pairwise different supports span k+1 dimensions.
    pub cond4: RichnessVerdict,
}

impl RichnessReport {
    pub fn satisfied(&self) -> bool {
        [self.cond1, self.cond2, self.cond3, self.cond4]
            .iter()
            .all(|v| matches!(v, RichnessVerdict::Holds | RichnessVerdict::HoldsSampled))
    }
}

// Deterministic stream for the sampled verdicts.
const RICHNESS_SAMPLE_SEED: u64 = 0x9e3779b97f4a7c15;

pub fn check_richness(
    s: &KSparseMatrix,
    k: usize,
    tol: &Tolerance,
    budget: usize,
) -> Result<RichnessReport> {
    use rand::SeedableRng;
    if k == 0 || k > s.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sparsity {k} out of range for {} rows",
            s.rows()
        )));
    }
    let cols = s.columns();

    let cond1 = if cols.iter().all(|c| c.nnz() == k) {
        RichnessVerdict::Holds
    } else {
        RichnessVerdict::Fails
    };

    let mut by_support: HashMap<&[usize], Vec<usize>> = HashMap::new();
    for (j, c) in cols.iter().enumerate() {
        if c.nnz() == k {
            by_support.entry(c.support()).or_default().push(j);
        }
    }

    let total_supports = binomial(s.rows(), k);
    let cond2 = if total_supports
        .checked_mul(k as u128 + 1)
        .map(|work| work > budget as u128)
        .unwrap_or(true)
    {
        RichnessVerdict::Exceeded
    } else if by_support.len() as u128 == total_supports
        && by_support.values().all(|v| v.len() >= k + 1)
    {
        RichnessVerdict::Holds
    } else {
        RichnessVerdict::Fails
    };

    // cond3: inside every support group, each k+1 columns must have
    // full rank k on the shared support rows. Groups are visited in
    // sorted support order so the sampled fallback is reproducible.
    let mut groups: Vec<(&[usize], &Vec<usize>)> =
        by_support.iter().map(|(s, m)| (*s, m)).collect();
    groups.sort_by(|a, b| a.0.cmp(b.0));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(RICHNESS_SAMPLE_SEED);
    let mut cond3 = RichnessVerdict::Holds;
    let mut spent = 0usize;
    'groups: for (support, members) in groups {
        if members.len() < k + 1 {
            continue;
        }
        let exhaustive = binomial(members.len(), k + 1) + spent as u128 <= budget as u128;
        if exhaustive {
            for subset in members.iter().copied().combinations(k + 1) {
                spent += 1;
                if !group_spans_k(s, support, &subset, k, tol)? {
                    cond3 = RichnessVerdict::Fails;
                    break 'groups;
                }
            }
        } else {
            let samples = (budget / 4).max(100);
            for _ in 0..samples {
                let subset = sample_distinct(&mut rng, members, k + 1);
                if !group_spans_k(s, support, &subset, k, tol)? {
                    cond3 = RichnessVerdict::Fails;
                    break 'groups;
                }
            }
            cond3 = RichnessVerdict::HoldsSampled;
        }
    }

    // cond4: columns with pairwise different supports must be independent.
    let candidates: Vec<usize> = (0..cols.len()).filter(|&j| cols[j].nnz() == k).collect();
    let mut cond4 = RichnessVerdict::Holds;
    if candidates.len() >= k + 1 {
        let exhaustive = binomial(candidates.len(), k + 1) <= budget as u128;
        if exhaustive {
            'subsets: for subset in candidates.iter().copied().combinations(k + 1) {
                if !pairwise_distinct_supports(s, &subset) {
                    continue;
                }
                if !columns_span(s, &subset, k + 1, tol)? {
                    cond4 = RichnessVerdict::Fails;
                    break 'subsets;
                }
            }
        } else {
            let samples = (budget / 4).max(100);
            let mut tested = 0usize;
            let mut attempts = 0usize;
            while tested < samples && attempts < samples * 10 {
                attempts += 1;
                let subset = sample_distinct(&mut rng, &candidates, k + 1);
                if !pairwise_distinct_supports(s, &subset) {
                    continue;
                }
                tested += 1;
                if !columns_span(s, &subset, k + 1, tol)? {
                    cond4 = RichnessVerdict::Fails;
                    break;
                }
            }
            if cond4 == RichnessVerdict::Holds {
                cond4 = RichnessVerdict::HoldsSampled;
            }
        }
    }

    Ok(RichnessReport {
        cond1,
        cond2,
        cond3,
        cond4,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn sample_distinct(rng: &mut rand_chacha::ChaCha8Rng, pool: &[usize], count: usize) -> Vec<usize> {
    use rand::Rng;
    let mut picked: Vec<usize> = Vec::with_capacity(count);
    while picked.len() < count {
        let j = pool[rng.gen_range(0..pool.len())];
        if !picked.contains(&j) {
            picked.push(j);
        }
    }
    picked
}

fn group_spans_k(
    s: &KSparseMatrix,
    support: &[usize],
    subset: &[usize],
    k: usize,
    tol: &Tolerance,
) -> Result<bool> {
    // restrict to the shared support rows: a k x (k+1) value matrix
    let mut m = DenseMatrix::zeros(k, subset.len());
    for (jj, &col) in subset.iter().enumerate() {
        for (i, v) in s.column(col).iter() {
            let row = support.iter().position(|&r| r == i).unwrap();
            m.set(row, jj, v);
        }
    }
    Ok(numerical_rank(&m, tol)? == k)
}

fn pairwise_distinct_supports(s: &KSparseMatrix, subset: &[usize]) -> bool {
    for (a, &i) in subset.iter().enumerate() {
        for &j in subset[a + 1..].iter() {
            if s.column(i).support() == s.column(j).support() {
                return false;
            }
        }
    }
    true
}

fn columns_span(
    s: &KSparseMatrix,
    subset: &[usize],
    want: usize,
    tol: &Tolerance,
) -> Result<bool> {
    let mut m = DenseMatrix::zeros(s.rows(), subset.len());
    for (jj, &col) in subset.iter().enumerate() {
        for (i, v) in s.column(col).iter() {
            m.set(i, jj, v);
        }
    }
    Ok(numerical_rank(&m, tol)? == want)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
