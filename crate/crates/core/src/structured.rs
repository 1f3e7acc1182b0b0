//! Structured measurement and basis matrices: concatenations of square
//! orthogonal blocks, and block-diagonal orthogonal bases.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::sparse::KSparseMatrix;

/// Orthogonality defect allowed at construction.
pub const BLOCK_ORTHO_TOL: f64 = 1e-8;

/// Horizontal concatenation [A_1 ... A_L] of L square orthogonal blocks
/// of even size n. The half-blocks (left/right n/2 columns of each
/// block) drive the block-diagonal solver.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionOrthoMatrix {
    n: usize,
    blocks: Vec<DenseMatrix>,
}

impl UnionOrthoMatrix {
    pub fn new(blocks: Vec<DenseMatrix>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::DimensionMismatch("need at least one block".into()));
        }
        let n = blocks[0].rows();
        if n % 2 != 0 {
            return Err(Error::Divisibility {
                what: "block size",
                value: n,
                by: 2,
            });
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.rows() != n || b.cols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "block {i} is {}x{}, expected {n}x{n}",
                    b.rows(),
                    b.cols()
                )));
            }
            let defect = b.orthogonality_defect();
            if defect > BLOCK_ORTHO_TOL {
                return Err(Error::NotOrthogonalBlock { index: i, defect });
            }
        }
        Ok(UnionOrthoMatrix { n, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Total column count n·L.
    pub fn cols(&self) -> usize {
        self.n * self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &DenseMatrix {
        &self.blocks[i]
    }

    /// Half-block `i` in 0..2L: the left or right n/2 columns of block i/2.
    pub fn half_block(&self, i: usize) -> DenseMatrix {
        let h = self.n / 2;
        let block = &self.blocks[i / 2];
        let offset = (i % 2) * h;
        let idx: Vec<usize> = (offset..offset + h).collect();
        block.select_columns(&idx)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n, self.cols());
        for (bi, b) in self.blocks.iter().enumerate() {
            for j in 0..self.n {
                out.set_col(bi * self.n + j, b.col_slice(j));
            }
        }
        out
    }
}

/// Block-diagonal orthogonal basis: an even number of square orthogonal
/// blocks of equal size on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagOrthoBasis {
    block_size: usize,
    blocks: Vec<DenseMatrix>,
}

impl BlockDiagOrthoBasis {
    pub fn new(blocks: Vec<DenseMatrix>) -> Result<Self> {
        if blocks.len() < 2 || blocks.len() % 2 != 0 {
            return Err(Error::Divisibility {
                what: "block count",
                value: blocks.len(),
                by: 2,
            });
        }
        let block_size = blocks[0].rows();
        for (i, b) in blocks.iter().enumerate() {
            if b.rows() != block_size || b.cols() != block_size {
                return Err(Error::DimensionMismatch(format!(
                    "block {i} is {}x{}, expected {block_size}x{block_size}",
                    b.rows(),
                    b.cols()
                )));
            }
            let defect = b.orthogonality_defect();
            if defect > BLOCK_ORTHO_TOL {
                return Err(Error::NotOrthogonalBlock { index: i, defect });
            }
        }
        Ok(BlockDiagOrthoBasis { block_size, blocks })
    }

    /// Identity basis with `2l` blocks of size `n/2`.
    pub fn identity(n: usize, l: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::Divisibility {
                what: "block size",
                value: n,
                by: 2,
            });
        }
        if l == 0 {
            return Err(Error::DimensionMismatch("need at least one base".into()));
        }
        let blocks = vec![DenseMatrix::identity(n / 2); 2 * l];
        BlockDiagOrthoBasis::new(blocks)
    }

    /// Basis whose diagonal is tiled with the fixed rotation
    /// (1/sqrt(2))·[[1, -1], [1, 1]]; needs n divisible by 4.
    pub fn tiled_rotation(n: usize, l: usize) -> Result<Self> {
        if n % 4 != 0 {
            return Err(Error::Divisibility {
                what: "block size",
                value: n,
                by: 4,
            });
        }
        if l == 0 {
            return Err(Error::DimensionMismatch("need at least one base".into()));
        }
        let h = n / 2;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let block = DenseMatrix::from_fn(h, h, |i, j| {
            if i / 2 != j / 2 {
                0.0
            } else {
                match (i % 2, j % 2) {
                    (0, 0) => s,
                    (0, 1) => -s,
                    (1, 0) => s,
                    (1, 1) => s,
                    _ => unreachable!(),
                }
            }
        })?;
        BlockDiagOrthoBasis::new(vec![block; 2 * l])
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Dimension of the full square matrix.
    pub fn dim(&self) -> usize {
        self.block_size * self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &DenseMatrix {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let m = self.dim();
        let mut out = DenseMatrix::zeros(m, m);
        for (bi, b) in self.blocks.iter().enumerate() {
            let off = bi * self.block_size;
            for j in 0..self.block_size {
                for i in 0..self.block_size {
                    out.set(off + i, off + j, b.get(i, j));
                }
            }
        }
        out
    }

    /// Product self · s using the block structure.
    pub fn mul_ksparse(&self, s: &KSparseMatrix) -> DenseMatrix {
        assert_eq!(self.dim(), s.rows());
        let bs = self.block_size;
        let mut out = DenseMatrix::zeros(self.dim(), s.cols());
        for (j, col) in s.columns().iter().enumerate() {
            let mut acc = vec![0.0; self.dim()];
            for (i, v) in col.iter() {
                let b = i / bs;
                let local = i % bs;
                let bcol = self.blocks[b].col_slice(local);
                let off = b * bs;
                for (t, &x) in bcol.iter().enumerate() {
                    acc[off + t] += v * x;
                }
            }
            out.set_col(j, &acc);
        }
        out
    }

    pub fn worst_block_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.orthogonality_defect())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseVector;

    #[test]
    fn union_rejects_non_orthogonal_blocks() {
        let good = DenseMatrix::identity(4);
        let bad = DenseMatrix::from_row_major(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 2.0, 0.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0,
            ],
        )
        .unwrap();
        let err = UnionOrthoMatrix::new(vec![good, bad]).unwrap_err();
        assert!(matches!(err, Error::NotOrthogonalBlock { index: 1, .. }));
    }

    #[test]
    fn union_rejects_odd_size() {
        let b = DenseMatrix::identity(3);
        assert!(matches!(
            UnionOrthoMatrix::new(vec![b]),
            Err(Error::Divisibility { .. })
        ));
    }

    #[test]
    fn half_blocks_split_columns() {
        let block = DenseMatrix::from_row_major(
            2,
            2,
            &[0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        let a = UnionOrthoMatrix::new(vec![DenseMatrix::identity(2), block]).unwrap();
        assert_eq!(a.num_blocks(), 2);
        assert_eq!(a.cols(), 4);
        let h2 = a.half_block(2);
        assert_eq!(h2.col_slice(0), &[0.0, 1.0]);
        let h3 = a.half_block(3);
        assert_eq!(h3.col_slice(0), &[1.0, 0.0]);
    }

    #[test]
    fn tiled_rotation_is_orthogonal() {
        let p = BlockDiagOrthoBasis::tiled_rotation(8, 2).unwrap();
        assert_eq!(p.dim(), 16);
        assert!(p.to_dense().orthogonality_defect() < 1e-15);
        let s = 0.5_f64.sqrt();
        assert_eq!(p.block(0).get(0, 0), s);
        assert_eq!(p.block(0).get(0, 1), -s);
        assert_eq!(p.block(0).get(2, 3), -s);
        assert_eq!(p.block(0).get(0, 2), 0.0);
        assert!(BlockDiagOrthoBasis::tiled_rotation(6, 1).is_err());
    }

    #[test]
    fn block_sparse_product_matches_dense() {
        let p = BlockDiagOrthoBasis::tiled_rotation(4, 1).unwrap();
        let col = SparseVector::new(4, vec![1, 2], vec![2.0, -1.0]).unwrap();
        let s = KSparseMatrix::new(4, 2, vec![col]).unwrap();
        let fast = p.mul_ksparse(&s);
        let slow = p.to_dense().matmul(&s.to_dense());
        assert!(fast.sub(&slow).max_abs() < 1e-15);
    }
}
