//! Block-sparse symmetric matrices keyed by 3x3 vertex blocks, and the SPD
//! solve over the free vertices.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Clone, Debug, Default)]
pub struct BlockMatrix {
    pub num_nodes: usize,
    /// Sorted by `(row, col)` and merged once [`BlockMatrix::compress`] ran.
    pub blocks: Vec<(usize, usize, Matrix3<f64>)>,
}

impl BlockMatrix {
    pub fn new(num_nodes: usize) -> Self {
        BlockMatrix {
            num_nodes,
            blocks: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, block: Matrix3<f64>) {
        self.blocks.push((row, col, block));
    }

    /// Sorts and merges duplicate blocks. Summation follows insertion order,
    /// so the result is deterministic.
    pub fn compress(&mut self) {
        self.blocks.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, Matrix3<f64>)> = Vec::with_capacity(self.blocks.len());
        for (r, c, b) in self.blocks.drain(..) {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += b,
                _ => merged.push((r, c, b)),
            }
        }
        self.blocks = merged;
    }

    pub fn mul(&self, v: &[Vec3]) -> Vec<Vec3> {
        let mut out = vec![Vec3::zeros(); self.num_nodes];
        for (r, c, b) in &self.blocks {
            out[*r] += b * v[*c];
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = 3 * self.num_nodes;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (r, c, b) in &self.blocks {
            for i in 0..3 {
                for j in 0..3 {
                    m[(3 * r + i, 3 * c + j)] += b[(i, j)];
                }
            }
        }
        m
    }

    /// Solves `A_ff x_f = rhs_f` over the nodes with `free[i]`; fixed entries
    /// of the result are zero.
    pub fn solve_free(&self, rhs: &[Vec3], free: &[bool]) -> Result<Vec<Vec3>> {
        let mut index = vec![usize::MAX; self.num_nodes];
        let mut n = 0;
        for (i, &f) in free.iter().enumerate() {
            if f {
                index[i] = n;
                n += 1;
            }
        }
        let mut out = vec![Vec3::zeros(); self.num_nodes];
        if n == 0 {
            return Ok(out);
        }
        let mut triplets = Vec::with_capacity(9 * self.blocks.len());
        for (r, c, b) in &self.blocks {
            let (fr, fc) = (index[*r], index[*c]);
            if fr == usize::MAX || fc == usize::MAX || fc > fr {
                continue;
            }
            for i in 0..3 {
                for j in 0..3 {
                    let (row, col) = (3 * fr + i, 3 * fc + j);
                    if col <= row {
                        triplets.push(Triplet::new(row, col, b[(i, j)]));
                    }
                }
            }
        }
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(3 * n, 3 * n, &triplets)
            .map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::LinearSolveFailure(format!("{e:?}")))?;
        let mut b = Col::<f64>::zeros(3 * n);
        for (i, &k) in index.iter().enumerate() {
            if k != usize::MAX {
                for d in 0..3 {
                    b[3 * k + d] = rhs[i][d];
                }
            }
        }
        let x = llt.solve(&b);
        for (i, &k) in index.iter().enumerate() {
            if k != usize::MAX {
                out[i] = Vec3::new(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
                if !out[i].iter().all(|v| v.is_finite()) {
                    return Err(Error::LinearSolveFailure("non-finite solution".into()));
                }
            }
        }
        Ok(out)
    }
}
