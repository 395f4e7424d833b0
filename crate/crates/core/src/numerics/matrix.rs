//! Row-major dense matrix and the handful of kernels the networks need.

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{} values ({rows}x{cols})", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// `self * other`. Sizes here are small (analysis-side covariances), so
    /// a cache-friendly i-k-j loop is plenty.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "Matrix::matmul",
                format!("inner dimension {}", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(k), out_row);
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `y += alpha * x`, elementwise over equal-length slices.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with four independent accumulator lanes. The fixed
/// reassociation lets the chains pipeline/vectorize while staying bitwise
/// deterministic for a given build.
#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = [0.0f64; 4];
    let chunks = x.len() / 4;
    for c in 0..chunks {
        let b = c * 4;
        acc[0] += x[b] * y[b];
        acc[1] += x[b + 1] * y[b + 1];
        acc[2] += x[b + 2] * y[b + 2];
        acc[3] += x[b + 3] * y[b + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..x.len() {
        tail += x[i] * y[i];
    }
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// `y += A * x`. `x.len()` must equal `A.cols()`, `y.len()` `A.rows()`.
///
/// Rows are processed in blocks of four so the four accumulator chains
/// pipeline and each `x` load is shared across the block.
#[inline]
pub fn matvec_add(a: &Matrix, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), a.cols);
    debug_assert_eq!(y.len(), a.rows);
    let cols = a.cols;
    let blocks = a.rows / 4;
    for b in 0..blocks {
        let r = b * 4;
        let base = r * cols;
        let row0 = &a.data[base..base + cols];
        let row1 = &a.data[base + cols..base + 2 * cols];
        let row2 = &a.data[base + 2 * cols..base + 3 * cols];
        let row3 = &a.data[base + 3 * cols..base + 4 * cols];
        let mut acc0 = 0.0;
        let mut acc1 = 0.0;
        let mut acc2 = 0.0;
        let mut acc3 = 0.0;
        for ((((&xj, &r0), &r1), &r2), &r3) in
            x.iter().zip(row0).zip(row1).zip(row2).zip(row3)
        {
            acc0 += r0 * xj;
            acc1 += r1 * xj;
            acc2 += r2 * xj;
            acc3 += r3 * xj;
        }
        y[r] += acc0;
        y[r + 1] += acc1;
        y[r + 2] += acc2;
        y[r + 3] += acc3;
    }
    for i in blocks * 4..a.rows {
        y[i] += dot(&a.data[i * cols..(i + 1) * cols], x);
    }
}

/// `y += A^T * x`. `x.len()` must equal `A.rows()`, `y.len()` `A.cols()`.
#[inline]
pub fn matvec_transpose_add(a: &Matrix, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), a.rows);
    debug_assert_eq!(y.len(), a.cols);
    for (i, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        axpy(xv, &a.data[i * a.cols..(i + 1) * a.cols], y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_hand_computation() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matvec_and_transpose_are_consistent() {
        let a = Matrix::from_vec(2, 3, vec![1.0, -1.0, 2.0, 0.5, 3.0, -2.0]).unwrap();
        let x = [2.0, 1.0, -1.0];
        let mut y = vec![0.0; 2];
        matvec_add(&a, &x, &mut y);
        assert_eq!(y, vec![-1.0, 6.0]);

        let mut z = vec![0.0; 3];
        matvec_transpose_add(&a, &y, &mut z);
        let explicit = a.transpose();
        let mut z2 = vec![0.0; 3];
        matvec_add(&explicit, &y, &mut z2);
        assert_eq!(z, z2);
    }

    #[test]
    fn from_vec_rejects_wrong_length() {
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
    }
}
