//! Dense row-major matrices and the distance kernels shared by every stage.
//!
//! Kernels take `f32` storage and accumulate in `f64` over eight independent
//! lanes. The summation order is fixed, so results do not depend on the
//! SIMD width the compiler picks.

use crate::error::{check_dim, MrqError, Result};

/// Row-major `rows x cols` matrix of `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MrqError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows. An empty input yields `0 x 0`.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(MrqError::InconsistentDimension {
                    record: i,
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copies the leading `cols` columns of every row.
    pub fn leading_columns(&self, cols: usize) -> Matrix {
        assert!(cols <= self.cols);
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in self.iter_rows() {
            data.extend_from_slice(&r[..cols]);
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }
}

/// Squared Euclidean distance between two equal-length vectors.
pub fn squared_euclidean(a: &[f32], b: &[f32]) -> Result<f32> {
    check_dim(a.len(), b.len())?;
    Ok(l2_sq(a, b))
}

/// Inner product of two equal-length vectors.
pub fn inner_product(a: &[f32], b: &[f32]) -> Result<f32> {
    check_dim(a.len(), b.len())?;
    Ok(dot(a, b) as f32)
}

const LANES: usize = 8;

/// Unchecked squared Euclidean distance. Callers guarantee equal lengths.
#[inline]
pub fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    l2_sq_f64(a, b) as f32
}

#[inline]
pub fn l2_sq_f64(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let split = a.len() / LANES * LANES;
    let (ah, at) = a.split_at(split);
    let (bh, bt) = b.split_at(split);
    let mut acc = [0f64; LANES];
    for (x, y) in ah.chunks_exact(LANES).zip(bh.chunks_exact(LANES)) {
        for l in 0..LANES {
            let d = x[l] as f64 - y[l] as f64;
            acc[l] += d * d;
        }
    }
    let mut s = reduce(&acc);
    for (x, y) in at.iter().zip(bt) {
        let d = *x as f64 - *y as f64;
        s += d * d;
    }
    s
}

/// Unchecked inner product with `f64` accumulation.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let split = a.len() / LANES * LANES;
    let (ah, at) = a.split_at(split);
    let (bh, bt) = b.split_at(split);
    let mut acc = [0f64; LANES];
    for (x, y) in ah.chunks_exact(LANES).zip(bh.chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] += x[l] as f64 * y[l] as f64;
        }
    }
    let mut s = reduce(&acc);
    for (x, y) in at.iter().zip(bt) {
        s += *x as f64 * *y as f64;
    }
    s
}

#[inline]
pub fn norm_sq(a: &[f32]) -> f64 {
    dot(a, a)
}

#[inline]
fn reduce(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))
}

/// `out = m * v` for a row-major `out.len() x v.len()` block of `m`.
pub(crate) fn mat_vec(m: &[f32], v: &[f32], out: &mut [f32]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o = dot(row, v) as f32;
    }
}

/// `out = m^T * v` for a row-major `v.len() x out.len()` matrix `m`.
pub(crate) fn mat_t_vec(m: &[f32], v: &[f32], out: &mut [f32]) {
    let cols = out.len();
    let mut acc = vec![0f64; cols];
    for (vi, row) in v.iter().zip(m.chunks_exact(cols)) {
        let vi = *vi as f64;
        for (a, r) in acc.iter_mut().zip(row) {
            *a += vi * *r as f64;
        }
    }
    for (o, a) in out.iter_mut().zip(acc) {
        *o = a as f32;
    }
}
