//! Dense matrix/vector arithmetic underpinning every other module.
//!
//! Everything is `f64` and row-major. The convergence checks downstream take
//! small differences of norms, so `f32` headroom is not enough.

mod rng;
mod svd;

pub use rng::Rng;
pub use svd::singular_values;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Zero matrix of the given shape. Panics on a zero dimension.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty());
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows > 0 && cols > 0);
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        Matrix { rows, cols, data }
    }

    /// Matrix with i.i.d. standard-normal entries scaled by `scale`.
    pub fn random_normal(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for x in m.data.iter_mut() {
            *x = rng.next_normal() * scale;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transposed(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x *= s;
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dimension(
                "add",
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(other.data.iter()) {
            *x += *y;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.add(&other.scaled(-1.0))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be positive");
        Vector {
            data: vec![0.0; len],
        }
    }

    pub fn from_slice(data: &[f64]) -> Self {
        assert!(!data.is_empty());
        Vector {
            data: data.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Standard matrix product; errors on an inner-dimension mismatch.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::dimension(
            "matmul",
            format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, bv) in orow.iter_mut().zip(brow.iter()) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

/// Outer product `b aᵀ`; the result has rank at most one.
pub fn outer(b: &Vector, a: &Vector) -> Matrix {
    let mut out = Matrix::zeros(b.len(), a.len());
    for i in 0..b.len() {
        for j in 0..a.len() {
            out.data[i * a.len() + j] = b.data[i] * a.data[j];
        }
    }
    out
}

/// Frobenius norm.
pub fn fro_norm(m: &Matrix) -> f64 {
    m.data.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖b aᵀ‖_F` without materializing the outer product: `‖b‖₂·‖a‖₂`.
pub fn rank_one_fro_norm(b: &Vector, a: &Vector) -> f64 {
    b.norm() * a.norm()
}

/// Vector with i.i.d. zero-mean normal entries of variance `2/fan_in`.
pub fn kaiming_init(rng: &mut Rng, fan_in: usize, len: usize) -> Vector {
    assert!(fan_in >= 1, "fan_in must be at least 1");
    let std = (2.0 / fan_in as f64).sqrt();
    let mut v = Vector::zeros(len);
    for x in v.data.iter_mut() {
        *x = rng.next_normal() * std;
    }
    v
}
