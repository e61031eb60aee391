//! Dense numeric primitives.
//!
//! Vectors are plain `&[f64]` / `Vec<f64>`; [`Matrix`] is a row-major dense
//! matrix. Every differentiable primitive comes with an explicit backward
//! function; there is no general autodiff engine.

mod adam;
mod gradcheck;
mod layers;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use layers::{
    avg_pool_filters, avg_pool_filters_backward, conv2x2, conv2x2_backward, conv_rows,
    conv_rows_backward, dense_layer, dense_layer_backward, Conv2x2Grads, DenseGrads,
};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::{Error, Result};

/// Floor added inside the logarithm of [`cross_entropy`].
pub const CE_FLOOR: f64 = 1e-12;

/// Row-major dense matrix with strictly positive dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix data",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        check_finite(&data, "matrix")?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, alloc::vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::InvalidRow {
                    row: i,
                    reason: alloc::format!("expected {c} columns, found {}", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
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
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Numerically stable softmax (the maximum is subtracted before exponentiating).
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    check_finite(v, "softmax input")?;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|&x| fmath::exp(x - max)).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    Ok(out)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + fmath::exp(-x))
    } else {
        let e = fmath::exp(x);
        e / (1.0 + e)
    }
}

/// `-w[label] * ln(scores[label] + CE_FLOOR)`; `w` defaults to 1.
pub fn cross_entropy(scores: &[f64], label: usize, class_weights: Option<&[f64]>) -> Result<f64> {
    if label >= scores.len() {
        return Err(Error::Index { index: label, len: scores.len() });
    }
    let w = match class_weights {
        Some(w) => {
            if w.len() != scores.len() {
                return Err(Error::Dimension {
                    context: "class weights",
                    expected: scores.len(),
                    actual: w.len(),
                });
            }
            if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidInput("class weights must be positive".into()));
            }
            w[label]
        }
        None => 1.0,
    };
    Ok(-w * fmath::ln(scores[label] + CE_FLOOR))
}

/// Gradient of [`cross_entropy`] with respect to `scores[label]` (all other
/// entries have zero gradient).
#[inline]
pub fn cross_entropy_grad(score_at_label: f64, weight: f64) -> f64 {
    -weight / (score_at_label + CE_FLOOR)
}

/// Balanced class weights `w_y ∝ 1/n_y`, normalised to mean 1 over classes.
/// Empty classes are treated as having a single sample so every weight stays
/// finite and positive.
pub fn balanced_class_weights(counts: &[usize]) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::Empty("class counts"));
    }
    let inv: Vec<f64> = counts.iter().map(|&n| 1.0 / n.max(1) as f64).collect();
    let mean = inv.iter().sum::<f64>() / inv.len() as f64;
    Ok(inv.into_iter().map(|x| x / mean).collect())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}
