//! Squared-exponential covariance and Gram-matrix assembly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CgpError, Result};
use crate::par;

/// Inverse squared-length-scale of the squared-exponential kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(Bandwidth(lambda))
        } else {
            Err(CgpError::Config(format!(
                "bandwidth must be positive and finite, got {lambda}"
            )))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Symmetric kernel matrix over one set of points, unit diagonal.
#[derive(Debug, Clone)]
pub struct GramKernel {
    pub k: DMatrix<f64>,
    pub lambda: Bandwidth,
}

/// Kernel value `exp(-lambda * ||u - v||^2)`.
pub fn kval(u: &[f64], v: &[f64], lambda: Bandwidth) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-lambda.value() * d2).exp()
}

/// Clamped squared Euclidean distances between the rows of `a` and of `b`.
///
/// Uses the `||u||^2 + ||v||^2 - 2 u.v` expansion with a matrix-product core;
/// tiny negative values from cancellation are clamped to zero.
pub fn pairwise_sq_dists(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.ncols(), b.ncols());
    let cross = a * b.transpose();
    let an: Vec<f64> = a.row_iter().map(|r| r.norm_squared()).collect();
    let bn: Vec<f64> = b.row_iter().map(|r| r.norm_squared()).collect();
    let mut out = cross;
    for j in 0..out.ncols() {
        let mut col = out.column_mut(j);
        for i in 0..col.nrows() {
            col[i] = (an[i] + bn[j] - 2.0 * col[i]).max(0.0);
        }
    }
    out
}

const GRAM_CHUNK: usize = 256;

/// Assembles the kernel matrix of the rows of `z`.
///
/// The upper triangle is computed in fixed row chunks (in parallel when the
/// `parallel` feature is on) and mirrored, so the result is symmetric to the
/// bit and has an exactly unit diagonal.
pub fn gram(z: &DMatrix<f64>, lambda: Bandwidth) -> GramKernel {
    let n = z.nrows();
    let zt = z.transpose();
    let norms: Vec<f64> = z.row_iter().map(|r| r.norm_squared()).collect();

    let chunks = par::chunk_ranges(n, GRAM_CHUNK);
    let blocks: Vec<DMatrix<f64>> = par::map_indexed(&chunks, |_, &(lo, hi)| {
        // Trapezoid block covering columns lo.. of rows lo..hi.
        let mut block = z.rows_range(lo..hi) * zt.columns_range(lo..);
        for j in 0..block.ncols() {
            let mut col = block.column_mut(j);
            for i in 0..col.nrows() {
                let d2 = (norms[lo + i] + norms[lo + j] - 2.0 * col[i]).max(0.0);
                col[i] = (-lambda.value() * d2).exp();
            }
        }
        block
    });

    let mut k = DMatrix::zeros(n, n);
    for (&(lo, hi), block) in chunks.iter().zip(&blocks) {
        for i in lo..hi {
            k[(i, i)] = 1.0;
            for j in (i + 1)..n {
                k[(i, j)] = block[(i - lo, j - lo)];
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            k[(j, i)] = k[(i, j)];
        }
    }
    GramKernel { k, lambda }
}

/// Kernel matrix between prediction rows `z_star` and training rows `z`.
pub fn cross_gram(
    z_star: &DMatrix<f64>,
    z: &DMatrix<f64>,
    lambda: Bandwidth,
) -> Result<DMatrix<f64>> {
    if z_star.ncols() != z.ncols() {
        return Err(CgpError::Dimension(format!(
            "cross gram column mismatch: {} vs {}",
            z_star.ncols(),
            z.ncols()
        )));
    }
    let mut out = pairwise_sq_dists(z_star, z);
    for v in out.iter_mut() {
        *v = (-lambda.value() * *v).exp();
    }
    Ok(out)
}
