//! Principal-component projection for visualising feature tables.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `rows × dims`
    pub coords: Array2<f64>,
    /// Leading eigenvalues of the (standardized) covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Each leading eigenvalue over the sum of all eigenvalues.
    pub explained_variance_ratio: Vec<f64>,
    /// `dims × kept columns`, unit rows.
    pub components: Array2<f64>,
    /// Zero-variance input columns left out of the fit.
    pub dropped_columns: Vec<usize>,
}

/// Projects rows onto the top `dims` eigenvectors of the column covariance
/// (sample covariance, n − 1). With `standardize`, columns are first scaled
/// to unit variance. Eigenvector signs are fixed so the largest-magnitude
/// loading is positive.
pub fn pca_project(x: ArrayView2<'_, f64>, dims: usize, standardize: bool) -> Result<Projection> {
    let (n, width) = x.dim();
    if dims == 0 || n < dims.max(2) {
        return Err(Error::Range(format!("need at least {} rows for {dims} dims, have {n}", dims.max(2))));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let sd = x.std_axis(Axis(0), 1.0);
    let kept: Vec<usize> = (0..width).filter(|&c| sd[c] > 0.0).collect();
    let dropped: Vec<usize> = (0..width).filter(|&c| sd[c] <= 0.0).collect();
    if !dropped.is_empty() {
        log::warn!("pca: dropping {} zero-variance columns", dropped.len());
    }
    if kept.len() < dims {
        return Err(Error::Range(format!(
            "only {} non-constant columns for {dims} dims",
            kept.len()
        )));
    }

    let k = kept.len();
    let mut z = Array2::<f64>::zeros((n, k));
    for (j, &c) in kept.iter().enumerate() {
        let s = if standardize { sd[c] } else { 1.0 };
        for i in 0..n {
            z[[i, j]] = (x[[i, c]] - mean[c]) / s;
        }
    }
    let cov = z.t().dot(&z) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(DMatrix::from_fn(k, k, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut components = Array2::<f64>::zeros((dims, k));
    let mut eigenvalues = Vec::with_capacity(dims);
    for (d, &idx) in order.iter().take(dims).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let pivot = v.iter().fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..k {
            components[[d, j]] = sign * v[j];
        }
        eigenvalues.push(eig.eigenvalues[idx]);
    }
    let coords = z.dot(&components.t());
    Ok(Projection {
        coords,
        explained_variance_ratio: eigenvalues.iter().map(|v| v / total).collect(),
        eigenvalues,
        components,
        dropped_columns: dropped,
    })
}
