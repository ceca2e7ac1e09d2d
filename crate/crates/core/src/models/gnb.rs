use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance floor added to every per-class feature variance.
pub const VAR_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with per-class, per-feature mean and variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// `classes × features`
    pub means: Array2<f64>,
    pub vars: Array2<f64>,
    pub log_priors: Vec<f64>,
}

impl GaussianNb {
    pub fn fit(x: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize) -> Result<Self> {
        let d = x.ncols();
        let mut counts = vec![0usize; n_classes];
        let mut means = Array2::<f64>::zeros((n_classes, d));
        for (row, &c) in x.rows().into_iter().zip(labels) {
            counts[c] += 1;
            let mut m = means.row_mut(c);
            m += &row;
        }
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::Model(format!("class index {c} has no training rows")));
        }
        for (c, &n) in counts.iter().enumerate() {
            means.row_mut(c).mapv_inplace(|v| v / n as f64);
        }
        let mut vars = Array2::<f64>::zeros((n_classes, d));
        for (row, &c) in x.rows().into_iter().zip(labels) {
            for j in 0..d {
                vars[[c, j]] += (row[j] - means[[c, j]]).powi(2);
            }
        }
        for (c, &n) in counts.iter().enumerate() {
            vars.row_mut(c).mapv_inplace(|v| v / n as f64 + VAR_FLOOR);
        }
        let total = labels.len() as f64;
        Ok(Self {
            means,
            vars,
            log_priors: counts.iter().map(|&n| (n as f64 / total).ln()).collect(),
        })
    }

    /// Unnormalised joint log-likelihood per class.
    pub fn log_joint(&self, row: ArrayView1<'_, f64>) -> Vec<f64> {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        (0..self.log_priors.len())
            .map(|c| {
                let mut s = self.log_priors[c];
                for (j, &v) in row.iter().enumerate() {
                    let var = self.vars[[c, j]];
                    s -= 0.5 * (ln2pi + var.ln() + (v - self.means[[c, j]]).powi(2) / var);
                }
                s
            })
            .collect()
    }
}
