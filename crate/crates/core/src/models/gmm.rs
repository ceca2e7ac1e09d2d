//! Diagonal-covariance Gaussian mixture fitted by EM from a k-means start.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::kmeans;

pub const MAX_ITERATIONS: usize = 200;
/// EM stops once the mean per-row log-likelihood improves by less than this.
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub weights: Vec<f64>,
    /// `k × features`
    pub means: Array2<f64>,
    pub vars: Array2<f64>,
}

pub struct GmmFit {
    pub model: Gmm,
    /// Mean per-row log-likelihood before each M-step.
    pub log_likelihood: Vec<f64>,
}

fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Gmm {
    /// `log w_k + log N(row | μ_k, diag σ²_k)` per component.
    pub fn component_log_density(&self, row: ArrayView1<'_, f64>) -> Vec<f64> {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        (0..self.weights.len())
            .map(|k| {
                if self.weights[k] <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let mut s = self.weights[k].ln();
                for (j, &v) in row.iter().enumerate() {
                    let var = self.vars[[k, j]];
                    s -= 0.5 * (ln2pi + var.ln() + (v - self.means[[k, j]]).powi(2) / var);
                }
                s
            })
            .collect()
    }

    /// Posterior component probabilities.
    pub fn responsibilities(&self, row: ArrayView1<'_, f64>) -> Vec<f64> {
        let l = self.component_log_density(row);
        let z = logsumexp(&l);
        l.iter().map(|v| (v - z).exp()).collect()
    }
}

pub fn fit<R: Rng + ?Sized>(x: ArrayView2<'_, f64>, k: usize, var_floor: f64, rng: &mut R) -> Result<GmmFit> {
    let (n, d) = x.dim();
    let init = kmeans::fit(x, k, rng)?;
    let mut counts = vec![0usize; k];
    let mut vars = Array2::<f64>::zeros((k, d));
    for (r, &j) in x.rows().into_iter().zip(&init.assignments) {
        counts[j] += 1;
        for c in 0..d {
            vars[[j, c]] += (r[c] - init.model.centroids[[j, c]]).powi(2);
        }
    }
    for j in 0..k {
        for c in 0..d {
            vars[[j, c]] = if counts[j] > 1 { vars[[j, c]] / counts[j] as f64 } else { 1.0 }.max(var_floor);
        }
    }
    let mut model = Gmm {
        weights: counts.iter().map(|&c| c.max(1) as f64).collect(),
        means: init.model.centroids,
        vars,
    };
    let wsum: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= wsum);

    let mut history = Vec::new();
    let mut resp = Array2::<f64>::zeros((n, k));
    for _ in 0..MAX_ITERATIONS {
        // E-step
        let mut ll = 0.0;
        for (i, r) in x.rows().into_iter().enumerate() {
            let l = model.component_log_density(r);
            let z = logsumexp(&l);
            ll += z;
            for j in 0..k {
                resp[[i, j]] = (l[j] - z).exp();
            }
        }
        let ll = ll / n as f64;
        let converged = history.last().is_some_and(|&prev: &f64| ll - prev < TOLERANCE);
        history.push(ll);
        if converged {
            break;
        }
        // M-step
        for j in 0..k {
            let nk: f64 = resp.column(j).sum();
            model.weights[j] = nk / n as f64;
            if nk <= 1e-12 {
                continue;
            }
            for c in 0..d {
                let mean = x.column(c).iter().zip(resp.column(j)).map(|(v, r)| r * v).sum::<f64>() / nk;
                model.means[[j, c]] = mean;
            }
            for c in 0..d {
                let mean = model.means[[j, c]];
                let var = x
                    .column(c)
                    .iter()
                    .zip(resp.column(j))
                    .map(|(v, r)| r * (v - mean).powi(2))
                    .sum::<f64>()
                    / nk;
                model.vars[[j, c]] = var.max(var_floor);
            }
        }
    }
    Ok(GmmFit {
        model,
        log_likelihood: history,
    })
}
