use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stored standardized training rows; Euclidean distance, majority vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub rows: Array2<f64>,
    /// Class index per stored row.
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Knn {
    pub fn fit(x: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Model("knn k must be positive".into()));
        }
        if k > x.nrows() {
            return Err(Error::Model(format!(
                "knn k = {k} exceeds the {} training rows",
                x.nrows()
            )));
        }
        Ok(Self {
            k,
            rows: x.to_owned(),
            labels: labels.to_vec(),
            n_classes,
        })
    }

    /// Vote fractions. Neighbours are ranked by (distance, class index, row),
    /// so equidistant candidates favour the smaller label.
    pub fn votes(&self, query: ArrayView1<'_, f64>) -> Vec<f64> {
        let mut dist: Vec<(f64, usize, usize)> = self
            .rows
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(query.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, self.labels[i], i)
            })
            .collect();
        let cmp = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        };
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let mut votes = vec![0.0; self.n_classes];
        for &(_, label, _) in &dist[..self.k] {
            votes[label] += 1.0;
        }
        votes.iter_mut().for_each(|v| *v /= self.k as f64);
        votes
    }
}
