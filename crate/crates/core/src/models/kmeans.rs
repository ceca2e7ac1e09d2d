//! k-means++ seeding followed by Lloyd iterations.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    /// `k × features`
    pub centroids: Array2<f64>,
}

pub struct KMeansFit {
    pub model: KMeans,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective: Vec<f64>,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KMeans {
    /// Nearest centroid and its squared distance; ties go to the smaller index.
    pub fn nearest(&self, row: ArrayView1<'_, f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (j, c) in self.centroids.rows().into_iter().enumerate() {
            let d = sq_dist(row, c);
            if d < best.1 {
                best = (j, d);
            }
        }
        best
    }
}

fn plus_plus<R: Rng + ?Sized>(x: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::<f64>::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = x.rows().into_iter().map(|r| sq_dist(r, x.row(first))).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(j).assign(&x.row(pick));
        for (i, r) in x.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, x.row(pick)));
        }
    }
    centroids
}

/// Runs to an assignment fixpoint or [`MAX_ITERATIONS`]. Empty clusters keep
/// their previous centroid.
pub fn fit<R: Rng + ?Sized>(x: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Result<KMeansFit> {
    let n = x.nrows();
    if k == 0 || k > n {
        return Err(Error::Model(format!("k-means needs 1 <= k <= rows, got k = {k} for {n} rows")));
    }
    let mut model = KMeans {
        centroids: plus_plus(x, k, rng),
    };
    let mut assignments: Vec<usize> = vec![usize::MAX; n];
    let mut objective = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        let mut wcss = 0.0;
        for (i, r) in x.rows().into_iter().enumerate() {
            let (j, d) = model.nearest(r);
            wcss += d;
            if assignments[i] != j {
                assignments[i] = j;
                changed = true;
            }
        }
        objective.push(wcss);
        if !changed {
            break;
        }
        let mut sums = Array2::<f64>::zeros(model.centroids.dim());
        let mut counts = vec![0usize; k];
        for (r, &j) in x.rows().into_iter().zip(&assignments) {
            let mut s = sums.row_mut(j);
            s += &r;
            counts[j] += 1;
        }
        for (j, &count) in counts.iter().enumerate() {
            if count > 0 {
                let c = sums.row(j).mapv(|v| v / count as f64);
                model.centroids.row_mut(j).assign(&c);
            }
        }
    }
    Ok(KMeansFit {
        model,
        assignments,
        objective,
    })
}
