//! Multiclass gradient boosting on softmax cross-entropy: each round fits one
//! squared-error regression tree per class to the negative gradient
//! `y_k − p_k`, with Newton-step leaf values.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::models::mlp::softmax_rows;
use crate::models::tree::{grow, GrowParams, Presorted, SquaredError, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoost {
    /// Log class priors.
    pub init: Vec<f64>,
    pub learning_rate: f64,
    /// `rounds × classes`
    pub trees: Vec<Vec<Tree>>,
}

pub struct BoostFit {
    pub model: GradientBoost,
    /// Training cross-entropy before the first round and after each round.
    pub loss: Vec<f64>,
}

pub struct BoostParams {
    pub rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
}

fn cross_entropy(p: &Array2<f64>, y: &[usize]) -> f64 {
    -y.iter()
        .enumerate()
        .map(|(i, &c)| p[[i, c]].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / y.len() as f64
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize, params: &BoostParams) -> BoostFit {
    let n = x.nrows();
    let k = n_classes;
    let mut counts = vec![0.0; k];
    for &c in y {
        counts[c] += 1.0;
    }
    let init: Vec<f64> = counts.iter().map(|c: &f64| (c.max(0.5) / n as f64).ln()).collect();
    let mut scores = Array2::<f64>::from_shape_fn((n, k), |(_, c)| init[c]);
    let presorted = Presorted::new(x);
    let all: Vec<usize> = (0..n).collect();
    let grow_params = GrowParams {
        max_depth: params.depth,
        min_leaf: 1,
    };
    let kf = k as f64;

    let mut trees = Vec::with_capacity(params.rounds);
    let mut p = scores.clone();
    softmax_rows(&mut p);
    let mut loss = vec![cross_entropy(&p, y)];
    for _ in 0..params.rounds {
        let mut round = Vec::with_capacity(k);
        for class in 0..k {
            let residual: Vec<f64> = (0..n)
                .map(|i| if y[i] == class { 1.0 } else { 0.0 } - p[[i, class]])
                .collect();
            let crit = SquaredError { targets: &residual };
            let tree = grow(x, &all, &presorted, &crit, &grow_params, |members| {
                let num: f64 = members.iter().map(|&i| residual[i]).sum();
                let den: f64 = members
                    .iter()
                    .map(|&i| residual[i].abs() * (1.0 - residual[i].abs()))
                    .sum();
                let v = if den > 1e-12 { (kf - 1.0) / kf * num / den } else { 0.0 };
                vec![v]
            });
            round.push(tree);
        }
        for (class, tree) in round.iter().enumerate() {
            for i in 0..n {
                let row: Vec<f64> = x.row(i).to_vec();
                scores[[i, class]] += params.learning_rate * tree.leaf(&row)[0];
            }
        }
        trees.push(round);
        p = scores.clone();
        softmax_rows(&mut p);
        loss.push(cross_entropy(&p, y));
    }
    BoostFit {
        model: GradientBoost {
            init,
            learning_rate: params.learning_rate,
            trees,
        },
        loss,
    }
}

impl GradientBoost {
    pub fn scores(&self, row: ArrayView1<'_, f64>) -> Vec<f64> {
        let r = row.to_vec();
        let mut s = self.init.clone();
        for round in &self.trees {
            for (c, t) in round.iter().enumerate() {
                s[c] += self.learning_rate * t.leaf(&r)[0];
            }
        }
        s
    }
}
