//! One-hidden-layer perceptron: ReLU hidden units, softmax output,
//! mean cross-entropy loss, plain mini-batch SGD.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// `hidden × inputs`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `classes × hidden`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Gradients with the same shapes as [`Mlp`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Row-wise softmax, shifted by the row max.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
}

impl Mlp {
    /// He-normal first layer, Glorot-normal output layer, zero biases.
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let s1 = (2.0 / inputs.max(1) as f64).sqrt();
        let s2 = (2.0 / (hidden + classes) as f64).sqrt();
        let w1 = Array2::from_shape_simple_fn((hidden, inputs), || s1 * rng.sample::<f64, _>(StandardNormal));
        let w2 = Array2::from_shape_simple_fn((classes, hidden), || s2 * rng.sample::<f64, _>(StandardNormal));
        Self {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(classes),
        }
    }

    fn hidden(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut h = x.dot(&self.w1.t()) + &self.b1;
        h.mapv_inplace(|v| v.max(0.0));
        h
    }

    /// Class probabilities, `rows × classes`.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = self.hidden(x).dot(&self.w2.t()) + &self.b2;
        softmax_rows(&mut z);
        z
    }

    /// Mean cross-entropy over the batch and its gradient.
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> (f64, MlpGradient) {
        let n = x.nrows() as f64;
        let pre = x.dot(&self.w1.t()) + &self.b1;
        let h = pre.mapv(|v| v.max(0.0));
        let mut p = h.dot(&self.w2.t()) + &self.b2;
        softmax_rows(&mut p);
        let loss = -y
            .iter()
            .enumerate()
            .map(|(i, &c)| p[[i, c]].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / n;

        let mut dz = p;
        for (i, &c) in y.iter().enumerate() {
            dz[[i, c]] -= 1.0;
        }
        dz.mapv_inplace(|v| v / n);
        let w2 = dz.t().dot(&h);
        let b2 = dz.sum_axis(Axis(0));
        let mut dh = dz.dot(&self.w2);
        dh.zip_mut_with(&pre, |g, &a| {
            if a <= 0.0 {
                *g = 0.0
            }
        });
        let w1 = dh.t().dot(&x);
        let b1 = dh.sum_axis(Axis(0));
        (loss, MlpGradient { w1, b1, w2, b2 })
    }

    fn step(&mut self, g: &MlpGradient, lr: f64) {
        self.w1.scaled_add(-lr, &g.w1);
        self.b1.scaled_add(-lr, &g.b1);
        self.w2.scaled_add(-lr, &g.w2);
        self.b2.scaled_add(-lr, &g.b2);
    }

    /// All parameters as one flat vector (w1, b1, w2, b2 in row-major order).
    pub fn flat_params(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for v in self
            .w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
        {
            *v = it.next().expect("flat parameter vector too short");
        }
    }
}

impl MlpGradient {
    pub fn flat(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }
}

pub struct TrainParams {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch: usize,
}

/// Trains from the seeded `rng`; returns the per-epoch mean training loss.
pub fn train<R: Rng + ?Sized>(
    mlp: &mut Mlp,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    params: &TrainParams,
    rng: &mut R,
) -> Vec<f64> {
    let n = x.nrows();
    let batch = params.batch.clamp(1, n.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (loss, g) = mlp.loss_and_gradient(xb.view(), &yb);
            total += loss * chunk.len() as f64;
            mlp.step(&g, params.learning_rate);
        }
        history.push(total / n as f64);
    }
    history
}
