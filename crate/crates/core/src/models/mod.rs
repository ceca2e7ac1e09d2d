//! Classifiers and clusterers behind one fit/predict contract.
//!
//! Every model standardizes its inputs with statistics taken from the training
//! rows at fit time. Labels are arbitrary `u32` values; internally they are
//! mapped to dense class indices in ascending label order, so "smallest class
//! index" and "smallest label" coincide in every tie-break.
//!
//! Saved models are JSON documents:
//! `{"format": "songdecode-model", "version": 1, "model": {...}}`.

pub mod gboost;
pub mod gmm;
pub mod gnb;
pub mod kmeans;
pub mod knn;
pub mod mlp;
pub mod tree;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::dataset::Dataset;

pub use gboost::GradientBoost;
pub use gmm::Gmm;
pub use gnb::GaussianNb;
pub use kmeans::KMeans;
pub use knn::Knn;
pub use mlp::Mlp;
pub use tree::Tree;

pub const MODEL_FORMAT: &str = "songdecode-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Tree,
    Gboost,
    Gnb,
    Mlp,
    Kmeans,
    Gmm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Knn,
        ModelKind::Tree,
        ModelKind::Gboost,
        ModelKind::Gnb,
        ModelKind::Mlp,
        ModelKind::Kmeans,
        ModelKind::Gmm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Tree => "tree",
            ModelKind::Gboost => "gboost",
            ModelKind::Gnb => "gnb",
            ModelKind::Mlp => "mlp",
            ModelKind::Kmeans => "kmeans",
            ModelKind::Gmm => "gmm",
        }
    }

    pub fn is_clustering(self) -> bool {
        matches!(self, ModelKind::Kmeans | ModelKind::Gmm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model `{s}` (expected one of knn, tree, gboost, gnb, mlp, kmeans, gmm)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 8, min_leaf: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GboostParams {
    pub rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
}

impl Default for GboostParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            depth: 2,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 64,
            epochs: 200,
            learning_rate: 0.01,
            batch: 32,
        }
    }
}

/// `k = None` means one cluster per distinct training label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmeansParams {
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmParams {
    pub k: Option<usize>,
    pub var_floor: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self { k: None, var_floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub seed: u64,
    pub knn: KnnParams,
    pub tree: TreeParams,
    pub gboost: GboostParams,
    pub mlp: MlpParams,
    pub kmeans: KmeansParams,
    pub gmm: GmmParams,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Knn,
            seed: 0,
            knn: KnnParams::default(),
            tree: TreeParams::default(),
            gboost: GboostParams::default(),
            mlp: MlpParams::default(),
            kmeans: KmeansParams::default(),
            gmm: GmmParams::default(),
        }
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        let positive_f = |name: &str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                Err(Error::Config(format!("{name} must be a positive number, got {v}")))
            } else {
                Ok(())
            }
        };
        positive("knn.k", self.knn.k)?;
        positive("tree.max_depth", self.tree.max_depth)?;
        positive("tree.min_leaf", self.tree.min_leaf)?;
        positive("gboost.rounds", self.gboost.rounds)?;
        positive("gboost.depth", self.gboost.depth)?;
        positive_f("gboost.learning_rate", self.gboost.learning_rate)?;
        positive("mlp.hidden", self.mlp.hidden)?;
        positive("mlp.epochs", self.mlp.epochs)?;
        positive_f("mlp.learning_rate", self.mlp.learning_rate)?;
        positive("mlp.batch", self.mlp.batch)?;
        if let Some(k) = self.kmeans.k {
            positive("kmeans.k", k)?;
        }
        if let Some(k) = self.gmm.k {
            positive("gmm.k", k)?;
        }
        positive_f("gmm.var_floor", self.gmm.var_floor)?;
        Ok(())
    }
}

/// Per-column mean and population standard deviation; zero spread maps to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / n;
            let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = v.sqrt();
            mean.push(m);
            std.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
        }
        Self { mean, std }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Params {
    Knn(Knn),
    Tree(Tree),
    Gboost(GradientBoost),
    Gnb(GaussianNb),
    Mlp(Mlp),
    Kmeans {
        model: KMeans,
        /// Majority training label per cluster.
        cluster_labels: Vec<u32>,
    },
    Gmm {
        model: Gmm,
        cluster_labels: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub spec: ModelSpec,
    /// Sorted distinct training labels; class index `i` means `classes[i]`.
    pub classes: Vec<u32>,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub params: Params,
    /// Per-iteration training history: gboost and mlp loss, k-means objective,
    /// GMM mean log-likelihood. Empty for the other kinds.
    pub trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn majority_labels(assignments: &[usize], k: usize, y: &[usize], classes: &[u32]) -> Vec<u32> {
    let mut counts = vec![vec![0usize; classes.len()]; k];
    let mut overall = vec![0usize; classes.len()];
    for (&a, &c) in assignments.iter().zip(y) {
        counts[a][c] += 1;
        overall[c] += 1;
    }
    let pick = |c: &[usize]| {
        let mut best = 0;
        for (i, &n) in c.iter().enumerate() {
            if n > c[best] {
                best = i;
            }
        }
        best
    };
    let fallback = pick(&overall);
    counts
        .iter()
        .map(|c| {
            if c.iter().all(|&n| n == 0) {
                classes[fallback]
            } else {
                classes[pick(c)]
            }
        })
        .collect()
}

/// Fits `spec` on the training dataset.
pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<TrainedModel> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::Model("training set is empty".into()));
    }
    if let Some(((r, c), _)) = train.features.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Model(format!(
            "non-finite training feature at row {r}, column {}",
            train.feature_names.get(c).map(String::as_str).unwrap_or("?")
        )));
    }
    let classes = train.classes();
    let index_of = |l: u32| classes.binary_search(&l).expect("label comes from classes");
    let y: Vec<usize> = train.labels.iter().map(|&l| index_of(l)).collect();
    let k = classes.len();
    if !spec.kind.is_clustering() && k < 2 {
        return Err(Error::Model(format!(
            "{} needs at least 2 classes, training set has {k}",
            spec.kind
        )));
    }
    let standardizer = Standardizer::fit(train.features.view());
    let x = standardizer.transform(train.features.view());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trace = Vec::new();

    let params = match spec.kind {
        ModelKind::Knn => Params::Knn(Knn::fit(x.view(), &y, k, spec.knn.k)?),
        ModelKind::Tree => {
            let pre = tree::Presorted::new(x.view());
            let all: Vec<usize> = (0..x.nrows()).collect();
            let crit = tree::Gini { labels: &y, n_classes: k };
            let gp = tree::GrowParams {
                max_depth: spec.tree.max_depth,
                min_leaf: spec.tree.min_leaf,
            };
            Params::Tree(tree::grow(x.view(), &all, &pre, &crit, &gp, |m| {
                tree::class_distribution(&y, k, m)
            }))
        }
        ModelKind::Gboost => {
            let bp = gboost::BoostParams {
                rounds: spec.gboost.rounds,
                depth: spec.gboost.depth,
                learning_rate: spec.gboost.learning_rate,
            };
            let fit = gboost::fit(x.view(), &y, k, &bp);
            trace = fit.loss;
            Params::Gboost(fit.model)
        }
        ModelKind::Gnb => Params::Gnb(GaussianNb::fit(x.view(), &y, k)?),
        ModelKind::Mlp => {
            let mut net = Mlp::new(x.ncols(), spec.mlp.hidden, k, &mut rng);
            let tp = mlp::TrainParams {
                epochs: spec.mlp.epochs,
                learning_rate: spec.mlp.learning_rate,
                batch: spec.mlp.batch,
            };
            trace = mlp::train(&mut net, x.view(), &y, &tp, &mut rng);
            if trace.iter().any(|v| !v.is_finite()) {
                return Err(Error::Model("mlp training diverged (non-finite loss)".into()));
            }
            Params::Mlp(net)
        }
        ModelKind::Kmeans => {
            let kc = spec.kmeans.k.unwrap_or(k);
            let fit = kmeans::fit(x.view(), kc, &mut rng)?;
            trace = fit.objective;
            Params::Kmeans {
                cluster_labels: majority_labels(&fit.assignments, kc, &y, &classes),
                model: fit.model,
            }
        }
        ModelKind::Gmm => {
            let kc = spec.gmm.k.unwrap_or(k);
            let fit = gmm::fit(x.view(), kc, spec.gmm.var_floor, &mut rng)?;
            trace = fit.log_likelihood;
            let assignments: Vec<usize> = x
                .rows()
                .into_iter()
                .map(|r| argmax(&fit.model.responsibilities(r)))
                .collect();
            Params::Gmm {
                cluster_labels: majority_labels(&assignments, kc, &y, &classes),
                model: fit.model,
            }
        }
    };
    Ok(TrainedModel {
        kind: spec.kind,
        spec: spec.clone(),
        classes,
        feature_names: train.feature_names.clone(),
        standardizer,
        params,
        trace,
    })
}

impl TrainedModel {
    pub fn width(&self) -> usize {
        self.standardizer.width()
    }

    pub fn n_clusters(&self) -> Option<usize> {
        match &self.params {
            Params::Kmeans { cluster_labels, .. } | Params::Gmm { cluster_labels, .. } => {
                Some(cluster_labels.len())
            }
            _ => None,
        }
    }

    fn prepare(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                actual: rows.ncols(),
            });
        }
        Ok(self.standardizer.transform(rows))
    }

    /// Score vector for one standardized row: class probabilities for
    /// supervised kinds, cluster responsibilities (or a one-hot nearest
    /// centroid) for clustering kinds.
    fn row_scores(&self, r: ArrayView1<'_, f64>) -> Vec<f64> {
        match &self.params {
            Params::Knn(m) => m.votes(r),
            Params::Tree(t) => t.leaf(&r.to_vec()).to_vec(),
            Params::Gboost(m) => softmax(&m.scores(r)),
            Params::Gnb(m) => softmax(&m.log_joint(r)),
            Params::Mlp(m) => {
                let row = r.to_owned().insert_axis(Axis(0));
                m.forward(row.view()).row(0).to_vec()
            }
            Params::Kmeans { model, cluster_labels } => {
                let mut v = vec![0.0; cluster_labels.len()];
                v[model.nearest(r).0] = 1.0;
                v
            }
            Params::Gmm { model, .. } => model.responsibilities(r),
        }
    }

    fn scores(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<Vec<f64>>> {
        let x = self.prepare(rows)?;
        Ok((0..x.nrows())
            .into_par_iter()
            .map(|i| self.row_scores(x.row(i)))
            .collect())
    }

    /// Per-class probabilities in `classes` order. Not defined for clustering kinds.
    pub fn predict_proba(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if self.kind.is_clustering() {
            return Err(Error::Unsupported {
                kind: self.kind.to_string(),
                what: "predict_proba".into(),
            });
        }
        let s = self.scores(rows)?;
        let mut out = Array2::zeros((s.len(), self.classes.len()));
        for (i, r) in s.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                out[[i, j]] = v;
            }
        }
        Ok(out)
    }

    /// Class labels for supervised kinds, cluster ids for clustering kinds.
    /// Ties go to the smallest index.
    pub fn predict(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<u32>> {
        let s = self.scores(rows)?;
        Ok(s.iter()
            .map(|r| {
                let i = argmax(r);
                if self.kind.is_clustering() {
                    i as u32
                } else {
                    self.classes[i]
                }
            })
            .collect())
    }

    /// Labels for every kind; clusters map to their majority training label.
    pub fn predict_class(&self, rows: ArrayView2<'_, f64>) -> Result<Vec<u32>> {
        let p = self.predict(rows)?;
        Ok(match &self.params {
            Params::Kmeans { cluster_labels, .. } | Params::Gmm { cluster_labels, .. } => {
                p.iter().map(|&c| cluster_labels[c as usize]).collect()
            }
            _ => p,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("invalid model file: {e}")))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("not a model file (format `{}`)", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model file version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.into()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
