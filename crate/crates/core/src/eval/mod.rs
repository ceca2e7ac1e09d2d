//! Held-out evaluation: stratified split, accuracy report with confusion
//! matrix, rating prediction and confusion rendering.

pub mod render;
pub mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::dataset::Dataset;
use crate::models::{self, ModelSpec, TrainedModel};

pub use render::{read_confusion_csv, render_confusion, RenderedFiles};
pub use split::{plan_split, split_dataset, Fold, SplitPlan, DEFAULT_TEST_FRACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// Row and column labels of `confusion`, ascending.
    pub labels: Vec<u32>,
    pub n_test: usize,
    pub correct: usize,
    /// Percent.
    pub overall_accuracy: f64,
    /// `100 / labels.len()`.
    pub chance_accuracy: f64,
    /// Percent, for every label with at least one test row.
    pub per_class_accuracy: BTreeMap<u32, f64>,
    pub per_subject_accuracy: BTreeMap<u32, f64>,
    /// `confusion[true][predicted]`, indexed like `labels`.
    pub confusion: Vec<Vec<u64>>,
    /// Set for rating targets, where labels are ordinal.
    pub mean_absolute_error: Option<f64>,
    pub warnings: Vec<String>,
}

fn pct(num: usize, den: usize) -> f64 {
    100.0 * num as f64 / den as f64
}

impl EvalReport {
    /// Builds a report from aligned truth/prediction/subject slices. The label
    /// set is the union of `extra_labels`, the truth and the predictions.
    pub fn from_predictions(
        model: &str,
        truth: &[u32],
        predicted: &[u32],
        subjects: &[u32],
        extra_labels: &[u32],
    ) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        if truth.len() != predicted.len() || truth.len() != subjects.len() {
            return Err(Error::Structure("truth, predictions and subjects differ in length".into()));
        }
        let labels: Vec<u32> = extra_labels
            .iter()
            .chain(truth)
            .chain(predicted)
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pos = |l: u32| labels.binary_search(&l).expect("label in union");
        let mut confusion = vec![vec![0u64; labels.len()]; labels.len()];
        let mut by_subject: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for ((&t, &p), &s) in truth.iter().zip(predicted).zip(subjects) {
            confusion[pos(t)][pos(p)] += 1;
            let e = by_subject.entry(s).or_default();
            e.1 += 1;
            if t == p {
                e.0 += 1;
            }
        }
        let correct: usize = (0..labels.len()).map(|i| confusion[i][i] as usize).sum();
        let per_class_accuracy = labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| {
                let row: u64 = confusion[i].iter().sum();
                (row > 0).then(|| (l, pct(confusion[i][i] as usize, row as usize)))
            })
            .collect();
        Ok(Self {
            model: model.to_string(),
            n_test: truth.len(),
            correct,
            overall_accuracy: pct(correct, truth.len()),
            chance_accuracy: 100.0 / labels.len() as f64,
            per_class_accuracy,
            per_subject_accuracy: by_subject.into_iter().map(|(s, (c, n))| (s, pct(c, n))).collect(),
            confusion,
            labels,
            mean_absolute_error: None,
            warnings: Vec::new(),
        })
    }

    /// Accuracy recomputed from the confusion matrix.
    pub fn accuracy_from_confusion(&self) -> f64 {
        let total: u64 = self.confusion.iter().flatten().sum();
        let trace: u64 = (0..self.labels.len()).map(|i| self.confusion[i][i]).sum();
        pct(trace as usize, total as usize)
    }

    /// Plain-text summary; the header carries the chance reference.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {}", self.model);
        let _ = writeln!(s, "chance_accuracy: {:.4}", self.chance_accuracy);
        let _ = writeln!(s, "n_test: {}", self.n_test);
        let _ = writeln!(s, "overall_accuracy: {:.4}", self.overall_accuracy);
        if let Some(mae) = self.mean_absolute_error {
            let _ = writeln!(s, "mean_absolute_error: {mae:.6}");
        }
        s.push_str("per_class_accuracy:\n");
        for (i, l) in self.labels.iter().enumerate() {
            let n: u64 = self.confusion[i].iter().sum();
            match self.per_class_accuracy.get(l) {
                Some(a) => {
                    let _ = writeln!(s, "  {l}: {a:.4} (n={n})");
                }
                None => {
                    let _ = writeln!(s, "  {l}: - (n=0)");
                }
            }
        }
        s.push_str("per_subject_accuracy:\n");
        for (sub, a) in &self.per_subject_accuracy {
            let _ = writeln!(s, "  {sub}: {a:.4}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Structure(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Structure(format!("invalid report: {e}")))
    }
}

/// Scores `model` on `test`. Clustering kinds are scored through their
/// cluster-to-label mapping.
pub fn evaluate(model: &TrainedModel, test: &Dataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let predicted = model.predict_class(test.features.view())?;
    let subjects: Vec<u32> = test.meta.iter().map(|m| m.subject_id).collect();
    EvalReport::from_predictions(model.kind.as_str(), &test.labels, &predicted, &subjects, &model.classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingTarget {
    Enjoyment,
    Familiarity,
}

impl fmt::Display for RatingTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RatingTarget::Enjoyment => "enjoyment",
            RatingTarget::Familiarity => "familiarity",
        })
    }
}

impl FromStr for RatingTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "enjoyment" => Ok(RatingTarget::Enjoyment),
            "familiarity" => Ok(RatingTarget::Familiarity),
            _ => Err(Error::Config(format!("unknown rating target `{s}`"))),
        }
    }
}

pub const RATING_LEVELS: [u32; 5] = [1, 2, 3, 4, 5];

/// Copy of `dataset` labelled by the chosen rating.
pub fn relabel_by_rating(dataset: &Dataset, target: RatingTarget) -> Result<Dataset> {
    let labels = dataset
        .meta
        .iter()
        .map(|m| {
            u32::from(match target {
                RatingTarget::Enjoyment => m.enjoyment,
                RatingTarget::Familiarity => m.familiarity,
            })
        })
        .collect();
    dataset.clone().with_labels(labels)
}

/// Copy of `dataset` with its labels permuted across rows.
pub fn shuffle_labels(dataset: &Dataset, seed: u64) -> Dataset {
    let mut labels = dataset.labels.clone();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut d = dataset.clone();
    d.labels = labels;
    d
}

pub fn mean_absolute_error(truth: &[u32], predicted: &[u32]) -> f64 {
    let s: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(&t, &p)| (f64::from(t) - f64::from(p)).abs())
        .sum();
    s / truth.len() as f64
}

/// Split/fit/evaluate on ordinal 1–5 labels already present in `dataset.labels`,
/// adding the mean absolute error. Rating levels with no training rows are
/// reported as warnings and left out of the per-class table.
pub fn evaluate_ordinal(spec: &ModelSpec, dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<EvalReport> {
    let (train, test, _) = split_dataset(dataset, test_fraction, seed)?;
    let model = models::fit(spec, &train)?;
    let predicted = model.predict_class(test.features.view())?;
    let subjects: Vec<u32> = test.meta.iter().map(|m| m.subject_id).collect();
    let mut report = EvalReport::from_predictions(spec.kind.as_str(), &test.labels, &predicted, &subjects, &RATING_LEVELS)?;
    report.mean_absolute_error = Some(mean_absolute_error(&test.labels, &predicted));
    let trained: BTreeSet<u32> = train.labels.iter().copied().collect();
    for l in RATING_LEVELS {
        if !trained.contains(&l) {
            report.warnings.push(format!("rating {l} has no training rows; excluded from the per-class table"));
            report.per_class_accuracy.remove(&l);
        }
    }
    Ok(report)
}

/// Rating prediction: relabel by `target`, then [`evaluate_ordinal`].
pub fn evaluate_ratings(
    spec: &ModelSpec,
    dataset: &Dataset,
    target: RatingTarget,
    test_fraction: f64,
    seed: u64,
) -> Result<EvalReport> {
    evaluate_ordinal(spec, &relabel_by_rating(dataset, target)?, test_fraction, seed)
}

/// Mean and max accuracy over repeated seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub runs: usize,
    pub mean_accuracy: f64,
    pub max_accuracy: f64,
}

pub fn summarize_seeds(reports: &[EvalReport]) -> Option<SeedSummary> {
    if reports.is_empty() {
        return None;
    }
    let accs: Vec<f64> = reports.iter().map(|r| r.overall_accuracy).collect();
    Some(SeedSummary {
        runs: accs.len(),
        mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
        max_accuracy: accs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
    })
}
