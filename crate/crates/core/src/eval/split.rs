//! Stratified held-out split and its on-disk plan.
//!
//! Plan files are CSV with `#` comment lines carrying the seed and fraction:
//!
//! ```text
//! # seed: 7
//! # test_fraction: 0.3333333333333333
//! row_index,fold
//! 0,train
//! 1,test
//! ```
//!
//! Evaluating against a plan drops a `<plan>.consumed` marker next to it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::dataset::Dataset;

pub const DEFAULT_TEST_FRACTION: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fold {
    Train,
    Test,
}

impl Fold {
    pub fn as_str(self) -> &'static str {
        match self {
            Fold::Train => "train",
            Fold::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub test_fraction: f64,
    pub seed: u64,
    /// Fold of every dataset row, by row index.
    pub folds: Vec<Fold>,
}

impl SplitPlan {
    pub fn test_indices(&self) -> Vec<usize> {
        self.indices(Fold::Test)
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices(Fold::Train)
    }

    fn indices(&self, fold: Fold) -> Vec<usize> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Applies the plan to a dataset with the same row count.
    pub fn apply(&self, dataset: &Dataset) -> Result<(Dataset, Dataset)> {
        if dataset.n_rows() != self.folds.len() {
            return Err(Error::Structure(format!(
                "split plan covers {} rows but the dataset has {}",
                self.folds.len(),
                dataset.n_rows()
            )));
        }
        Ok((dataset.subset(&self.train_indices()), dataset.subset(&self.test_indices())))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# seed: {}", self.seed);
        let _ = writeln!(s, "# test_fraction: {}", self.test_fraction);
        s.push_str("row_index,fold\n");
        for (i, f) in self.folds.iter().enumerate() {
            let _ = writeln!(s, "{i},{}", f.as_str());
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.into()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut seed = None;
        let mut fraction = None;
        let mut folds = Vec::new();
        let mut header = false;
        for (lineno, line) in text.lines().enumerate() {
            let row = lineno + 1;
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.split_once(':') {
                    match k.trim() {
                        "seed" => seed = Some(v.trim().parse().map_err(|_| Error::parse(path, row, "bad seed"))?),
                        "test_fraction" => {
                            fraction = Some(v.trim().parse().map_err(|_| Error::parse(path, row, "bad test_fraction"))?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !header {
                if line.trim() != "row_index,fold" {
                    return Err(Error::parse(path, row, "expected header `row_index,fold`"));
                }
                header = true;
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (idx, fold) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(path, row, "expected two fields"))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, row, format!("bad row index `{idx}`")))?;
            if idx != folds.len() {
                return Err(Error::parse(path, row, format!("row index {idx} out of sequence")));
            }
            folds.push(match fold.trim() {
                "train" => Fold::Train,
                "test" => Fold::Test,
                other => return Err(Error::parse(path, row, format!("unknown fold `{other}`"))),
            });
        }
        if !header {
            return Err(Error::parse(path, 1, "missing header"));
        }
        Ok(Self {
            test_fraction: fraction.ok_or_else(|| Error::parse(path, 1, "missing test_fraction comment"))?,
            seed: seed.ok_or_else(|| Error::parse(path, 1, "missing seed comment"))?,
            folds,
        })
    }
}

pub fn consumed_marker(plan_path: &Path) -> PathBuf {
    let mut s = plan_path.as_os_str().to_owned();
    s.push(".consumed");
    PathBuf::from(s)
}

pub fn is_consumed(plan_path: &Path) -> bool {
    consumed_marker(plan_path).exists()
}

/// Fails with [`Error::PlanConsumed`] unless `force` is set or the plan is fresh.
pub fn check_unconsumed(plan_path: &Path, force: bool) -> Result<()> {
    if !force && is_consumed(plan_path) {
        return Err(Error::PlanConsumed(plan_path.into()));
    }
    Ok(())
}

pub fn mark_consumed(plan_path: &Path) -> Result<()> {
    let marker = consumed_marker(plan_path);
    fs::write(&marker, "consumed\n").map_err(|e| Error::io(marker, e))
}

/// Seeded split stratified by (subject, song): each stratum sends
/// `round(fraction · size)` of its rows to the test fold.
pub fn split_dataset(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset, SplitPlan)> {
    let plan = plan_split(dataset, test_fraction, seed)?;
    let (train, test) = plan.apply(dataset)?;
    Ok((train, test, plan))
}

pub fn plan_split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        if test_fraction == 0.0 {
            return Err(Error::EmptyTestSet);
        }
        return Err(Error::Config(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut strata: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, m) in dataset.meta.iter().enumerate() {
        strata.entry((m.subject_id, m.song_id)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Fold::Train; dataset.n_rows()];
    for ((subject_id, song_id), mut rows) in strata {
        let size = rows.len();
        let t = (test_fraction * size as f64).round() as usize;
        if t == 0 || t == size {
            return Err(Error::StratumTooSmall {
                subject_id,
                song_id,
                size,
                fraction: test_fraction,
            });
        }
        rows.shuffle(&mut rng);
        for &i in &rows[..t] {
            folds[i] = Fold::Test;
        }
    }
    Ok(SplitPlan {
        test_fraction,
        seed,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::dataset::RowMeta;

    pub(crate) fn grid(subjects: u32, songs: u32, per: u32) -> Dataset {
        let mut d = Dataset::empty(vec!["x".into()]);
        for s in 0..subjects {
            for g in 0..songs {
                for e in 0..per {
                    let v = [f64::from(s * 1000 + g * 10 + e)];
                    d.push_row(
                        ndarray::aview1(&v),
                        RowMeta {
                            subject_id: s,
                            song_id: g,
                            epoch_index: e,
                            enjoyment: 1,
                            familiarity: 1,
                        },
                    )
                    .unwrap();
                }
            }
        }
        d
    }

    #[test]
    fn counts_per_stratum() {
        let d = grid(20, 12, 12);
        let (train, test, plan) = split_dataset(&d, 1.0 / 3.0, 4).unwrap();
        assert_eq!(test.n_rows(), 960);
        assert_eq!(train.n_rows(), 1920);
        let mut per: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        for m in &test.meta {
            *per.entry((m.subject_id, m.song_id)).or_default() += 1;
        }
        assert!(per.values().all(|&c| c == 4));
        assert_eq!(plan.folds.len(), 2880);
    }

    #[test]
    fn zero_fraction_is_empty_test_set() {
        assert!(matches!(split_dataset(&grid(1, 2, 3), 0.0, 0), Err(Error::EmptyTestSet)));
        assert!(split_dataset(&grid(1, 2, 3), 1.0, 0).is_err());
    }

    #[test]
    fn small_stratum_is_named() {
        let err = split_dataset(&grid(1, 2, 1), 1.0 / 3.0, 0).unwrap_err();
        assert!(matches!(err, Error::StratumTooSmall { subject_id: 0, song_id: 0, size: 1, .. }));
    }

    #[test]
    fn same_seed_same_plan() {
        let d = grid(3, 4, 6);
        let a = plan_split(&d, 0.5, 11).unwrap();
        let b = plan_split(&d, 0.5, 11).unwrap();
        let c = plan_split(&d, 0.5, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.folds, c.folds);
    }

    #[test]
    fn plan_file_roundtrip_and_marker() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plan.csv");
        let plan = plan_split(&grid(2, 3, 6), 1.0 / 3.0, 5).unwrap();
        plan.write(&path).unwrap();
        assert_eq!(SplitPlan::read(&path).unwrap(), plan);
        check_unconsumed(&path, false).unwrap();
        mark_consumed(&path).unwrap();
        assert!(matches!(check_unconsumed(&path, false), Err(Error::PlanConsumed(_))));
        check_unconsumed(&path, true).unwrap();
    }
}
