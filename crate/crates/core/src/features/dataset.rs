//! Feature table with labels and provenance, plus its CSV form.
//!
//! CSV header: feature names, then `song_id,subject_id,epoch_index,enjoyment,familiarity`.
//! Values are written with Rust's shortest round-trip float formatting so a
//! written dataset reads back bit-exactly.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

pub const META_COLUMNS: [&str; 5] = ["song_id", "subject_id", "epoch_index", "enjoyment", "familiarity"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMeta {
    pub subject_id: u32,
    pub song_id: u32,
    pub epoch_index: u32,
    pub enjoyment: u8,
    pub familiarity: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    /// `rows × features`
    pub features: Array2<f64>,
    /// Class label per row; the song id unless relabeled.
    pub labels: Vec<u32>,
    pub meta: Vec<RowMeta>,
}

impl Dataset {
    pub fn empty(feature_names: Vec<String>) -> Self {
        let w = feature_names.len();
        Self {
            feature_names,
            features: Array2::zeros((0, w)),
            labels: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn push_row(&mut self, values: ArrayView1<'_, f64>, meta: RowMeta) -> Result<()> {
        if values.len() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                actual: values.len(),
            });
        }
        self.features
            .push_row(values)
            .map_err(|e| Error::Structure(e.to_string()))?;
        self.labels.push(meta.song_id);
        self.meta.push(meta);
        Ok(())
    }

    /// Appends all rows of `other`, which must have identical columns.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.feature_names != self.feature_names {
            return Err(Error::Structure("datasets have different feature columns".into()));
        }
        for (i, row) in other.features.rows().into_iter().enumerate() {
            self.features
                .push_row(row)
                .map_err(|e| Error::Structure(e.to_string()))?;
            self.labels.push(other.labels[i]);
            self.meta.push(other.meta[i]);
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta: indices.iter().map(|&i| self.meta[i]).collect(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Dataset> {
        if labels.len() != self.n_rows() {
            return Err(Error::Structure(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n_rows()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<u32> {
        self.labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Checks the table invariants: consistent lengths, unique names, finite values.
    pub fn validate(&self) -> Result<()> {
        if self.feature_names.len() != self.width() {
            return Err(Error::Structure(format!(
                "{} names for {} columns",
                self.feature_names.len(),
                self.width()
            )));
        }
        if self.labels.len() != self.n_rows() || self.meta.len() != self.n_rows() {
            return Err(Error::Structure("label/meta count differs from row count".into()));
        }
        let unique: BTreeSet<&String> = self.feature_names.iter().collect();
        if unique.len() != self.feature_names.len() {
            return Err(Error::Structure("duplicate feature names".into()));
        }
        if let Some(((r, c), _)) = self.features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Structure(format!(
                "non-finite value at row {r}, column {}",
                self.feature_names[c]
            )));
        }
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let header: Vec<&str> = self
            .feature_names
            .iter()
            .map(String::as_str)
            .chain(META_COLUMNS)
            .collect();
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        let mut line = String::new();
        for (row, m) in self.features.rows().into_iter().zip(&self.meta) {
            line.clear();
            for v in row {
                line.push_str(&v.to_string());
                line.push(',');
            }
            line.push_str(&format!(
                "{},{},{},{},{}",
                m.song_id, m.subject_id, m.epoch_index, m.enjoyment, m.familiarity
            ));
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Dataset> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = match lines.next() {
            Some(h) => h.map_err(|e| Error::io(path, e))?,
            None => return Err(Error::parse(path, 1, "empty file")),
        };
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < META_COLUMNS.len() || cols[cols.len() - META_COLUMNS.len()..] != META_COLUMNS {
            return Err(Error::parse(path, 1, "header must end with the metadata columns"));
        }
        let width = cols.len() - META_COLUMNS.len();
        let names: Vec<String> = cols[..width].iter().map(|s| s.to_string()).collect();
        let mut values = Vec::new();
        let mut meta = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = i + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::parse(
                    path,
                    row,
                    format!("expected {} fields, got {}", cols.len(), fields.len()),
                ));
            }
            for f in &fields[..width] {
                values.push(
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(path, row, format!("bad number `{f}`")))?,
                );
            }
            let int = |k: usize| -> Result<u32> {
                let f = fields[width + k];
                f.parse()
                    .map_err(|_| Error::parse(path, row, format!("bad {} `{f}`", META_COLUMNS[k])))
            };
            meta.push(RowMeta {
                song_id: int(0)?,
                subject_id: int(1)?,
                epoch_index: int(2)?,
                enjoyment: int(3)? as u8,
                familiarity: int(4)? as u8,
            });
        }
        let features = Array2::from_shape_vec((meta.len(), width), values)
            .map_err(|e| Error::Structure(e.to_string()))?;
        let ds = Dataset {
            feature_names: names,
            labels: meta.iter().map(|m| m.song_id).collect(),
            features,
            meta,
        };
        ds.validate()?;
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn meta(song: u32) -> RowMeta {
        RowMeta {
            subject_id: 2,
            song_id: song,
            epoch_index: 1,
            enjoyment: 3,
            familiarity: 4,
        }
    }

    #[test]
    fn push_and_subset() {
        let mut d = Dataset::empty(vec!["a".into(), "b".into()]);
        d.push_row(array![1.0, 2.0].view(), meta(1)).unwrap();
        d.push_row(array![3.0, 4.0].view(), meta(5)).unwrap();
        assert!(d.push_row(array![1.0].view(), meta(1)).is_err());
        let s = d.subset(&[1]);
        assert_eq!(s.labels, vec![5]);
        assert_eq!(s.features, array![[3.0, 4.0]]);
        assert_eq!(d.classes(), vec![1, 5]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let d = Dataset::empty(vec!["a".into(), "a".into()]);
        assert!(d.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn csv_round_trip_is_exact(vals in proptest::collection::vec(-1e12f64..1e12, 6)) {
            let tmp = tempfile::tempdir().unwrap();
            let mut d = Dataset::empty(vec!["ch0_x".into(), "ch0_y".into(), "ch1_x".into()]);
            d.push_row(ndarray::ArrayView1::from(&vals[..3]), meta(3)).unwrap();
            d.push_row(ndarray::ArrayView1::from(&vals[3..]), meta(12)).unwrap();
            let p = tmp.path().join("d.csv");
            d.write_csv(&p).unwrap();
            prop_assert_eq!(Dataset::read_csv(&p).unwrap(), d);
        }
    }
}
