//! Confusion matrix as CSV counts and a row-normalized binary PGM heatmap.
//!
//! CSV rows and columns are headed by 0-based matrix indices, so index `i`
//! stands for the report's `labels[i]` (song 1 is index 0).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::EvalReport;

/// Pixel size of one matrix cell in the heatmap.
pub const CELL_PIXELS: usize = 32;

pub struct RenderedFiles {
    pub csv: PathBuf,
    pub pgm: PathBuf,
}

pub fn confusion_csv(report: &EvalReport) -> String {
    let mut s = String::from("true\\predicted");
    for i in 0..report.labels.len() {
        s.push_str(&format!(",{i}"));
    }
    s.push('\n');
    for (i, row) in report.confusion.iter().enumerate() {
        s.push_str(&i.to_string());
        for c in row {
            s.push_str(&format!(",{c}"));
        }
        s.push('\n');
    }
    s
}

/// Grey level per cell: `round(255 · count / row_sum)`, zero for empty rows.
pub fn cell_levels(confusion: &[Vec<u64>]) -> Vec<Vec<u8>> {
    confusion
        .iter()
        .map(|row| {
            let sum: u64 = row.iter().sum();
            row.iter()
                .map(|&c| {
                    if sum == 0 {
                        0
                    } else {
                        (255.0 * c as f64 / sum as f64).round() as u8
                    }
                })
                .collect()
        })
        .collect()
}

/// Binary (P5) graymap, each cell scaled to `CELL_PIXELS` square.
pub fn heatmap_pgm(confusion: &[Vec<u64>]) -> Vec<u8> {
    let levels = cell_levels(confusion);
    let n = levels.len();
    let side = n * CELL_PIXELS;
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    for y in 0..side {
        let row = &levels[y / CELL_PIXELS];
        for x in 0..side {
            out.push(row[x / CELL_PIXELS]);
        }
    }
    out
}

/// Writes `confusion.csv` and `confusion.pgm` into `dir`.
pub fn render_confusion(report: &EvalReport, dir: &Path) -> Result<RenderedFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("confusion.csv");
    let pgm = dir.join("confusion.pgm");
    fs::write(&csv, confusion_csv(report)).map_err(|e| Error::io(&csv, e))?;
    fs::write(&pgm, heatmap_pgm(&report.confusion)).map_err(|e| Error::io(&pgm, e))?;
    Ok(RenderedFiles { csv, pgm })
}

/// Reads a confusion CSV back into `(indices, counts)`.
pub fn read_confusion_csv(path: &Path) -> Result<(Vec<u32>, Vec<Vec<u64>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let labels: Vec<u32> = header
        .split(',')
        .skip(1)
        .map(|v| v.trim().parse().map_err(|_| Error::parse(path, 1, format!("bad label `{v}`"))))
        .collect::<Result<_>>()?;
    let mut counts = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let mut fields = line.split(',');
        let l: u32 = fields
            .next()
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::parse(path, row, "bad row label"))?;
        if labels.get(i) != Some(&l) {
            return Err(Error::parse(path, row, format!("row label {l} does not match the header")));
        }
        let values: Vec<u64> = fields
            .map(|v| v.trim().parse().map_err(|_| Error::parse(path, row, format!("bad count `{v}`"))))
            .collect::<Result<_>>()?;
        if values.len() != labels.len() {
            return Err(Error::parse(path, row, format!("{} counts for {} labels", values.len(), labels.len())));
        }
        counts.push(values);
    }
    Ok((labels, counts))
}
