//! Detrended fluctuation analysis (first order).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfaResult {
    /// Slope of log2 F(n) against log2 n.
    pub alpha: f64,
    pub intercept: f64,
    /// `(n, F(n))` per box size used.
    pub fluctuations: Vec<(usize, f64)>,
    /// `3 - alpha`.
    pub dim: f64,
}

/// Twelve log-spaced box sizes from 4 to `len / 4`, deduplicated.
pub fn default_box_sizes(len: usize) -> Vec<usize> {
    let hi = len / 4;
    if hi < 4 {
        return Vec::new();
    }
    let (lo_l, hi_l) = (4f64.ln(), (hi as f64).ln());
    let mut sizes: Vec<usize> = (0..12)
        .map(|i| (lo_l + (hi_l - lo_l) * i as f64 / 11.0).exp().round() as usize)
        .collect();
    sizes.dedup();
    sizes
}

/// RMS residual of a per-box least-squares line over non-overlapping boxes.
fn fluctuation(profile: &[f64], n: usize) -> f64 {
    let boxes = profile.len() / n;
    // centred abscissa: x = i - (n-1)/2, so Σx = 0
    let xm = (n as f64 - 1.0) / 2.0;
    let sxx: f64 = (0..n).map(|i| (i as f64 - xm).powi(2)).sum();
    let mut total = 0.0;
    for b in 0..boxes {
        let seg = &profile[b * n..(b + 1) * n];
        let ym = seg.iter().sum::<f64>() / n as f64;
        let sxy: f64 = seg.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
        let slope = sxy / sxx;
        total += seg
            .iter()
            .enumerate()
            .map(|(i, y)| {
                let r = y - ym - slope * (i as f64 - xm);
                r * r
            })
            .sum::<f64>();
    }
    (total / (boxes * n) as f64).sqrt()
}

/// Ordinary least squares `y = slope·x + intercept`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn dfa(signal: &[f64], box_sizes: Option<&[usize]>) -> Result<DfaResult> {
    let len = signal.len();
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let sizes: Vec<usize> = match box_sizes {
        Some(s) => s.iter().copied().filter(|&n| n >= 3 && 4 * n <= len).collect(),
        None => default_box_sizes(len),
    };
    if sizes.len() < 3 {
        return Err(Error::DegenerateFluctuations(format!(
            "only {} usable box sizes for a signal of {len} samples",
            sizes.len()
        )));
    }

    let mean = signal.iter().sum::<f64>() / len as f64;
    let mut profile = Vec::with_capacity(len);
    let mut acc = 0.0;
    for &v in signal {
        acc += v - mean;
        profile.push(acc);
    }

    let scale = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fluctuations: Vec<(usize, f64)> = sizes.iter().map(|&n| (n, fluctuation(&profile, n))).collect();
    if let Some(&(n, f)) = fluctuations.iter().find(|(_, f)| f.is_nan() || *f <= 1e-8 * scale) {
        return Err(Error::DegenerateFluctuations(format!(
            "F({n}) = {f:e} is indistinguishable from zero"
        )));
    }

    let lx: Vec<f64> = fluctuations.iter().map(|(n, _)| (*n as f64).log2()).collect();
    let ly: Vec<f64> = fluctuations.iter().map(|(_, f)| f.log2()).collect();
    let (alpha, intercept) = linear_fit(&lx, &ly);
    Ok(DfaResult {
        alpha,
        intercept,
        fluctuations,
        dim: 3.0 - alpha,
    })
}
