//! Welch power spectral density and per-band power in dB.

use std::sync::Arc;

use ndarray::ArrayView1;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::EPSILON;
use crate::session::Epoch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
}

/// Named half-open frequency bands `[low, high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub bands: Vec<Band>,
}

impl Default for BandDefinition {
    fn default() -> Self {
        let b = |name: &str, low_hz, high_hz| Band {
            name: name.to_string(),
            low_hz,
            high_hz,
        };
        Self {
            bands: vec![
                b("delta", 1.0, 4.0),
                b("theta", 4.0, 8.0),
                b("alpha", 8.0, 13.0),
                b("beta", 13.0, 30.0),
                b("gamma", 30.0, 45.0),
            ],
        }
    }
}

impl BandDefinition {
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        let mut prev_high = 0.0;
        for b in &self.bands {
            if !(b.low_hz >= prev_high && b.low_hz < b.high_hz) {
                return Err(Error::Config(format!(
                    "band {} [{}, {}) is empty, overlapping or out of order",
                    b.name, b.low_hz, b.high_hz
                )));
            }
            prev_high = b.high_hz;
        }
        if prev_high > sample_rate_hz / 2.0 {
            return Err(Error::Config(format!(
                "bands extend to {prev_high} Hz, beyond Nyquist {}",
                sample_rate_hz / 2.0
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// Index of the band containing `f`, if any.
    pub fn index_of(&self, f: f64) -> Option<usize> {
        self.bands.iter().position(|b| b.low_hz <= f && f < b.high_hz)
    }

    pub fn lowest(&self) -> f64 {
        self.bands.first().map_or(0.0, |b| b.low_hz)
    }

    pub fn highest(&self) -> f64 {
        self.bands.last().map_or(0.0, |b| b.high_hz)
    }
}

/// One-sided PSD estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    /// units² / Hz
    pub density: Vec<f64>,
    pub n_segments: usize,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    /// Mean density over bins with `low <= f < high`, or `None` when the band
    /// holds no bins.
    pub fn band_mean(&self, low: f64, high: f64) -> Option<f64> {
        let (sum, n) = self
            .freqs
            .iter()
            .zip(&self.density)
            .filter(|(&f, _)| low <= f && f < high)
            .fold((0.0, 0usize), |(s, n), (_, &p)| (s + p, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Power (units²) integrated over `low <= f < high`.
    pub fn band_power(&self, low: f64, high: f64) -> f64 {
        let df = self.resolution();
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(|(&f, _)| low <= f && f < high)
            .map(|(_, &p)| p * df)
            .sum()
    }
}

/// Welch estimator with a symmetric Hamming window, 50 % overlap, per-segment
/// mean removal and density scaling.
pub struct Welch {
    window: Vec<f64>,
    window_power: f64,
    sample_rate_hz: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl Welch {
    pub fn new(segment_len: usize, sample_rate_hz: f64) -> Self {
        let window: Vec<f64> = if segment_len == 1 {
            vec![1.0]
        } else {
            (0..segment_len)
                .map(|i| {
                    0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (segment_len - 1) as f64).cos()
                })
                .collect()
        };
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(segment_len);
        Self {
            window,
            window_power,
            sample_rate_hz,
            fft,
        }
    }

    /// One-second segments.
    pub fn one_second(sample_rate_hz: u32) -> Self {
        Self::new(sample_rate_hz as usize, sample_rate_hz as f64)
    }

    pub fn segment_len(&self) -> usize {
        self.window.len()
    }

    pub fn estimate(&self, signal: ArrayView1<'_, f64>) -> Result<Psd> {
        let n = self.segment_len();
        if signal.len() < n {
            return Err(Error::Range(format!(
                "signal of {} samples shorter than one {}-sample segment",
                signal.len(),
                n
            )));
        }
        let step = (n / 2).max(1);
        let n_bins = n / 2 + 1;
        let mut acc = vec![0.0; n_bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut n_segments = 0;
        let mut start = 0;
        while start + n <= signal.len() {
            let seg = signal.slice(ndarray::s![start..start + n]);
            let mean = seg.sum() / n as f64;
            for ((b, &x), &w) in buf.iter_mut().zip(seg.iter()).zip(&self.window) {
                *b = Complex64::new((x - mean) * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, c) in acc.iter_mut().zip(&buf) {
                *a += c.norm_sqr();
            }
            n_segments += 1;
            start += step;
        }
        let scale = 1.0 / (self.sample_rate_hz * self.window_power * n_segments as f64);
        let density = acc
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let one_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
                p * scale * one_sided
            })
            .collect();
        let df = self.sample_rate_hz / n as f64;
        Ok(Psd {
            freqs: (0..n_bins).map(|k| k as f64 * df).collect(),
            density,
            n_segments,
        })
    }
}

/// Band power in dB re 1 µV²/Hz, `values[channel][band]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPowerSet {
    pub band_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// dB of a mean density, floored at [`EPSILON`] so silent channels map to a
/// fixed sentinel (-120 dB).
pub fn to_db(power: f64) -> f64 {
    10.0 * power.max(EPSILON).log10()
}

/// Per-channel, per-band power of an epoch (Welch, 1 s Hamming windows).
pub fn spectopo_bandpower(epoch: &Epoch, bands: &BandDefinition) -> Result<BandPowerSet> {
    let fs = epoch.sample_rate_hz;
    bands.validate(fs as f64)?;
    if epoch.n_samples() < 2 * fs as usize {
        return Err(Error::Range(format!(
            "epoch of {} samples is shorter than two seconds at {fs} Hz",
            epoch.n_samples()
        )));
    }
    let welch = Welch::one_second(fs);
    let mut values = Vec::with_capacity(epoch.n_channels());
    for row in epoch.data.rows() {
        let psd = welch.estimate(row)?;
        values.push(
            bands
                .bands
                .iter()
                .map(|b| to_db(psd.band_mean(b.low_hz, b.high_hz).unwrap_or(0.0)))
                .collect(),
        );
    }
    Ok(BandPowerSet {
        band_names: bands.bands.iter().map(|b| b.name.clone()).collect(),
        values,
    })
}
