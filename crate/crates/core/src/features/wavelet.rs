//! Multilevel orthogonal DWT with the 16-tap Daubechies filter (8 vanishing
//! moments) and periodic boundary extension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Daubechies-8 scaling (reconstruction low-pass) filter.
#[allow(clippy::excessive_precision)]
pub const DB8: [f64; 16] = [
    0.05441584224310400995500941,
    0.3128715909142999706591624,
    0.6756307362972898068078008,
    0.5853546836542067127712655,
    -0.01582910525634930566738055,
    -0.2840155429615469265162031,
    0.00047248457391328277036059,
    0.1287474266204784588570293,
    -0.01736930100180754616961615,
    -0.04408825393079475150676372,
    0.01398102791739828164872293,
    0.008746094047405776716382743,
    -0.004870352993451574310422182,
    -0.0003917403733769470462980804,
    0.0006754494064505693663695476,
    -0.0001174767841247695337306282,
];

pub const FILTER_LEN: usize = DB8.len();

/// Quadrature-mirror high-pass companion of [`DB8`].
pub fn db8_highpass() -> [f64; FILTER_LEN] {
    let mut g = [0.0; FILTER_LEN];
    for (n, v) in g.iter_mut().enumerate() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB8[FILTER_LEN - 1 - n];
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoeffs {
    /// Final approximation `aL`.
    pub approx: Vec<f64>,
    /// Detail coefficients, finest first: `details[0]` is `d1`.
    pub details: Vec<Vec<f64>>,
    /// Input length at each level before odd-length padding.
    pub lengths: Vec<usize>,
}

impl WaveletCoeffs {
    pub fn levels(&self) -> usize {
        self.details.len()
    }
}

fn analysis_step(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let (mut sa, mut sd) = (0.0, 0.0);
        for (j, (&hj, &gj)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * k + j) % n];
            sa += hj * v;
            sd += gj * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for (j, (&hj, &gj)) in h.iter().zip(g).enumerate() {
            x[(2 * k + j) % n] += a[k] * hj + d[k] * gj;
        }
    }
    x
}

/// `levels`-deep decomposition. Odd-length inputs at any level are extended
/// by repeating their last sample.
pub fn dwt_multilevel(signal: &[f64], levels: usize) -> Result<WaveletCoeffs> {
    if levels == 0 {
        return Err(Error::Config("wavelet levels must be >= 1".into()));
    }
    let g = db8_highpass();
    let mut current = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for level in 1..=levels {
        if current.len() < FILTER_LEN {
            return Err(Error::SignalTooShort {
                level,
                length: current.len(),
                filter: FILTER_LEN,
            });
        }
        lengths.push(current.len());
        if current.len() % 2 == 1 {
            current.push(*current.last().unwrap());
        }
        let (a, d) = analysis_step(&current, &DB8, &g);
        details.push(d);
        current = a;
    }
    Ok(WaveletCoeffs {
        approx: current,
        details,
        lengths,
    })
}

pub fn idwt_multilevel(coeffs: &WaveletCoeffs) -> Result<Vec<f64>> {
    if coeffs.details.len() != coeffs.lengths.len() {
        return Err(Error::Structure("detail and length lists differ".into()));
    }
    let g = db8_highpass();
    let mut current = coeffs.approx.clone();
    for (d, &len) in coeffs.details.iter().zip(&coeffs.lengths).rev() {
        if d.len() != current.len() {
            return Err(Error::Structure(format!(
                "approximation of {} coefficients paired with {} details",
                current.len(),
                d.len()
            )));
        }
        let mut x = synthesis_step(&current, d, &DB8, &g);
        x.truncate(len);
        current = x;
    }
    Ok(current)
}

/// Smallest level count whose coarsest detail band starts at or below 4 Hz.
pub fn default_levels(sample_rate_hz: u32) -> usize {
    let mut levels = 1;
    while sample_rate_hz as f64 / 2f64.powi(levels as i32 + 1) > 4.0 {
        levels += 1;
    }
    levels
}

/// Relative energy per level, ordered `d1..dL` then `aL`. Sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletEnergy {
    pub fractions: Vec<f64>,
}

impl WaveletEnergy {
    pub fn level_names(levels: usize) -> Vec<String> {
        let mut names: Vec<String> = (1..=levels).map(|l| format!("d{l}")).collect();
        names.push(format!("a{levels}"));
        names
    }
}

pub fn wavedec_bandpower(signal: &[f64], sample_rate_hz: u32) -> Result<WaveletEnergy> {
    let coeffs = dwt_multilevel(signal, default_levels(sample_rate_hz))?;
    let energy = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>();
    let mut e: Vec<f64> = coeffs.details.iter().map(|d| energy(d)).collect();
    e.push(energy(&coeffs.approx));
    let total: f64 = e.iter().sum();
    let fractions = if total > 0.0 {
        e.iter().map(|v| v / total).collect()
    } else {
        // all-zero signal: put everything in the approximation
        let mut f = vec![0.0; e.len()];
        *f.last_mut().unwrap() = 1.0;
        f
    };
    Ok(WaveletEnergy { fractions })
}
