//! Zero-phase second-order IIR notch.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Normalised biquad `b0 + b1 z⁻¹ + b2 z⁻²` over `1 + a1 z⁻¹ + a2 z⁻²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Notch at `notch_hz` whose single-pass −3 dB bandwidth is `bandwidth_hz`.
    pub fn notch(sample_rate_hz: f64, notch_hz: f64, bandwidth_hz: f64) -> Result<Self> {
        let nyquist = sample_rate_hz / 2.0;
        if !(notch_hz > 0.0 && notch_hz < nyquist) {
            return Err(Error::Config(format!(
                "notch frequency {notch_hz} Hz must lie in (0, {nyquist})"
            )));
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz < nyquist) {
            return Err(Error::Config(format!("notch bandwidth {bandwidth_hz} Hz is invalid")));
        }
        let w0 = 2.0 * PI * notch_hz / sample_rate_hz;
        let bw = 2.0 * PI * bandwidth_hz / sample_rate_hz;
        let gain = 1.0 / (1.0 + (bw / 2.0).tan());
        let c = w0.cos();
        Ok(Self {
            b: [gain, -2.0 * gain * c, gain],
            a: [-2.0 * gain * c, 2.0 * gain - 1.0],
        })
    }

    /// Pole radius; governs how long transients ring.
    pub fn pole_radius(&self) -> f64 {
        self.a[1].abs().sqrt()
    }

    /// Transposed direct form II state that holds a unit step at steady state.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * dc;
        [dc - b0, z2]
    }

    /// Causal filtering starting from the state `zi * x[0]`.
    fn run(&self, x: &mut [f64], scale_state: bool) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let [mut z1, mut z2] = if scale_state && !x.is_empty() {
            let zi = self.step_state();
            [zi[0] * x[0], zi[1] * x[0]]
        } else {
            [0.0, 0.0]
        };
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }

    /// Forward–backward application with odd-reflection padding long enough
    /// for the transient to decay by ~e⁻⁹.
    pub fn filtfilt(&self, signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        if n < 2 {
            return signal.to_vec();
        }
        let r = self.pole_radius().clamp(0.0, 0.999_999);
        let decay = if r > 0.0 { (9.0 / -r.ln()).ceil() as usize } else { 6 };
        let pad = decay.max(6).min(n - 1);

        let first = signal[0];
        let last = signal[n - 1];
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

        self.run(&mut ext, true);
        ext.reverse();
        self.run(&mut ext, true);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Removes `notch_hz` (mains) from one channel with a zero-phase notch.
pub fn notch_filter(signal: &[f64], sample_rate_hz: f64, notch_hz: f64, bandwidth_hz: f64) -> Result<Vec<f64>> {
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    Ok(Biquad::notch(sample_rate_hz, notch_hz, bandwidth_hz)?.filtfilt(signal))
}
