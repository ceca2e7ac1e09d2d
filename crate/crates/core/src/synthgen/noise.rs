//! Gaussian noise with a prescribed power spectral density, generated by
//! drawing random Fourier coefficients and inverting a single FFT.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Draws `n` samples of zero-mean Gaussian noise whose two-sided PSD is
/// `psd(f)` (units² / Hz) for `f > 0`. The DC bin is always zero.
///
/// The transform length is `n` rounded up to a power of two; the tail is
/// discarded. Expected sample variance is `(fs / N) Σ_k psd(f_k)`, i.e. the
/// integral of the two-sided density.
pub fn noise_with_psd<R, F>(rng: &mut R, n: usize, sample_rate_hz: f64, psd: F) -> Vec<f64>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    if n == 0 {
        return Vec::new();
    }
    let len = n.next_power_of_two().max(2);
    let half = len / 2;
    let df = sample_rate_hz / len as f64;
    let scale = len as f64 * sample_rate_hz;

    let mut spec = vec![Complex64::new(0.0, 0.0); len];
    for k in 1..half {
        let p = psd(k as f64 * df);
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        if p > 0.0 {
            let amp = (scale * p / 2.0).sqrt();
            spec[k] = Complex64::new(a * amp, b * amp);
            spec[len - k] = spec[k].conj();
        }
    }
    let p = psd(half as f64 * df);
    let a: f64 = rng.sample(StandardNormal);
    if p > 0.0 {
        spec[half] = Complex64::new(a * (scale * p).sqrt(), 0.0);
    }

    FftPlanner::new().plan_fft_inverse(len).process(&mut spec);
    let norm = 1.0 / len as f64;
    spec.iter().take(n).map(|c| c.re * norm).collect()
}

/// Noise with PSD ∝ 1/max(f, corner)^exponent, scaled to unit expected variance.
///
/// `exponent = 1` is pink noise, `0` is white (minus the DC bin). A positive
/// `corner_hz` flattens the spectrum below that frequency.
pub fn power_law_noise<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    sample_rate_hz: f64,
    exponent: f64,
    corner_hz: f64,
) -> Vec<f64> {
    let shape = move |f: f64| f.max(corner_hz).powf(-exponent);
    let len = n.next_power_of_two().max(2);
    let df = sample_rate_hz / len as f64;
    let half = len / 2;
    // two-sided integral of the unnormalized shape, as the generator sees it
    let total: f64 = (1..half).map(|k| 2.0 * shape(k as f64 * df)).sum::<f64>()
        + shape(half as f64 * df);
    let norm = 1.0 / (total * df);
    noise_with_psd(rng, n, sample_rate_hz, |f| norm * shape(f))
}
