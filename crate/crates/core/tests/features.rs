use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use songdecode::features::{
    build_feature_matrix, dfa, dwt_multilevel, entropy_features, idwt_multilevel, parse_selection, pca_project,
    spectopo_bandpower, wavedec_bandpower, BandDefinition, FeatureFamily, Welch,
};
use songdecode::session::{Epoch, Rating};

fn gaussian(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn sine(freq: f64, amp: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|t| amp * (2.0 * std::f64::consts::PI * freq * t as f64 / fs).sin())
        .collect()
}

/// Straightforward DFA: cumulative sum of the demeaned signal, per-box OLS
/// line, RMS of all residuals.
fn naive_fluctuation(x: &[f64], n: usize) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut profile = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for v in x {
        acc += v - mean;
        profile.push(acc);
    }
    let boxes = x.len() / n;
    let mut sq = 0.0;
    for b in 0..boxes {
        let seg = &profile[b * n..(b + 1) * n];
        let tm = (n as f64 - 1.0) / 2.0;
        let ym = seg.iter().sum::<f64>() / n as f64;
        let sxy: f64 = seg.iter().enumerate().map(|(t, y)| (t as f64 - tm) * (y - ym)).sum();
        let sxx: f64 = (0..n).map(|t| (t as f64 - tm).powi(2)).sum();
        let slope = sxy / sxx;
        for (t, y) in seg.iter().enumerate() {
            let fit = ym + slope * (t as f64 - tm);
            sq += (y - fit).powi(2);
        }
    }
    (sq / (boxes * n) as f64).sqrt()
}

#[test]
fn dfa_matches_naive_fluctuation() {
    let x = gaussian(3, 2000);
    let sizes = [4usize, 8, 16, 50, 125, 500];
    let r = dfa(&x, Some(&sizes)).unwrap();
    for &(n, f) in &r.fluctuations {
        let want = naive_fluctuation(&x, n);
        assert!((f - want).abs() <= 1e-9 * want.max(1.0), "n={n}: {f} vs {want}");
    }
    let lx: Vec<f64> = sizes.iter().map(|&n| (n as f64).log2()).collect();
    let ly: Vec<f64> = sizes.iter().map(|&n| naive_fluctuation(&x, n).log2()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / lx.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
    assert!((r.alpha - slope).abs() < 1e-9);
    assert!((r.dim - (3.0 - r.alpha)).abs() < 1e-12);
}

#[test]
fn dfa_alpha_is_scale_invariant() {
    let x = gaussian(4, 4000);
    let y: Vec<f64> = x.iter().map(|v| 37.0 * v - 5.0).collect();
    let a = dfa(&x, None).unwrap();
    let b = dfa(&y, None).unwrap();
    assert!((a.alpha - b.alpha).abs() < 1e-9);
    assert!((b.intercept - a.intercept - 37f64.log2()).abs() < 1e-9);
}

#[test]
fn entropy_hand_values() {
    let p = entropy_features(&[0.5, -2.0]);
    let e1: f64 = 0.25 + 1e-12;
    let e2: f64 = 4.0 + 1e-12;
    assert!((p.log_energy - (e1.ln() + e2.ln())).abs() < 1e-12);
    assert!((p.shannon - (-(e1 * e1.ln()) - e2 * e2.ln())).abs() < 1e-12);
}

#[test]
fn welch_white_noise_integrates_to_variance() {
    let fs = 250.0;
    let x = gaussian(5, 250 * 120);
    let psd = Welch::one_second(250).estimate(ndarray::ArrayView1::from(&x)).unwrap();
    let total = psd.band_power(0.0, fs / 2.0 + 1.0);
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!((total / var - 1.0).abs() < 0.05, "total {total} var {var}");
}

#[test]
fn welch_sine_power_lands_in_its_band() {
    let fs = 250.0;
    let x = sine(10.0, 3.0, fs, 250 * 60);
    let psd = Welch::one_second(250).estimate(ndarray::ArrayView1::from(&x)).unwrap();
    let alpha = psd.band_power(8.0, 13.0);
    assert!((alpha / 4.5 - 1.0).abs() < 0.02, "alpha band power {alpha}");
    assert!(psd.band_power(20.0, 100.0) < 1e-6 * alpha);
}

fn epoch_from(rows: Vec<Vec<f64>>, fs: u32) -> Epoch {
    let n = rows[0].len();
    let data = Array2::from_shape_fn((rows.len(), n), |(c, t)| rows[c][t]);
    Epoch {
        subject_id: 1,
        song_id: 3,
        epoch_index: 0,
        sample_rate_hz: fs,
        baseline: Array2::zeros((rows.len(), 10 * fs as usize)),
        data,
        rating: Rating {
            enjoyment: 4,
            familiarity: 2,
        },
    }
}

#[test]
fn spectopo_peaks_in_the_driven_band() {
    let fs = 250.0;
    let noise = gaussian(6, 2500);
    let rows = vec![
        sine(10.0, 10.0, fs, 2500).iter().zip(&noise).map(|(a, b)| a + 0.1 * b).collect(),
        sine(20.0, 10.0, fs, 2500).iter().zip(&noise).map(|(a, b)| a + 0.1 * b).collect(),
    ];
    let bp = spectopo_bandpower(&epoch_from(rows, 250), &BandDefinition::default()).unwrap();
    let alpha = bp.band_names.iter().position(|n| n == "alpha").unwrap();
    let beta = bp.band_names.iter().position(|n| n == "beta").unwrap();
    assert!(bp.values[0][alpha] > bp.values[0][beta]);
    assert!(bp.values[1][beta] > bp.values[1][alpha]);
    let sel = parse_selection("spectopo").unwrap();
    let ds = build_feature_matrix(
        &[epoch_from(
            vec![sine(10.0, 10.0, fs, 2500), sine(20.0, 10.0, fs, 2500)],
            250,
        )],
        &sel,
    )
    .unwrap();
    let col = |name: &str| ds.feature_names.iter().position(|n| n == name).unwrap();
    let row = ds.features.row(0);
    assert!(row[col("ch0_spectopo_alpha")] > row[col("ch0_spectopo_beta")] + 20.0);
    assert!(row[col("ch1_spectopo_beta")] > row[col("ch1_spectopo_alpha")] + 20.0);
}

#[test]
fn feature_matrix_layout() {
    let fs = 250.0;
    let rows: Vec<Vec<f64>> = (0..3).map(|c| gaussian(10 + c, 2500)).collect();
    let ep = epoch_from(rows, fs as u32);
    let sel = parse_selection("spectopo,wavedec,dfa,entropy").unwrap();
    let ds = build_feature_matrix(&[ep.clone(), ep], &sel).unwrap();
    assert_eq!(ds.n_rows(), 2);
    assert_eq!(ds.labels, vec![3, 3]);
    let per_channel = ds.width() / 3;
    assert_eq!(ds.width() % 3, 0);
    // 5 bands, 3 dfa scalars, 2 entropy scalars, wavelet levels plus approximation
    assert!(per_channel > 10);
    for (i, name) in ds.feature_names.iter().enumerate() {
        let ch = i / per_channel;
        assert!(name.starts_with(&format!("ch{ch}_")), "{name}");
    }
    let ch0: Vec<&String> = ds.feature_names[..per_channel].iter().collect();
    let mut sorted = ch0.clone();
    sorted.sort();
    assert_eq!(ch0, sorted);
    assert_eq!(ds.features.row(0), ds.features.row(1));
    assert!(ds.features.iter().all(|v| v.is_finite()));
    assert!(FeatureFamily::Wavedec.to_string() == "wavedec");
}

#[test]
fn wavedec_fractions_sum_to_one() {
    let x = gaussian(12, 2500);
    let e = wavedec_bandpower(&x, 250).unwrap();
    let s: f64 = e.fractions.iter().sum();
    assert!((s - 1.0).abs() < 1e-12);
    assert!(e.fractions.iter().all(|&f| f >= 0.0));
}

#[test]
fn pca_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 400;
    let x = Array2::from_shape_fn((n, 4), |(_, c)| (c as f64 + 1.0) * rng.sample::<f64, _>(StandardNormal));
    let mut x = x;
    let first = x.column(0).to_owned();
    x.column_mut(1).scaled_add(2.0, &first);
    let p = pca_project(x.view(), 2, false).unwrap();
    let means = p.coords.mean_axis(Axis(0)).unwrap();
    assert!(means.iter().all(|m| m.abs() < 1e-10));
    for (d, &ev) in p.eigenvalues.iter().enumerate() {
        let var = p.coords.column(d).var(1.0);
        assert!((var - ev).abs() < 1e-9 * ev);
    }
    let gram = p.components.dot(&p.components.t());
    for i in 0..2 {
        for j in 0..2 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((gram[[i, j]] - want).abs() < 1e-10);
        }
    }
    assert!(p.eigenvalues[0] >= p.eigenvalues[1]);
    let total_var: f64 = (0..4).map(|c| x.column(c).var(1.0)).sum();
    assert!((p.explained_variance_ratio[0] - p.eigenvalues[0] / total_var).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dwt_roundtrip(seed in 0u64..1000, n in 64usize..3000, levels in 1usize..6) {
        prop_assume!(n >> levels >= 16);
        let x = gaussian(seed, n);
        let c = dwt_multilevel(&x, levels).unwrap();
        let y = idwt_multilevel(&c).unwrap();
        prop_assert_eq!(y.len(), n);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-9);
    }

    #[test]
    fn dwt_is_linear(seed in 0u64..1000, a in -5.0f64..5.0) {
        let x = gaussian(seed, 512);
        let y = gaussian(seed + 1, 512);
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let (cx, cy, cz) = (dwt_multilevel(&x, 4).unwrap(), dwt_multilevel(&y, 4).unwrap(), dwt_multilevel(&z, 4).unwrap());
        for (i, v) in cz.approx.iter().enumerate() {
            prop_assert!((v - (a * cx.approx[i] + cy.approx[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn entropy_is_order_invariant(mut v in proptest::collection::vec(-100.0f64..100.0, 1..64)) {
        let a = entropy_features(&v);
        v.reverse();
        let b = entropy_features(&v);
        prop_assert!((a.log_energy - b.log_energy).abs() <= 1e-9 * a.log_energy.abs().max(1.0));
        prop_assert!((a.shannon - b.shannon).abs() <= 1e-9 * a.shannon.abs().max(1.0));
    }
}
