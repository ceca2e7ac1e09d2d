use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use songdecode::preprocess::{
    average_rereference, notch_filter, reject_bad_channels, run_pipeline, PreprocessConfig, Step,
};
use songdecode::session::{ChannelMask, RejectReason};
use songdecode::synthgen::{generate_session, GeneratorConfig};

fn white(seed: u64, channels: usize, n: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((channels, n), || rng.sample(StandardNormal))
}

fn gain_db(freq: f64) -> f64 {
    let fs = 250.0;
    let n = 5000;
    let x: Vec<f64> = (0..n).map(|t| (2.0 * std::f64::consts::PI * freq * t as f64 / fs).sin()).collect();
    let y = notch_filter(&x, fs, 50.0, 2.0).unwrap();
    let rms = |v: &[f64]| (v[1000..4000].iter().map(|a| a * a).sum::<f64>() / 3000.0).sqrt();
    20.0 * (rms(&y) / rms(&x)).log10()
}

#[test]
fn notch_response_shape() {
    assert!(gain_db(50.0) < -40.0);
    for f in [1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0] {
        assert!(gain_db(f).abs() < 0.1, "{f} Hz: {} dB", gain_db(f));
    }
    assert!(gain_db(49.0) < -1.0 && gain_db(51.0) < -1.0);
}

#[test]
fn notch_is_zero_phase() {
    let fs = 250.0;
    let x: Vec<f64> = (0..5000).map(|t| (2.0 * std::f64::consts::PI * 10.0 * t as f64 / fs).sin()).collect();
    let y = notch_filter(&x, fs, 50.0, 2.0).unwrap();
    let err = x[1000..4000].iter().zip(&y[1000..4000]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 0.01, "phase or gain error {err}");
}

#[test]
fn notch_rejects_bad_parameters() {
    assert!(notch_filter(&[0.0; 100], 250.0, 200.0, 2.0).is_err());
    assert!(notch_filter(&[0.0; 100], 250.0, 50.0, 0.0).is_err());
}

#[test]
fn clean_channels_are_rarely_flagged() {
    let mut flagged = 0;
    let trials = 100;
    for seed in 0..trials {
        let x = white(seed, 32, 250 * 60);
        flagged += 32 - reject_bad_channels(x.view(), 250, 5.0).unwrap().n_good();
    }
    let rate = flagged as f64 / (trials as f64 * 32.0);
    assert!(rate < 0.05, "false positive rate {rate}");
}

#[test]
fn loud_channel_is_flagged() {
    for seed in 0..10 {
        let mut x = white(100 + seed, 32, 250 * 60);
        let target = (seed as usize * 7) % 32;
        x.row_mut(target).mapv_inplace(|v| 50.0 * v);
        let mask = reject_bad_channels(x.view(), 250, 5.0).unwrap();
        assert_eq!(mask.rejected().collect::<Vec<_>>(), vec![target]);
        assert!(mask.reasons[target].contains(&RejectReason::Probability));
        assert!(mask.reasons[target].contains(&RejectReason::Spectrum));
    }
}

#[test]
fn identical_channels_are_kept() {
    let row = white(3, 1, 2500);
    let x = Array2::from_shape_fn((8, 2500), |(_, t)| row[[0, t]]);
    assert_eq!(reject_bad_channels(x.view(), 250, 5.0).unwrap().n_good(), 8);
}

#[test]
fn too_few_channels_is_an_error() {
    assert!(reject_bad_channels(white(1, 3, 2500).view(), 250, 5.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rereference_zero_mean_and_idempotent(seed in 0u64..10_000, channels in 2usize..12, bad in proptest::collection::vec(any::<bool>(), 12)) {
        let mut x = white(seed, channels, 200);
        x.mapv_inplace(|v| 30.0 * v + 7.0);
        let mut mask = ChannelMask::all_good(channels);
        for (g, &b) in mask.good.iter_mut().zip(&bad) {
            *g = !b;
        }
        if mask.n_good() < 2 {
            prop_assert!(average_rereference(x.view(), &mask).is_err());
            return Ok(());
        }
        let once = average_rereference(x.view(), &mask).unwrap();
        let good: Vec<usize> = (0..channels).filter(|&c| mask.good[c]).collect();
        let mean = once.select(Axis(0), &good).mean_axis(Axis(0)).unwrap();
        prop_assert!(mean.iter().all(|m| m.abs() < 1e-10));
        let twice = average_rereference(once.view(), &mask).unwrap();
        prop_assert!((&twice - &once).iter().all(|d| d.abs() < 1e-10));
        // good channels share one per-sample shift; bad channels pass through
        let shift = &x - &once;
        for c in 0..channels {
            let d = &shift.row(c) - &shift.row(good[0]);
            if mask.good[c] {
                prop_assert!(d.iter().all(|v| v.abs() < 1e-9));
            } else {
                prop_assert!(shift.row(c).iter().all(|&v| v == 0.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn rejection_is_permutation_equivariant(seed in 0u64..1000, loud in 0usize..16, shift in 1usize..16) {
        let mut x = white(seed, 16, 2500);
        x.row_mut(loud).mapv_inplace(|v| 40.0 * v);
        let perm: Vec<usize> = (0..16).map(|i| (i + shift) % 16).collect();
        let permuted = x.select(Axis(0), &perm);
        let a = reject_bad_channels(x.view(), 250, 5.0).unwrap();
        let b = reject_bad_channels(permuted.view(), 250, 5.0).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(b.good[i], a.good[p]);
            prop_assert_eq!(&b.reasons[i], &a.reasons[p]);
        }
    }
}

fn small_config(seed: u64, channels: u32, bad: u32) -> GeneratorConfig {
    GeneratorConfig {
        n_subjects: 1,
        n_channels: channels,
        n_bad_channels: bad,
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn pipeline_yields_144_epochs_per_subject() {
    let session = generate_session(&small_config(21, 16, 0), 1).unwrap();
    let out = run_pipeline(&session, &PreprocessConfig::default()).unwrap();
    assert_eq!(out.epochs.len(), 144);
    assert!(out.dropped.is_empty());
    for song in 1..=12u32 {
        let idx: Vec<u32> = out.epochs.iter().filter(|e| e.song_id == song).map(|e| e.epoch_index).collect();
        assert_eq!(idx, (0..12).collect::<Vec<_>>());
    }
    for e in &out.epochs {
        assert_eq!(e.data.dim(), (16, 2500));
        assert_eq!(e.rating, session.ratings[&e.song_id]);
    }
    let long = PreprocessConfig {
        epoch_seconds: 120,
        ..PreprocessConfig::default()
    };
    assert_eq!(run_pipeline(&session, &long).unwrap().epochs.len(), 12);
}

#[test]
fn planted_bad_channels_are_rejected_with_32_channels() {
    let session = generate_session(&small_config(22, 32, 2), 1).unwrap();
    let var: Vec<f64> = session.samples.rows().into_iter().map(|r| r.var(0.0)).collect();
    let median = {
        let mut v = var.clone();
        v.sort_by(f64::total_cmp);
        v[16]
    };
    let planted: Vec<usize> = (0..32).filter(|&c| var[c] > 100.0 * median).collect();
    assert_eq!(planted.len(), 2);
    let loudest = if var[planted[0]] > var[planted[1]] { planted[0] } else { planted[1] };

    // Default order re-references first, so the loudest channel leaks into
    // every other channel through the average; it is still caught.
    let out = run_pipeline(&session, &PreprocessConfig::default()).unwrap();
    let rejected: Vec<usize> = out.mask.rejected().collect();
    assert!(rejected.contains(&loudest), "rejected {rejected:?}");
    assert!(out.log.iter().any(|l| l.contains("rejected channel")));

    // Rejecting first keeps the quieter outlier out of the others, but one
    // z-score pass over a two-outlier set still only isolates the loudest.
    let early = PreprocessConfig {
        step_order: vec![
            Step::Capture,
            Step::Baseline,
            Step::Notch,
            Step::BadChannels,
            Step::Rereference,
            Step::AmplitudeReject,
        ],
        ..PreprocessConfig::default()
    };
    let out = run_pipeline(&session, &early).unwrap();
    let rejected: Vec<usize> = out.mask.rejected().collect();
    assert!(rejected.contains(&loudest));
    assert!(rejected.iter().all(|c| planted.contains(c)), "rejected {rejected:?}");
}

#[test]
fn amplitude_rejection_drops_epochs() {
    let session = generate_session(&small_config(23, 8, 0), 1).unwrap();
    let cfg = PreprocessConfig {
        amplitude_reject_uv: Some(1e-3),
        ..PreprocessConfig::default()
    };
    let out = run_pipeline(&session, &cfg).unwrap();
    assert!(out.epochs.is_empty());
    assert_eq!(out.dropped.len(), 144);
}

#[test]
fn step_order_is_validated() {
    let cfg = PreprocessConfig {
        step_order: vec![Step::Notch, Step::Capture],
        ..PreprocessConfig::default()
    };
    assert!(cfg.validate(250).is_err());
    let cfg = PreprocessConfig {
        epoch_seconds: 7,
        ..PreprocessConfig::default()
    };
    assert!(cfg.validate(250).is_err());
}
