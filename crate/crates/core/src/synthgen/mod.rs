//! Synthetic listening sessions that follow the recording protocol: a lead
//! silence, each song followed by a rating silence, and a trailing silence.
//!
//! Every channel carries 1/f background noise (flat below 1 Hz), a 50 Hz
//! mains component and a per-subject channel gain. During a song, band-limited
//! noise adds a song-specific power profile over the five EEG bands, scaled by
//! `class_separation` and a per-(subject, song) gain that also determines the
//! enjoyment rating. A few channels are replaced by loud white noise.
//!
//! Randomness comes from ChaCha8 seeded with `seed`, one stream per subject
//! (`set_stream(subject_id)`), so subjects can be generated independently and
//! in any order.

pub mod io;
pub mod noise;

pub use io::{read_session, session_dir_name, write_session};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::BandDefinition;
use crate::session::{EventMarker, MarkerKind, Rating, SessionRecording};

/// RMS of the background noise before channel gain, µV.
pub const BACKGROUND_RMS_UV: f64 = 10.0;
/// Below this frequency the background spectrum is flat.
pub const BACKGROUND_CORNER_HZ: f64 = 1.0;
/// Relative band-power boost of a full-level signature band at separation 1.
pub const SIGNATURE_BOOST: f64 = 4.0;
/// Power levels permuted across the five bands to form a song's profile.
pub const SIGNATURE_LEVELS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// Loudness of the k-th planted bad channel relative to the background is
/// `BAD_CHANNEL_BASE_GAIN * 3^k`.
pub const BAD_CHANNEL_BASE_GAIN: f64 = 20.0;
const MAINS_HZ: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_subjects: u32,
    pub n_songs: u32,
    pub song_seconds: u32,
    pub inter_song_silence_seconds: u32,
    pub lead_silence_seconds: u32,
    pub trail_silence_seconds: u32,
    pub sample_rate_hz: u32,
    pub n_channels: u32,
    pub line_noise_amplitude_uv: f64,
    pub n_bad_channels: u32,
    pub class_separation: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_subjects: 20,
            n_songs: 12,
            song_seconds: 120,
            inter_song_silence_seconds: 10,
            lead_silence_seconds: 120,
            trail_silence_seconds: 120,
            sample_rate_hz: 250,
            n_channels: 32,
            line_noise_amplitude_uv: 5.0,
            n_bad_channels: 2,
            class_separation: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_subjects", self.n_subjects),
            ("n_songs", self.n_songs),
            ("song_seconds", self.song_seconds),
            ("inter_song_silence_seconds", self.inter_song_silence_seconds),
            ("lead_silence_seconds", self.lead_silence_seconds),
            ("trail_silence_seconds", self.trail_silence_seconds),
            ("sample_rate_hz", self.sample_rate_hz),
            ("n_channels", self.n_channels),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.class_separation >= 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Config("class_separation must be finite and >= 0".into()));
        }
        if !(self.line_noise_amplitude_uv >= 0.0 && self.line_noise_amplitude_uv.is_finite()) {
            return Err(Error::Config("line_noise_amplitude_uv must be finite and >= 0".into()));
        }
        if self.n_bad_channels >= self.n_channels {
            return Err(Error::Config("n_bad_channels must be below n_channels".into()));
        }
        if self.lead_silence_seconds < crate::session::BASELINE_SECONDS
            || self.inter_song_silence_seconds < crate::session::BASELINE_SECONDS
        {
            log::warn!("silences shorter than the 10 s baseline window; baselines will overlap songs");
        }
        Ok(())
    }

    /// Total recording length in samples.
    pub fn session_samples(&self) -> usize {
        let secs = self.lead_silence_seconds as usize
            + self.n_songs as usize * self.song_seconds as usize
            + (self.n_songs as usize).saturating_sub(1) * self.inter_song_silence_seconds as usize
            + self.trail_silence_seconds as usize;
        secs * self.sample_rate_hz as usize
    }
}

/// Relative band-power levels for `song_id` (1-based), one per default band.
///
/// Songs are spread evenly over the 120 permutations of [`SIGNATURE_LEVELS`];
/// more than 120 songs wrap around.
pub fn song_profile(song_id: u32, n_songs: u32) -> [f64; 5] {
    let n = n_songs.max(1) as usize;
    let rank = ((song_id.saturating_sub(1) as usize % n) * 120 / n) % 120;
    let mut pool: Vec<f64> = SIGNATURE_LEVELS.to_vec();
    let mut out = [0.0; 5];
    let mut r = rank;
    for (slot, radix) in out.iter_mut().zip([24usize, 6, 2, 1, 1]) {
        let pick = r / radix;
        r %= radix;
        *slot = pool.remove(pick);
    }
    out
}

/// Signature gains for one subject: evenly spaced over [0.6, 1.4] in random
/// song order, with enjoyment given by the gain's rank quintile.
fn subject_gains<R: Rng + ?Sized>(rng: &mut R, n_songs: usize) -> Vec<(f64, u8)> {
    let mut order: Vec<usize> = (0..n_songs).collect();
    order.shuffle(rng);
    let mut out = vec![(0.0, 1u8); n_songs];
    for (rank, &song) in order.iter().enumerate() {
        let gain = if n_songs > 1 {
            0.6 + 0.8 * rank as f64 / (n_songs - 1) as f64
        } else {
            1.0
        };
        let enjoyment = 1 + (5 * rank / n_songs) as u8;
        out[song] = (gain, enjoyment);
    }
    out
}

/// The two-sided background density constant C in `C / max(f, corner)` giving
/// RMS `BACKGROUND_RMS_UV` over ±fs/2.
fn background_density(sample_rate_hz: f64) -> f64 {
    let ratio = sample_rate_hz / (2.0 * BACKGROUND_CORNER_HZ);
    BACKGROUND_RMS_UV.powi(2) / (2.0 * (1.0 + ratio.ln()))
}

/// Generates the session of one subject. Pure in `(config, subject_id)`.
pub fn generate_session(config: &GeneratorConfig, subject_id: u32) -> Result<SessionRecording> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(subject_id as u64);

    let fs = config.sample_rate_hz as usize;
    let fs_f = fs as f64;
    let n_ch = config.n_channels as usize;
    let n_songs = config.n_songs as usize;
    let total = config.session_samples();
    let song_len = config.song_seconds as usize * fs;
    let gap_len = config.inter_song_silence_seconds as usize * fs;
    let lead_len = config.lead_silence_seconds as usize * fs;

    // timeline
    let mut song_order: Vec<u32> = (1..=config.n_songs).collect();
    song_order.shuffle(&mut rng);
    let mut markers = vec![
        EventMarker::new(MarkerKind::BeepSingle, 0),
        EventMarker::new(MarkerKind::SilenceStart, 0),
    ];
    let mut spans = Vec::with_capacity(n_songs);
    let mut cursor = lead_len;
    for (slot, &song) in song_order.iter().enumerate() {
        let end = cursor + song_len;
        markers.push(EventMarker::song(MarkerKind::SongStart, cursor, song));
        markers.push(EventMarker::song(MarkerKind::SongEnd, end, song));
        markers.push(EventMarker::new(MarkerKind::BeepDouble, end));
        markers.push(EventMarker::new(MarkerKind::RatingScreen, end));
        markers.push(EventMarker::new(MarkerKind::SilenceStart, end));
        spans.push((song, cursor));
        cursor = end + if slot + 1 < n_songs { gap_len } else { 0 };
    }
    debug_assert_eq!(cursor + config.trail_silence_seconds as usize * fs, total);

    // ratings
    let gains = subject_gains(&mut rng, n_songs);
    let mut ratings = BTreeMap::new();
    for song in 1..=config.n_songs {
        let familiarity = rng.random_range(1..=5u8);
        let enjoyment = gains[song as usize - 1].1;
        ratings.insert(song, Rating { enjoyment, familiarity });
    }

    let channel_gain: Vec<f64> = (0..n_ch).map(|_| rng.random_range(-0.2..0.2f64).exp()).collect();
    let mains_phase: Vec<f64> = (0..n_ch).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    let density = background_density(fs_f);
    let bands = BandDefinition::default();
    let mut samples = Array2::<f64>::zeros((n_ch, total));
    let w = 2.0 * PI * MAINS_HZ / fs_f;
    for (mut row, &phase) in samples.rows_mut().into_iter().zip(&mains_phase) {
        let bg = noise::noise_with_psd(&mut rng, total, fs_f, |f| density / f.max(BACKGROUND_CORNER_HZ));
        for (t, (v, b)) in row.iter_mut().zip(bg).enumerate() {
            *v = b + config.line_noise_amplitude_uv * (w * t as f64 + phase).sin();
        }
    }

    for &(song, start) in &spans {
        let profile = song_profile(song, config.n_songs);
        let amp = (SIGNATURE_BOOST * config.class_separation * gains[song as usize - 1].0).sqrt();
        for ch in 0..n_ch {
            let sig = noise::noise_with_psd(&mut rng, song_len, fs_f, |f| {
                bands
                    .index_of(f)
                    .map_or(0.0, |b| profile[b] * density / f.max(BACKGROUND_CORNER_HZ))
            });
            let mut row = samples.row_mut(ch);
            for (v, s) in row.iter_mut().skip(start).zip(sig) {
                *v += amp * s;
            }
        }
    }

    for (mut row, &g) in samples.rows_mut().into_iter().zip(&channel_gain) {
        row.mapv_inplace(|v| v * g);
    }

    let bad = index::sample(&mut rng, n_ch, config.n_bad_channels as usize).into_vec();
    for (k, &ch) in bad.iter().enumerate() {
        let sd = BACKGROUND_RMS_UV * BAD_CHANNEL_BASE_GAIN * 3f64.powi(k as i32);
        for v in samples.row_mut(ch).iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = sd * z;
        }
    }

    Ok(SessionRecording {
        subject_id,
        sample_rate_hz: config.sample_rate_hz,
        samples,
        markers,
        ratings,
    })
}

/// Signature gain of each song for `subject_id`, as used by
/// [`generate_session`]. Indexed by `song_id - 1`.
pub fn signature_gains(config: &GeneratorConfig, subject_id: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(subject_id as u64);
    let mut song_order: Vec<u32> = (1..=config.n_songs).collect();
    song_order.shuffle(&mut rng);
    subject_gains(&mut rng, config.n_songs as usize)
        .into_iter()
        .map(|(g, _)| g)
        .collect()
}
