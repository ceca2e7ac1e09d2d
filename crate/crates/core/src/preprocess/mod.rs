//! Session → epochs: song capture, baseline correction, mains notch, average
//! re-referencing, statistical bad-channel rejection and optional peak
//! amplitude epoch rejection.
//!
//! Steps run on whole 2-minute song segments in the configured order;
//! segmentation into epochs happens last, so filters see the full song.

mod notch;

pub use notch::{notch_filter, Biquad};

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Welch;
use crate::session::{ChannelMask, Epoch, Rating, RejectReason, SessionRecording, BASELINE_SECONDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    Capture,
    Baseline,
    Notch,
    Rereference,
    BadChannels,
    AmplitudeReject,
}

impl Step {
    pub fn as_str(self) -> &'static str {
        match self {
            Step::Capture => "capture",
            Step::Baseline => "baseline",
            Step::Notch => "notch",
            Step::Rereference => "rereference",
            Step::BadChannels => "bad_channels",
            Step::AmplitudeReject => "amplitude_reject",
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub epoch_seconds: u32,
    pub notch_hz: f64,
    pub notch_bandwidth_hz: f64,
    pub rejection_zscore: f64,
    /// Peak |µV| above which an epoch is dropped; `None` disables the step.
    pub amplitude_reject_uv: Option<f64>,
    pub step_order: Vec<Step>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            epoch_seconds: 10,
            notch_hz: 50.0,
            notch_bandwidth_hz: 2.0,
            rejection_zscore: 5.0,
            amplitude_reject_uv: None,
            step_order: vec![
                Step::Capture,
                Step::Baseline,
                Step::Notch,
                Step::Rereference,
                Step::BadChannels,
                Step::AmplitudeReject,
            ],
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if self.epoch_seconds == 0 || 120 % self.epoch_seconds != 0 {
            return Err(Error::Config(format!(
                "epoch_seconds {} must divide 120",
                self.epoch_seconds
            )));
        }
        if !(self.notch_hz > 0.0 && self.notch_hz < sample_rate_hz as f64 / 2.0) {
            return Err(Error::Config(format!(
                "notch_hz {} must be below Nyquist ({} Hz)",
                self.notch_hz,
                sample_rate_hz as f64 / 2.0
            )));
        }
        if self.rejection_zscore.is_nan() || self.rejection_zscore <= 0.0 {
            return Err(Error::Config("rejection_zscore must be positive".into()));
        }
        if self.step_order.first() != Some(&Step::Capture) {
            return Err(Error::Config("step_order must begin with capture".into()));
        }
        let unique: HashSet<&Step> = self.step_order.iter().collect();
        if unique.len() != self.step_order.len() {
            return Err(Error::Config("step_order lists a step twice".into()));
        }
        Ok(())
    }
}

/// One song's samples plus the 10 s that precede it.
#[derive(Debug, Clone, PartialEq)]
pub struct SongSegment {
    pub subject_id: u32,
    pub song_id: u32,
    pub sample_rate_hz: u32,
    pub data: Array2<f64>,
    pub baseline: Array2<f64>,
    pub rating: Rating,
}

/// Cuts every song and its baseline window out of the session, in play order.
pub fn capture_song_segments(session: &SessionRecording) -> Result<Vec<SongSegment>> {
    let base_len = (BASELINE_SECONDS * session.sample_rate_hz) as usize;
    session
        .song_spans()?
        .into_iter()
        .map(|(song_id, start, end)| {
            if start < base_len {
                return Err(Error::Structure(format!(
                    "song {song_id} starts at sample {start}, leaving no room for a {BASELINE_SECONDS} s baseline"
                )));
            }
            if end > session.n_samples() || start >= end {
                return Err(Error::Structure(format!("song {song_id} span {start}..{end} is invalid")));
            }
            Ok(SongSegment {
                subject_id: session.subject_id,
                song_id,
                sample_rate_hz: session.sample_rate_hz,
                data: session.samples.slice(s![.., start..end]).to_owned(),
                baseline: session.samples.slice(s![.., start - base_len..start]).to_owned(),
                rating: session.ratings.get(&song_id).copied().unwrap_or_default(),
            })
        })
        .collect()
}

fn epoch_len(seg: &SongSegment, epoch_seconds: u32) -> Result<usize> {
    let len = (epoch_seconds * seg.sample_rate_hz) as usize;
    if len == 0 || !seg.data.ncols().is_multiple_of(len) {
        return Err(Error::Structure(format!(
            "song {} has {} samples, not a multiple of the {len}-sample epoch",
            seg.song_id,
            seg.data.ncols()
        )));
    }
    Ok(len)
}

/// Splits segments into consecutive non-overlapping epochs, skipping
/// `(song_id, epoch_index)` pairs in `dropped`.
pub fn segment_epochs(
    segments: &[SongSegment],
    epoch_seconds: u32,
    dropped: &HashSet<(u32, u32)>,
) -> Result<Vec<Epoch>> {
    let mut out = Vec::new();
    for seg in segments {
        let len = epoch_len(seg, epoch_seconds)?;
        for (k, chunk) in seg.data.axis_chunks_iter(Axis(1), len).enumerate() {
            if dropped.contains(&(seg.song_id, k as u32)) {
                continue;
            }
            out.push(Epoch {
                subject_id: seg.subject_id,
                song_id: seg.song_id,
                epoch_index: k as u32,
                sample_rate_hz: seg.sample_rate_hz,
                data: chunk.to_owned(),
                baseline: seg.baseline.clone(),
                rating: seg.rating,
            });
        }
    }
    Ok(out)
}

/// Raw music epochs of `epoch_seconds`, each carrying its song's baseline.
pub fn capture_music_epochs(session: &SessionRecording, epoch_seconds: u32) -> Result<Vec<Epoch>> {
    segment_epochs(&capture_song_segments(session)?, epoch_seconds, &HashSet::new())
}

fn subtract_baseline(data: &mut Array2<f64>, baseline: ArrayView2<'_, f64>) {
    for (mut row, base) in data.rows_mut().into_iter().zip(baseline.rows()) {
        let m = base.mean().unwrap_or(0.0);
        row.mapv_inplace(|v| v - m);
    }
}

/// Subtracts each channel's baseline mean from its data; the baseline is kept as is.
pub fn baseline_correct(epoch: &Epoch) -> Epoch {
    let mut out = epoch.clone();
    subtract_baseline(&mut out.data, epoch.baseline.view());
    out
}

/// Subtracts the instantaneous mean of the good channels from every good
/// channel. Bad channels pass through untouched.
pub fn average_rereference(segment: ArrayView2<'_, f64>, mask: &ChannelMask) -> Result<Array2<f64>> {
    if mask.len() != segment.nrows() {
        return Err(Error::Structure(format!(
            "mask covers {} channels, segment has {}",
            mask.len(),
            segment.nrows()
        )));
    }
    let good: Vec<usize> = (0..mask.len()).filter(|&c| mask.good[c]).collect();
    if good.len() < 2 {
        return Err(Error::InsufficientChannels {
            required: 2,
            available: good.len(),
        });
    }
    let mut out = segment.to_owned();
    let n_good = good.len() as f64;
    for t in 0..segment.ncols() {
        let mean = good.iter().map(|&c| segment[[c, t]]).sum::<f64>() / n_good;
        for &c in &good {
            out[[c, t]] -= mean;
        }
    }
    Ok(out)
}

/// Per-channel scalar measures used for rejection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMeasures {
    /// Mean absolute deviation about the mean.
    pub probability: f64,
    /// Excess kurtosis.
    pub kurtosis: f64,
    /// Power in 1–45 Hz.
    pub spectrum: f64,
}

pub fn channel_measures(channel: ndarray::ArrayView1<'_, f64>, welch: &Welch) -> Result<ChannelMeasures> {
    let n = channel.len() as f64;
    let mean = channel.sum() / n;
    let (mut abs, mut m2, mut m4) = (0.0, 0.0, 0.0);
    for &v in channel {
        let d = v - mean;
        abs += d.abs();
        let d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    let (m2, m4) = (m2 / n, m4 / n);
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    let spectrum = welch.estimate(channel)?.band_power(1.0, 45.0);
    Ok(ChannelMeasures {
        probability: abs / n,
        kurtosis,
        spectrum,
    })
}

/// Population z-scores; a (numerically) constant vector scores all zeros.
fn zscores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sd.is_nan() || sd <= 1e-12 * scale {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// Flags channels whose probability, kurtosis or spectrum measure has
/// |z| > `rejection_zscore` across channels.
pub fn reject_bad_channels(
    segment: ArrayView2<'_, f64>,
    sample_rate_hz: u32,
    rejection_zscore: f64,
) -> Result<ChannelMask> {
    let n_ch = segment.nrows();
    if n_ch < 4 {
        return Err(Error::InsufficientChannels {
            required: 4,
            available: n_ch,
        });
    }
    let welch = Welch::one_second(sample_rate_hz);
    let measures: Vec<ChannelMeasures> = segment
        .rows()
        .into_iter()
        .map(|row| channel_measures(row, &welch))
        .collect::<Result<_>>()?;
    let tests = [
        (RejectReason::Probability, zscores(&measures.iter().map(|m| m.probability).collect::<Vec<_>>())),
        (RejectReason::Kurtosis, zscores(&measures.iter().map(|m| m.kurtosis).collect::<Vec<_>>())),
        (RejectReason::Spectrum, zscores(&measures.iter().map(|m| m.spectrum).collect::<Vec<_>>())),
    ];
    let mut mask = ChannelMask::all_good(n_ch);
    for (reason, z) in &tests {
        for (c, &zc) in z.iter().enumerate() {
            if zc.abs() > rejection_zscore {
                mask.good[c] = false;
                mask.reasons[c].insert(*reason);
            }
        }
    }
    Ok(mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub epochs: Vec<Epoch>,
    pub mask: ChannelMask,
    /// `(song_id, epoch_index)` of epochs removed by amplitude rejection.
    pub dropped: Vec<(u32, u32)>,
    /// One line per rejection decision.
    pub log: Vec<String>,
}

fn concat_segments(segments: &[SongSegment]) -> Result<Array2<f64>> {
    let views: Vec<ArrayView2<'_, f64>> = segments.iter().map(|s| s.data.view()).collect();
    ndarray::concatenate(Axis(1), &views).map_err(|e| Error::Structure(e.to_string()))
}

fn run_step(
    step: Step,
    segments: &mut [SongSegment],
    mask: &mut ChannelMask,
    dropped: &mut BTreeSet<(u32, u32)>,
    log: &mut Vec<String>,
    config: &PreprocessConfig,
) -> Result<()> {
    match step {
        Step::Capture => {}
        Step::Baseline => segments.par_iter_mut().for_each(|seg| {
            let base = seg.baseline.clone();
            subtract_baseline(&mut seg.data, base.view());
        }),
        Step::Notch => segments.par_iter_mut().try_for_each(|seg| -> Result<()> {
            let fs = seg.sample_rate_hz as f64;
            for mut row in seg.data.rows_mut() {
                let filtered = notch_filter(&row.to_vec(), fs, config.notch_hz, config.notch_bandwidth_hz)?;
                row.assign(&ndarray::ArrayView1::from(&filtered));
            }
            Ok(())
        })?,
        Step::Rereference => segments.par_iter_mut().try_for_each(|seg| -> Result<()> {
            seg.data = average_rereference(seg.data.view(), mask)?;
            Ok(())
        })?,
        Step::BadChannels => {
            let Some(first) = segments.first() else { return Ok(()) };
            let fs = first.sample_rate_hz;
            let subject = first.subject_id;
            let all = concat_segments(segments)?;
            *mask = reject_bad_channels(all.view(), fs, config.rejection_zscore)?;
            for c in mask.rejected() {
                let reasons: Vec<String> = mask.reasons[c].iter().map(|r| r.to_string()).collect();
                log.push(format!(
                    "subject {subject}: rejected channel {c} ({})",
                    reasons.join(", ")
                ));
            }
            mask.check_quorum()?;
        }
        Step::AmplitudeReject => {
            let Some(limit) = config.amplitude_reject_uv else { return Ok(()) };
            for seg in segments.iter() {
                let len = epoch_len(seg, config.epoch_seconds)?;
                for (k, chunk) in seg.data.axis_chunks_iter(Axis(1), len).enumerate() {
                    let peak = chunk
                        .rows()
                        .into_iter()
                        .enumerate()
                        .filter(|(c, _)| mask.good[*c])
                        .flat_map(|(_, r)| r.into_iter().map(|v| v.abs()).collect::<Vec<_>>())
                        .fold(0.0f64, f64::max);
                    if peak > limit {
                        dropped.insert((seg.song_id, k as u32));
                        log.push(format!(
                            "subject {}: dropped song {} epoch {k} (peak {peak:.1} uV > {limit} uV)",
                            seg.subject_id, seg.song_id
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Runs `config.step_order` over one session and segments the result.
pub fn run_pipeline(session: &SessionRecording, config: &PreprocessConfig) -> Result<PipelineOutput> {
    config.validate(session.sample_rate_hz)?;
    let mut segments = capture_song_segments(session).map_err(|e| e.in_step("capture"))?;
    let mut mask = ChannelMask::all_good(session.n_channels());
    let mut dropped = BTreeSet::new();
    let mut log = Vec::new();
    for &step in &config.step_order {
        run_step(step, &mut segments, &mut mask, &mut dropped, &mut log, config)
            .map_err(|e| e.in_step(step.as_str()))?;
    }
    for line in &log {
        log::info!("{line}");
    }
    let dropped_set: HashSet<(u32, u32)> = dropped.iter().copied().collect();
    let epochs = segment_epochs(&segments, config.epoch_seconds, &dropped_set)?;
    Ok(PipelineOutput {
        epochs,
        mask,
        dropped: dropped.into_iter().collect(),
        log,
    })
}
