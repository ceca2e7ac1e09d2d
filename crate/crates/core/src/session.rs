//! Recording-level domain types: sessions, event markers, epochs and channel masks.
//!
//! Samples are held as `channels × time` matrices of microvolts in 64-bit
//! floats. Everything here is plain data; nothing mutates after construction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling rates the acquisition system supports natively.
pub const STANDARD_SAMPLE_RATES: [u32; 2] = [250, 1000];

/// Length of the pre-song window used for baseline correction.
pub const BASELINE_SECONDS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerKind {
    SilenceStart,
    BeepSingle,
    SongStart,
    SongEnd,
    BeepDouble,
    RatingScreen,
}

impl MarkerKind {
    pub const ALL: [MarkerKind; 6] = [
        MarkerKind::SilenceStart,
        MarkerKind::BeepSingle,
        MarkerKind::SongStart,
        MarkerKind::SongEnd,
        MarkerKind::BeepDouble,
        MarkerKind::RatingScreen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MarkerKind::SilenceStart => "silence_start",
            MarkerKind::BeepSingle => "beep_single",
            MarkerKind::SongStart => "song_start",
            MarkerKind::SongEnd => "song_end",
            MarkerKind::BeepDouble => "beep_double",
            MarkerKind::RatingScreen => "rating_screen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether markers of this kind carry a song id.
    pub fn has_song(self) -> bool {
        matches!(self, MarkerKind::SongStart | MarkerKind::SongEnd)
    }
}

impl fmt::Display for MarkerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMarker {
    pub kind: MarkerKind,
    pub sample_index: usize,
    pub song_id: Option<u32>,
}

impl EventMarker {
    pub fn new(kind: MarkerKind, sample_index: usize) -> Self {
        Self {
            kind,
            sample_index,
            song_id: None,
        }
    }

    pub fn song(kind: MarkerKind, sample_index: usize, song_id: u32) -> Self {
        Self {
            kind,
            sample_index,
            song_id: Some(song_id),
        }
    }
}

/// Post-song self report, both on a 1–5 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rating {
    pub enjoyment: u8,
    pub familiarity: u8,
}

impl Rating {
    pub fn is_valid(&self) -> bool {
        (1..=5).contains(&self.enjoyment) && (1..=5).contains(&self.familiarity)
    }
}

/// One subject's full multichannel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecording {
    pub subject_id: u32,
    pub sample_rate_hz: u32,
    /// `channels × time`, microvolts. The reference channel, when present,
    /// is an ordinary row.
    pub samples: Array2<f64>,
    pub markers: Vec<EventMarker>,
    pub ratings: BTreeMap<u32, Rating>,
}

impl SessionRecording {
    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    /// `(song_id, start, end)` for every song, in temporal order.
    pub fn song_spans(&self) -> Result<Vec<(u32, usize, usize)>> {
        let mut open: BTreeMap<u32, usize> = BTreeMap::new();
        let mut spans = Vec::new();
        for m in &self.markers {
            match (m.kind, m.song_id) {
                (MarkerKind::SongStart, Some(id)) => {
                    if open.insert(id, m.sample_index).is_some() {
                        return Err(Error::Structure(format!("song {id} started twice")));
                    }
                }
                (MarkerKind::SongEnd, Some(id)) => {
                    let start = open.remove(&id).ok_or_else(|| {
                        Error::Structure(format!("song_end without song_start for song {id}"))
                    })?;
                    spans.push((id, start, m.sample_index));
                }
                _ => {}
            }
        }
        if let Some((id, _)) = open.into_iter().next() {
            return Err(Error::Structure(format!("missing song_end marker for song {id}")));
        }
        spans.sort_by_key(|&(_, start, _)| start);
        Ok(spans)
    }
}

/// A single invariant violation reported by [`validate_session`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonstandardSampleRate(u32),
    NoChannels,
    MarkerOutOfRange { marker: usize, sample_index: usize, n_samples: usize },
    MarkersUnsorted { marker: usize },
    SongIdMismatch { marker: usize, kind: MarkerKind },
    SongIdOutOfRange { marker: usize, song_id: u32 },
    MissingRating { song_id: u32 },
    UnexpectedRating { song_id: u32 },
    RatingOutOfRange { song_id: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonstandardSampleRate(hz) => {
                write!(f, "nonstandard sample rate {hz} Hz")
            }
            Violation::NoChannels => write!(f, "session has no channels"),
            Violation::MarkerOutOfRange { marker, sample_index, n_samples } => write!(
                f,
                "marker out of range: marker {marker} at sample {sample_index} (length {n_samples})"
            ),
            Violation::MarkersUnsorted { marker } => {
                write!(f, "markers not sorted at marker {marker}")
            }
            Violation::SongIdMismatch { marker, kind } => {
                write!(f, "song id presence does not match kind {kind} at marker {marker}")
            }
            Violation::SongIdOutOfRange { marker, song_id } => {
                write!(f, "song id {song_id} out of range at marker {marker}")
            }
            Violation::MissingRating { song_id } => write!(f, "missing rating for song {song_id}"),
            Violation::UnexpectedRating { song_id } => {
                write!(f, "rating for song {song_id} which was never played")
            }
            Violation::RatingOutOfRange { song_id } => {
                write!(f, "rating for song {song_id} outside 1-5")
            }
        }
    }
}

/// Collects every invariant violation in `session`. An empty list means valid.
pub fn validate_session(session: &SessionRecording) -> Vec<Violation> {
    let mut out = Vec::new();
    if !STANDARD_SAMPLE_RATES.contains(&session.sample_rate_hz) {
        out.push(Violation::NonstandardSampleRate(session.sample_rate_hz));
    }
    if session.n_channels() == 0 {
        out.push(Violation::NoChannels);
    }
    let n = session.n_samples();
    let mut played = BTreeSet::new();
    for (i, m) in session.markers.iter().enumerate() {
        if m.sample_index >= n {
            out.push(Violation::MarkerOutOfRange {
                marker: i,
                sample_index: m.sample_index,
                n_samples: n,
            });
        }
        if i > 0 && session.markers[i - 1].sample_index > m.sample_index {
            out.push(Violation::MarkersUnsorted { marker: i });
        }
        if m.kind.has_song() != m.song_id.is_some() {
            out.push(Violation::SongIdMismatch { marker: i, kind: m.kind });
        }
        if let Some(id) = m.song_id {
            if id == 0 {
                out.push(Violation::SongIdOutOfRange { marker: i, song_id: id });
            }
            if m.kind == MarkerKind::SongStart {
                played.insert(id);
            }
        }
    }
    for &id in &played {
        if !session.ratings.contains_key(&id) {
            out.push(Violation::MissingRating { song_id: id });
        }
    }
    for (&id, rating) in &session.ratings {
        if !played.contains(&id) {
            out.push(Violation::UnexpectedRating { song_id: id });
        }
        if !rating.is_valid() {
            out.push(Violation::RatingOutOfRange { song_id: id });
        }
    }
    out
}

/// Copies columns `start..end` of the session samples.
pub fn extract_segment(session: &SessionRecording, start: usize, end: usize) -> Result<Array2<f64>> {
    let n = session.n_samples();
    if start >= end || end > n {
        return Err(Error::Range(format!(
            "segment {start}..{end} outside recording of {n} samples"
        )));
    }
    Ok(session.samples.slice(s![.., start..end]).to_owned())
}

/// A labeled window of one song.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub subject_id: u32,
    pub song_id: u32,
    /// Position of this window within its song, from 0.
    pub epoch_index: u32,
    pub sample_rate_hz: u32,
    /// `channels × samples`, microvolts.
    pub data: Array2<f64>,
    /// The 10 s preceding song onset.
    pub baseline: Array2<f64>,
    pub rating: Rating,
}

impl Epoch {
    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn seconds(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Probability,
    Kurtosis,
    Spectrum,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Probability => "probability",
            RejectReason::Kurtosis => "kurtosis",
            RejectReason::Spectrum => "spectrum",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMask {
    pub good: Vec<bool>,
    /// Empty for good channels.
    pub reasons: Vec<BTreeSet<RejectReason>>,
}

impl ChannelMask {
    pub fn all_good(n_channels: usize) -> Self {
        Self {
            good: vec![true; n_channels],
            reasons: vec![BTreeSet::new(); n_channels],
        }
    }

    pub fn len(&self) -> usize {
        self.good.len()
    }

    pub fn is_empty(&self) -> bool {
        self.good.is_empty()
    }

    pub fn n_good(&self) -> usize {
        self.good.iter().filter(|&&g| g).count()
    }

    pub fn rejected(&self) -> impl Iterator<Item = usize> + '_ {
        self.good.iter().enumerate().filter(|(_, &g)| !g).map(|(i, _)| i)
    }

    /// At least half of the channels must survive rejection.
    pub fn check_quorum(&self) -> Result<()> {
        let required = self.len().div_ceil(2);
        if self.n_good() < required {
            return Err(Error::InsufficientChannels {
                required,
                available: self.n_good(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_session() -> SessionRecording {
        let samples = Array2::from_shape_fn((3, 100), |(c, t)| (c * 1000 + t) as f64);
        let markers = vec![
            EventMarker::new(MarkerKind::SilenceStart, 0),
            EventMarker::song(MarkerKind::SongStart, 20, 1),
            EventMarker::song(MarkerKind::SongEnd, 40, 1),
            EventMarker::song(MarkerKind::SongStart, 60, 2),
            EventMarker::song(MarkerKind::SongEnd, 80, 2),
        ];
        let ratings = [(1, Rating { enjoyment: 3, familiarity: 1 }), (2, Rating { enjoyment: 5, familiarity: 2 })]
            .into_iter()
            .collect();
        SessionRecording {
            subject_id: 1,
            sample_rate_hz: 250,
            samples,
            markers,
            ratings,
        }
    }

    #[test]
    fn toy_session_is_valid() {
        assert!(validate_session(&toy_session()).is_empty());
    }

    #[test]
    fn marker_past_end_is_flagged() {
        let mut s = toy_session();
        s.markers.push(EventMarker::new(MarkerKind::SilenceStart, 101));
        let v = validate_session(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("marker out of range"));
    }

    #[test]
    fn missing_rating_is_flagged() {
        let mut s = toy_session();
        s.ratings.remove(&2);
        let v = validate_session(&s);
        assert_eq!(v, vec![Violation::MissingRating { song_id: 2 }]);
        assert_eq!(v[0].to_string(), "missing rating for song 2");
    }

    #[test]
    fn song_id_on_beep_is_flagged() {
        let mut s = toy_session();
        s.markers.insert(1, EventMarker::song(MarkerKind::BeepSingle, 5, 1));
        assert!(matches!(validate_session(&s)[0], Violation::SongIdMismatch { marker: 1, .. }));
    }

    #[test]
    fn nonstandard_rate_is_flagged_not_fatal() {
        let mut s = toy_session();
        s.sample_rate_hz = 512;
        assert_eq!(validate_session(&s), vec![Violation::NonstandardSampleRate(512)]);
    }

    #[test]
    fn extract_full_and_minimal() {
        let s = toy_session();
        assert_eq!(extract_segment(&s, 0, 100).unwrap(), s.samples);
        let one = extract_segment(&s, 99, 100).unwrap();
        assert_eq!(one.dim(), (3, 1));
        assert_eq!(one[[2, 0]], 2099.0);
        assert!(extract_segment(&s, 5, 5).is_err());
        assert!(extract_segment(&s, 0, 101).is_err());
    }

    #[test]
    fn extract_does_not_alias() {
        let s = toy_session();
        let before = s.samples.clone();
        let mut seg = extract_segment(&s, 10, 30).unwrap();
        seg.fill(-1.0);
        assert_eq!(s.samples, before);
    }

    #[test]
    fn song_spans_detects_unterminated_song() {
        let mut s = toy_session();
        s.markers.pop();
        assert!(s.song_spans().is_err());
        assert_eq!(toy_session().song_spans().unwrap(), vec![(1, 20, 40), (2, 60, 80)]);
    }

    #[test]
    fn quorum() {
        let mut m = ChannelMask::all_good(4);
        m.good[0] = false;
        m.good[1] = false;
        assert!(m.check_quorum().is_ok());
        m.good[2] = false;
        assert!(m.check_quorum().is_err());
    }
}
