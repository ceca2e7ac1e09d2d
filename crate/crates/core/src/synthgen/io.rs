//! On-disk session layout:
//!
//! ```text
//! subject_<id>/manifest.txt   key: value header plus `rating,<song>,<enjoyment>,<familiarity>` lines
//! subject_<id>/samples.f32    channel-major little-endian f32, n_channels * n_samples values
//! subject_<id>/events.csv     header `sample_index,kind,song_id`
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::session::{EventMarker, MarkerKind, Rating, SessionRecording};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SAMPLES_FILE: &str = "samples.f32";
pub const EVENTS_FILE: &str = "events.csv";
const EVENTS_HEADER: &str = "sample_index,kind,song_id";

pub fn session_dir_name(subject_id: u32) -> String {
    format!("subject_{subject_id}")
}

/// Writes `session` under `directory/subject_<id>/` and returns the manifest path.
pub fn write_session(session: &SessionRecording, directory: &Path) -> Result<PathBuf> {
    let dir = directory.join(session_dir_name(session.subject_id));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let mut manifest = String::new();
    manifest.push_str(&format!("subject_id: {}\n", session.subject_id));
    manifest.push_str(&format!("sample_rate_hz: {}\n", session.sample_rate_hz));
    manifest.push_str(&format!("n_channels: {}\n", session.n_channels()));
    manifest.push_str(&format!("n_samples: {}\n", session.n_samples()));
    for (song, r) in &session.ratings {
        manifest.push_str(&format!("rating,{song},{},{}\n", r.enjoyment, r.familiarity));
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;

    let samples_path = dir.join(SAMPLES_FILE);
    let file = fs::File::create(&samples_path).map_err(|e| Error::io(&samples_path, e))?;
    let mut w = BufWriter::new(file);
    for row in session.samples.rows() {
        for &v in row {
            w.write_all(&(v as f32).to_le_bytes())
                .map_err(|e| Error::io(&samples_path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&samples_path, e))?;

    let mut events = String::from(EVENTS_HEADER);
    events.push('\n');
    for m in &session.markers {
        let song = m.song_id.map(|s| s.to_string()).unwrap_or_default();
        events.push_str(&format!("{},{},{}\n", m.sample_index, m.kind, song));
    }
    let events_path = dir.join(EVENTS_FILE);
    fs::write(&events_path, events).map_err(|e| Error::io(&events_path, e))?;

    Ok(manifest_path)
}

struct Manifest {
    subject_id: u32,
    sample_rate_hz: u32,
    n_channels: usize,
    n_samples: usize,
    ratings: BTreeMap<u32, Rating>,
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_manifest(path: &Path) -> Result<Manifest> {
    let text = read_text(path)?;
    let mut keys: BTreeMap<&str, &str> = BTreeMap::new();
    let mut ratings = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let row = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("rating,") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            let nums: Option<Vec<u32>> = parts.iter().map(|p| p.parse().ok()).collect();
            match nums.as_deref() {
                Some(&[song, enjoyment, familiarity]) if enjoyment <= 5 && familiarity <= 5 => {
                    let rating = Rating {
                        enjoyment: enjoyment as u8,
                        familiarity: familiarity as u8,
                    };
                    if ratings.insert(song, rating).is_some() {
                        return Err(Error::parse(path, row, format!("duplicate rating for song {song}")));
                    }
                }
                _ => return Err(Error::parse(path, row, format!("malformed rating line `{line}`"))),
            }
        } else if let Some((k, v)) = line.split_once(':') {
            keys.insert(k.trim(), v.trim());
        } else {
            return Err(Error::parse(path, row, format!("expected `key: value`, got `{line}`")));
        }
    }
    let get = |key: &str| -> Result<u64> {
        let v = keys
            .get(key)
            .ok_or_else(|| Error::parse(path, 0, format!("missing key `{key}`")))?;
        v.parse()
            .map_err(|_| Error::parse(path, 0, format!("key `{key}` is not an integer: `{v}`")))
    };
    Ok(Manifest {
        subject_id: get("subject_id")? as u32,
        sample_rate_hz: get("sample_rate_hz")? as u32,
        n_channels: get("n_channels")? as usize,
        n_samples: get("n_samples")? as usize,
        ratings,
    })
}

fn parse_events(path: &Path) -> Result<Vec<EventMarker>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == EVENTS_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header `{EVENTS_HEADER}`"))),
    }
    let mut markers = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, row, format!("expected 3 fields, got {}", fields.len())));
        }
        let sample_index: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, row, format!("bad sample_index `{}`", fields[0])))?;
        let kind = MarkerKind::parse(fields[1])
            .ok_or_else(|| Error::parse(path, row, format!("unknown event kind `{}`", fields[1])))?;
        let song_id = if fields[2].is_empty() {
            None
        } else {
            Some(
                fields[2]
                    .parse::<u32>()
                    .map_err(|_| Error::parse(path, row, format!("bad song_id `{}`", fields[2])))?,
            )
        };
        if kind.has_song() != song_id.is_some() {
            let msg = if kind.has_song() {
                format!("{kind} row requires a song_id")
            } else {
                format!("{kind} row must not carry a song_id")
            };
            return Err(Error::parse(path, row, msg));
        }
        markers.push(EventMarker { kind, sample_index, song_id });
    }
    Ok(markers)
}

/// Reads a session back from its manifest path (or its directory).
pub fn read_session(manifest_path: &Path) -> Result<SessionRecording> {
    let manifest_path = if manifest_path.is_dir() {
        manifest_path.join(MANIFEST_FILE)
    } else {
        manifest_path.to_path_buf()
    };
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let manifest = parse_manifest(&manifest_path)?;

    let samples_path = dir.join(SAMPLES_FILE);
    if !samples_path.exists() {
        return Err(Error::MissingFile(samples_path));
    }
    let bytes = fs::read(&samples_path).map_err(|e| Error::io(&samples_path, e))?;
    let expected = (manifest.n_channels * manifest.n_samples * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::LengthMismatch {
            path: samples_path,
            expected,
            actual: bytes.len() as u64,
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let samples = Array2::from_shape_vec((manifest.n_channels, manifest.n_samples), values)
        .map_err(|e| Error::Structure(e.to_string()))?;

    let markers = parse_events(&dir.join(EVENTS_FILE))?;
    Ok(SessionRecording {
        subject_id: manifest.subject_id,
        sample_rate_hz: manifest.sample_rate_hz,
        samples,
        markers,
        ratings: manifest.ratings,
    })
}
