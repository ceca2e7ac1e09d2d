//! Streaming binary container for preprocessed epochs.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic        8 bytes  "SDEPOCH1"
//! config_len   u32      followed by that many bytes of UTF-8 (resolved run config)
//! n_channels   u32
//! sample_rate  u32
//! epoch_len    u32      samples per epoch
//! baseline_len u32      samples per baseline window
//! records...
//!   tag 1 (baseline): u32 subject, u32 song, f32[n_channels * baseline_len]
//!   tag 2 (epoch):    u32 subject, u32 song, u32 epoch_index, u8 enjoyment,
//!                     u8 familiarity, f32[n_channels * epoch_len]
//! ```
//!
//! Sample blocks are channel-major. An epoch record uses the most recent
//! baseline record, which must belong to the same subject and song.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::session::{Epoch, Rating};

pub const MAGIC: &[u8; 8] = b"SDEPOCH1";
const TAG_BASELINE: u8 = 1;
const TAG_EPOCH: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochHeader {
    pub config: String,
    pub n_channels: u32,
    pub sample_rate_hz: u32,
    pub epoch_len: u32,
    pub baseline_len: u32,
}

pub struct EpochWriter {
    path: PathBuf,
    out: BufWriter<File>,
    header: EpochHeader,
    last_baseline: Option<(u32, u32)>,
    written: usize,
}

fn put_samples(out: &mut impl Write, data: &Array2<f64>) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data.iter() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf)
}

impl EpochWriter {
    pub fn create(path: &Path, header: EpochHeader) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        out.write_all(MAGIC).map_err(io)?;
        out.write_all(&(header.config.len() as u32).to_le_bytes()).map_err(io)?;
        out.write_all(header.config.as_bytes()).map_err(io)?;
        for v in [header.n_channels, header.sample_rate_hz, header.epoch_len, header.baseline_len] {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        Ok(Self {
            path: path.into(),
            out,
            header,
            last_baseline: None,
            written: 0,
        })
    }

    pub fn write_epoch(&mut self, epoch: &Epoch) -> Result<()> {
        let h = &self.header;
        let expect = (h.n_channels as usize, h.epoch_len as usize);
        let expect_base = (h.n_channels as usize, h.baseline_len as usize);
        if epoch.data.dim() != expect || epoch.baseline.dim() != expect_base || epoch.sample_rate_hz != h.sample_rate_hz {
            return Err(Error::Structure(format!(
                "epoch (subject {}, song {}) has shape {:?} at {} Hz; file expects {:?} at {} Hz",
                epoch.subject_id,
                epoch.song_id,
                epoch.data.dim(),
                epoch.sample_rate_hz,
                expect,
                h.sample_rate_hz
            )));
        }
        let path = self.path.clone();
        let io = |e| Error::io(&path, e);
        let key = (epoch.subject_id, epoch.song_id);
        if self.last_baseline != Some(key) {
            self.out.write_all(&[TAG_BASELINE]).map_err(io)?;
            self.out.write_all(&key.0.to_le_bytes()).map_err(io)?;
            self.out.write_all(&key.1.to_le_bytes()).map_err(io)?;
            put_samples(&mut self.out, &epoch.baseline).map_err(io)?;
            self.last_baseline = Some(key);
        }
        self.out.write_all(&[TAG_EPOCH]).map_err(io)?;
        for v in [epoch.subject_id, epoch.song_id, epoch.epoch_index] {
            self.out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        self.out
            .write_all(&[epoch.rating.enjoyment, epoch.rating.familiarity])
            .map_err(io)?;
        put_samples(&mut self.out, &epoch.data).map_err(io)?;
        self.written += 1;
        Ok(())
    }

    /// Flushes and returns the number of epochs written.
    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.written)
    }
}

pub struct EpochReader {
    path: PathBuf,
    input: BufReader<File>,
    pub header: EpochHeader,
    baseline: Option<((u32, u32), Array2<f64>)>,
    record: usize,
}

impl EpochReader {
    pub fn open(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.into()));
        }
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let mut magic = [0u8; 8];
        read_exact(&mut input, &mut magic, path, 0)?;
        if &magic != MAGIC {
            return Err(Error::parse(path, 0, "not an epochs file (bad magic)"));
        }
        let config_len = read_u32(&mut input, path, 0)? as usize;
        let mut config = vec![0u8; config_len];
        read_exact(&mut input, &mut config, path, 0)?;
        let config = String::from_utf8(config).map_err(|_| Error::parse(path, 0, "config block is not UTF-8"))?;
        let n_channels = read_u32(&mut input, path, 0)?;
        let sample_rate_hz = read_u32(&mut input, path, 0)?;
        let epoch_len = read_u32(&mut input, path, 0)?;
        let baseline_len = read_u32(&mut input, path, 0)?;
        Ok(Self {
            path: path.into(),
            input,
            header: EpochHeader {
                config,
                n_channels,
                sample_rate_hz,
                epoch_len,
                baseline_len,
            },
            baseline: None,
            record: 0,
        })
    }

    fn samples(&mut self, cols: u32) -> Result<Array2<f64>> {
        let rows = self.header.n_channels as usize;
        let cols = cols as usize;
        let mut buf = vec![0u8; rows * cols * 4];
        read_exact(&mut self.input, &mut buf, &self.path, self.record)?;
        let v: Vec<f64> = buf
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        Array2::from_shape_vec((rows, cols), v).map_err(|e| Error::Structure(e.to_string()))
    }

    /// Next epoch, or `None` at a clean end of file.
    pub fn next_epoch(&mut self) -> Result<Option<Epoch>> {
        loop {
            let mut tag = [0u8; 1];
            match self.input.read_exact(&mut tag) {
                Ok(()) => {}
                Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
                Err(e) => return Err(Error::io(&self.path, e)),
            }
            self.record += 1;
            match tag[0] {
                TAG_BASELINE => {
                    let subject = read_u32(&mut self.input, &self.path, self.record)?;
                    let song = read_u32(&mut self.input, &self.path, self.record)?;
                    let b = self.samples(self.header.baseline_len)?;
                    self.baseline = Some(((subject, song), b));
                }
                TAG_EPOCH => {
                    let subject_id = read_u32(&mut self.input, &self.path, self.record)?;
                    let song_id = read_u32(&mut self.input, &self.path, self.record)?;
                    let epoch_index = read_u32(&mut self.input, &self.path, self.record)?;
                    let mut r = [0u8; 2];
                    read_exact(&mut self.input, &mut r, &self.path, self.record)?;
                    let data = self.samples(self.header.epoch_len)?;
                    let baseline = match &self.baseline {
                        Some((key, b)) if *key == (subject_id, song_id) => b.clone(),
                        _ => {
                            return Err(Error::parse(
                                &self.path,
                                self.record,
                                format!("epoch of subject {subject_id}, song {song_id} has no preceding baseline"),
                            ))
                        }
                    };
                    return Ok(Some(Epoch {
                        subject_id,
                        song_id,
                        epoch_index,
                        sample_rate_hz: self.header.sample_rate_hz,
                        data,
                        baseline,
                        rating: Rating {
                            enjoyment: r[0],
                            familiarity: r[1],
                        },
                    }));
                }
                other => {
                    return Err(Error::parse(&self.path, self.record, format!("unknown record tag {other}")));
                }
            }
        }
    }

    /// Reads up to `max` epochs.
    pub fn next_chunk(&mut self, max: usize) -> Result<Vec<Epoch>> {
        let mut out = Vec::with_capacity(max);
        while out.len() < max {
            match self.next_epoch()? {
                Some(e) => out.push(e),
                None => break,
            }
        }
        Ok(out)
    }
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], path: &Path, record: usize) -> Result<()> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            Error::parse(path, record, "file truncated")
        } else {
            Error::io(path, e)
        }
    })
}

fn read_u32(input: &mut impl Read, path: &Path, record: usize) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, path, record)?;
    Ok(u32::from_le_bytes(b))
}
