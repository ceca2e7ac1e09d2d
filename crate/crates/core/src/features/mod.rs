//! Per-epoch feature extraction.
//!
//! Four families are available, each computed per channel:
//!
//! | family     | scalars per channel                                   |
//! |------------|-------------------------------------------------------|
//! | `spectopo` | Welch band power in dB for delta, theta, alpha, beta, gamma |
//! | `wavedec`  | relative db8 energy of `d1..dL` and `aL`              |
//! | `dfa`      | `alpha`, `dim`, `intercept`                           |
//! | `entropy`  | `log_energy`, `shannon`                               |
//!
//! Columns are named `ch<i>_<family>_<scalar>` and ordered channel-major,
//! then by scalar name (alphabetically) within each channel.

pub mod dataset;
pub mod dfa;
pub mod entropy;
pub mod pca;
pub mod spectral;
pub mod wavelet;

pub use dataset::{Dataset, RowMeta};
pub use dfa::{dfa, DfaResult};
pub use entropy::{entropy_features, EntropyPair};
pub use pca::{pca_project, Projection};
pub use spectral::{spectopo_bandpower, Band, BandDefinition, BandPowerSet, Psd, Welch};
pub use wavelet::{dwt_multilevel, idwt_multilevel, wavedec_bandpower, WaveletCoeffs, WaveletEnergy};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::Epoch;

/// Floor added before taking logarithms of energies and powers.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFamily {
    Spectopo,
    Wavedec,
    Dfa,
    Entropy,
}

impl FeatureFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureFamily::Spectopo => "spectopo",
            FeatureFamily::Wavedec => "wavedec",
            FeatureFamily::Dfa => "dfa",
            FeatureFamily::Entropy => "entropy",
        }
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spectopo" => Ok(FeatureFamily::Spectopo),
            "wavedec" => Ok(FeatureFamily::Wavedec),
            "dfa" => Ok(FeatureFamily::Dfa),
            "entropy" => Ok(FeatureFamily::Entropy),
            other => Err(Error::Config(format!("unknown feature family `{other}`"))),
        }
    }
}

pub type FeatureSelection = BTreeSet<FeatureFamily>;

/// Parses a comma-separated family list such as `spectopo,dfa`.
pub fn parse_selection(s: &str) -> Result<FeatureSelection> {
    let sel: FeatureSelection = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if sel.is_empty() {
        return Err(Error::Config("empty feature selection".into()));
    }
    Ok(sel)
}

/// Unprefixed scalar names of one channel, sorted.
fn channel_values(
    signal: ArrayView1<'_, f64>,
    sample_rate_hz: u32,
    selection: &FeatureSelection,
    bands: &BandDefinition,
    welch: Option<&Welch>,
) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let contiguous;
    let slice = match signal.as_slice() {
        Some(s) => s,
        None => {
            contiguous = signal.to_vec();
            &contiguous
        }
    };
    for family in selection {
        match family {
            FeatureFamily::Spectopo => {
                let psd = welch.expect("welch prepared for spectopo").estimate(signal)?;
                for b in &bands.bands {
                    let p = psd.band_mean(b.low_hz, b.high_hz).unwrap_or(0.0);
                    out.push((format!("spectopo_{}", b.name), spectral::to_db(p)));
                }
            }
            FeatureFamily::Wavedec => {
                let e = wavedec_bandpower(slice, sample_rate_hz)?;
                let names = WaveletEnergy::level_names(e.fractions.len() - 1);
                for (n, v) in names.into_iter().zip(e.fractions) {
                    out.push((format!("wavedec_{n}"), v));
                }
            }
            FeatureFamily::Dfa => {
                let r = dfa(slice, None)?;
                out.push(("dfa_alpha".into(), r.alpha));
                out.push(("dfa_dim".into(), r.dim));
                out.push(("dfa_intercept".into(), r.intercept));
            }
            FeatureFamily::Entropy => {
                let e = entropy_features(slice);
                out.push(("entropy_log_energy".into(), e.log_energy));
                out.push(("entropy_shannon".into(), e.shannon));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Column names and values for one epoch. `epoch_position` only labels errors.
pub fn epoch_features(
    epoch: &Epoch,
    selection: &FeatureSelection,
    epoch_position: usize,
) -> Result<(Vec<String>, Vec<f64>)> {
    if selection.is_empty() {
        return Err(Error::Config("empty feature selection".into()));
    }
    let bands = BandDefinition::default();
    let welch = if selection.contains(&FeatureFamily::Spectopo) {
        bands.validate(epoch.sample_rate_hz as f64)?;
        if epoch.n_samples() < 2 * epoch.sample_rate_hz as usize {
            return Err(Error::Range(format!(
                "epoch of {} samples is shorter than two seconds",
                epoch.n_samples()
            )));
        }
        Some(Welch::one_second(epoch.sample_rate_hz))
    } else {
        None
    };
    let mut names = Vec::new();
    let mut values = Vec::new();
    for (ch, row) in epoch.data.rows().into_iter().enumerate() {
        for (name, v) in channel_values(row, epoch.sample_rate_hz, selection, &bands, welch.as_ref())? {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature {
                    epoch: epoch_position,
                    subject_id: epoch.subject_id,
                    song_id: epoch.song_id,
                    channel: ch,
                    feature: name,
                });
            }
            names.push(format!("ch{ch}_{name}"));
            values.push(v);
        }
    }
    Ok((names, values))
}

fn row_meta(epoch: &Epoch) -> RowMeta {
    RowMeta {
        subject_id: epoch.subject_id,
        song_id: epoch.song_id,
        epoch_index: epoch.epoch_index,
        enjoyment: epoch.rating.enjoyment,
        familiarity: epoch.rating.familiarity,
    }
}

/// Reduces every epoch to one feature row. Epochs are processed in parallel;
/// row order follows `epochs`.
pub fn build_feature_matrix(epochs: &[Epoch], selection: &FeatureSelection) -> Result<Dataset> {
    if epochs.is_empty() {
        return Err(Error::Structure("no epochs to featurize".into()));
    }
    let rows: Vec<(Vec<String>, Vec<f64>)> = epochs
        .par_iter()
        .enumerate()
        .map(|(i, e)| epoch_features(e, selection, i))
        .collect::<Result<_>>()?;
    let names = rows[0].0.clone();
    let mut ds = Dataset::empty(names.clone());
    for ((n, v), e) in rows.iter().zip(epochs) {
        if *n != names {
            return Err(Error::Structure(format!(
                "epoch {} of subject {} has a different feature layout",
                e.epoch_index, e.subject_id
            )));
        }
        ds.push_row(ArrayView1::from(v), row_meta(e))?;
    }
    Ok(ds)
}

/// Two-dimensional (or `dims`-dimensional) standardized PCA of a dataset.
pub fn project_dataset(dataset: &Dataset, dims: usize) -> Result<Projection> {
    pca_project(dataset.features.view(), dims, true)
}
