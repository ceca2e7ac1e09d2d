//! Run configuration: one TOML document covering every stage.
//!
//! ```toml
//! seed = 7
//!
//! [generator]
//! n_subjects = 20
//! class_separation = 1.0
//!
//! [preprocess]
//! epoch_seconds = 10
//!
//! [features]
//! families = ["spectopo"]
//!
//! [model]
//! kind = "knn"
//! knn = { k = 5 }
//!
//! [split]
//! test_fraction = 0.3333333333333333
//!
//! [paths]
//! out = "out"
//! ```
//!
//! Unknown keys are rejected at every level. The top-level `seed` is copied
//! into `generator.seed` and `model.seed` when the config is resolved, and
//! also seeds the split.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_TEST_FRACTION;
use crate::features::{FeatureFamily, FeatureSelection};
use crate::models::ModelSpec;
use crate::preprocess::PreprocessConfig;
use crate::synthgen::GeneratorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub families: Vec<FeatureFamily>,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            families: vec![FeatureFamily::Spectopo],
        }
    }
}

impl FeaturesConfig {
    pub fn selection(&self) -> Result<FeatureSelection> {
        let sel: FeatureSelection = self.families.iter().copied().collect();
        if sel.is_empty() {
            return Err(Error::Config("features.families is empty".into()));
        }
        Ok(sel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub out: PathBuf,
    /// Session directory to read instead of generating sessions.
    pub sessions: Option<PathBuf>,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            sessions: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeaturesConfig,
    pub model: ModelSpec,
    pub split: SplitConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.into()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Propagates the top-level seed and checks every section.
    pub fn resolve(mut self) -> Result<Self> {
        self.generator.seed = self.seed;
        self.model.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.preprocess.validate(self.generator.sample_rate_hz)?;
        self.features.selection()?;
        self.model.validate()?;
        let f = self.split.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("split.test_fraction must lie in (0, 1), got {f}")));
        }
        Ok(())
    }
}

/// Writes the resolved config next to `artifact` as `<artifact>.config.toml`.
pub fn write_sidecar(artifact: &Path, config: &RunConfig) -> Result<PathBuf> {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".config.toml");
    let path = PathBuf::from(name);
    fs::write(&path, config.to_toml()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
