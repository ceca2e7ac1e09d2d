//! End-to-end orchestration shared by the CLI, the C bindings and the
//! acceptance tests. Sessions are processed one subject at a time so memory
//! stays bounded by a single recording.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::epochfile::{EpochHeader, EpochReader, EpochWriter};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, SplitPlan};
use crate::features::{build_feature_matrix, Dataset, FeatureSelection};
use crate::models::{self, TrainedModel};
use crate::preprocess::{run_pipeline, PipelineOutput, PreprocessConfig};
use crate::session::{SessionRecording, BASELINE_SECONDS};
use crate::synthgen::{self, io as session_io, GeneratorConfig};

/// Where session recordings come from.
#[derive(Debug, Clone)]
pub enum SessionSource {
    Generate(GeneratorConfig),
    /// Subject directories under a root, in ascending subject id.
    Directory(Vec<PathBuf>),
}

impl SessionSource {
    /// Scans `root` for `subject_<id>` directories.
    pub fn directory(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::MissingFile(root.into()));
        }
        let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
        let mut dirs: Vec<(u32, PathBuf)> = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(root, e))?;
            let name = entry.file_name();
            let Some(id) = name.to_str().and_then(|n| n.strip_prefix("subject_")).and_then(|n| n.parse().ok()) else {
                continue;
            };
            if entry.path().join(session_io::MANIFEST_FILE).exists() {
                dirs.push((id, entry.path()));
            }
        }
        if dirs.is_empty() {
            return Err(Error::Structure(format!("no subject_<id> sessions under {}", root.display())));
        }
        dirs.sort();
        Ok(SessionSource::Directory(dirs.into_iter().map(|(_, p)| p).collect()))
    }

    pub fn len(&self) -> usize {
        match self {
            SessionSource::Generate(g) => g.n_subjects as usize,
            SessionSource::Directory(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loads (or generates) the `i`-th session. Generated subjects are numbered from 1.
    pub fn load(&self, i: usize) -> Result<SessionRecording> {
        match self {
            SessionSource::Generate(g) => synthgen::generate_session(g, i as u32 + 1),
            SessionSource::Directory(d) => session_io::read_session(&d[i]),
        }
    }
}

/// Preprocesses every session in order, handing each subject's output to `sink`.
pub fn for_each_subject(
    source: &SessionSource,
    config: &PreprocessConfig,
    mut sink: impl FnMut(&SessionRecording, PipelineOutput) -> Result<()>,
) -> Result<()> {
    for i in 0..source.len() {
        let session = source.load(i)?;
        let out = run_pipeline(&session, config)?;
        log::info!(
            "subject {}: {} epochs, {} rejected channels, {} dropped epochs",
            session.subject_id,
            out.epochs.len(),
            out.mask.len() - out.mask.n_good(),
            out.dropped.len()
        );
        sink(&session, out)?;
    }
    Ok(())
}

/// Sessions → feature dataset, without materialising more than one subject's epochs.
pub fn build_dataset(source: &SessionSource, config: &PreprocessConfig, selection: &FeatureSelection) -> Result<Dataset> {
    let mut dataset: Option<Dataset> = None;
    for_each_subject(source, config, |_, out| {
        if out.epochs.is_empty() {
            return Ok(());
        }
        let part = build_feature_matrix(&out.epochs, selection)?;
        match &mut dataset {
            Some(d) => d.extend(&part)?,
            None => dataset = Some(part),
        }
        Ok(())
    })?;
    dataset.ok_or_else(|| Error::Structure("preprocessing produced no epochs".into()))
}

/// Sessions → epochs file. Returns the number of epochs written.
pub fn write_epochs(source: &SessionSource, config: &PreprocessConfig, path: &Path, config_text: &str) -> Result<usize> {
    let mut writer: Option<EpochWriter> = None;
    for_each_subject(source, config, |session, out| {
        if writer.is_none() {
            writer = Some(EpochWriter::create(
                path,
                EpochHeader {
                    config: config_text.to_string(),
                    n_channels: session.n_channels() as u32,
                    sample_rate_hz: session.sample_rate_hz,
                    epoch_len: config.epoch_seconds * session.sample_rate_hz,
                    baseline_len: BASELINE_SECONDS * session.sample_rate_hz,
                },
            )?);
        }
        let w = writer.as_mut().expect("writer created above");
        for e in &out.epochs {
            w.write_epoch(e)?;
        }
        Ok(())
    })?;
    match writer {
        Some(w) => w.finish(),
        None => Err(Error::Structure("no sessions to preprocess".into())),
    }
}

/// Epochs file → feature dataset, featurizing in chunks.
pub fn featurize_epochs_file(path: &Path, selection: &FeatureSelection) -> Result<Dataset> {
    const CHUNK: usize = 144;
    let mut reader = EpochReader::open(path)?;
    let mut dataset: Option<Dataset> = None;
    loop {
        let chunk = reader.next_chunk(CHUNK)?;
        if chunk.is_empty() {
            break;
        }
        let part = build_feature_matrix(&chunk, selection)?;
        match &mut dataset {
            Some(d) => d.extend(&part)?,
            None => dataset = Some(part),
        }
    }
    dataset.ok_or_else(|| Error::Structure(format!("{} holds no epochs", path.display())))
}

pub struct ExperimentOutput {
    pub dataset: Dataset,
    pub plan: SplitPlan,
    pub model: TrainedModel,
    pub report: EvalReport,
}

/// Split, fit and evaluate on an existing dataset.
pub fn run_on_dataset(config: &RunConfig, dataset: Dataset) -> Result<ExperimentOutput> {
    let (train, test, plan) = eval::split_dataset(&dataset, config.split.test_fraction, config.seed)?;
    let model = models::fit(&config.model, &train)?;
    let report = eval::evaluate(&model, &test)?;
    Ok(ExperimentOutput {
        dataset,
        plan,
        model,
        report,
    })
}

/// Full in-memory run: sessions (generated unless `paths.sessions` is set),
/// preprocessing, features, split, fit and evaluation.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput> {
    let source = match &config.paths.sessions {
        Some(dir) => SessionSource::directory(dir)?,
        None => SessionSource::Generate(config.generator.clone()),
    };
    let dataset = build_dataset(&source, &config.preprocess, &config.features.selection()?)?;
    run_on_dataset(config, dataset)
}
