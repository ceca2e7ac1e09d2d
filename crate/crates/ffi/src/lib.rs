//! C ABI over the songdecode pipeline.
//!
//! Every fallible function returns an [`SdStatus`]. On failure a message is
//! kept per thread and can be read with [`sd_last_error_message`]. Objects
//! cross the boundary as opaque handles, each with its own `_free` function.
//! Strings returned to the caller are released with [`sd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use songdecode::eval::{self, EvalReport};
use songdecode::experiment::{self, SessionSource};
use songdecode::features::{self, Dataset};
use songdecode::models::{self, ModelKind, ModelSpec, TrainedModel};
use songdecode::preprocess::{self, PreprocessConfig};
use songdecode::session::SessionRecording;
use songdecode::synthgen::{self, GeneratorConfig};
use songdecode::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    Data = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Generator settings exposed to C. Fields not listed keep their defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SdGeneratorConfig {
    pub n_subjects: u32,
    pub n_songs: u32,
    pub n_channels: u32,
    pub sample_rate_hz: u32,
    pub n_bad_channels: u32,
    pub class_separation: f64,
    pub seed: u64,
}

impl From<&SdGeneratorConfig> for GeneratorConfig {
    fn from(c: &SdGeneratorConfig) -> Self {
        GeneratorConfig {
            n_subjects: c.n_subjects,
            n_songs: c.n_songs,
            n_channels: c.n_channels,
            sample_rate_hz: c.sample_rate_hz,
            n_bad_channels: c.n_bad_channels,
            class_separation: c.class_separation,
            seed: c.seed,
            ..GeneratorConfig::default()
        }
    }
}

pub struct SdSession(SessionRecording);
pub struct SdDataset(Dataset);
pub struct SdModel(TrainedModel);
pub struct SdReport(EvalReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(SdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => SdStatus::Config,
            Error::Io { .. } | Error::MissingFile(_) => SdStatus::Io,
            Error::Parse { .. } | Error::LengthMismatch { .. } => SdStatus::Parse,
            _ => SdStatus::Data,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SdStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SdStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SdStatus::NullPointer, format!("{what} is null"))
}

fn arg(message: impl Into<String>) -> Failure {
    Failure(SdStatus::InvalidArgument, message.into())
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| arg(format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn fill<T: Copy>(values: &[T], out: *mut T, capacity: usize, written: *mut usize) -> Result<(), Failure> {
    if !written.is_null() {
        *written = values.len();
    }
    if values.len() > capacity {
        return Err(Failure(
            SdStatus::BufferTooSmall,
            format!("need room for {} values, buffer holds {capacity}", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn sd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub extern "C" fn sd_generator_config_default() -> SdGeneratorConfig {
    let g = GeneratorConfig::default();
    SdGeneratorConfig {
        n_subjects: g.n_subjects,
        n_songs: g.n_songs,
        n_channels: g.n_channels,
        sample_rate_hz: g.sample_rate_hz,
        n_bad_channels: g.n_bad_channels,
        class_separation: g.class_separation,
        seed: g.seed,
    }
}

// sessions

/// # Safety
/// `config` must point to a valid config; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn sd_session_generate(
    config: *const SdGeneratorConfig,
    subject_id: u32,
    out: *mut *mut SdSession,
) -> SdStatus {
    guard(|| {
        let c = GeneratorConfig::from(borrow(config, "config")?);
        write_out(out, SdSession(synthgen::generate_session(&c, subject_id)?))
    })
}

/// Writes the session under `directory/subject_<id>`.
///
/// # Safety
/// Pointers must be valid; `directory` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_session_write(session: *const SdSession, directory: *const c_char) -> SdStatus {
    guard(|| {
        let s = borrow(session, "session")?;
        synthgen::io::write_session(&s.0, &PathBuf::from(text(directory, "directory")?))?;
        Ok(())
    })
}

/// Reads a session from its manifest file.
///
/// # Safety
/// Pointers must be valid; `manifest_path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_session_read(manifest_path: *const c_char, out: *mut *mut SdSession) -> SdStatus {
    guard(|| {
        let path = PathBuf::from(text(manifest_path, "manifest_path")?);
        write_out(out, SdSession(synthgen::io::read_session(&path)?))
    })
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_session_n_channels(session: *const SdSession) -> usize {
    session.as_ref().map_or(0, |s| s.0.n_channels())
}

/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_session_n_samples(session: *const SdSession) -> usize {
    session.as_ref().map_or(0, |s| s.0.n_samples())
}

/// # Safety
/// `session` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sd_session_free(session: *mut SdSession) {
    free(session)
}

// datasets

unsafe fn build(
    source: SessionSource,
    features_list: *const c_char,
    epoch_seconds: u32,
    out: *mut *mut SdDataset,
) -> Result<(), Failure> {
    let selection = features::parse_selection(text(features_list, "features")?)?;
    let pre = PreprocessConfig {
        epoch_seconds,
        ..PreprocessConfig::default()
    };
    let ds = experiment::build_dataset(&source, &pre, &selection)?;
    write_out(out, SdDataset(ds))
}

/// Generates, preprocesses and featurizes every subject in `config`.
/// `features_list` is comma separated, e.g. `"spectopo,dfa"`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_build_generated(
    config: *const SdGeneratorConfig,
    features_list: *const c_char,
    epoch_seconds: u32,
    out: *mut *mut SdDataset,
) -> SdStatus {
    guard(|| {
        let c = GeneratorConfig::from(borrow(config, "config")?);
        build(SessionSource::Generate(c), features_list, epoch_seconds, out)
    })
}

/// Same as [`sd_dataset_build_generated`] over `subject_<id>` directories under `sessions_root`.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_build_from_dir(
    sessions_root: *const c_char,
    features_list: *const c_char,
    epoch_seconds: u32,
    out: *mut *mut SdDataset,
) -> SdStatus {
    guard(|| {
        let root = PathBuf::from(text(sessions_root, "sessions_root")?);
        build(SessionSource::directory(&root)?, features_list, epoch_seconds, out)
    })
}

/// # Safety
/// Pointers must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_read_csv(path: *const c_char, out: *mut *mut SdDataset) -> SdStatus {
    guard(|| {
        let p = PathBuf::from(text(path, "path")?);
        write_out(out, SdDataset(Dataset::read_csv(&p)?))
    })
}

/// # Safety
/// Pointers must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_write_csv(dataset: *const SdDataset, path: *const c_char) -> SdStatus {
    guard(|| {
        let d = borrow(dataset, "dataset")?;
        d.0.write_csv(&PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_n_rows(dataset: *const SdDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.n_rows())
}

/// # Safety
/// `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_width(dataset: *const SdDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.width())
}

/// Copies the row labels (song ids) into `out`. `written` receives the
/// required length even when the buffer is too small.
///
/// # Safety
/// `out` must hold `capacity` values; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_labels(
    dataset: *const SdDataset,
    out: *mut u32,
    capacity: usize,
    written: *mut usize,
) -> SdStatus {
    guard(|| fill(&borrow(dataset, "dataset")?.0.labels, out, capacity, written))
}

/// Copies the feature matrix, row-major, into `out`.
///
/// # Safety
/// `out` must hold `capacity` values; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_features(
    dataset: *const SdDataset,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> SdStatus {
    guard(|| {
        let d = borrow(dataset, "dataset")?;
        let flat: Vec<f64> = d.0.features.iter().copied().collect();
        fill(&flat, out, capacity, written)
    })
}

/// Stratified split by (subject, song).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_split(
    dataset: *const SdDataset,
    test_fraction: f64,
    seed: u64,
    train_out: *mut *mut SdDataset,
    test_out: *mut *mut SdDataset,
) -> SdStatus {
    guard(|| {
        if train_out.is_null() || test_out.is_null() {
            return Err(null("output handle"));
        }
        let d = borrow(dataset, "dataset")?;
        let (train, test, _) = eval::split_dataset(&d.0, test_fraction, seed)?;
        write_out(train_out, SdDataset(train))?;
        write_out(test_out, SdDataset(test))
    })
}

/// # Safety
/// `dataset` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sd_dataset_free(dataset: *mut SdDataset) {
    free(dataset)
}

// models

/// Fits a model with default hyperparameters. `kind` is one of
/// `knn`, `tree`, `gboost`, `gnb`, `mlp`, `kmeans`, `gmm`.
///
/// # Safety
/// Pointers must be valid; `kind` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_model_fit(
    kind: *const c_char,
    seed: u64,
    train: *const SdDataset,
    out: *mut *mut SdModel,
) -> SdStatus {
    guard(|| {
        let k: ModelKind = text(kind, "kind")?.parse()?;
        let d = borrow(train, "train")?;
        write_out(out, SdModel(models::fit(&ModelSpec::new(k, seed), &d.0)?))
    })
}

/// Predicted labels for every row of `dataset`; clustering kinds report the
/// majority label of the assigned cluster.
///
/// # Safety
/// `out` must hold `capacity` values; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sd_model_predict(
    model: *const SdModel,
    dataset: *const SdDataset,
    out: *mut u32,
    capacity: usize,
    written: *mut usize,
) -> SdStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let d = borrow(dataset, "dataset")?;
        let labels = m.0.predict_class(d.0.features.view())?;
        fill(&labels, out, capacity, written)
    })
}

/// Predicted labels for `n_rows` row-major rows of `width` values.
///
/// # Safety
/// `rows` must hold `n_rows * width` values and `out` at least `n_rows`.
#[no_mangle]
pub unsafe extern "C" fn sd_model_predict_rows(
    model: *const SdModel,
    rows: *const f64,
    n_rows: usize,
    width: usize,
    out: *mut u32,
) -> SdStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let len = n_rows.checked_mul(width).ok_or_else(|| arg("n_rows * width overflows"))?;
        let x = ndarray::ArrayView2::from_shape((n_rows, width), slice(rows, len, "rows")?)
            .map_err(|e| arg(e.to_string()))?;
        let labels = m.0.predict_class(x)?;
        fill(&labels, out, n_rows, ptr::null_mut())
    })
}

/// Input width the model expects.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_model_width(model: *const SdModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.width())
}

/// # Safety
/// Pointers must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_model_save(model: *const SdModel, path: *const c_char) -> SdStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        m.0.save(&PathBuf::from(text(path, "path")?))?;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_model_load(path: *const c_char, out: *mut *mut SdModel) -> SdStatus {
    guard(|| {
        let p = PathBuf::from(text(path, "path")?);
        write_out(out, SdModel(TrainedModel::load(&p)?))
    })
}

/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sd_model_free(model: *mut SdModel) {
    free(model)
}

// reports

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_evaluate(model: *const SdModel, test: *const SdDataset, out: *mut *mut SdReport) -> SdStatus {
    guard(|| {
        let m = borrow(model, "model")?;
        let t = borrow(test, "test")?;
        write_out(out, SdReport(eval::evaluate(&m.0, &t.0)?))
    })
}

/// Overall accuracy in percent, or NaN for a null handle.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_report_accuracy(report: *const SdReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.0.overall_accuracy)
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_report_n_test(report: *const SdReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.n_test)
}

/// Number of labels, i.e. the side of the confusion matrix.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_report_n_labels(report: *const SdReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.labels.len())
}

/// Row-major confusion counts, rows = true label.
///
/// # Safety
/// `out` must hold `capacity` values; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sd_report_confusion(
    report: *const SdReport,
    out: *mut u64,
    capacity: usize,
    written: *mut usize,
) -> SdStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        let flat: Vec<u64> = r.0.confusion.iter().flatten().copied().collect();
        fill(&flat, out, capacity, written)
    })
}

/// Plain-text summary; free with [`sd_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sd_report_summary(report: *const SdReport, out: *mut *mut c_char) -> SdStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        if out.is_null() {
            return Err(null("output string"));
        }
        *out = CString::new(r.0.summary()).map_err(|e| arg(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Writes `confusion.csv` and `confusion.pgm` into `directory`.
///
/// # Safety
/// Pointers must be valid; `directory` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sd_report_render(report: *const SdReport, directory: *const c_char) -> SdStatus {
    guard(|| {
        let r = borrow(report, "report")?;
        eval::render_confusion(&r.0, &PathBuf::from(text(directory, "directory")?))?;
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sd_report_free(report: *mut SdReport) {
    free(report)
}

// signal helpers

/// DFA scaling exponent with the default box sizes.
///
/// # Safety
/// `signal` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sd_dfa_alpha(signal: *const f64, len: usize, alpha: *mut f64) -> SdStatus {
    guard(|| {
        let x = slice(signal, len, "signal")?;
        let r = features::dfa(x, None)?;
        if alpha.is_null() {
            return Err(null("alpha"));
        }
        *alpha = r.alpha;
        Ok(())
    })
}

/// Zero-phase notch filter. `out` must hold `len` values and may equal `signal`.
///
/// # Safety
/// `signal` and `out` must each hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sd_notch_filter(
    signal: *const f64,
    len: usize,
    sample_rate_hz: f64,
    notch_hz: f64,
    bandwidth_hz: f64,
    out: *mut f64,
) -> SdStatus {
    guard(|| {
        let x = slice(signal, len, "signal")?.to_vec();
        let y = preprocess::notch_filter(&x, sample_rate_hz, notch_hz, bandwidth_hz)?;
        fill(&y, out, len, ptr::null_mut())
    })
}

/// Relative db8 energy per level, `d1..dL` then `aL`, at the default depth
/// for `sample_rate_hz`.
///
/// # Safety
/// `signal` must hold `len` values; `out` `capacity` values; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn sd_wavelet_energy(
    signal: *const f64,
    len: usize,
    sample_rate_hz: u32,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> SdStatus {
    guard(|| {
        let x = slice(signal, len, "signal")?;
        let e = features::wavedec_bandpower(x, sample_rate_hz)?;
        fill(&e.fractions, out, capacity, written)
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
