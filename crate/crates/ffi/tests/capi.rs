use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use songdecode_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn path_c(p: &Path) -> CString {
    cstr(p.to_str().unwrap())
}

fn last_error() -> String {
    let p = sd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_config(subjects: u32) -> SdGeneratorConfig {
    SdGeneratorConfig {
        n_subjects: subjects,
        n_channels: 6,
        n_bad_channels: 0,
        seed: 17,
        ..sd_generator_config_default()
    }
}

#[test]
fn defaults_match_the_library() {
    let c = sd_generator_config_default();
    assert_eq!((c.n_subjects, c.n_songs, c.n_channels, c.sample_rate_hz), (20, 12, 32, 250));
    let v = unsafe { CStr::from_ptr(sd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn end_to_end_through_handles() {
    unsafe {
        let cfg = small_config(2);
        let mut ds = ptr::null_mut();
        assert_eq!(sd_dataset_build_generated(&cfg, cstr("spectopo").as_ptr(), 10, &mut ds), SdStatus::Ok);
        assert!(sd_last_error_message().is_null());
        assert_eq!(sd_dataset_n_rows(ds), 288);
        assert_eq!(sd_dataset_width(ds), 30);

        let (mut train, mut test) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(sd_dataset_split(ds, 1.0 / 3.0, 3, &mut train, &mut test), SdStatus::Ok);
        assert_eq!(sd_dataset_n_rows(test), 96);

        let mut model = ptr::null_mut();
        assert_eq!(sd_model_fit(cstr("knn").as_ptr(), 3, train, &mut model), SdStatus::Ok);
        assert_eq!(sd_model_width(model), 30);

        let mut report = ptr::null_mut();
        assert_eq!(sd_evaluate(model, test, &mut report), SdStatus::Ok);
        assert_eq!(sd_report_n_test(report), 96);
        let acc = sd_report_accuracy(report);
        assert!(acc > 50.0, "accuracy {acc}");

        let n = sd_report_n_labels(report);
        let mut confusion = vec![0u64; n * n];
        let mut written = 0;
        assert_eq!(sd_report_confusion(report, confusion.as_mut_ptr(), confusion.len(), &mut written), SdStatus::Ok);
        assert_eq!(confusion.iter().sum::<u64>(), 96);
        let trace: u64 = (0..n).map(|i| confusion[i * n + i]).sum();
        assert_eq!(100.0 * trace as f64 / 96.0, acc);

        let mut labels = vec![0u32; 96];
        assert_eq!(sd_model_predict(model, test, labels.as_mut_ptr(), 96, &mut written), SdStatus::Ok);
        let mut truth = vec![0u32; 96];
        assert_eq!(sd_dataset_labels(test, truth.as_mut_ptr(), 96, ptr::null_mut()), SdStatus::Ok);
        let correct = labels.iter().zip(&truth).filter(|(a, b)| a == b).count();
        assert_eq!(correct as u64, trace);

        let mut feats = vec![0.0; 96 * 30];
        assert_eq!(sd_dataset_features(test, feats.as_mut_ptr(), feats.len(), ptr::null_mut()), SdStatus::Ok);
        let mut by_rows = vec![0u32; 96];
        assert_eq!(sd_model_predict_rows(model, feats.as_ptr(), 96, 30, by_rows.as_mut_ptr()), SdStatus::Ok);
        assert_eq!(by_rows, labels);

        let mut summary = ptr::null_mut();
        assert_eq!(sd_report_summary(report, &mut summary), SdStatus::Ok);
        let text = CStr::from_ptr(summary).to_str().unwrap().to_owned();
        sd_string_free(summary);
        assert!(text.contains("chance_accuracy: 8.3333"));

        let dir = tempfile::tempdir().unwrap();
        assert_eq!(sd_report_render(report, path_c(dir.path()).as_ptr()), SdStatus::Ok);
        assert!(dir.path().join("confusion.pgm").exists());

        let model_path = path_c(&dir.path().join("model.json"));
        assert_eq!(sd_model_save(model, model_path.as_ptr()), SdStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(sd_model_load(model_path.as_ptr(), &mut loaded), SdStatus::Ok);
        let mut again = vec![0u32; 96];
        assert_eq!(sd_model_predict(loaded, test, again.as_mut_ptr(), 96, ptr::null_mut()), SdStatus::Ok);
        assert_eq!(again, labels);

        let csv = path_c(&dir.path().join("ds.csv"));
        assert_eq!(sd_dataset_write_csv(test, csv.as_ptr()), SdStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(sd_dataset_read_csv(csv.as_ptr(), &mut back), SdStatus::Ok);
        assert_eq!(sd_dataset_n_rows(back), 96);

        for d in [ds, train, test, back] {
            sd_dataset_free(d);
        }
        sd_model_free(model);
        sd_model_free(loaded);
        sd_report_free(report);
    }
}

#[test]
fn sessions_roundtrip_through_files() {
    unsafe {
        let cfg = small_config(1);
        let mut s = ptr::null_mut();
        assert_eq!(sd_session_generate(&cfg, 1, &mut s), SdStatus::Ok);
        assert_eq!(sd_session_n_channels(s), 6);
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(sd_session_write(s, path_c(dir.path()).as_ptr()), SdStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(sd_session_read(path_c(&dir.path().join("subject_1")).as_ptr(), &mut r), SdStatus::Ok);
        assert_eq!(sd_session_n_samples(r), sd_session_n_samples(s));
        let mut ds = ptr::null_mut();
        assert_eq!(
            sd_dataset_build_from_dir(path_c(dir.path()).as_ptr(), cstr("entropy").as_ptr(), 120, &mut ds),
            SdStatus::Ok
        );
        assert_eq!(sd_dataset_n_rows(ds), 12);
        sd_dataset_free(ds);
        sd_session_free(s);
        sd_session_free(r);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(sd_dataset_read_csv(ptr::null(), &mut ds), SdStatus::NullPointer);
        assert!(last_error().contains("path"));
        assert_eq!(sd_dataset_read_csv(cstr("/nonexistent/x.csv").as_ptr(), &mut ds), SdStatus::Io);
        assert!(ds.is_null());

        let cfg = small_config(1);
        assert_eq!(sd_dataset_build_generated(&cfg, cstr("mfcc").as_ptr(), 10, &mut ds), SdStatus::Config);
        assert!(last_error().contains("mfcc"));
        assert_eq!(sd_dataset_build_generated(&cfg, cstr("spectopo").as_ptr(), 7, &mut ds), SdStatus::Config);

        let bad = [0xffu8, 0];
        let mut model = ptr::null_mut();
        assert_eq!(sd_model_fit(bad.as_ptr().cast(), 0, ptr::null(), &mut model), SdStatus::InvalidArgument);
        assert_eq!(sd_model_fit(cstr("svm").as_ptr(), 0, ptr::null(), &mut model), SdStatus::Config);

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.csv");
        std::fs::write(&junk, "a,b\n1\n").unwrap();
        assert_eq!(sd_dataset_read_csv(path_c(&junk).as_ptr(), &mut ds), SdStatus::Parse);

        let mut alpha = 0.0;
        assert_eq!(sd_dfa_alpha([1.0; 8].as_ptr(), 8, &mut alpha), SdStatus::Data);
        let mut out = [0.0; 4];
        let mut needed = 0;
        let sig: Vec<f64> = (0..2500).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(
            sd_wavelet_energy(sig.as_ptr(), sig.len(), 250, out.as_mut_ptr(), out.len(), &mut needed),
            SdStatus::BufferTooSmall
        );
        assert!(needed > 4);
        let mut fractions = vec![0.0; needed];
        assert_eq!(
            sd_wavelet_energy(sig.as_ptr(), sig.len(), 250, fractions.as_mut_ptr(), needed, ptr::null_mut()),
            SdStatus::Ok
        );
        assert!((fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // null handles are harmless in accessors and frees
        assert_eq!(sd_dataset_n_rows(ptr::null()), 0);
        assert!(sd_report_accuracy(ptr::null()).is_nan());
        sd_dataset_free(ptr::null_mut());
        sd_string_free(ptr::null_mut());
    }
}

#[test]
fn signal_helpers() {
    unsafe {
        let fs = 250.0;
        let x: Vec<f64> = (0..5000).map(|t| (2.0 * std::f64::consts::PI * 50.0 * t as f64 / fs).sin()).collect();
        let mut y = x.clone();
        assert_eq!(sd_notch_filter(y.as_ptr(), y.len(), fs, 50.0, 2.0, y.as_mut_ptr()), SdStatus::Ok);
        let peak = y[1000..4000].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak < 0.01);

        let mut state = 12345u64;
        let noise: Vec<f64> = (0..8192)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let mut alpha = 0.0;
        assert_eq!(sd_dfa_alpha(noise.as_ptr(), noise.len(), &mut alpha), SdStatus::Ok);
        assert!((alpha - 0.5).abs() < 0.1, "alpha {alpha}");
    }
}

/// `cargo test` only builds the rlib, so the C archive is built here into a
/// private target directory.
fn static_library() -> PathBuf {
    let target = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("staticlib");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let status = Command::new(cargo)
        .args(["build", "--offline", "--quiet", "-p", "songdecode-ffi", "--lib", "--target-dir"])
        .arg(&target)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .status()
        .expect("cargo runs");
    assert!(status.success(), "building the static library failed");
    target.join("debug/libsongdecode_ffi.a")
}

#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = static_library();
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include <math.h>
#include "songdecode.h"

int main(void) {
    SdGeneratorConfig cfg = sd_generator_config_default();
    SdSession *s = NULL;
    double x[4096];
    double alpha = 0.0;
    unsigned int seed = 1;
    int i;
    cfg.n_channels = 4;
    cfg.n_bad_channels = 0;
    if (sd_session_generate(&cfg, 1, &s) != SD_STATUS_OK) return 1;
    if (sd_session_n_channels(s) != 4) return 2;
    sd_session_free(s);
    for (i = 0; i < 4096; i++) {
        seed = seed * 1103515245u + 12345u;
        x[i] = (double)((seed >> 8) & 0xffff) / 65536.0 - 0.5;
    }
    if (sd_dfa_alpha(x, 4096, &alpha) != SD_STATUS_OK) return 3;
    if (fabs(alpha - 0.5) > 0.15) return 4;
    if (sd_dfa_alpha(NULL, 10, &alpha) != SD_STATUS_NULL_POINTER) return 5;
    if (sd_last_error_message() == NULL) return 6;
    printf("%s %.3f\n", sd_version(), alpha);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
