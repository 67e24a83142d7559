use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ccs_ffi::*;

const FIXTURES: [&str; 3] = ["studio_alpha", "studio_beta", "studio_gamma"];

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// A studio of unpacked project folders, one per core fixture.
fn studio() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for name in FIXTURES {
        let project = dir.path().join(name.trim_start_matches("studio_"));
        std::fs::create_dir(&project).unwrap();
        std::fs::copy(fixture_dir().join(format!("{name}.json")), project.join("project.json")).unwrap();
    }
    dir
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ccs_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scores_round_trip() {
    let dir = studio();
    let path = cstr(dir.path());
    let mut handle = ptr::null_mut();
    let status = unsafe { ccs_score_studio(path.as_ptr(), ptr::null(), &mut handle) };
    assert_eq!(status, CcsStatus::Ok);
    assert!(ccs_last_error_message().is_null());

    let n = unsafe { ccs_scores_len(handle) };
    assert_eq!(n, 3);
    let mut ids = Vec::new();
    let mut best = 0.0f64;
    for i in 0..n {
        let mut row = CcsScoreRow::default();
        assert_eq!(unsafe { ccs_scores_get(handle, i, &mut row) }, CcsStatus::Ok);
        assert_eq!(row.index, i);
        assert!((0.0..=1.0).contains(&row.ccs));
        assert!(row.rank >= 1 && row.rank <= n);
        best = best.max(row.ccs);
        ids.push(unsafe { CStr::from_ptr(ccs_scores_project_id(handle, i)) }.to_str().unwrap().to_string());
    }
    assert_eq!(best, 1.0);
    assert_eq!(ids, ["alpha", "beta", "gamma"]);

    let mut row = CcsScoreRow::default();
    assert_eq!(unsafe { ccs_scores_get(handle, n, &mut row) }, CcsStatus::OutOfRange);
    assert!(last_error().contains("row 3"));
    assert!(unsafe { ccs_scores_project_id(handle, n) }.is_null());

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ccs_scores_to_json(handle, &mut json) }, CcsStatus::Ok);
    let doc: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(doc["scores"].as_array().unwrap().len(), 3);
    assert_eq!(doc["meta"]["seed"], 42);
    unsafe {
        ccs_string_free(json);
        ccs_scores_free(handle);
    }
}

#[test]
fn options_are_applied_and_validated() {
    let dir = studio();
    let path = cstr(dir.path());
    let embedding = CString::new("builtin").unwrap();
    let granularity = CString::new("project").unwrap();
    let opts = CcsOptions {
        seed: 9,
        k_visual: 0,
        k_text: 2,
        embedding: embedding.as_ptr(),
        text_granularity: granularity.as_ptr(),
    };
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { ccs_score_studio(path.as_ptr(), &opts, &mut handle) }, CcsStatus::Ok);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { ccs_scores_to_json(handle, &mut json) }, CcsStatus::Ok);
    let doc: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(doc["meta"]["seed"], 9);
    assert_eq!(doc["meta"]["text_granularity"], "project");
    unsafe {
        ccs_string_free(json);
        ccs_scores_free(handle);
    }

    let bad_k = CcsOptions { k_visual: 1, ..opts };
    assert_eq!(unsafe { ccs_score_studio(path.as_ptr(), &bad_k, &mut handle) }, CcsStatus::InvalidArgument);
    assert!(handle.is_null());
    let cnn = CString::new("cnn").unwrap();
    let bad_embedding = CcsOptions { embedding: cnn.as_ptr(), ..opts };
    assert_eq!(
        unsafe { ccs_score_studio(path.as_ptr(), &bad_embedding, &mut handle) },
        CcsStatus::InvalidArgument
    );
}

#[test]
fn failures_map_to_status_codes() {
    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { ccs_score_studio(ptr::null(), ptr::null(), &mut handle) }, CcsStatus::NullPointer);
    let dir = studio();
    let path = cstr(dir.path());
    assert_eq!(unsafe { ccs_score_studio(path.as_ptr(), ptr::null(), ptr::null_mut()) }, CcsStatus::NullPointer);

    let missing = cstr(&dir.path().join("absent"));
    assert_eq!(unsafe { ccs_score_studio(missing.as_ptr(), ptr::null(), &mut handle) }, CcsStatus::Environment);
    let empty = tempfile::tempdir().unwrap();
    let empty_path = cstr(empty.path());
    assert_eq!(unsafe { ccs_score_studio(empty_path.as_ptr(), ptr::null(), &mut handle) }, CcsStatus::Domain);
    assert!(!last_error().is_empty());

    let bytes = [0x66u8, 0xff, 0];
    assert_eq!(
        unsafe { ccs_score_studio(bytes.as_ptr().cast(), ptr::null(), &mut handle) },
        CcsStatus::InvalidUtf8
    );
    assert_eq!(unsafe { ccs_scores_len(ptr::null()) }, 0);
    unsafe {
        ccs_scores_free(ptr::null_mut());
        ccs_string_free(ptr::null_mut());
    }
}

#[test]
fn kendall_through_the_abi() {
    let x = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 5.0];
    let y = [2.0, 1.0, 3.0, 3.0, 5.0, 4.0, 6.0, 6.0];
    let mut out = CcsTau::default();
    assert_eq!(unsafe { ccs_kendall_tau_b(x.as_ptr(), y.as_ptr(), x.len(), &mut out) }, CcsStatus::Ok);
    assert!((out.tau - 0.8006407690254358).abs() <= 1e-12);
    assert_eq!(out.n, 8);
    let flat = [1.0; 4];
    assert_eq!(
        unsafe { ccs_kendall_tau_b(flat.as_ptr(), x.as_ptr(), 4, &mut out) },
        CcsStatus::Domain
    );
    assert_eq!(unsafe { ccs_kendall_tau_b(ptr::null(), x.as_ptr(), 4, &mut out) }, CcsStatus::NullPointer);
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(ccs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "ccs.h"

int main(int argc, char **argv) {
    if (argc < 2) return 10;
    CcsScores *scores = NULL;
    CcsStatus st = ccs_score_studio(argv[1], NULL, &scores);
    if (st != CCS_STATUS_OK) {
        fprintf(stderr, "%s\n", ccs_last_error_message());
        return 11;
    }
    size_t n = ccs_scores_len(scores);
    for (size_t i = 0; i < n; i++) {
        CcsScoreRow row;
        if (ccs_scores_get(scores, i, &row) != CCS_STATUS_OK) return 12;
        printf("%s %zu\n", ccs_scores_project_id(scores, i), row.rank);
    }
    double x[] = {1, 2, 3}, y[] = {3, 2, 1};
    CcsTau tau;
    if (ccs_kendall_tau_b(x, y, 3, &tau) != CCS_STATUS_OK || tau.tau != -1.0) return 13;
    ccs_scores_free(scores);
    return 0;
}
"#;

/// Compiles a C client against the generated header and the static library.
/// Skipped when no C compiler or static archive is available.
#[test]
fn c_client_links_against_header() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("ccs.h").is_file(), "header was not generated");

    let exe = std::env::current_exe().unwrap();
    let archive = exe.parent().and_then(Path::parent).map(|d| d.join("libccs_ffi.a"));
    let Some(archive) = archive.filter(|a| a.is_file()) else {
        eprintln!("skipping C client: static library not found");
        return;
    };
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("client.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let bin = work.path().join("client");
    let compiled = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output();
    let Ok(compiled) = compiled else {
        eprintln!("skipping C client: no C compiler");
        return;
    };
    assert!(compiled.status.success(), "{}", String::from_utf8_lossy(&compiled.stderr));

    let dir = studio();
    let run = Command::new(&bin).arg(dir.path()).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    let ids: Vec<&str> = stdout.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(ids, ["alpha", "beta", "gamma"]);
}
