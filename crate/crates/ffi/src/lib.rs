//! C ABI over `ccs-core`.
//!
//! Every fallible call returns a [`CcsStatus`]. On failure a message is kept
//! per thread and can be read with [`ccs_last_error_message`]. Results live
//! behind the opaque [`CcsScores`] handle, which the caller frees with
//! [`ccs_scores_free`]. Strings handed out by this library are freed with
//! [`ccs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ccs_core::analysis::kendall_tau_b;
use ccs_core::cli::{exit_code, EXIT_ENV};
use ccs_core::pipeline::{score_studio, EmbeddingSource, ScoreOptions, StudioScores};

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An option was out of range or malformed.
    InvalidArgument = 3,
    /// Filesystem, configuration or import failure.
    Environment = 4,
    /// Well-formed input that cannot be scored or compared.
    Domain = 5,
    /// Row index past the end of the result set.
    OutOfRange = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Scoring parameters. Zero for `k_visual` or `k_text` means automatic.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcsOptions {
    pub seed: u64,
    pub k_visual: usize,
    pub k_text: usize,
    /// `"builtin"` or `"import:PATH"`; null selects the builtin embedding.
    pub embedding: *const c_char,
    /// `"element"` or `"project"`; null selects `"element"`.
    pub text_granularity: *const c_char,
}

/// One scored project. `index` is the row position for
/// [`ccs_scores_project_id`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CcsScoreRow {
    pub index: usize,
    pub originality_raw: f64,
    pub elaboration_raw: f64,
    pub textual_flex: usize,
    pub visual_flex: usize,
    pub flexibility_raw: f64,
    pub originality: f64,
    pub elaboration: f64,
    pub flexibility: f64,
    pub ccs: f64,
    pub rank: usize,
}

/// Kendall tau-b with its two-sided normal-approximation p-value.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CcsTau {
    pub tau: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Opaque handle to a scored studio.
pub struct CcsScores {
    inner: StudioScores,
    ids: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: CcsStatus, msg: impl Into<String>) -> CcsStatus {
    set_error(msg);
    status
}

/// Runs `f`, clearing the error slot first and turning panics into a status.
fn guard(f: impl FnOnce() -> CcsStatus) -> CcsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(CcsStatus::Panic, msg)
        }
    }
}

/// # Safety
/// `p` is null or a NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, CcsStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| fail(CcsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `opts` is null or points to a valid [`CcsOptions`].
unsafe fn score_options(opts: *const CcsOptions) -> Result<ScoreOptions, CcsStatus> {
    let mut out = ScoreOptions::default();
    let Some(o) = opts.as_ref() else {
        return Ok(out);
    };
    out.seed = o.seed;
    for (k, slot) in [(o.k_visual, &mut out.k_visual), (o.k_text, &mut out.k_text)] {
        match k {
            0 => *slot = None,
            1 => return Err(fail(CcsStatus::InvalidArgument, "k must be at least 2")),
            k => *slot = Some(k),
        }
    }
    if let Some(s) = opt_str(o.embedding, "embedding")? {
        out.embedding = s
            .parse::<EmbeddingSource>()
            .map_err(|e| fail(CcsStatus::InvalidArgument, e.to_string()))?;
    }
    if let Some(s) = opt_str(o.text_granularity, "text_granularity")? {
        out.text_granularity = s
            .parse()
            .map_err(|e: String| fail(CcsStatus::InvalidArgument, e))?;
    }
    Ok(out)
}

/// Scores every project in `studio_dir`. `opts` may be null for defaults.
/// On success `*out` owns a new handle.
///
/// # Safety
/// `studio_dir` is a NUL-terminated string, `opts` is null or valid, and
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_score_studio(
    studio_dir: *const c_char,
    opts: *const CcsOptions,
    out: *mut *mut CcsScores,
) -> CcsStatus {
    guard(|| {
        if out.is_null() {
            return fail(CcsStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let dir = match opt_str(studio_dir, "studio_dir") {
            Ok(Some(d)) => d,
            Ok(None) => return fail(CcsStatus::NullPointer, "studio_dir is null"),
            Err(s) => return s,
        };
        let options = match score_options(opts) {
            Ok(o) => o,
            Err(s) => return s,
        };
        match score_studio(Path::new(dir), &options) {
            Ok(inner) => {
                let ids = inner
                    .cards
                    .iter()
                    .map(|c| CString::new(c.project_id.replace('\0', " ")).unwrap_or_default())
                    .collect();
                *out = Box::into_raw(Box::new(CcsScores { inner, ids }));
                CcsStatus::Ok
            }
            Err(e) => {
                let status = if exit_code(&e) == EXIT_ENV {
                    CcsStatus::Environment
                } else {
                    CcsStatus::Domain
                };
                fail(status, e.to_string())
            }
        }
    })
}

/// Number of scored projects; 0 for a null handle.
///
/// # Safety
/// `scores` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccs_scores_len(scores: *const CcsScores) -> usize {
    scores.as_ref().map_or(0, |s| s.inner.cards.len())
}

/// Copies row `index` (rows are sorted by project id) into `*row`.
///
/// # Safety
/// `scores` is a live handle and `row` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_scores_get(
    scores: *const CcsScores,
    index: usize,
    row: *mut CcsScoreRow,
) -> CcsStatus {
    guard(|| {
        let (Some(s), false) = (scores.as_ref(), row.is_null()) else {
            return fail(CcsStatus::NullPointer, "scores or row is null");
        };
        let Some(c) = s.inner.cards.get(index) else {
            return fail(CcsStatus::OutOfRange, format!("row {index} of {}", s.inner.cards.len()));
        };
        *row = CcsScoreRow {
            index,
            originality_raw: c.originality_raw,
            elaboration_raw: c.elaboration_raw,
            textual_flex: c.textual_flex,
            visual_flex: c.visual_flex,
            flexibility_raw: c.flexibility_raw,
            originality: c.originality,
            elaboration: c.elaboration,
            flexibility: c.flexibility,
            ccs: c.ccs,
            rank: c.rank_ccs,
        };
        CcsStatus::Ok
    })
}

/// Project id of row `index`, or null if out of range. The string is owned
/// by the handle and valid until [`ccs_scores_free`].
///
/// # Safety
/// `scores` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccs_scores_project_id(scores: *const CcsScores, index: usize) -> *const c_char {
    scores
        .as_ref()
        .and_then(|s| s.ids.get(index))
        .map_or(ptr::null(), |id| id.as_ptr())
}

/// The `scores.json` document (`{"meta": ..., "scores": [...]}`). Free the
/// result with [`ccs_string_free`].
///
/// # Safety
/// `scores` is a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccs_scores_to_json(scores: *const CcsScores, out: *mut *mut c_char) -> CcsStatus {
    guard(|| {
        let (Some(s), false) = (scores.as_ref(), out.is_null()) else {
            return fail(CcsStatus::NullPointer, "scores or out is null");
        };
        let doc = serde_json::json!({"meta": s.inner.meta, "scores": s.inner.cards});
        match serde_json::to_string(&doc).map(CString::new) {
            Ok(Ok(text)) => {
                *out = text.into_raw();
                CcsStatus::Ok
            }
            Ok(Err(e)) => fail(CcsStatus::Domain, e.to_string()),
            Err(e) => fail(CcsStatus::Domain, e.to_string()),
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or came from this library and has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ccs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `scores` is null or a live handle that is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ccs_scores_free(scores: *mut CcsScores) {
    if !scores.is_null() {
        drop(Box::from_raw(scores));
    }
}

/// Kendall tau-b of two paired samples of length `len`.
///
/// # Safety
/// `x` and `y` point to `len` doubles each and `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn ccs_kendall_tau_b(
    x: *const f64,
    y: *const f64,
    len: usize,
    out: *mut CcsTau,
) -> CcsStatus {
    guard(|| {
        if x.is_null() || y.is_null() || out.is_null() {
            return fail(CcsStatus::NullPointer, "x, y or out is null");
        }
        let (xs, ys) = (std::slice::from_raw_parts(x, len), std::slice::from_raw_parts(y, len));
        match kendall_tau_b(xs, ys) {
            Ok(r) => {
                *out = CcsTau {
                    tau: r.tau,
                    p_value: r.p_value,
                    n: r.n,
                };
                CcsStatus::Ok
            }
            Err(e) => fail(CcsStatus::Domain, e.to_string()),
        }
    })
}

/// Message for the last failure on this thread, or null after a success.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ccs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ccs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
