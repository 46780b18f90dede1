//! C ABI for lexwm.
//!
//! Lexicons and watermarkers are opaque heap handles created by `*_new` /
//! `*_load` and released by the matching `*_free`. Every fallible call
//! returns a [`LexwmStatus`]; on failure a message is available from
//! [`lexwm_last_error_message`] on the same thread. Strings returned through
//! out-parameters are owned by the caller and released with
//! [`lexwm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lexwm::detector::{self, Decision, ReportEnvelope, VerificationReport, VerifyParams};
use lexwm::watermark::keyed_hash64;
use lexwm::{Error, Lexicon, WatermarkKey, Watermarker};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexwmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidLexicon = 4,
    Parse = 5,
    InvalidKey = 6,
    NoEvidence = 7,
    InsufficientGroups = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexwmDecision {
    NoEvidence = 0,
    Suspected = 1,
    Confirmed = 2,
}

impl From<Decision> for LexwmDecision {
    fn from(d: Decision) -> Self {
        match d {
            Decision::NoEvidence => LexwmDecision::NoEvidence,
            Decision::Suspected => LexwmDecision::Suspected,
            Decision::Confirmed => LexwmDecision::Confirmed,
        }
    }
}

/// Numeric part of a verification report. Warnings are only counted here;
/// the JSON form carries their text.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexwmReport {
    pub hit: f64,
    pub p_value: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub p_null: f64,
    pub n: u64,
    pub k: u64,
    pub tau: f64,
    pub alpha: f64,
    pub decision: LexwmDecision,
    pub warning_count: usize,
}

impl From<&VerificationReport> for LexwmReport {
    fn from(r: &VerificationReport) -> Self {
        LexwmReport {
            hit: r.hit,
            p_value: r.p_value,
            beta1: r.beta1,
            beta2: r.beta2,
            p_null: r.p_null,
            n: r.n,
            k: r.k,
            tau: r.tau,
            alpha: r.alpha,
            decision: r.decision.into(),
            warning_count: r.warnings.len(),
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexwmBinomialTest {
    pub beta1: f64,
    pub beta2: f64,
    pub p_value: f64,
}

/// Opaque lexicon handle.
pub struct LexwmLexicon {
    inner: Lexicon,
}

/// Opaque lexicon + key handle. Safe to share across threads.
pub struct LexwmWatermarker {
    inner: Watermarker,
    fingerprint: String,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(e: &Error) -> LexwmStatus {
    match e {
        Error::InvalidArgument(_) => LexwmStatus::InvalidArgument,
        Error::InvalidLexicon(_) => LexwmStatus::InvalidLexicon,
        Error::Parse { .. } => LexwmStatus::Parse,
        Error::InsufficientGroups { .. } => LexwmStatus::InsufficientGroups,
        Error::NoEvidence(_) => LexwmStatus::NoEvidence,
        Error::InvalidKey(_) => LexwmStatus::InvalidKey,
        Error::Io { .. } => LexwmStatus::Io,
    }
}

struct Failure(LexwmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording the error message and mapping panics to `Panic`.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LexwmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LexwmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            LexwmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(LexwmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(LexwmStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn lines_arg<'a>(lines: *const *const c_char, count: usize) -> Result<Vec<&'a str>, Failure> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if lines.is_null() {
        return Err(null("lines"));
    }
    std::slice::from_raw_parts(lines, count)
        .iter()
        .map(|&l| str_arg(l, "line"))
        .collect()
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(LexwmStatus::InvalidArgument, "output contains a NUL byte".into()))
}

fn params(tau: f64, alpha: f64) -> VerifyParams {
    VerifyParams {
        tau: (!tau.is_nan()).then_some(tau),
        alpha,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lexwm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lexwm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lexwm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads and validates a lexicon TSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_lexicon_load(path: *const c_char, out: *mut *mut LexwmLexicon) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = Lexicon::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(LexwmLexicon { inner }));
        Ok(())
    })
}

/// Parses lexicon TSV text.
///
/// # Safety
/// `tsv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_lexicon_parse(tsv: *const c_char, out: *mut *mut LexwmLexicon) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(tsv, "tsv")?;
        let inner = Lexicon::from_tsv_str(text, Path::new("<memory>"))?;
        *out = Box::into_raw(Box::new(LexwmLexicon { inner }));
        Ok(())
    })
}

/// # Safety
/// `lexicon` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn lexwm_lexicon_free(lexicon: *mut LexwmLexicon) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Number of groups and substitutes per group.
///
/// # Safety
/// `lexicon` must be a live handle; `groups` and `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_lexicon_shape(
    lexicon: *const LexwmLexicon,
    groups: *mut usize,
    m: *mut usize,
) -> LexwmStatus {
    guard(|| {
        let lexicon = &ref_arg(lexicon, "lexicon")?.inner;
        *out_arg(groups, "groups")? = lexicon.len();
        *out_arg(m, "m")? = lexicon.m();
        Ok(())
    })
}

/// Hex SHA-256 fingerprint of the canonical lexicon; free with
/// `lexwm_string_free`.
///
/// # Safety
/// `lexicon` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_lexicon_fingerprint(lexicon: *const LexwmLexicon, out: *mut *mut c_char) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = into_c_string(ref_arg(lexicon, "lexicon")?.inner.fingerprint())?;
        Ok(())
    })
}

/// Pairs a copy of `lexicon` with a raw key of at least 16 bytes. The
/// lexicon handle may be freed afterwards.
///
/// # Safety
/// `lexicon` must be a live handle, `key` must point to `key_len` readable
/// bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_watermarker_new(
    lexicon: *const LexwmLexicon,
    key: *const u8,
    key_len: usize,
    out: *mut *mut LexwmWatermarker,
) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let lexicon = ref_arg(lexicon, "lexicon")?.inner.clone();
        if key.is_null() {
            return Err(null("key"));
        }
        let key = WatermarkKey::new(std::slice::from_raw_parts(key, key_len).to_vec())?;
        let fingerprint = lexicon.fingerprint();
        *out = Box::into_raw(Box::new(LexwmWatermarker {
            inner: Watermarker::new(lexicon, key),
            fingerprint,
        }));
        Ok(())
    })
}

/// # Safety
/// `wm` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn lexwm_watermarker_free(wm: *mut LexwmWatermarker) {
    if !wm.is_null() {
        drop(Box::from_raw(wm));
    }
}

/// Watermarks `text`. `replacements` (nullable) receives the number of
/// triggered words, identity substitutions included.
///
/// # Safety
/// `wm` must be a live handle, `text` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_watermark_apply(
    wm: *const LexwmWatermarker,
    text: *const c_char,
    out: *mut *mut c_char,
    replacements: *mut usize,
) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let wm = &ref_arg(wm, "watermarker")?.inner;
        let marked = wm.apply(str_arg(text, "text")?);
        if let Some(count) = replacements.as_mut() {
            *count = marked.replacements.len();
        }
        *out = into_c_string(marked.text)?;
        Ok(())
    })
}

/// Verifies a corpus of `count` lines. Pass NaN as `tau` for the default
/// threshold.
///
/// # Safety
/// `wm` must be a live handle, `lines` must point to `count` NUL-terminated
/// strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_verify(
    wm: *const LexwmWatermarker,
    lines: *const *const c_char,
    count: usize,
    tau: f64,
    alpha: f64,
    out: *mut LexwmReport,
) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let wm = &ref_arg(wm, "watermarker")?.inner;
        let corpus = lines_arg(lines, count)?;
        let (report, _) = detector::verify_with_stats(wm, &corpus, &params(tau, alpha))?;
        *out = LexwmReport::from(&report);
        Ok(())
    })
}

/// Same as `lexwm_verify` but returns the full JSON report, including tool
/// version, lexicon fingerprint and warnings.
///
/// # Safety
/// As for `lexwm_verify`; `out` receives a string to free with
/// `lexwm_string_free`.
#[no_mangle]
pub unsafe extern "C" fn lexwm_verify_json(
    wm: *const LexwmWatermarker,
    lines: *const *const c_char,
    count: usize,
    tau: f64,
    alpha: f64,
    out: *mut *mut c_char,
) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let handle = ref_arg(wm, "watermarker")?;
        let corpus = lines_arg(lines, count)?;
        let (report, _) = detector::verify_with_stats(&handle.inner, &corpus, &params(tau, alpha))?;
        let json = serde_json::to_string(&ReportEnvelope::new(&report, &handle.fingerprint))
            .map_err(|e| Failure(LexwmStatus::InvalidArgument, e.to_string()))?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// Exact two-tailed binomial test of `k` successes in `n` trials.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_binomial_p_value(k: u64, n: u64, p: f64, out: *mut LexwmBinomialTest) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t = detector::binomial_p_value(k, n, p)?;
        *out = LexwmBinomialTest {
            beta1: t.beta1,
            beta2: t.beta2,
            p_value: t.p_value,
        };
        Ok(())
    })
}

/// Keyed 64-bit hash of `count` strings, as used for target selection.
///
/// # Safety
/// `key` must point to `key_len` bytes, `parts` to `count` NUL-terminated
/// strings and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lexwm_keyed_hash64(
    key: *const u8,
    key_len: usize,
    parts: *const *const c_char,
    count: usize,
    out: *mut u64,
) -> LexwmStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if key.is_null() {
            return Err(null("key"));
        }
        let key = WatermarkKey::new(std::slice::from_raw_parts(key, key_len).to_vec())?;
        *out = keyed_hash64(&key, &lines_arg(parts, count)?);
        Ok(())
    })
}
