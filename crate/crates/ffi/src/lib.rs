//! C ABI for stepplace.
//!
//! Every fallible function returns an [`SpStatus`]. On failure a message is
//! stored per thread and can be read with [`sp_last_error_message`]. Handles
//! are opaque and owned by the caller, who releases them with the matching
//! `*_free` function. Strings returned through `char **` out-parameters must
//! be released with [`sp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stepplace::cli::{place_step, PlaceParams};
use stepplace::context_trace::read_trace;
use stepplace::document_profile::rule_label;
use stepplace::optimizer::AnnealingConfig;
use stepplace::{CostWeights, DocumentProfile, Error, Frame, LabelGeometry, LabelVocabulary, SpatialProfile};

/// Result of a C ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// Malformed JSON, JSONL or profile contents.
    Parse = 4,
    UnknownStep = 5,
    UnassignedStep = 6,
    UnknownKeyObject = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// A loaded spatial profile.
pub struct SpSpatialProfile(SpatialProfile);

/// A loaded document profile.
pub struct SpDocument(DocumentProfile);

/// A loaded gaze and hand trace.
pub struct SpTrace(Vec<Frame>);

/// Placement tunables. Obtain defaults from [`sp_place_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpPlaceOptions {
    pub seed: u64,
    pub t1: f64,
    pub i_max: usize,
    pub n_frames: usize,
    /// Index of the last frame in the window; negative selects the last frame.
    pub cursor: i64,
    pub lambda_v: f64,
    pub lambda_r: f64,
    pub lambda_ha: f64,
    pub lambda_p: f64,
    pub label_w: f64,
    pub label_h: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(SpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::UnknownStep(_) => SpStatus::UnknownStep,
            Error::UnassignedStep(_) => SpStatus::UnassignedStep,
            Error::UnknownKeyObject(_) => SpStatus::UnknownKeyObject,
            Error::Parse(_) | Error::Json(_) | Error::InvalidProfile(_) | Error::InvalidSurface { .. } => SpStatus::Parse,
            _ => SpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SpStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SpStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SpStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(SpStatus::NullPointer, format!("`{name}` is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(SpStatus::NullPointer, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("generated text has no nul bytes").into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a spatial profile from JSON.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_spatial_from_json(json: *const c_char, out: *mut *mut SpSpatialProfile) -> SpStatus {
    guard(|| {
        out_arg(out, "out")?;
        let profile = SpatialProfile::from_json(str_arg(json, "json")?.as_bytes())?;
        *out = Box::into_raw(Box::new(SpSpatialProfile(profile)));
        Ok(())
    })
}

/// Number of cells on a key object, or 0 if it does not exist.
///
/// # Safety
/// `profile` must be a live handle and `key_object` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sp_spatial_cell_count(profile: *const SpSpatialProfile, key_object: *const c_char) -> usize {
    let (Some(p), Ok(name)) = (profile.as_ref(), str_arg(key_object, "key_object")) else {
        return 0;
    };
    p.0.key_object(name).map_or(0, |k| k.total_cells())
}

/// # Safety
/// `profile` must be null or a live handle from [`sp_spatial_from_json`].
#[no_mangle]
pub unsafe extern "C" fn sp_spatial_free(profile: *mut SpSpatialProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Parses a document profile from JSON.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_document_from_json(json: *const c_char, out: *mut *mut SpDocument) -> SpStatus {
    guard(|| {
        out_arg(out, "out")?;
        let doc = DocumentProfile::from_json(str_arg(json, "json")?.as_bytes())?;
        *out = Box::into_raw(Box::new(SpDocument(doc)));
        Ok(())
    })
}

/// # Safety
/// `doc` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sp_document_step_count(doc: *const SpDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.0.steps.len())
}

/// Serializes a document profile to a newly allocated JSON string.
///
/// # Safety
/// `doc` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_document_to_json(doc: *const SpDocument, out: *mut *mut c_char) -> SpStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = into_c_string(ref_arg(doc, "doc")?.0.to_json());
        Ok(())
    })
}

/// # Safety
/// `doc` must be null or a live handle from [`sp_document_from_json`].
#[no_mangle]
pub unsafe extern "C" fn sp_document_free(doc: *mut SpDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

/// Parses a trace, one JSON frame per line.
///
/// # Safety
/// `jsonl` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_trace_from_jsonl(jsonl: *const c_char, out: *mut *mut SpTrace) -> SpStatus {
    guard(|| {
        out_arg(out, "out")?;
        let frames = read_trace(str_arg(jsonl, "jsonl")?)?;
        *out = Box::into_raw(Box::new(SpTrace(frames)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sp_trace_len(trace: *const SpTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `trace` must be null or a live handle from [`sp_trace_from_jsonl`].
#[no_mangle]
pub unsafe extern "C" fn sp_trace_free(trace: *mut SpTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

#[no_mangle]
pub extern "C" fn sp_place_options_default() -> SpPlaceOptions {
    let p = PlaceParams::default();
    SpPlaceOptions {
        seed: p.annealing.seed,
        t1: p.annealing.t1,
        i_max: p.annealing.i_max,
        n_frames: p.n_frames,
        cursor: -1,
        lambda_v: p.weights.visibility,
        lambda_r: p.weights.readability,
        lambda_ha: p.weights.hand_angle,
        lambda_p: p.weights.preference,
        label_w: p.label.width_m,
        label_h: p.label.height_m,
    }
}

fn params(o: &SpPlaceOptions) -> Result<PlaceParams, Failure> {
    Ok(PlaceParams {
        weights: CostWeights {
            visibility: o.lambda_v,
            readability: o.lambda_r,
            hand_angle: o.lambda_ha,
            preference: o.lambda_p,
        },
        label: LabelGeometry::new(o.label_w, o.label_h)?,
        n_frames: o.n_frames,
        cursor: usize::try_from(o.cursor).ok(),
        annealing: AnnealingConfig { t1: o.t1, i_max: o.i_max, seed: o.seed },
    })
}

/// Places one step and writes the placement report as JSON to `report_json`.
/// `options` may be null for defaults.
///
/// # Safety
/// Handles must be live, `step_id` nul-terminated, `options` null or valid,
/// and `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn sp_place(
    spatial: *const SpSpatialProfile,
    doc: *const SpDocument,
    trace: *const SpTrace,
    step_id: *const c_char,
    options: *const SpPlaceOptions,
    report_json: *mut *mut c_char,
) -> SpStatus {
    guard(|| {
        out_arg(report_json, "report_json")?;
        let opts = options.as_ref().copied().unwrap_or_else(|| sp_place_options_default());
        let outcome = place_step(
            &ref_arg(spatial, "spatial")?.0,
            &ref_arg(doc, "doc")?.0,
            &ref_arg(trace, "trace")?.0,
            str_arg(step_id, "step_id")?,
            &params(&opts)?,
        )?;
        let json = serde_json::to_string(&outcome.report).map_err(Error::from)?;
        *report_json = into_c_string(json);
        Ok(())
    })
}

/// Labels `text` with the built-in kitchen vocabulary. `*label` is set to a
/// new string, or to null when no label word occurs.
///
/// # Safety
/// `text` must be nul-terminated and `label` writable.
#[no_mangle]
pub unsafe extern "C" fn sp_rule_label(text: *const c_char, label: *mut *mut c_char) -> SpStatus {
    guard(|| {
        out_arg(label, "label")?;
        let found = rule_label(str_arg(text, "text")?, &LabelVocabulary::default()).label;
        *label = found.map_or(ptr::null_mut(), into_c_string);
        Ok(())
    })
}
