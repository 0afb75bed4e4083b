//! C interface to the recognizer.
//!
//! A recognizer is loaded from a checkpoint into an opaque handle. Every
//! function returns an [`HmeStatus`]; on failure a message is available from
//! [`hme_last_error`] on the same thread. Strings handed out by the library
//! are owned by the caller and released with [`hme_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hme_core::alphabet::alphabet_hash;
use hme_core::api::{Recognizer, API_VERSION};
use hme_core::model::Checkpoint;
use hme_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HmeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    BadCheckpoint = 4,
    AlphabetMismatch = 5,
    InvalidInput = 6,
    EmptyInput = 7,
    Internal = 8,
}

/// Opaque recognizer handle.
pub struct HmeRecognizer {
    inner: Recognizer,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: HmeStatus, msg: impl Into<String>) -> HmeStatus {
    set_error(msg.into());
    status
}

fn status_of(e: &Error) -> HmeStatus {
    match e {
        Error::Io(_) => HmeStatus::Io,
        Error::Checkpoint(_) => HmeStatus::BadCheckpoint,
        Error::AlphabetMismatch { .. } => HmeStatus::AlphabetMismatch,
        Error::Empty(_) => HmeStatus::EmptyInput,
        Error::Json(_) | Error::InvalidInk(_) => HmeStatus::InvalidInput,
        _ => HmeStatus::Internal,
    }
}

/// Run `f`, turning errors and panics into a status plus a message.
fn guard(f: impl FnOnce() -> Result<(), (HmeStatus, String)>) -> HmeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HmeStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(HmeStatus::Internal, "panic inside the recognizer"),
    }
}

fn core_err(e: Error) -> (HmeStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (HmeStatus, String)> {
    if p.is_null() {
        return Err((HmeStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HmeStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn into_c_string(s: String) -> Result<*mut c_char, (HmeStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (HmeStatus::Internal, "output contains a NUL byte".to_string()))
}

/// Version of the JSON documents this library produces.
#[no_mangle]
pub extern "C" fn hme_api_version() -> u32 {
    API_VERSION
}

/// Load a checkpoint file. On success `*out` receives a handle that must be
/// released with [`hme_recognizer_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hme_recognizer_load(path: *const c_char, out: *mut *mut HmeRecognizer) -> HmeStatus {
    guard(|| {
        if out.is_null() {
            return Err((HmeStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let ck = Checkpoint::load(Path::new(path)).map_err(core_err)?;
        let inner = Recognizer::from_checkpoint(&ck).map_err(core_err)?;
        *out = Box::into_raw(Box::new(HmeRecognizer { inner }));
        Ok(())
    })
}

/// Like [`hme_recognizer_load`] but from checkpoint JSON held in memory.
///
/// # Safety
/// `json` must point to `len` readable bytes and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hme_recognizer_from_json(
    json: *const u8,
    len: usize,
    out: *mut *mut HmeRecognizer,
) -> HmeStatus {
    guard(|| {
        if out.is_null() || json.is_null() {
            return Err((HmeStatus::NullArgument, "json or out is null".into()));
        }
        *out = ptr::null_mut();
        let bytes = std::slice::from_raw_parts(json, len);
        let ck = Checkpoint::from_json(bytes).map_err(core_err)?;
        let inner = Recognizer::from_checkpoint(&ck).map_err(core_err)?;
        *out = Box::into_raw(Box::new(HmeRecognizer { inner }));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `rec` must come from one of the load functions and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hme_recognizer_free(rec: *mut HmeRecognizer) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Recognize `{"strokes": [[[x,y],...],...]}` and return the result JSON in
/// `*out_json`. The handle is only read, so one handle may be shared by
/// several threads.
///
/// # Safety
/// `rec` must be a live handle, `strokes_json` a NUL-terminated string and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hme_recognize_json(
    rec: *const HmeRecognizer,
    strokes_json: *const c_char,
    out_json: *mut *mut c_char,
) -> HmeStatus {
    guard(|| {
        if rec.is_null() || out_json.is_null() {
            return Err((HmeStatus::NullArgument, "recognizer or out_json is null".into()));
        }
        *out_json = ptr::null_mut();
        let input = str_arg(strokes_json, "strokes_json")?;
        let result = (*rec).inner.recognize_json(input.as_bytes()).map_err(core_err)?;
        let text = serde_json::to_string(&result).map_err(|e| (HmeStatus::Internal, e.to_string()))?;
        *out_json = into_c_string(text)?;
        Ok(())
    })
}

/// Hash of the label alphabet compiled into this library; a checkpoint
/// only loads when its hash matches.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hme_alphabet_hash(out: *mut *mut c_char) -> HmeStatus {
    guard(|| {
        if out.is_null() {
            return Err((HmeStatus::NullArgument, "out is null".into()));
        }
        *out = into_c_string(alphabet_hash())?;
        Ok(())
    })
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn hme_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Free a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hme_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
