use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use hme_core::model::{Checkpoint, Hyper, ModelParams};
use hme_ffi::*;

fn checkpoint_json() -> Vec<u8> {
    let params = ModelParams::init(Hyper { hidden: 4, seed: 2, ..Hyper::default() });
    serde_json::to_vec(&Checkpoint::with_defaults(&params)).unwrap()
}

fn load() -> *mut HmeRecognizer {
    let json = checkpoint_json();
    let mut rec = ptr::null_mut();
    let st = unsafe { hme_recognizer_from_json(json.as_ptr(), json.len(), &mut rec) };
    assert_eq!(st, HmeStatus::Ok);
    assert!(!rec.is_null());
    rec
}

fn last_error() -> String {
    let p = hme_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn recognizes_one_stroke() {
    let rec = load();
    let input = CString::new(r#"{"strokes": [[[0,0],[2,3],[4,0]]]}"#).unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let st = unsafe { hme_recognize_json(rec, input.as_ptr(), &mut out) };
    assert_eq!(st, HmeStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe {
        hme_string_free(out);
        hme_recognizer_free(rec);
    }
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["v"], hme_api_version());
    assert_eq!(v["srt"]["nodes"].as_array().unwrap().len(), 1);
}

#[test]
fn errors_set_status_and_message() {
    let rec = load();
    let mut out: *mut c_char = ptr::null_mut();
    let empty = CString::new(r#"{"strokes": []}"#).unwrap();
    assert_eq!(unsafe { hme_recognize_json(rec, empty.as_ptr(), &mut out) }, HmeStatus::EmptyInput);
    assert!(out.is_null());
    assert!(last_error().contains("no strokes"));

    let junk = CString::new("{not json").unwrap();
    assert_eq!(unsafe { hme_recognize_json(rec, junk.as_ptr(), &mut out) }, HmeStatus::InvalidInput);
    assert_eq!(unsafe { hme_recognize_json(rec, ptr::null(), &mut out) }, HmeStatus::NullArgument);
    unsafe { hme_recognizer_free(rec) };

    let mut json: serde_json::Value = serde_json::from_slice(&checkpoint_json()).unwrap();
    json["alphabet_hash"] = "0000".into();
    let bytes = serde_json::to_vec(&json).unwrap();
    let mut handle = ptr::null_mut();
    let st = unsafe { hme_recognizer_from_json(bytes.as_ptr(), bytes.len(), &mut handle) };
    assert_eq!(st, HmeStatus::AlphabetMismatch);
    assert!(handle.is_null());

    let missing = CString::new("/nonexistent/ck.json").unwrap();
    assert_eq!(unsafe { hme_recognizer_load(missing.as_ptr(), &mut handle) }, HmeStatus::BadCheckpoint);
    assert!(last_error().contains("/nonexistent/ck.json"));
}

#[test]
fn success_clears_the_last_error() {
    let mut out: *mut c_char = ptr::null_mut();
    assert_eq!(unsafe { hme_alphabet_hash(ptr::null_mut()) }, HmeStatus::NullArgument);
    assert_eq!(unsafe { hme_alphabet_hash(&mut out) }, HmeStatus::Ok);
    assert!(hme_last_error().is_null());
    let hash = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { hme_string_free(out) };
    assert_eq!(hash, hme_core::alphabet::alphabet_hash());
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hme.h")).unwrap();
    for name in [
        "hme_recognizer_load",
        "hme_recognizer_from_json",
        "hme_recognizer_free",
        "hme_recognize_json",
        "hme_alphabet_hash",
        "hme_last_error",
        "hme_string_free",
        "typedef struct HmeRecognizer HmeRecognizer",
        "HmeStatus_AlphabetMismatch = 5",
    ] {
        assert!(header.contains(name), "{name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "hme.h"

int main(int argc, char **argv) {
    HmeRecognizer *rec = NULL;
    if (hme_recognizer_load(argv[1], &rec) != HmeStatus_Ok) {
        fprintf(stderr, "load: %s\n", hme_last_error());
        return 1;
    }
    char *out = NULL;
    if (hme_recognize_json(rec, "{\"strokes\": [[[0,0],[1,1]], [[3,0],[4,1]]]}", &out) != HmeStatus_Ok) {
        fprintf(stderr, "recognize: %s\n", hme_last_error());
        return 2;
    }
    int ok = strstr(out, "\"latex\"") != NULL;
    printf("%s\n", out);
    hme_string_free(out);
    hme_recognizer_free(rec);
    return ok ? 0 : 3;
}
"#;

/// Compile and run a C client against the static library when a C
/// compiler is available.
#[test]
fn c_client_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else { return };
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libhme_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let dir = tempfile_dir();
    let src = dir.join("client.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let ck = dir.join("ck.json");
    std::fs::write(&ck, checkpoint_json()).unwrap();
    let bin = dir.join("client");
    let status = Command::new("cc")
        .arg(&src)
        .arg(format!("-I{}", concat!(env!("CARGO_MANIFEST_DIR"), "/include")))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to build");
    let out = Command::new(&bin).arg(&ck).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["srt"]["nodes"].as_array().unwrap().len() + count_dropped(&v), 2);
}

fn count_dropped(v: &serde_json::Value) -> usize {
    v["dropped_fragments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["srt"]["nodes"].as_array().unwrap().len())
        .sum()
}

fn tempfile_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_api");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
