use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use stepplace::context_trace::{generate_synthetic_trace, write_trace, CellTarget, Segment, TraceScript};
use stepplace::*;
use stepplace_ffi::*;

fn fixture_profile() -> SpatialProfile {
    let front = AnchoringSurface::new("front", Vec3::new(-0.3, 1.2, 0.0), Vec3::x(), Vec3::y(), 0.6, 0.3, Orientation::Vertical)
        .unwrap();
    SpatialProfile::new("kitchen", vec![KeyObject::new("oven", vec![front]).unwrap()]).unwrap()
}

fn fixture_trace(spatial: &SpatialProfile) -> String {
    let script = TraceScript {
        rate_hz: 30.0,
        eye: [0.0, 1.1, -0.6],
        ipd_m: 0.064,
        segments: vec![Segment {
            duration_s: 1.0,
            gaze: CellTarget { surface: "front".into(), r: 10, c: 5 },
            saccade_from: None,
            gaze_noise_deg: 0.1,
            hands: None,
        }],
    };
    write_trace(&generate_synthetic_trace(&script, spatial, 0).unwrap())
}

fn fixture_doc(label: Option<&str>) -> String {
    let mut step = InstructionStep::unassigned("s1", "preheat the oven");
    if let Some(l) = label {
        step.key_object = Some(l.into());
        step.source = StepSource::Manual;
        step.confidence = 1.0;
    }
    let available = ["oven", "sink"].map(String::from).into_iter().collect();
    DocumentProfile::new("t", available, vec![step]).unwrap().to_json()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = sp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    sp_string_free(s);
    out
}

struct Handles {
    spatial: *mut SpSpatialProfile,
    doc: *mut SpDocument,
    trace: *mut SpTrace,
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            sp_spatial_free(self.spatial);
            sp_document_free(self.doc);
            sp_trace_free(self.trace);
        }
    }
}

fn load(label: Option<&str>) -> Handles {
    let profile = fixture_profile();
    let mut h = Handles { spatial: ptr::null_mut(), doc: ptr::null_mut(), trace: ptr::null_mut() };
    unsafe {
        assert_eq!(sp_spatial_from_json(c(&profile.to_json()).as_ptr(), &mut h.spatial), SpStatus::Ok);
        assert_eq!(sp_document_from_json(c(&fixture_doc(label)).as_ptr(), &mut h.doc), SpStatus::Ok);
        assert_eq!(sp_trace_from_jsonl(c(&fixture_trace(&profile)).as_ptr(), &mut h.trace), SpStatus::Ok);
    }
    h
}

#[test]
fn handles_expose_their_contents() {
    let h = load(Some("oven"));
    unsafe {
        assert_eq!(sp_spatial_cell_count(h.spatial, c("oven").as_ptr()), 200);
        assert_eq!(sp_spatial_cell_count(h.spatial, c("sink").as_ptr()), 0);
        assert_eq!(sp_document_step_count(h.doc), 1);
        assert_eq!(sp_trace_len(h.trace), 30);
        let mut json = ptr::null_mut();
        assert_eq!(sp_document_to_json(h.doc, &mut json), SpStatus::Ok);
        assert_eq!(take(json), fixture_doc(Some("oven")));
    }
    assert!(sp_last_error_message().is_null());
}

#[test]
fn place_matches_the_library_and_is_deterministic() {
    let h = load(Some("oven"));
    let mut opts = sp_place_options_default();
    opts.seed = 7;
    let run = || unsafe {
        let mut report = ptr::null_mut();
        assert_eq!(sp_place(h.spatial, h.doc, h.trace, c("s1").as_ptr(), &opts, &mut report), SpStatus::Ok);
        take(report)
    };
    let a = run();
    assert_eq!(a, run());

    let profile = fixture_profile();
    let frames = context_trace::read_trace(&fixture_trace(&profile)).unwrap();
    let doc = DocumentProfile::from_json(fixture_doc(Some("oven")).as_bytes()).unwrap();
    let params = cli::PlaceParams { annealing: AnnealingConfig { seed: 7, ..Default::default() }, ..Default::default() };
    let direct = cli::place_step(&profile, &doc, &frames, "s1", &params).unwrap();
    assert_eq!(a, serde_json::to_string(&direct.report).unwrap());

    let mut report = ptr::null_mut();
    assert_eq!(unsafe { sp_place(h.spatial, h.doc, h.trace, c("s1").as_ptr(), ptr::null(), &mut report) }, SpStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&unsafe { take(report) }).unwrap();
    assert_eq!(v["search"]["seed"], 0);
}

#[test]
fn failures_carry_status_and_message() {
    let h = load(None);
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(sp_place(h.spatial, h.doc, h.trace, c("s1").as_ptr(), ptr::null(), &mut report), SpStatus::UnassignedStep);
        assert!(last_error().contains("s1"));
        assert_eq!(sp_place(h.spatial, h.doc, h.trace, c("s9").as_ptr(), ptr::null(), &mut report), SpStatus::UnknownStep);
        assert_eq!(sp_place(ptr::null(), h.doc, h.trace, c("s1").as_ptr(), ptr::null(), &mut report), SpStatus::NullPointer);
        assert!(last_error().contains("spatial"));
        assert!(report.is_null());

        let mut opts = sp_place_options_default();
        opts.label_w = -1.0;
        let sink = load(Some("sink"));
        assert_eq!(sp_place(sink.spatial, sink.doc, sink.trace, c("s1").as_ptr(), &opts, &mut report), SpStatus::InvalidArgument);
        assert_eq!(sp_place(sink.spatial, sink.doc, sink.trace, c("s1").as_ptr(), ptr::null(), &mut report), SpStatus::UnknownKeyObject);

        let mut doc = ptr::null_mut();
        assert_eq!(sp_document_from_json(c("{").as_ptr(), &mut doc), SpStatus::Parse);
        assert!(doc.is_null());
        assert_eq!(sp_document_from_json(c("{}").as_ptr(), ptr::null_mut()), SpStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(sp_document_from_json(bad.as_ptr().cast(), &mut doc), SpStatus::InvalidUtf8);
        sp_spatial_free(ptr::null_mut());
        sp_string_free(ptr::null_mut());
    }
}

#[test]
fn rule_label_through_the_abi() {
    unsafe {
        let mut label = ptr::null_mut();
        assert_eq!(sp_rule_label(c("boiling a cup of water in the microwave for 5 min").as_ptr(), &mut label), SpStatus::Ok);
        assert_eq!(take(label), "microwave");
        assert_eq!(sp_rule_label(c("boiling a cup of water for 5 min").as_ptr(), &mut label), SpStatus::Ok);
        assert!(label.is_null());
    }
    assert_eq!(unsafe { CStr::from_ptr(sp_version()) }.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Directory holding the built static library, next to this test binary's `deps/`.
fn artifact_dir() -> PathBuf {
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_generated_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = artifact_dir().join("libstepplace_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "microwave\nnone\n4 null\n");
}
