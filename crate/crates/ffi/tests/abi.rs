use std::ffi::{CStr, CString};
use std::ptr;

use statefuzz_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = stf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn take_string(ptr: *mut std::ffi::c_char) -> String {
    let text = unsafe { CStr::from_ptr(ptr) }.to_str().unwrap().to_owned();
    unsafe { stf_string_free(ptr) };
    text
}

fn record(stt: *const StfStt, updates: &[(&str, i64)]) -> (u32, usize) {
    unsafe {
        assert_eq!(stf_stt_begin(stt), StfStatus::Ok);
        for &(var, value) in updates {
            assert_eq!(stf_stt_update(stt, cstr(var).as_ptr(), value), StfStatus::Ok);
        }
        let (mut terminal, mut created) = (0, 0);
        assert_eq!(stf_stt_end(stt, &mut terminal, &mut created), StfStatus::Ok);
        (terminal, created)
    }
}

#[test]
fn tree_handle_records_paths() {
    let stt = stf_stt_new(16);
    assert!(!stt.is_null());
    let a = record(stt, &[("s", 0), ("s", 1), ("s", 7)]);
    assert_eq!(a.1, 3);
    let b = record(stt, &[("s", 0), ("s", 1), ("s", 7)]);
    assert_eq!(b, (a.0, 0));
    let c = record(stt, &[("s", 0), ("s", 7)]);
    assert_eq!(c.1, 1);
    unsafe {
        assert_eq!(stf_stt_node_count(stt), 4);
        assert_eq!(stf_stt_transition_coverage(stt), 2);
        let mut json = ptr::null_mut();
        assert_eq!(stf_stt_to_json(stt, &mut json), StfStatus::Ok);
        let value: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(value["executions"], 3);
        assert_eq!(value["transition_coverage"], 2);
        stf_stt_free(stt);
    }
}

#[test]
fn protocol_errors_map_to_status_codes() {
    let stt = stf_stt_new(16);
    unsafe {
        assert_eq!(stf_stt_end(stt, ptr::null_mut(), ptr::null_mut()), StfStatus::NoActiveExecution);
        assert_eq!(last_error(), "no execution in progress");
        assert_eq!(stf_stt_update(stt, cstr("s").as_ptr(), 1), StfStatus::NoActiveExecution);
        assert_eq!(stf_stt_begin(stt), StfStatus::Ok);
        assert_eq!(stf_stt_begin(stt), StfStatus::ExecutionAlreadyActive);
        assert_eq!(stf_stt_update(stt, ptr::null(), 1), StfStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(stf_stt_update(stt, bad.as_ptr().cast(), 1), StfStatus::InvalidUtf8);
        assert_eq!(stf_stt_begin(ptr::null()), StfStatus::NullPointer);
        assert_eq!(stf_stt_node_count(ptr::null()), 0);
        stf_stt_free(stt);
        stf_stt_free(ptr::null_mut());
        stf_string_free(ptr::null_mut());
    }
    assert!(stf_stt_new(0).is_null());
}

#[test]
fn runtime_forwards_updates_to_the_attached_tree() {
    let stt = stf_stt_new(16);
    unsafe {
        assert_eq!(stf_runtime_attach(stt), StfStatus::Ok);
        assert_eq!(stf_stt_begin(stt), StfStatus::Ok);
        __stt_update(cstr("conn->state").as_ptr(), 2);
        __stt_update(cstr("conn->state").as_ptr(), 3);
        assert_eq!(stf_stt_end(stt, ptr::null_mut(), ptr::null_mut()), StfStatus::Ok);
        stf_runtime_detach();
        __stt_update(cstr("conn->state").as_ptr(), 4);
        assert_eq!(last_error(), "no tree attached");
        assert_eq!(stf_stt_node_count(stt), 2);
        stf_stt_free(stt);
    }
}

fn scan(path: &std::path::Path) -> CString {
    let path = cstr(path.to_str().unwrap());
    let paths = [path.as_ptr()];
    let mut manifest = ptr::null_mut();
    assert_eq!(unsafe { stf_svscan(paths.as_ptr(), 1, &mut manifest) }, StfStatus::Ok);
    cstr(&take_string(manifest))
}

#[test]
fn instrument_reports_conflicts_and_bad_manifests() {
    let text = "enum s { A, B };\nenum s st;\nvoid f(void)\n{\n    st = B;\n    if (1) st = A;\n}\n";
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.c");
    std::fs::write(&path, text).unwrap();
    let manifest = scan(&path);

    let source = cstr(text);
    let file = cstr(path.to_str().unwrap());
    let mut out = ptr::null_mut();
    let mut conflicts = 0;
    let status = unsafe { stf_instrument(source.as_ptr(), file.as_ptr(), manifest.as_ptr(), &mut out, &mut conflicts) };
    assert_eq!(status, StfStatus::Ok);
    let instrumented = take_string(out);
    assert_eq!(instrumented.matches("__stt_update(\"st\", B);").count(), 1, "{instrumented}");
    assert_eq!(conflicts, 1);

    let broken = cstr("no tabs here\n");
    let status = unsafe { stf_instrument(source.as_ptr(), file.as_ptr(), broken.as_ptr(), &mut out, ptr::null_mut()) };
    assert_eq!(status, StfStatus::Manifest);
    assert!(last_error().starts_with("malformed manifest line 1"));
}

#[test]
fn svscan_reports_missing_files() {
    let path = cstr("/does/not/exist.c");
    let paths = [path.as_ptr()];
    let mut manifest = ptr::null_mut();
    assert_eq!(unsafe { stf_svscan(paths.as_ptr(), 1, &mut manifest) }, StfStatus::Io);
    assert!(last_error().contains("/does/not/exist.c"));
    assert_eq!(unsafe { stf_svscan(ptr::null(), 0, &mut manifest) }, StfStatus::Ok);
    unsafe { stf_string_free(manifest) };
}

#[test]
fn campaign_runs_a_builtin_target() {
    let mut result = StfCampaignResult::default();
    let status = unsafe { stf_campaign_run(cstr("stateless_parser").as_ptr(), cstr("full").as_ptr(), 200, 1, &mut result) };
    assert_eq!(status, StfStatus::Ok);
    assert!(result.executions <= 200);
    assert_eq!(result.crashed, result.crash_execution > 0);

    let status = unsafe { stf_campaign_run(cstr("nope").as_ptr(), cstr("full").as_ptr(), 10, 0, &mut result) };
    assert_eq!(status, StfStatus::UnknownTarget);
}

#[test]
fn runtime_header_declares_the_entry_point() {
    let header = take_string(stf_runtime_header());
    assert!(header.contains("void __stt_update(const char *name, long long value);"));
}
