//! C ABI over the statefuzz library.
//!
//! Every fallible function returns a [`StfStatus`]. On failure the message
//! of the most recent error on the calling thread is available from
//! [`stf_last_error`]. Strings returned through out-parameters are owned by
//! the caller and released with [`stf_string_free`].
//!
//! Instrumented C programs call `__stt_update`, which forwards to the tree
//! attached with [`stf_runtime_attach`].

use std::cell::RefCell;
use std::ffi::{c_char, c_longlong, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use parking_lot::Mutex;
use statefuzz::engine::{run_campaign, CampaignConfig, StatsInterval, Variant};
use statefuzz::instrument::{emit_runtime_header, inject};
use statefuzz::stt::Stt;
use statefuzz::svscan::{scan_sources, VariableManifest};
use statefuzz::{targets, Error};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ExecutionAlreadyActive = 3,
    NoActiveExecution = 4,
    UnknownTarget = 5,
    UnknownVariant = 6,
    EmptyCorpus = 7,
    TargetInitFailure = 8,
    NotReproducible = 9,
    Manifest = 10,
    Config = 11,
    Io = 12,
    Json = 13,
    NotAttached = 14,
    Panic = 15,
}

impl From<&Error> for StfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ExecutionAlreadyActive => StfStatus::ExecutionAlreadyActive,
            Error::NoActiveExecution => StfStatus::NoActiveExecution,
            Error::UnknownTarget(_) => StfStatus::UnknownTarget,
            Error::UnknownVariant(_) => StfStatus::UnknownVariant,
            Error::EmptyCorpus => StfStatus::EmptyCorpus,
            Error::TargetInitFailure(_) => StfStatus::TargetInitFailure,
            Error::NotReproducible => StfStatus::NotReproducible,
            Error::Manifest { .. } => StfStatus::Manifest,
            Error::Config(_) => StfStatus::Config,
            Error::Io { .. } => StfStatus::Io,
            Error::Json(_) => StfStatus::Json,
        }
    }
}

struct Failure {
    status: StfStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            status: StfStatus::from(&e),
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn new(status: StfStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> StfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => StfStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_last_error("panic inside statefuzz");
            StfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(Failure::new(StfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure::new(StfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(StfStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

fn c_string(text: String) -> *mut c_char {
    CString::new(text.replace('\0', " ")).unwrap().into_raw()
}

/// Message of the last error on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn stf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque handle to a state transition tree.
pub struct StfStt {
    inner: Arc<Stt>,
}

/// Creates an empty tree. Returns null if `repetition_cap` is zero.
#[no_mangle]
pub extern "C" fn stf_stt_new(repetition_cap: u32) -> *mut StfStt {
    if repetition_cap == 0 {
        set_last_error("repetition cap must be positive");
        return ptr::null_mut();
    }
    Box::into_raw(Box::new(StfStt {
        inner: Arc::new(Stt::new(repetition_cap)),
    }))
}

/// Destroys a tree. Null is ignored. A tree attached to the runtime stays
/// alive until it is detached.
///
/// # Safety
/// `stt` must be null or a handle from [`stf_stt_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stf_stt_free(stt: *mut StfStt) {
    if !stt.is_null() {
        drop(Box::from_raw(stt));
    }
}

unsafe fn handle<'a>(stt: *const StfStt) -> Result<&'a Stt, Failure> {
    stt.as_ref()
        .map(|h| h.inner.as_ref())
        .ok_or_else(|| Failure::new(StfStatus::NullPointer, "tree handle is null"))
}

/// Starts recording an execution.
///
/// # Safety
/// `stt` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stf_stt_begin(stt: *const StfStt) -> StfStatus {
    guard(|| Ok(handle(stt)?.begin_execution()?))
}

/// Records that `variable` was assigned `value`.
///
/// # Safety
/// `stt` must be a live handle and `variable` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stf_stt_update(stt: *const StfStt, variable: *const c_char, value: i64) -> StfStatus {
    guard(|| {
        let tree = handle(stt)?;
        let variable = str_arg(variable, "variable")?;
        Ok(tree.on_update(variable, value)?)
    })
}

/// Finishes the execution. Writes the id of the node it ended at and the
/// number of nodes it created; either pointer may be null.
///
/// # Safety
/// `stt` must be a live handle; non-null out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn stf_stt_end(stt: *const StfStt, terminal: *mut u32, new_nodes: *mut usize) -> StfStatus {
    guard(|| {
        let trace = handle(stt)?.end_execution()?;
        if !terminal.is_null() {
            terminal.write(trace.terminal.index() as u32);
        }
        if !new_nodes.is_null() {
            new_nodes.write(trace.new_nodes);
        }
        Ok(())
    })
}

/// Number of nodes other than the root. Zero for a null handle.
///
/// # Safety
/// `stt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stf_stt_node_count(stt: *const StfStt) -> usize {
    handle(stt).map_or(0, |t| t.node_count())
}

/// Number of distinct execution paths observed. Zero for a null handle.
///
/// # Safety
/// `stt` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stf_stt_transition_coverage(stt: *const StfStt) -> usize {
    handle(stt).map_or(0, |t| t.transition_coverage())
}

/// Serializes the tree and its compacted state machine as JSON.
///
/// # Safety
/// `stt` must be a live handle and `json` writable.
#[no_mangle]
pub unsafe extern "C" fn stf_stt_to_json(stt: *const StfStt, json: *mut *mut c_char) -> StfStatus {
    guard(|| {
        let text = serde_json::to_string(&handle(stt)?.snapshot()).map_err(Error::from)?;
        write_out(json, c_string(text), "json")
    })
}

static RUNTIME: Mutex<Option<Arc<Stt>>> = Mutex::new(None);

/// Routes `__stt_update` calls to `stt`, replacing any previous tree.
///
/// # Safety
/// `stt` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stf_runtime_attach(stt: *const StfStt) -> StfStatus {
    guard(|| {
        let tree = stt
            .as_ref()
            .ok_or_else(|| Failure::new(StfStatus::NullPointer, "tree handle is null"))?;
        *RUNTIME.lock() = Some(Arc::clone(&tree.inner));
        Ok(())
    })
}

/// Stops routing `__stt_update` calls.
#[no_mangle]
pub extern "C" fn stf_runtime_detach() {
    *RUNTIME.lock() = None;
}

/// Entry point called by instrumented code. Updates outside an execution,
/// or with no tree attached, are dropped; the reason is kept as the last
/// error.
///
/// # Safety
/// `name` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn __stt_update(name: *const c_char, value: c_longlong) {
    guard(|| {
        let variable = str_arg(name, "name")?;
        let tree = RUNTIME
            .lock()
            .clone()
            .ok_or_else(|| Failure::new(StfStatus::NotAttached, "no tree attached"))?;
        Ok(tree.on_update(variable, value)?)
    });
}

/// Scans `count` C source files and writes the variable manifest text.
///
/// # Safety
/// `paths` must point to `count` NUL-terminated strings and `manifest` be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn stf_svscan(
    paths: *const *const c_char,
    count: usize,
    manifest: *mut *mut c_char,
) -> StfStatus {
    guard(|| {
        if paths.is_null() && count > 0 {
            return Err(Failure::new(StfStatus::NullPointer, "paths is null"));
        }
        let mut sources = Vec::with_capacity(count);
        for i in 0..count {
            let path = str_arg(*paths.add(i), "path")?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            sources.push((path.to_owned(), text));
        }
        let found = scan_sources(&sources, &[], &mut Vec::new());
        write_out(manifest, c_string(found.to_text()), "manifest")
    })
}

/// Inserts `__stt_update` calls into `source` before every assignment of a
/// manifest variable. Writes the instrumented text and the number of
/// assignments that could not be instrumented.
///
/// # Safety
/// String arguments must be NUL-terminated; out-pointers must be writable
/// (`conflicts` may be null).
#[no_mangle]
pub unsafe extern "C" fn stf_instrument(
    source: *const c_char,
    file: *const c_char,
    manifest: *const c_char,
    instrumented: *mut *mut c_char,
    conflicts: *mut usize,
) -> StfStatus {
    guard(|| {
        let source = str_arg(source, "source")?;
        let file = str_arg(file, "file")?;
        let manifest = VariableManifest::parse(str_arg(manifest, "manifest")?)?;
        let out = inject(source, file, &manifest);
        if !conflicts.is_null() {
            conflicts.write(out.conflicts.len());
        }
        write_out(instrumented, c_string(out.text), "instrumented")
    })
}

/// The C header declaring `__stt_update`, for instrumented sources.
#[no_mangle]
pub extern "C" fn stf_runtime_header() -> *mut c_char {
    c_string(emit_runtime_header())
}

/// Summary of a finished campaign.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct StfCampaignResult {
    pub executions: u64,
    pub transition_coverage: usize,
    pub stt_nodes: usize,
    pub corpus_size: usize,
    pub crashed: bool,
    /// Executions up to and including the crashing one; zero without a crash.
    pub crash_execution: u64,
}

/// Fuzzes a built-in target from its own seed corpus for at most
/// `max_executions` executions, stopping at the first crash.
///
/// # Safety
/// `target` and `variant` must be NUL-terminated; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stf_campaign_run(
    target: *const c_char,
    variant: *const c_char,
    max_executions: u64,
    rng_seed: u64,
    result: *mut StfCampaignResult,
) -> StfStatus {
    guard(|| {
        let target = targets::create(str_arg(target, "target")?)?;
        let variant: Variant = str_arg(variant, "variant")?.parse()?;
        let config = CampaignConfig {
            variant,
            max_executions: Some(max_executions),
            rng_seed,
            stats_interval: StatsInterval::Executions(max_executions.max(1)),
            ..CampaignConfig::default()
        };
        let seeds = target.seeds();
        let outcome = run_campaign(&config, target, seeds)?;
        let summary = StfCampaignResult {
            executions: outcome.stats.executions,
            transition_coverage: outcome.stats.transition_coverage,
            stt_nodes: outcome.stats.stt_nodes,
            corpus_size: outcome.stats.corpus_size,
            crashed: outcome.crash.is_some(),
            crash_execution: outcome.crash.map_or(0, |c| c.executions),
        };
        write_out(result, summary, "result")
    })
}
