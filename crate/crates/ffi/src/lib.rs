//! C ABI for the towerchannel library: parse scenario configs, run them
//! deterministically, and read back traces and metrics as JSON, all via
//! opaque handles and integer status codes.
//!
//! Ownership rules: every `*_parse`/`*_run` out-pointer is owned by the
//! caller and released with the matching `*_free`; strings returned
//! through `char **` are released with `twc_string_free`. All functions
//! tolerate null arguments by returning `TWC_NULL_ARGUMENT`.

#![allow(non_camel_case_types)]

use std::ffi::{c_char, CStr, CString};
use towerchannel::harness::{run_scenario, RunTrace, ScenarioConfig};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum twc_status {
    TWC_OK = 0,
    TWC_NULL_ARGUMENT = 1,
    TWC_INVALID_UTF8 = 2,
    TWC_INVALID_JSON = 3,
    TWC_INVALID_SCENARIO = 4,
    TWC_RUN_FAILED = 5,
    TWC_FORMAT_MISMATCH = 6,
}

/// Opaque parsed scenario configuration.
pub struct twc_scenario {
    _private: (),
}

/// Opaque completed run: trace, metrics, and violations.
pub struct twc_trace {
    _private: (),
}

fn scenario_ref<'a>(ptr: *const twc_scenario) -> Option<&'a ScenarioConfig> {
    unsafe { ptr.cast::<ScenarioConfig>().as_ref() }
}

fn trace_ref<'a>(ptr: *const twc_trace) -> Option<&'a RunTrace> {
    unsafe { ptr.cast::<RunTrace>().as_ref() }
}

fn string_out(out: *mut *mut c_char, text: String) -> twc_status {
    let Ok(cstring) = CString::new(text) else {
        return twc_status::TWC_INVALID_UTF8;
    };
    unsafe { *out = cstring.into_raw() };
    twc_status::TWC_OK
}

/// Parse a scenario config from JSON and validate it.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid
/// pointer. On success `*out` owns the scenario.
#[no_mangle]
pub unsafe extern "C" fn twc_scenario_parse(
    json: *const c_char,
    out: *mut *mut twc_scenario,
) -> twc_status {
    if json.is_null() || out.is_null() {
        return twc_status::TWC_NULL_ARGUMENT;
    }
    let Ok(text) = unsafe { CStr::from_ptr(json) }.to_str() else {
        return twc_status::TWC_INVALID_UTF8;
    };
    let Ok(config) = serde_json::from_str::<ScenarioConfig>(text) else {
        return twc_status::TWC_INVALID_JSON;
    };
    if config.validate().is_err() {
        return twc_status::TWC_INVALID_SCENARIO;
    }
    unsafe { *out = Box::into_raw(Box::new(config)).cast::<twc_scenario>() };
    twc_status::TWC_OK
}

/// Release a scenario handle. Null is a no-op.
///
/// # Safety
/// `scenario` must come from `twc_scenario_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn twc_scenario_free(scenario: *mut twc_scenario) {
    if !scenario.is_null() {
        drop(unsafe { Box::from_raw(scenario.cast::<ScenarioConfig>()) });
    }
}

/// Override the seed of a parsed scenario.
///
/// # Safety
/// `scenario` must be a live handle from `twc_scenario_parse`.
#[no_mangle]
pub unsafe extern "C" fn twc_scenario_set_seed(scenario: *mut twc_scenario, seed: u64) -> twc_status {
    let Some(config) = (unsafe { scenario.cast::<ScenarioConfig>().as_mut() }) else {
        return twc_status::TWC_NULL_ARGUMENT;
    };
    config.seed = seed;
    twc_status::TWC_OK
}

/// Execute a scenario to completion. The run is deterministic: the same
/// scenario always yields byte-identical traces.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be valid. On success
/// `*out` owns the trace.
#[no_mangle]
pub unsafe extern "C" fn twc_scenario_run(
    scenario: *const twc_scenario,
    out: *mut *mut twc_trace,
) -> twc_status {
    if out.is_null() {
        return twc_status::TWC_NULL_ARGUMENT;
    }
    let Some(config) = scenario_ref(scenario) else {
        return twc_status::TWC_NULL_ARGUMENT;
    };
    match run_scenario(config) {
        Ok(trace) => {
            unsafe { *out = Box::into_raw(Box::new(trace)).cast::<twc_trace>() };
            twc_status::TWC_OK
        }
        Err(_) => twc_status::TWC_RUN_FAILED,
    }
}

/// Release a trace handle. Null is a no-op.
///
/// # Safety
/// `trace` must come from `twc_scenario_run` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn twc_trace_free(trace: *mut twc_trace) {
    if !trace.is_null() {
        drop(unsafe { Box::from_raw(trace.cast::<RunTrace>()) });
    }
}

/// The JSON-lines trace: one object per block.
///
/// # Safety
/// `trace` must be live; `out` must be valid. Free `*out` with
/// `twc_string_free`.
#[no_mangle]
pub unsafe extern "C" fn twc_trace_to_jsonl(
    trace: *const twc_trace,
    out: *mut *mut c_char,
) -> twc_status {
    if out.is_null() {
        return twc_status::TWC_NULL_ARGUMENT;
    }
    let Some(trace) = trace_ref(trace) else {
        return twc_status::TWC_NULL_ARGUMENT;
    };
    string_out(out, trace.to_jsonl())
}

/// The metrics report plus any violations, as pretty JSON.
///
/// # Safety
/// Same contract as [`twc_trace_to_jsonl`].
#[no_mangle]
pub unsafe extern "C" fn twc_trace_metrics_json(
    trace: *const twc_trace,
    out: *mut *mut c_char,
) -> twc_status {
    if out.is_null() {
        return twc_status::TWC_NULL_ARGUMENT;
    }
    let Some(trace) = trace_ref(trace) else {
        return twc_status::TWC_NULL_ARGUMENT;
    };
    string_out(out, trace.metrics_json())
}

/// Number of blocks the run produced; zero for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn twc_trace_block_count(trace: *const twc_trace) -> u64 {
    trace_ref(trace).map_or(0, |t| t.blocks.len() as u64)
}

/// Number of in-run assertion violations; zero means the run passed.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn twc_trace_violation_count(trace: *const twc_trace) -> u64 {
    trace_ref(trace).map_or(0, |t| t.violations.len() as u64)
}

/// Check the golden wire-format vectors.
#[no_mangle]
pub extern "C" fn twc_verify_formats() -> twc_status {
    match towerchannel::vectors::verify_format_vectors() {
        Ok(()) => twc_status::TWC_OK,
        Err(_) => twc_status::TWC_FORMAT_MISMATCH,
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn twc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `text` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn twc_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}
