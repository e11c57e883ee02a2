//! C ABI over the kitalloc engine.
//!
//! Conventions: reports are opaque handles created by the `ka_simulate_*`
//! functions and released with `ka_report_free`; strings returned as
//! `*mut c_char` are owned by the caller and released with `ka_string_free`;
//! every fallible call returns a [`KaStatus`] and leaves a human-readable
//! message retrievable through `ka_last_error_message` on failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use kitalloc::config::{config_from_key_values, parse_key_values};
use kitalloc::pooling::{effective_budget, expected_tests_per_person, PoolingStrategy};
use kitalloc::sim::{report_to_csv, report_to_json, run_simulation, SimulationReport};
use kitalloc::Error;

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    IoError = 4,
    Utf8Error = 5,
    RuntimeError = 6,
    /// The requested value is not present (for example a metric that is
    /// undefined on a day with no selections).
    MissingValue = 7,
}

/// Per-day metrics addressable through `ka_report_day_metric`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaDayMetric {
    Day = 0,
    KitsBudgeted = 1,
    KitsUsed = 2,
    PositivesFound = 3,
    CumulativePositivesFound = 4,
    CumulativePositivesPresent = 5,
    DetectionRecall = 6,
    CohortSize = 7,
    CohortPositivity = 8,
    TvDivergence = 9,
    ProbeLogLoss = 10,
    ProbeAuc = 11,
    PoolingTestsUsed = 12,
    MandatoryOverflow = 13,
}

/// Pool resolution strategies.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaPoolStrategy {
    Dorfman = 0,
    BinarySplit = 1,
}

impl From<KaPoolStrategy> for PoolingStrategy {
    fn from(s: KaPoolStrategy) -> Self {
        match s {
            KaPoolStrategy::Dorfman => PoolingStrategy::Dorfman,
            KaPoolStrategy::BinarySplit => PoolingStrategy::BinarySplit,
        }
    }
}

/// Opaque simulation report handle.
pub struct KaReport {
    inner: SimulationReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> KaStatus {
    match err {
        Error::Schema(_) | Error::Validation(_) => KaStatus::InvalidArgument,
        Error::InvalidArgument(_) | Error::ContractViolation(_) => KaStatus::InvalidArgument,
        Error::Config { .. } => KaStatus::ConfigError,
        Error::Io(_) => KaStatus::IoError,
    }
}

fn fail(err: &Error) -> KaStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string pointer.
unsafe fn cstr_arg(s: *const c_char) -> Result<&'static str, KaStatus> {
    if s.is_null() {
        set_last_error("null string argument");
        return Err(KaStatus::NullArgument);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        KaStatus::Utf8Error
    })
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn ka_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread. Valid until the next
/// failing call on the same thread; never freed by the caller.
#[no_mangle]
pub extern "C" fn ka_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn simulate_text(text: &str, seed_override: i64, out: *mut *mut KaReport) -> KaStatus {
    let kv = match parse_key_values(text) {
        Ok(kv) => kv,
        Err(e) => return fail(&e),
    };
    let mut cfg = match config_from_key_values(&kv) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    if seed_override >= 0 {
        cfg.seed = seed_override as u64;
    }
    match run_simulation(&cfg) {
        Ok(report) => {
            let handle = Box::new(KaReport { inner: report });
            unsafe { *out = Box::into_raw(handle) };
            KaStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Run a simulation from a config file. `seed_override < 0` keeps the
/// config's seed. On success writes a new report handle to `out`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ka_simulate_config_file(
    path: *const c_char,
    seed_override: i64,
    out: *mut *mut KaReport,
) -> KaStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return KaStatus::NullArgument;
    }
    let path = match cstr_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let text = match std::fs::read_to_string(Path::new(path)) {
        Ok(t) => t,
        Err(e) => {
            set_last_error(&format!("cannot read `{path}`: {e}"));
            return KaStatus::IoError;
        }
    };
    simulate_text(&text, seed_override, out)
}

/// Run a simulation from config text in the flat key-value format.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ka_simulate_config_text(
    text: *const c_char,
    seed_override: i64,
    out: *mut *mut KaReport,
) -> KaStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return KaStatus::NullArgument;
    }
    let text = match cstr_arg(text) {
        Ok(t) => t,
        Err(status) => return status,
    };
    simulate_text(text, seed_override, out)
}

/// Number of day rows in the report; 0 for a null handle.
///
/// # Safety
/// `report` must be null or a handle from `ka_simulate_*`.
#[no_mangle]
pub unsafe extern "C" fn ka_report_num_days(report: *const KaReport) -> u32 {
    if report.is_null() {
        return 0;
    }
    (*report).inner.days.len() as u32
}

/// Read one per-day metric as a double. Booleans come back as 0/1; optional
/// metrics return `MissingValue` on days where they are undefined.
///
/// # Safety
/// `report` must be a handle from `ka_simulate_*` and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ka_report_day_metric(
    report: *const KaReport,
    day_index: u32,
    metric: KaDayMetric,
    out: *mut f64,
) -> KaStatus {
    if report.is_null() || out.is_null() {
        set_last_error("null argument");
        return KaStatus::NullArgument;
    }
    let days = &(*report).inner.days;
    let Some(row) = days.get(day_index as usize) else {
        set_last_error(&format!(
            "day index {day_index} out of range ({} days)",
            days.len()
        ));
        return KaStatus::InvalidArgument;
    };
    let value = match metric {
        KaDayMetric::Day => Some(f64::from(row.day)),
        KaDayMetric::KitsBudgeted => Some(row.kits_budgeted as f64),
        KaDayMetric::KitsUsed => Some(row.kits_used as f64),
        KaDayMetric::PositivesFound => Some(row.positives_found as f64),
        KaDayMetric::CumulativePositivesFound => Some(row.cumulative_positives_found as f64),
        KaDayMetric::CumulativePositivesPresent => {
            Some(row.cumulative_positives_present as f64)
        }
        KaDayMetric::DetectionRecall => Some(row.detection_recall),
        KaDayMetric::CohortSize => Some(row.cohort_size as f64),
        KaDayMetric::CohortPositivity => row.cohort_positivity,
        KaDayMetric::TvDivergence => row.tv_divergence,
        KaDayMetric::ProbeLogLoss => Some(row.probe_log_loss),
        KaDayMetric::ProbeAuc => row.probe_auc,
        KaDayMetric::PoolingTestsUsed => row.pooling_tests_used.map(|t| t as f64),
        KaDayMetric::MandatoryOverflow => Some(f64::from(u8::from(row.mandatory_overflow))),
    };
    match value {
        Some(v) => {
            *out = v;
            KaStatus::Ok
        }
        None => {
            set_last_error("metric has no value on this day");
            KaStatus::MissingValue
        }
    }
}

fn string_out(text: String) -> *mut c_char {
    CString::new(text.replace('\0', " "))
        .map_or(ptr::null_mut(), CString::into_raw)
}

/// Whole report as JSON; free with `ka_string_free`. Null on a null handle.
///
/// # Safety
/// `report` must be null or a handle from `ka_simulate_*`.
#[no_mangle]
pub unsafe extern "C" fn ka_report_to_json(report: *const KaReport) -> *mut c_char {
    if report.is_null() {
        return ptr::null_mut();
    }
    string_out(report_to_json(&(*report).inner))
}

/// Whole report as CSV; free with `ka_string_free`. Null on a null handle.
///
/// # Safety
/// `report` must be null or a handle from `ka_simulate_*`.
#[no_mangle]
pub unsafe extern "C" fn ka_report_to_csv(report: *const KaReport) -> *mut c_char {
    if report.is_null() {
        return ptr::null_mut();
    }
    string_out(report_to_csv(&(*report).inner))
}

/// Release a report handle. Null is a no-op.
///
/// # Safety
/// `report` must be null or a handle from `ka_simulate_*`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ka_report_free(report: *mut KaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ka_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Expected tests per person for pooled testing at the given pool size and
/// prevalence.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ka_expected_tests_per_person(
    pool_size: u32,
    prevalence: f64,
    strategy: KaPoolStrategy,
    out: *mut f64,
) -> KaStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return KaStatus::NullArgument;
    }
    match expected_tests_per_person(pool_size as usize, prevalence, strategy.into()) {
        Ok(v) => {
            *out = v;
            KaStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// How many people a kit budget covers in expectation under pooling.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ka_effective_budget(
    kits: u64,
    pool_size: u32,
    prevalence: f64,
    strategy: KaPoolStrategy,
    out: *mut u64,
) -> KaStatus {
    if out.is_null() {
        set_last_error("null output pointer");
        return KaStatus::NullArgument;
    }
    match effective_budget(kits, pool_size as usize, prevalence, strategy.into()) {
        Ok(v) => {
            *out = v;
            KaStatus::Ok
        }
        Err(e) => fail(&e),
    }
}
