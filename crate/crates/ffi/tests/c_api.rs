//! Exercises the C surface directly through the exported symbols.

use std::ffi::{CStr, CString};
use std::ptr;

use kitalloc_ffi::*;

const CONFIG: &str = "
days = 3
population = 600
probe = 40
cohort = 60
budget = 8
strategy = uniform
seed = 3
";

fn simulate(text: &str, seed: i64) -> *mut KaReport {
    let text = CString::new(text).unwrap();
    let mut handle: *mut KaReport = ptr::null_mut();
    let status = unsafe { ka_simulate_config_text(text.as_ptr(), seed, &mut handle) };
    assert_eq!(status, KaStatus::Ok, "{}", last_error());
    assert!(!handle.is_null());
    handle
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(ka_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

#[test]
fn version_is_a_static_string() {
    let v = unsafe { CStr::from_ptr(ka_version()) };
    assert!(!v.to_str().unwrap().is_empty());
}

#[test]
fn simulate_and_read_metrics() {
    let report = simulate(CONFIG, -1);
    unsafe {
        assert_eq!(ka_report_num_days(report), 3);
        let mut v = f64::NAN;
        assert_eq!(
            ka_report_day_metric(report, 0, KaDayMetric::KitsBudgeted, &mut v),
            KaStatus::Ok
        );
        assert_eq!(v, 8.0);
        assert_eq!(
            ka_report_day_metric(report, 2, KaDayMetric::DetectionRecall, &mut v),
            KaStatus::Ok
        );
        assert!((0.0..=1.0).contains(&v));
        // out-of-range day index
        assert_eq!(
            ka_report_day_metric(report, 99, KaDayMetric::Day, &mut v),
            KaStatus::InvalidArgument
        );
        ka_report_free(report);
    }
}

#[test]
fn missing_metric_reports_missing_value() {
    // zero budget: no selections, so the divergence metric has no value
    let report = simulate(&CONFIG.replace("budget = 8", "budget = 0"), -1);
    unsafe {
        let mut v = 0.0;
        assert_eq!(
            ka_report_day_metric(report, 0, KaDayMetric::TvDivergence, &mut v),
            KaStatus::MissingValue
        );
        // pooling disabled: also missing
        assert_eq!(
            ka_report_day_metric(report, 0, KaDayMetric::PoolingTestsUsed, &mut v),
            KaStatus::MissingValue
        );
        ka_report_free(report);
    }
}

#[test]
fn json_and_csv_exports_round_trip() {
    let report = simulate(CONFIG, 11);
    unsafe {
        let json = ka_report_to_json(report);
        assert!(!json.is_null());
        let text = CStr::from_ptr(json).to_str().unwrap();
        let value: serde_json::Value = serde_json::from_str(text).unwrap();
        assert_eq!(value["summary"]["seed"], 11);
        ka_string_free(json);

        let csv = ka_report_to_csv(report);
        assert!(!csv.is_null());
        let text = CStr::from_ptr(csv).to_str().unwrap();
        assert_eq!(text.lines().count(), 4);
        ka_string_free(csv);
        ka_report_free(report);
    }
}

#[test]
fn seed_override_is_deterministic() {
    unsafe {
        let a = simulate(CONFIG, 99);
        let b = simulate(CONFIG, 99);
        let ja = ka_report_to_json(a);
        let jb = ka_report_to_json(b);
        assert_eq!(CStr::from_ptr(ja).to_bytes(), CStr::from_ptr(jb).to_bytes());
        ka_string_free(ja);
        ka_string_free(jb);
        ka_report_free(a);
        ka_report_free(b);
    }
}

#[test]
fn null_and_invalid_arguments_are_rejected() {
    unsafe {
        let mut handle: *mut KaReport = ptr::null_mut();
        assert_eq!(
            ka_simulate_config_text(ptr::null(), -1, &mut handle),
            KaStatus::NullArgument
        );
        let text = CString::new("days = nope").unwrap();
        assert_eq!(
            ka_simulate_config_text(text.as_ptr(), -1, &mut handle),
            KaStatus::ConfigError
        );
        assert!(last_error().contains("days"));

        let missing = CString::new("/nonexistent/kitalloc.conf").unwrap();
        assert_eq!(
            ka_simulate_config_file(missing.as_ptr(), -1, &mut handle),
            KaStatus::IoError
        );

        // frees of null are no-ops
        ka_report_free(ptr::null_mut());
        ka_string_free(ptr::null_mut());
        assert_eq!(ka_report_num_days(ptr::null()), 0);
    }
}

#[test]
fn pooling_analytics_through_the_c_surface() {
    unsafe {
        let mut per_person = 0.0;
        assert_eq!(
            ka_expected_tests_per_person(5, 0.024, KaPoolStrategy::Dorfman, &mut per_person),
            KaStatus::Ok
        );
        assert!((per_person - 0.3144).abs() < 1e-4);

        let mut people = 0u64;
        assert_eq!(
            ka_effective_budget(100, 5, 0.024, KaPoolStrategy::Dorfman, &mut people),
            KaStatus::Ok
        );
        assert_eq!(people, 318);

        assert_eq!(
            ka_expected_tests_per_person(0, 0.5, KaPoolStrategy::BinarySplit, &mut per_person),
            KaStatus::InvalidArgument
        );
        assert_eq!(
            ka_expected_tests_per_person(5, 1.5, KaPoolStrategy::Dorfman, &mut per_person),
            KaStatus::InvalidArgument
        );
    }
}
