use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use mtp_ffi::*;

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { mtp_string_free(s) };
    out
}

#[test]
fn gauge_pair_transform() {
    unsafe {
        let (mut f, mut g, mut p) = (ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(mtp_gauge_new_power(0.5, &mut f), MtpStatus::Ok);
        assert_eq!(mtp_gauge_new_power(1.0, &mut g), MtpStatus::Ok);
        let mut v = 0.0;
        assert_eq!(mtp_gauge_eval(f, 0.25, &mut v), MtpStatus::Ok);
        assert_eq!(v, 0.5);
        assert_eq!(mtp_gauge_pair_new(f, g, 0.0, 2.0, &mut p), MtpStatus::Ok);
        assert_eq!(mtp_radius_transform(p, 0.04, &mut v), MtpStatus::Ok);
        assert!((v - 0.2).abs() < 1e-12);
        mtp_gauge_pair_free(p);
        mtp_gauge_free(f);
        mtp_gauge_free(g);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(mtp_gauge_new_power(-1.0, &mut g), MtpStatus::Invalid);
        assert!(g.is_null());
        assert!(!take(mtp_last_error()).is_empty());
        let mut v = 0.0;
        assert_eq!(mtp_gauge_eval(ptr::null(), 1.0, &mut v), MtpStatus::NullPointer);
        let bad = CString::new("{\"kind\":\"power\"}").unwrap();
        assert_eq!(mtp_gauge_from_json(bad.as_ptr(), &mut g), MtpStatus::Invalid);
        let bytes = [0xffu8, 0];
        assert_eq!(
            mtp_gauge_from_json(bytes.as_ptr().cast(), &mut g),
            MtpStatus::InvalidUtf8
        );
        mtp_string_free(ptr::null_mut());
    }
}

#[test]
fn set_model_distance() {
    unsafe {
        let js = CString::new(r#"{"variant":"points","points":[[0.0,0.0],[1.0,1.0]]}"#).unwrap();
        let mut m = ptr::null_mut();
        assert_eq!(mtp_set_model_from_json(js.as_ptr(), &mut m), MtpStatus::Ok);
        assert_eq!(mtp_set_model_dim(m), 2);
        let x = [0.9, 0.2];
        let mut d = 0.0;
        assert_eq!(
            mtp_set_model_distance(m, x.as_ptr(), 2, MtpMetric::Sup, &mut d),
            MtpStatus::Ok
        );
        assert!((d - 0.8).abs() < 1e-12);
        assert_eq!(
            mtp_set_model_distance(m, x.as_ptr(), 2, MtpMetric::TorusSup, &mut d),
            MtpStatus::Ok
        );
        assert!((d - 0.2).abs() < 1e-12);
        assert_eq!(
            mtp_set_model_distance(m, x.as_ptr(), 1, MtpMetric::Sup, &mut d),
            MtpStatus::Invalid
        );
        mtp_set_model_free(m);
    }
}

#[test]
fn run_json_report() {
    let cmd = CString::new("transform").unwrap();
    let cfg = CString::new(
        r#"{"gauges":{"f":{"kind":"power","s":0.5},"g":{"kind":"power","s":1.0},"kappa":0.0,"lambda":2.0},"upsilon":[0.04]}"#,
    )
    .unwrap();
    let mut out = ptr::null_mut();
    let st = unsafe { mtp_run_json(cmd.as_ptr(), cfg.as_ptr(), 1, &mut out) };
    assert_eq!(st, MtpStatus::Ok);
    let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(v["results"]["rows"][0]["tilde_upsilon"].as_f64().unwrap(), 0.2);
    let bogus = CString::new("nope").unwrap();
    assert_eq!(
        unsafe { mtp_run_json(bogus.as_ptr(), cfg.as_ptr(), 1, &mut out) },
        MtpStatus::Invalid
    );
}

#[test]
fn header_matches_exports() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/mtp.h")).unwrap();
    let src = std::fs::read_to_string(format!("{dir}/src/lib.rs")).unwrap();
    let exported: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 14);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    // the header must parse as C where a compiler is available
    if let Ok(st) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", &format!("{dir}/include/mtp.h")])
        .status()
    {
        assert!(st.success());
    }
}
