use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use relgrid_ffi::*;

const FEEDER: &str = r#"{
  "components": [
    {"id": "c1", "kind": "line", "failure_rate": 0.1, "repair_rate": 876},
    {"id": "c2", "kind": "line", "failure_rate": 0.2, "repair_rate": 1752},
    {"id": "c3", "kind": "line", "failure_rate": 0.3, "repair_rate": 438}
  ],
  "load_points": [{"id": "lp", "customer_count": 10, "peak_load_kw": 5, "supply_paths": [["c1", "c2", "c3"]]}]
}"#;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    rg_string_free(s);
    out
}

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(rg_last_error())
            .to_str()
            .unwrap()
            .to_string()
    }
}

fn load(json: &str) -> *mut RgModel {
    let c = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { rg_model_from_json(c.as_ptr(), &mut m) },
        RgStatus::Ok
    );
    m
}

#[test]
fn model_lifecycle_and_analytic_indices() {
    let m = load(FEEDER);
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(rg_load_point_analytic(m, &mut out), RgStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        let lp = &v["load_points"][0];
        assert!((lp["lambda"].as_f64().unwrap() - 0.6).abs() < 1e-12);
        assert!((lp["u_hours"].as_f64().unwrap() - 8.0).abs() < 1e-9);

        assert_eq!(rg_model_validate(m, &mut out), RgStatus::Ok);
        assert_eq!(take(out), "[]");

        let lp = CString::new("lp").unwrap();
        assert_eq!(rg_interrupting_sets(m, lp.as_ptr(), &mut out), RgStatus::Ok);
        assert_eq!(take(out), r#"[["c1"],["c2"],["c3"]]"#);
        rg_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    let bad = CString::new("{\"components\": [").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { rg_model_from_json(bad.as_ptr(), &mut m) },
        RgStatus::InvalidInput
    );
    assert!(m.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(
        unsafe { rg_model_from_json(ptr::null(), &mut m) },
        RgStatus::NullPointer
    );
    let ctx = CString::new("weather").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { rg_advise(ctx.as_ptr(), &mut out) },
        RgStatus::InvalidInput
    );
    assert!(last_error().contains("regulatory"));
    let mut t = 0.0;
    assert_eq!(
        unsafe { rg_draw_ttf(0.0, 0.5, &mut t) },
        RgStatus::InvalidInput
    );
    assert_eq!(unsafe { rg_draw_ttf(1.0, 0.5, &mut t) }, RgStatus::Ok);
    assert!(last_error().is_empty());
    unsafe {
        rg_model_free(ptr::null_mut());
        rg_string_free(ptr::null_mut());
    }
}

#[test]
fn exponential_draws_invert_the_cdf() {
    let mut t = 0.0;
    unsafe {
        assert_eq!(rg_draw_ttf(2.0, 0.5, &mut t), RgStatus::Ok);
        assert!((t - 0.5f64.ln().abs() / 2.0).abs() < 1e-15);
        assert_eq!(rg_draw_ttr(876.0, 1.0, &mut t), RgStatus::Ok);
        assert_eq!(t, 0.0);
        assert_eq!(rg_draw_ttr(876.0, 0.0, &mut t), RgStatus::InvalidInput);
    }
}

#[test]
fn scarcity_through_the_abi() {
    let mut cf = vec![0.5; 200];
    cf[20..92].iter_mut().for_each(|v| *v = 0.05);
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(
            rg_detect_scarcity(cf.as_ptr(), cf.len(), 1.0, 0.15, &mut out),
            RgStatus::Ok
        );
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 1);
        assert_eq!(v[0]["duration_hours"], 72.0);
        let d = [5.0, 1.0, 3.0, 2.0];
        let mut h = 0.0;
        assert_eq!(
            rg_scarcity_percentile(d.as_ptr(), d.len(), 0.5, &mut h),
            RgStatus::Ok
        );
        assert_eq!(h, 2.0);
        assert_eq!(
            rg_scarcity_percentile(d.as_ptr(), 0, 0.5, &mut h),
            RgStatus::InvalidInput
        );
    }
}

#[test]
fn mcs_run_and_advice() {
    let m = load(FEEDER);
    let cfg = CString::new(r#"{"iterations": 2000, "seed": 5}"#).unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(
            rg_mcs_run(m, ptr::null(), cfg.as_ptr(), &mut out),
            RgStatus::Ok
        );
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        let lambda = v["load_points"][0]["lambda"].as_f64().unwrap();
        assert!((lambda - 0.6).abs() < 0.1, "{lambda}");
        let zero = CString::new(r#"{"iterations": 0}"#).unwrap();
        assert_eq!(
            rg_mcs_run(m, ptr::null(), zero.as_ptr(), &mut out),
            RgStatus::InvalidInput
        );
        rg_model_free(m);

        let ctx = CString::new("regulatory").unwrap();
        assert_eq!(rg_advise(ctx.as_ptr(), &mut out), RgStatus::Ok);
        assert!(take(out).contains("SAIFI + SAIDI + LOLE"));
    }
}

#[test]
fn plan_feasible_and_infeasible() {
    let mut out = ptr::null_mut();
    let ok = CString::new(fixture("plan_feasible.json").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(
            rg_plan(ok.as_ptr(), &mut out),
            RgStatus::Ok,
            "{}",
            last_error()
        );
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["status"], "feasible");
        assert!(v["chosen"].is_object());
        let bad = CString::new(fixture("plan_infeasible.json").to_str().unwrap()).unwrap();
        assert_eq!(rg_plan(bad.as_ptr(), &mut out), RgStatus::Infeasible);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert!(v["chosen"].is_null());
        assert!(v["diagnostic"].is_object());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/relgrid.h"),
    )
    .unwrap();
    for name in [
        "rg_last_error",
        "rg_string_free",
        "rg_model_from_json",
        "rg_model_free",
        "rg_model_validate",
        "rg_draw_ttf",
        "rg_draw_ttr",
        "rg_interrupting_sets",
        "rg_load_point_analytic",
        "rg_mcs_run",
        "rg_detect_scarcity",
        "rg_scarcity_percentile",
        "rg_advise",
        "rg_plan",
        "typedef struct RgModel RgModel",
        "RG_STATUS_INFEASIBLE = 4",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a small C program against the header and shared library
/// when a C compiler is available.
#[test]
fn c_program_links_against_the_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    if !lib_dir.join("librelgrid_ffi.so").exists()
        || Command::new("cc").arg("--version").output().is_err()
    {
        eprintln!("skipping: no shared library or C compiler");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("probe.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "relgrid.h"
int main(void) {
    const char *json = "{\"components\":[{\"id\":\"c\",\"kind\":\"line\",\"failure_rate\":0.5,\"repair_rate\":876}],"
                       "\"load_points\":[{\"id\":\"lp\",\"customer_count\":1,\"peak_load_kw\":1,\"supply_paths\":[[\"c\"]]}]}";
    RgModel *m = NULL;
    if (rg_model_from_json(json, &m) != RG_STATUS_OK) { fprintf(stderr, "%s\n", rg_last_error()); return 1; }
    char *out = NULL;
    if (rg_load_point_analytic(m, &out) != RG_STATUS_OK) return 2;
    printf("%s\n", out);
    rg_string_free(out);
    rg_model_free(m);
    double t = 0.0;
    if (rg_draw_ttf(-1.0, 0.5, &t) != RG_STATUS_INVALID_INPUT) return 3;
    return strlen(rg_last_error()) > 0 ? 0 : 4;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("probe");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lrelgrid_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("\"lambda\":0.5"));
}
