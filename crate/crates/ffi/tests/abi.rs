use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use twistbench_ffi::*;

const TRANSITION: &str = r#"{
    "interval": [-2.0, 2.0],
    "fiber": {"dim": 1, "periods": [1.0], "resolution": [64]},
    "twist": {"family": "separable", "g": {"kind": "gauss"}, "epsilon": 0.1,
              "s": [{"coeff": 1.0, "wave": [1]}]}
}"#;

const EXPANDING: &str = r#"{
    "interval": [-1.0, 1.0],
    "fiber": {"dim": 2, "periods": [1.0, 1.0], "resolution": [16, 16]},
    "twist": {"family": "pure_time", "g": {"kind": "exp", "lambda": 1.0}}
}"#;

fn model(json: &str) -> *mut TbModel {
    let text = CString::new(json).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { tb_model_from_json(text.as_ptr(), &mut out) },
        TbStatus::Ok
    );
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = tb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn nodes(m: *const TbModel) -> usize {
    let mut n = 0;
    assert_eq!(unsafe { tb_model_node_count(m, &mut n) }, TbStatus::Ok);
    n
}

#[test]
fn slice_mean_curvature_through_the_abi() {
    let m = model(EXPANDING);
    let n = nodes(m);
    let mut dim = 0;
    assert_eq!(unsafe { tb_model_dim(m, &mut dim) }, TbStatus::Ok);
    assert_eq!((n, dim), (256, 2));
    let u = vec![0.25; n];
    let mut h = vec![0.0; n];
    let status = unsafe { tb_mean_curvature(m, u.as_ptr(), n, h.as_mut_ptr(), n) };
    assert_eq!(status, TbStatus::Ok);
    // slices of e^t have H = ∂_t log f = 1
    assert!(h.iter().all(|v| (v - 1.0).abs() < 1e-13));
    let mut margin = 1.0;
    assert_eq!(
        unsafe { tb_spacelike_margin(m, u.as_ptr(), n, &mut margin) },
        TbStatus::Ok
    );
    assert_eq!(margin, 0.0);
    unsafe { tb_model_free(m) };
}

#[test]
fn errors_map_to_status_codes() {
    let m = model(TRANSITION);
    let n = nodes(m);
    let mut h = vec![0.0; n];
    let short = vec![0.0; n - 1];
    let status = unsafe { tb_mean_curvature(m, short.as_ptr(), n - 1, h.as_mut_ptr(), n) };
    assert_eq!(status, TbStatus::BadLength);
    assert!(last_error().contains("63 values"));

    let outside = vec![5.0; n];
    let status = unsafe { tb_mean_curvature(m, outside.as_ptr(), n, h.as_mut_ptr(), n) };
    assert_eq!(status, TbStatus::Domain);

    let steep: Vec<f64> = (0..n)
        .map(|i| 0.5 * (i as f64 * std::f64::consts::TAU / n as f64).sin())
        .collect();
    let status = unsafe { tb_mean_curvature(m, steep.as_ptr(), n, h.as_mut_ptr(), n) };
    assert_eq!(status, TbStatus::NotSpacelike);
    assert!(last_error().contains("node"));
    let mut margin = 0.0;
    assert_eq!(
        unsafe { tb_spacelike_margin(m, steep.as_ptr(), n, &mut margin) },
        TbStatus::Ok
    );
    assert!(margin > 1.0);

    assert_eq!(
        unsafe { tb_mean_curvature(ptr::null(), steep.as_ptr(), n, h.as_mut_ptr(), n) },
        TbStatus::NullPointer
    );
    let mut out = ptr::null_mut();
    let bad = CString::new(r#"{"interval": [1.0, -1.0]}"#).unwrap();
    assert_eq!(
        unsafe { tb_model_from_json(bad.as_ptr(), &mut out) },
        TbStatus::Config
    );
    assert!(out.is_null());
    let invalid = CString::new(r#"{"residual_tol": -1.0}"#).unwrap();
    let u = vec![0.1; n];
    assert_eq!(
        unsafe { tb_solve(m, invalid.as_ptr(), u.as_ptr(), n, &mut ptr::null_mut()) },
        TbStatus::Config
    );
    unsafe { tb_model_free(m) };
    unsafe { tb_model_free(ptr::null_mut()) };
}

#[test]
fn solve_outcomes_through_the_abi() {
    let m = model(TRANSITION);
    let n = nodes(m);
    let u0: Vec<f64> = (0..n)
        .map(|i| -0.4 + 0.03 * (i as f64 * 0.2).cos())
        .collect();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { tb_solve(m, ptr::null(), u0.as_ptr(), n, &mut s) },
        TbStatus::Ok
    );
    let mut outcome = TbOutcome::NotConverged;
    assert_eq!(unsafe { tb_solve_outcome(s, &mut outcome) }, TbStatus::Ok);
    assert_eq!(outcome, TbOutcome::Converged);
    let mut u = vec![1.0; n];
    assert_eq!(
        unsafe { tb_solve_copy_solution(s, u.as_mut_ptr(), n) },
        TbStatus::Ok
    );
    assert!(u.iter().all(|v| v.abs() < 1e-6));
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { tb_solve_outcome_json(s, &mut json) }, TbStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"tag\":\"converged\""), "{text}");
    unsafe {
        tb_string_free(json);
        tb_solve_free(s);
        tb_model_free(m);
    }

    let m = model(EXPANDING);
    let n = nodes(m);
    let u0 = vec![0.0; n];
    let cfg = CString::new(r#"{"target": {"mode": "constant", "h0": 0.0}}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { tb_solve(m, cfg.as_ptr(), u0.as_ptr(), n, &mut s) },
        TbStatus::Ok
    );
    let mut outcome = TbOutcome::Converged;
    assert_eq!(unsafe { tb_solve_outcome(s, &mut outcome) }, TbStatus::Ok);
    assert_eq!(outcome, TbOutcome::NonExistenceCertificate);
    let mut r = 0.0;
    assert_eq!(unsafe { tb_solve_residual(s, &mut r) }, TbStatus::Ok);
    assert!(r.is_nan());
    let mut u = vec![0.0; n];
    assert_eq!(
        unsafe { tb_solve_copy_solution(s, u.as_mut_ptr(), n) },
        TbStatus::Precondition
    );
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { tb_solve_outcome_json(s, &mut json) }, TbStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("bound_certificate"), "{text}");
    unsafe {
        tb_string_free(json);
        tb_solve_free(s);
        tb_model_free(m);
    }
}

#[test]
fn header_declares_every_export() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/twistbench.h")).unwrap();
    let source = std::fs::read_to_string(root.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
    let version = unsafe { CStr::from_ptr(tb_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

fn static_library() -> Option<PathBuf> {
    // tests/<binary> lives in target/<profile>/deps
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libtwistbench_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_and_runs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = static_library().expect("static library next to the test binary");
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-D_DEFAULT_SOURCE")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("converged"));
}
