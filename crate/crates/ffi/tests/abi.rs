use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use subrough_ffi::*;

fn builtin(name: &str) -> *mut SrSystem {
    let name = CString::new(name).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { sr_system_builtin(name.as_ptr(), &mut sys) }, SrStatus::Ok);
    sys
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sr_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn elliptic_distance_through_the_abi() {
    let sys = builtin("elliptic2");
    let (mut n, mut d, mut lbar) = (0, 0, 0);
    assert_eq!(unsafe { sr_system_dims(sys, &mut n, &mut d, &mut lbar) }, SrStatus::Ok);
    assert_eq!((n, d, lbar), (2, 2, 1));

    let mut metric = ptr::null_mut();
    assert_eq!(unsafe { sr_metric_exact(sys, &mut metric) }, SrStatus::Ok);
    let (x, y) = ([0.0, 0.0], [3.0, 4.0]);
    let mut dist = 0.0;
    assert_eq!(unsafe { sr_metric_distance(metric, x.as_ptr(), y.as_ptr(), 2, &mut dist) }, SrStatus::Ok);
    assert!((dist - 5.0).abs() < 1e-4, "{dist}");

    let mut value = 0.0;
    let mut residual = 1.0;
    let st = unsafe { sr_control_distance(sys, x.as_ptr(), y.as_ptr(), 2, 8, 2, 7, &mut value, &mut residual) };
    assert_eq!(st, SrStatus::Ok);
    assert!((value - 5.0).abs() < 1e-4 && residual < 1e-6);

    unsafe {
        sr_metric_free(metric);
        sr_system_free(sys);
    }
}

#[test]
fn errors_map_to_codes_and_messages() {
    let name = CString::new("no-such-system").unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { sr_system_builtin(name.as_ptr(), &mut sys) }, SrStatus::Config);
    assert!(sys.is_null());
    assert!(last_error().contains("no-such-system"), "{}", last_error());

    assert_eq!(unsafe { sr_system_builtin(ptr::null(), &mut sys) }, SrStatus::NullPointer);
    let bad = CString::new("{not json").unwrap();
    assert_eq!(unsafe { sr_system_from_json(bad.as_ptr(), &mut sys) }, SrStatus::Config);

    let sys = builtin("elliptic2");
    let mut metric = ptr::null_mut();
    unsafe { sr_metric_exact(sys, &mut metric) };
    let p = [0.0; 3];
    let mut out = 0.0;
    assert_eq!(unsafe { sr_metric_distance(metric, p.as_ptr(), p.as_ptr(), 3, &mut out) }, SrStatus::Dimension);

    let mut buf = [0.0; 4];
    assert_eq!(unsafe { sr_sample_fbm(0.5, 1.0, 8, 1, 1, 0, buf.as_mut_ptr(), buf.len()) }, SrStatus::BufferTooSmall);
    assert_eq!(unsafe { sr_sample_fbm(1.5, 1.0, 3, 1, 1, 0, buf.as_mut_ptr(), buf.len()) }, SrStatus::Domain);
    unsafe {
        sr_metric_free(metric);
        sr_system_free(sys);
        sr_metric_free(ptr::null_mut());
        sr_system_free(ptr::null_mut());
        sr_string_free(ptr::null_mut());
    }
}

#[test]
fn fbm_paths_are_reproducible_and_start_at_zero() {
    let mut a = vec![0.0; 65 * 2];
    let mut b = a.clone();
    let mut c = a.clone();
    unsafe {
        assert_eq!(sr_sample_fbm(0.7, 1.0, 64, 2, 11, 3, a.as_mut_ptr(), a.len()), SrStatus::Ok);
        assert_eq!(sr_sample_fbm(0.7, 1.0, 64, 2, 11, 3, b.as_mut_ptr(), b.len()), SrStatus::Ok);
        assert_eq!(sr_sample_fbm(0.7, 1.0, 64, 2, 11, 4, c.as_mut_ptr(), c.len()), SrStatus::Ok);
    }
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(&a[..2], &[0.0, 0.0]);
}

#[test]
fn capacity_of_two_points() {
    // Uniform weights are optimal by symmetry: E = (2 K(0) + 2 K(r)) / 4 with
    // the diagonal regularized at the nearest-neighbour distance r, so for
    // two points both terms equal K(r) and Cap = 1 / K(r).
    let sys = builtin("elliptic2");
    let mut metric = ptr::null_mut();
    unsafe { sr_metric_exact(sys, &mut metric) };
    let pts = [0.0, 0.0, 0.5, 0.0];
    let mut cap = 0.0;
    assert_eq!(unsafe { sr_capacity(metric, pts.as_ptr(), 2, 2, 1.0, &mut cap) }, SrStatus::Ok);
    assert!(cap > 0.0 && cap.is_finite());
    let mut neg = 0.0;
    assert_eq!(unsafe { sr_capacity(metric, pts.as_ptr(), 2, 2, -0.5, &mut neg) }, SrStatus::Ok);
    assert_eq!(neg, 1.0);
    unsafe {
        sr_metric_free(metric);
        sr_system_free(sys);
    }
}

#[test]
fn hitting_probability_returns_json() {
    let sys = builtin("elliptic2");
    let mut metric = ptr::null_mut();
    assert_eq!(unsafe { sr_metric_calibrated(sys, 0, 1, &mut metric) }, SrStatus::Ok);
    let cfg = CString::new(
        r#"{"hurst":0.5,"window":[0.5,1.0],"center":[0.0,0.0],"radius":100.0,"y0":[0.0,0.0],"n_paths":50,"steps":32,"seed":3}"#,
    )
    .unwrap();
    let mut est = -1.0;
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { sr_hitting_probability(sys, metric, cfg.as_ptr(), &mut est, &mut json) }, SrStatus::Ok);
    assert_eq!(est, 1.0);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"estimate\""));
    unsafe {
        sr_string_free(json);
        sr_metric_free(metric);
        sr_system_free(sys);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(cc.status.success());
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libsubrough_ffi.a");
    if !lib.exists() {
        eprintln!("static library not built at {}, skipping", lib.display());
        return;
    }
    let out = std::env::temp_dir().join(format!("subrough_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "5.000000");
}
