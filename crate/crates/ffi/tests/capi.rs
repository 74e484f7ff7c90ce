use std::ffi::{CStr, CString};
use std::ptr;

use ssf_ffi::*;

fn last_error() -> String {
    let p = ssf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn scalar_instance_round_trip() {
    let json = CString::new(r#"{"dim":1,"H":{"re":[[0]]},"V":{"re":[[1]]},"n":2}"#).unwrap();
    let mut inst = ptr::null_mut();
    unsafe {
        assert_eq!(ssf_instance_from_json(json.as_ptr(), &mut inst), SsfStatus::Ok);
        assert_eq!(ssf_instance_dim(inst), 1);

        let mut eta = ptr::null_mut();
        assert_eq!(ssf_eta_compute(inst, 0, &mut eta), SsfStatus::Ok);
        assert_eq!(ssf_eta_order(eta), 2);
        let mut v = 0.0;
        assert_eq!(ssf_eta_eval(eta, 0.25, 0, &mut v), SsfStatus::Ok);
        assert!((v - 0.75).abs() < 1e-15);
        assert_eq!(ssf_eta_eval(eta, 0.0, 1, &mut v), SsfStatus::Ok);
        assert_eq!(v, 1.0);
        let (mut integral, mut l1) = (0.0, 0.0);
        assert_eq!(ssf_eta_norms(eta, &mut integral, &mut l1), SsfStatus::Ok);
        assert!((integral - 0.5).abs() < 1e-15 && (l1 - 0.5).abs() < 1e-15);

        let mut count = 0usize;
        assert_eq!(ssf_eta_breakpoints(eta, ptr::null_mut(), 0, &mut count), SsfStatus::Ok);
        let mut buf = vec![0.0; count];
        assert_eq!(ssf_eta_breakpoints(eta, buf.as_mut_ptr(), count, &mut count), SsfStatus::Ok);
        assert_eq!(buf, vec![0.0, 1.0]);

        let mut s = ptr::null_mut();
        assert_eq!(ssf_eta_to_json(eta, &mut s), SsfStatus::Ok);
        assert!(CStr::from_ptr(s).to_str().unwrap().contains("breakpoints"));
        ssf_string_free(s);
        ssf_eta_free(eta);

        let mut s = ptr::null_mut();
        assert_eq!(ssf_instance_to_json(inst, &mut s), SsfStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ssf_instance_from_json(s, &mut back), SsfStatus::Ok);
        let mut s2 = ptr::null_mut();
        assert_eq!(ssf_instance_to_json(back, &mut s2), SsfStatus::Ok);
        assert_eq!(CStr::from_ptr(s), CStr::from_ptr(s2));
        ssf_string_free(s);
        ssf_string_free(s2);
        ssf_instance_free(back);
        ssf_instance_free(inst);
    }
}

#[test]
fn matrices_and_records() {
    let h = [0.0, 0.0, 0.0, 1.0];
    let v = [0.0, 1.0, 1.0, 0.0];
    let mut inst = ptr::null_mut();
    unsafe {
        assert_eq!(
            ssf_instance_from_matrices(2, h.as_ptr(), ptr::null(), v.as_ptr(), ptr::null(), 3, &mut inst),
            SsfStatus::Ok
        );
        let mut s = ptr::null_mut();
        let mut pass = -1;
        assert_eq!(ssf_compute_record_json(inst, &mut s, &mut pass), SsfStatus::Ok);
        assert_eq!(pass, 1);
        let rec: serde_json::Value = serde_json::from_str(CStr::from_ptr(s).to_str().unwrap()).unwrap();
        assert_eq!(rec["n"], 3);
        ssf_string_free(s);
        ssf_instance_free(inst);

        let mut g = ptr::null_mut();
        assert_eq!(ssf_instance_generate(4, 1.0, 0.5, 2, 9, &mut g), SsfStatus::Ok);
        assert_eq!(ssf_instance_dim(g), 4);
        ssf_instance_free(g);
    }
}

#[test]
fn errors_are_reported() {
    let mut inst = ptr::null_mut();
    unsafe {
        let bad = CString::new(r#"{"dim":2,"H":{"re":[[0,0],[0,1]]},"V":{"re":[[0,1],[2,0]]},"n":1}"#).unwrap();
        assert_eq!(ssf_instance_from_json(bad.as_ptr(), &mut inst), SsfStatus::NotHermitian);
        assert!(last_error().contains("(0, 1)"));
        assert!(inst.is_null());

        let garbage = CString::new("{").unwrap();
        assert_eq!(ssf_instance_from_json(garbage.as_ptr(), &mut inst), SsfStatus::Parse);
        assert_eq!(ssf_instance_from_json(ptr::null(), &mut inst), SsfStatus::NullPointer);
        assert_eq!(ssf_eta_compute(ptr::null(), 1, &mut ptr::null_mut()), SsfStatus::NullPointer);
        assert_eq!(ssf_instance_generate(0, 1.0, 1.0, 1, 0, &mut inst), SsfStatus::Validation);
        let h = [0.0];
        assert_eq!(
            ssf_instance_from_matrices(1, h.as_ptr(), ptr::null(), h.as_ptr(), ptr::null(), 0, &mut inst),
            SsfStatus::Validation
        );
        assert_eq!(ssf_instance_dim(ptr::null()), 0);
        ssf_instance_free(ptr::null_mut());
        ssf_eta_free(ptr::null_mut());
        ssf_string_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/ssf.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in ["ssf_instance_from_json", "ssf_eta_compute", "ssf_last_error_message", "SSF_STATUS_OK", "typedef struct SsfEta SsfEta"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler available, syntax check skipped");
        return;
    };
    assert!(status.success());
}
