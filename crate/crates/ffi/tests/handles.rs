use std::ffi::{CStr, CString};
use std::ptr;

use entropy_decay_ffi::*;

fn model(s: &str) -> *mut EdModel {
    let c = CString::new(s).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ed_model_new(c.as_ptr(), &mut m) }, EdStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = ed_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn two_point_constants() {
    let m = model("two_point:rate=1");
    let mut gap = 0.0;
    assert_eq!(unsafe { ed_spectral_gap(m, &mut gap) }, EdStatus::Ok);
    assert!((gap - 2.0).abs() < 1e-14);
    let mut est = 0.0;
    assert_eq!(unsafe { ed_estimate(m, EdConstant::Gap as i32, 0, 0, &mut est) }, EdStatus::Ok);
    assert!((est - 2.0).abs() < 1e-14);
    assert_eq!(unsafe { ed_estimate(m, 17, 0, 0, &mut est) }, EdStatus::InvalidInput);
    assert!(last_error().contains("17"));
    unsafe { ed_model_free(m) };
}

#[test]
fn entropy_of_functions() {
    let m = model("two_point:rate=1");
    let mut e = -1.0;
    let f = [1.0, 1.0];
    assert_eq!(unsafe { ed_entropy(m, f.as_ptr(), 2, &mut e) }, EdStatus::Ok);
    assert_eq!(e, 0.0);
    let f = [1.0, 3.0];
    assert_eq!(unsafe { ed_entropy(m, f.as_ptr(), 2, &mut e) }, EdStatus::Ok);
    // (1/2)(3 ln 3) - 2 ln 2
    assert!((e - (1.5 * 3f64.ln() - 2.0 * 2f64.ln())).abs() < 1e-15);
    assert_eq!(unsafe { ed_entropy(m, f.as_ptr(), 1, &mut e) }, EdStatus::DimensionMismatch);
    let f = [1.0, -1.0];
    assert_eq!(unsafe { ed_entropy(m, f.as_ptr(), 2, &mut e) }, EdStatus::Domain);
    unsafe { ed_model_free(m) };
}

#[test]
fn explicit_birth_death_rates() {
    let birth = [1.0, 1.0, 1.0, 0.0];
    let death = [0.0, 1.0, 2.0, 3.0];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ed_model_birth_death(birth.as_ptr(), death.as_ptr(), 4, &mut m) }, EdStatus::Ok);
    let (mut kappa, mut certified) = (0.0, false);
    assert_eq!(unsafe { ed_certified_kappa(m, &mut kappa, &mut certified) }, EdStatus::Ok);
    assert!(certified);
    assert!((kappa - 1.0).abs() < 1e-15);
    unsafe { ed_model_free(m) };
    let bad = [0.0, -1.0, 2.0, 3.0];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ed_model_birth_death(birth.as_ptr(), bad.as_ptr(), 4, &mut m) }, EdStatus::InvalidModel);
    assert!(m.is_null());
}

#[test]
fn null_arguments_are_rejected() {
    let mut x = 0.0;
    assert_eq!(unsafe { ed_spectral_gap(ptr::null(), &mut x) }, EdStatus::NullPointer);
    let m = model("poisson:lambda=2,n_max=10");
    assert_eq!(unsafe { ed_spectral_gap(m, ptr::null_mut()) }, EdStatus::NullPointer);
    let mut n = 0usize;
    assert_eq!(unsafe { ed_model_n_states(m, &mut n) }, EdStatus::Ok);
    assert_eq!(n, 11);
    unsafe { ed_model_free(m) };
    unsafe { ed_model_free(ptr::null_mut()) };
    let bad = [0xffu8, 0];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ed_model_new(bad.as_ptr().cast(), &mut m) }, EdStatus::InvalidUtf8);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ed_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
