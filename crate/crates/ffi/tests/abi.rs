use std::ffi::{CStr, CString};
use std::ptr;

use patdens_ffi::*;

fn word(s: &str) -> *mut PdWord {
    let c = CString::new(s).unwrap();
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { pd_word_new(c.as_ptr(), &mut w) }, PdStatus::Ok);
    w
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pd_last_error()) }.to_str().unwrap().to_owned()
}

#[test]
fn count_and_density() {
    let (p, h) = (word("10"), word("0100101"));
    let mut buf = [0 as std::ffi::c_char; 8];
    let mut needed = 0;
    unsafe {
        assert_eq!(pd_count(p, h, buf.as_mut_ptr(), buf.len(), &mut needed), PdStatus::Ok);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "4");
        assert_eq!(needed, 2);
        let mut d = 0.0;
        assert_eq!(pd_density(p, h, &mut d), PdStatus::Ok);
        assert!((d - 4.0 / 21.0).abs() < 1e-15);
        assert_eq!(pd_word_len(h), 7);
        pd_word_free(p);
        pd_word_free(h);
    }
}

#[test]
fn small_buffers_report_the_needed_size() {
    let (p, h) = (word("1"), word(&"1".repeat(12345)));
    let mut buf = [0 as std::ffi::c_char; 3];
    let mut needed = 0;
    unsafe {
        assert_eq!(pd_count(p, h, buf.as_mut_ptr(), buf.len(), &mut needed), PdStatus::BufferTooSmall);
        assert_eq!(needed, 6);
        assert_eq!(pd_count(p, h, ptr::null_mut(), 0, &mut needed), PdStatus::BufferTooSmall);
        pd_word_free(p);
        pd_word_free(h);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let bad = CString::new("0120").unwrap();
    let mut w = ptr::null_mut();
    unsafe {
        assert_eq!(pd_word_new(bad.as_ptr(), &mut w), PdStatus::InvalidArgument);
        assert!(w.is_null());
        assert!(last_error().contains("'2'"), "{}", last_error());
        assert_eq!(pd_word_new(ptr::null(), &mut w), PdStatus::NullPointer);
        let mut d = 0.0;
        assert_eq!(pd_density(ptr::null(), ptr::null(), &mut d), PdStatus::NullPointer);
        let t = CString::new("rho1=0.5,rho110=0.45").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(pd_limit_shape_solve(t.as_ptr(), 200, &mut s), PdStatus::NearBoundary);
        assert!(s.is_null());
        assert!(pd_limit_shape_entropy(ptr::null()).is_nan());
        pd_word_free(ptr::null_mut());
    }
}

#[test]
fn constants_and_shapes() {
    let tau = word("1010");
    unsafe {
        let (mut closed, mut numeric) = (0.0, 0.0);
        assert_eq!(pd_c_closed_form(tau, &mut closed), PdStatus::Ok);
        assert_eq!(pd_c_numeric(tau, 200, &mut numeric), PdStatus::Ok);
        assert!((numeric - closed).abs() < 5e-3 * closed);
        pd_word_free(tau);

        let t = CString::new("rho1=0.5,rho10=0.25").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(pd_limit_shape_solve(t.as_ptr(), 100, &mut s), PdStatus::Ok);
        assert!((pd_limit_shape_entropy(s) - 2f64.ln()).abs() < 1e-9);
        assert!((pd_limit_shape_value_at(s, 0.3) - 0.5).abs() < 1e-9);
        let mut c = [0.0; 1];
        let mut needed = 0;
        assert_eq!(pd_limit_shape_coeffs(s, c.as_mut_ptr(), 1, &mut needed), PdStatus::BufferTooSmall);
        let mut c = vec![0.0; needed];
        assert_eq!(pd_limit_shape_coeffs(s, c.as_mut_ptr(), c.len(), &mut needed), PdStatus::Ok);
        assert!((c[0] - 0.5f64.ln()).abs() < 1e-10);
        pd_limit_shape_free(s);
    }
}

#[test]
fn deck_optimization() {
    let pat = word("1010");
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(
            pd_deck_optimize(12, 6, pat, PdDeckMode::Exhaustive, ptr::null(), 0, &mut r),
            PdStatus::Ok
        );
        let best = pd_deck_result_best(r);
        assert_eq!(pd_word_len(best), 12);
        let mut buf = [0 as std::ffi::c_char; 32];
        assert_eq!(pd_deck_result_count(r, buf.as_mut_ptr(), buf.len(), ptr::null_mut()), PdStatus::Ok);
        let count: f64 = CStr::from_ptr(buf.as_ptr()).to_str().unwrap().parse().unwrap();
        assert!((count / 495.0 - pd_deck_result_density(r)).abs() < 1e-12);
        let mut d = 0.0;
        assert_eq!(pd_density(pat, best, &mut d), PdStatus::Ok);
        assert_eq!(d, pd_deck_result_density(r));
        pd_deck_result_free(r);
        assert_eq!(
            pd_deck_optimize(12, 13, pat, PdDeckMode::Ascent, ptr::null(), 0, &mut r),
            PdStatus::InvalidArgument
        );
        pd_word_free(pat);
    }
}
