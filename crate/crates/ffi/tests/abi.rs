use std::ffi::{c_char, CStr};
use std::ptr;

use pspin_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { pspin_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn model(a: &[f64], n: usize) -> *mut PspinModel {
    let mut m = ptr::null_mut();
    let st = unsafe { pspin_model_new(a.as_ptr(), a.len(), 1.0, pspin_confinement_default(), n, &mut m) };
    assert_eq!(st, PspinStatus::Ok);
    m
}

#[test]
fn oracles() {
    assert!((pspin_bessel_h(1.0) - 1.590636854637329).abs() < 1e-14);
    assert!(pspin_bessel_h(-1.0).is_nan());
    let mut c = 0u64;
    assert_eq!(unsafe { pspin_catalan(6, &mut c) }, PspinStatus::Ok);
    assert_eq!(c, 132);
    assert_eq!(unsafe { pspin_catalan(99, &mut c) }, PspinStatus::OutOfRange);
    assert!(last_error().contains("30"));
    assert_eq!(unsafe { pspin_catalan(3, ptr::null_mut()) }, PspinStatus::NullPointer);
    let v = unsafe { CStr::from_ptr(pspin_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn solve_and_read_back() {
    let m = model(&[0.0, 1.0], 1);
    let mut p = pspin_solver_params_default();
    p.h = 0.01;
    p.t_max = 1.0;
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { pspin_solve(m, &p, &mut sol) }, PspinStatus::Ok);
    let n = unsafe { pspin_solution_len(sol) };
    assert_eq!(n, 101);
    assert_eq!(unsafe { pspin_solution_step(sol) }, 0.01);
    let mut v = 0.0;
    for i in 0..n {
        assert_eq!(unsafe { pspin_solution_get(sol, PspinField::R as u32, i, i, &mut v) }, PspinStatus::Ok);
        assert_eq!(v, 1.0);
    }
    let mut k = vec![0.0; n];
    assert_eq!(unsafe { pspin_solution_k(sol, k.as_mut_ptr(), n) }, PspinStatus::Ok);
    assert_eq!(unsafe { pspin_solution_get(sol, PspinField::C as u32, 7, 7, &mut v) }, PspinStatus::Ok);
    assert_eq!(v, k[7]);
    assert_eq!(unsafe { pspin_solution_k(sol, k.as_mut_ptr(), n - 1) }, PspinStatus::InvalidArgument);
    assert_eq!(unsafe { pspin_solution_get(sol, 9, 0, 0, &mut v) }, PspinStatus::InvalidArgument);
    assert_eq!(unsafe { pspin_solution_get(sol, 0, n, 0, &mut v) }, PspinStatus::OutOfRange);
    unsafe {
        pspin_solution_free(sol);
        pspin_model_free(m);
    }
}

#[test]
fn simulate_and_compare() {
    let m = model(&[0.0, 0.0, 1.0], 16);
    let sp = PspinSimParams { dt: 0.01, t_max: 0.5, snapshot_stride: 10, n_realizations: 2, seed: 3, init_variance: 0.0 };
    let mut obs = ptr::null_mut();
    assert_eq!(unsafe { pspin_simulate(m, &sp, &mut obs) }, PspinStatus::Ok);
    assert_eq!(unsafe { pspin_observables_len(obs) }, 6);
    assert!((unsafe { pspin_observables_time(obs, 5) } - 0.5).abs() < 1e-12);
    assert!(unsafe { pspin_observables_time(obs, 6) }.is_nan());
    let mut v = 0.0;
    assert_eq!(unsafe { pspin_observables_get(obs, PspinField::Chi as u32, 3, 0, &mut v) }, PspinStatus::Ok);
    assert_eq!(v, 0.0);
    assert_eq!(unsafe { pspin_observables_get(obs, PspinField::R as u32, 0, 0, &mut v) }, PspinStatus::Unsupported);

    let mut p = pspin_solver_params_default();
    p.h = 0.01;
    p.t_max = 0.5;
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { pspin_solve(m, &p, &mut sol) }, PspinStatus::Ok);
    let mut rep = PspinComparison::default();
    assert_eq!(unsafe { pspin_compare(obs, sol, 1.0, &mut rep) }, PspinStatus::Ok);
    assert_eq!(rep.n_times, 6);
    assert!(rep.sup_c >= rep.rms_c && rep.passed == 1);
    unsafe {
        pspin_observables_free(obs);
        pspin_solution_free(sol);
        pspin_model_free(m);
    }
}

#[test]
fn errors_are_reported() {
    let a = [0.0];
    let mut m = ptr::null_mut();
    let st = unsafe { pspin_model_new(a.as_ptr(), 1, 1.0, pspin_confinement_default(), 4, &mut m) };
    assert_eq!(st, PspinStatus::InvalidArgument);
    assert!(m.is_null());
    assert!(!last_error().is_empty());

    let mut bad = pspin_confinement_default();
    bad.kind = 7;
    let st = unsafe { pspin_model_new([1.0].as_ptr(), 1, 1.0, bad, 4, &mut m) };
    assert_eq!(st, PspinStatus::InvalidArgument);
    assert!(last_error().contains("kind 7"));

    // r = 2 confinement is too weak for a quartic interaction
    let st = unsafe { pspin_model_new([0.0, 0.0, 0.0, 1.0].as_ptr(), 4, 1.0, pspin_confinement_default(), 4, &mut m) };
    assert_eq!(st, PspinStatus::InvalidArgument);
    let sp = pspin_sim_params_default();
    let mut obs = ptr::null_mut();
    assert_eq!(unsafe { pspin_simulate(ptr::null(), &sp, &mut obs) }, PspinStatus::NullPointer);

    let m = model(&[0.0, 0.0, 1.0], 4);
    let mut p = pspin_solver_params_default();
    p.h = 0.3;
    p.t_max = 1.0;
    let mut sol = ptr::null_mut();
    assert_eq!(unsafe { pspin_solve(m, &p, &mut sol) }, PspinStatus::InvalidArgument);
    assert!(sol.is_null());
    unsafe {
        pspin_model_free(m);
        pspin_model_free(ptr::null_mut());
        pspin_solution_free(ptr::null_mut());
    }
    assert_eq!(unsafe { pspin_solution_len(ptr::null()) }, 0);
}
