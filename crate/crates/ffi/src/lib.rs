//! C ABI over `pspin-core`.
//!
//! Models, solutions and simulation results live behind opaque handles that
//! the caller releases with the matching `*_free`. Every fallible call
//! returns a [`PspinStatus`]; on failure the message is kept per thread and
//! can be copied out with [`pspin_last_error`]. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pspin_core::ck::{solve_ck, CkSolution, ConstraintMode, SolverConfig};
use pspin_core::compare::compare_grids;
use pspin_core::langevin::{simulate, EmpiricalObservables, InitCondition, SimConfig};
use pspin_core::model::{ConfinementSpec, DisorderMode, ModelSpec};
use pspin_core::oracles::{bessel_h, catalan};
use pspin_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PspinStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfRange = 3,
    Unsupported = 4,
    SolverFailed = 5,
    SimulationFailed = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PspinConfinementKind {
    Polynomial = 0,
    ConstantFprime = 1,
}

/// `kind` is a [`PspinConfinementKind`]; `kappa` and `r` are read for the
/// polynomial kind, `z` for the constant one.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PspinConfinement {
    pub kind: u32,
    pub kappa: f64,
    pub r: u32,
    pub z: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PspinSolverParams {
    pub h: f64,
    pub t_max: f64,
    pub k0: f64,
    pub corrector_tol: f64,
    pub corrector_max_iter: u32,
    /// Nonzero selects the hard spherical constraint.
    pub hard: u8,
}

/// `init_variance <= 0` starts uniformly on the sphere, otherwise iid Gaussian.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PspinSimParams {
    pub dt: f64,
    pub t_max: f64,
    pub snapshot_stride: u32,
    pub n_realizations: u32,
    pub seed: u64,
    pub init_variance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PspinComparison {
    pub n_times: usize,
    pub sup_c: f64,
    pub rms_c: f64,
    pub sup_chi: f64,
    pub rms_chi: f64,
    pub max_stderr_c: f64,
    pub max_stderr_chi: f64,
    pub passed: u8,
}

pub struct PspinModel(ModelSpec);
pub struct PspinSolution(CkSolution);
pub struct PspinObservables(EmpiricalObservables);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PspinStatus {
    match err {
        Error::InvalidSpec(_) | Error::InvalidConfig(_) | Error::NonFinite(_) | Error::DimensionMismatch { .. } => {
            PspinStatus::InvalidArgument
        }
        Error::IndexOutOfRange { .. } | Error::TooLarge { .. } | Error::DisorderTooLarge { .. } => {
            PspinStatus::OutOfRange
        }
        Error::OrderTooLarge { .. } | Error::RequiresExactDisorder | Error::MissingAf | Error::GridMismatch(_) => {
            PspinStatus::Unsupported
        }
        Error::CorrectorDiverged { .. } => PspinStatus::SolverFailed,
        Error::BlowUp { .. } => PspinStatus::SimulationFailed,
        Error::Io(_) | Error::Parse { .. } => PspinStatus::Io,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (PspinStatus, String)>) -> PspinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PspinStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PspinStatus::Panic
        }
    }
}

fn core<T>(r: pspin_core::Result<T>) -> Result<T, (PspinStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PspinStatus, String) {
    (PspinStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PspinStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, v: T) -> Result<(), (PspinStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (always NUL
/// terminated when `len > 0`) and returns the full message length, or 0
/// when there is none.
#[no_mangle]
pub unsafe extern "C" fn pspin_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static version string.
#[no_mangle]
pub extern "C" fn pspin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default confinement `f(rho) = 5 (rho - 1)^2`.
#[no_mangle]
pub extern "C" fn pspin_confinement_default() -> PspinConfinement {
    PspinConfinement { kind: PspinConfinementKind::Polynomial as u32, kappa: 5.0, r: 2, z: 0.0 }
}

#[no_mangle]
pub extern "C" fn pspin_solver_params_default() -> PspinSolverParams {
    let d = SolverConfig::default();
    PspinSolverParams {
        h: d.h,
        t_max: d.t_max,
        k0: d.k0,
        corrector_tol: d.corrector_tol,
        corrector_max_iter: d.corrector_max_iter as u32,
        hard: 0,
    }
}

#[no_mangle]
pub extern "C" fn pspin_sim_params_default() -> PspinSimParams {
    let d = SimConfig::default();
    PspinSimParams {
        dt: d.dt,
        t_max: d.t_max,
        snapshot_stride: d.snapshot_stride as u32,
        n_realizations: d.n_realizations as u32,
        seed: d.base_seed,
        init_variance: 0.0,
    }
}

/// Creates a model from `a[0..m]` (`a[p-1]` multiplies the order-`p` term).
#[no_mangle]
pub unsafe extern "C" fn pspin_model_new(
    a: *const f64,
    m: usize,
    beta: f64,
    confinement: PspinConfinement,
    n: usize,
    out: *mut *mut PspinModel,
) -> PspinStatus {
    guard(|| {
        if a.is_null() {
            return Err(null("coefficient array"));
        }
        let coeffs = std::slice::from_raw_parts(a, m).to_vec();
        let conf = match confinement.kind {
            k if k == PspinConfinementKind::Polynomial as u32 => {
                ConfinementSpec::Polynomial { kappa: confinement.kappa, r: confinement.r }
            }
            k if k == PspinConfinementKind::ConstantFprime as u32 => ConfinementSpec::ConstantFprime { z: confinement.z },
            k => return Err((PspinStatus::InvalidArgument, format!("unknown confinement kind {k}"))),
        };
        let spec = core(ModelSpec::new(coeffs, beta, conf, n))?;
        write_out(out, Box::into_raw(Box::new(PspinModel(spec))))
    })
}

/// `decoupled != 0` selects iid entries over ordered index tuples.
#[no_mangle]
pub unsafe extern "C" fn pspin_model_set_decoupled(model: *mut PspinModel, decoupled: u8) -> PspinStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| null("model"))?;
        m.0.disorder_mode = if decoupled != 0 { DisorderMode::Decoupled } else { DisorderMode::Exact };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pspin_model_free(model: *mut PspinModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pspin_solve(
    model: *const PspinModel,
    params: *const PspinSolverParams,
    out: *mut *mut PspinSolution,
) -> PspinStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = deref(params, "params")?;
        let cfg = SolverConfig {
            h: p.h,
            t_max: p.t_max,
            k0: p.k0,
            corrector_tol: p.corrector_tol,
            corrector_max_iter: p.corrector_max_iter as usize,
            mode: if p.hard != 0 { ConstraintMode::Hard } else { ConstraintMode::Soft },
        };
        let sol = core(solve_ck(&m.0, &cfg))?;
        write_out(out, Box::into_raw(Box::new(PspinSolution(sol))))
    })
}

/// Number of grid times, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn pspin_solution_len(sol: *const PspinSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn pspin_solution_step(sol: *const PspinSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.h())
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PspinField {
    R = 0,
    C = 1,
    Chi = 2,
}

fn field_of(raw: u32) -> Result<PspinField, (PspinStatus, String)> {
    match raw {
        0 => Ok(PspinField::R),
        1 => Ok(PspinField::C),
        2 => Ok(PspinField::Chi),
        k => Err((PspinStatus::InvalidArgument, format!("unknown field {k}"))),
    }
}

/// Value of `field` (a [`PspinField`]) at grid nodes `(i, j)`; off-triangle
/// reads follow the solution's conventions.
#[no_mangle]
pub unsafe extern "C" fn pspin_solution_get(
    sol: *const PspinSolution,
    field: u32,
    i: usize,
    j: usize,
    out: *mut f64,
) -> PspinStatus {
    guard(|| {
        let s = &deref(sol, "solution")?.0;
        let n = s.len();
        if i >= n || j >= n {
            return Err((PspinStatus::OutOfRange, format!("({i}, {j}) outside a grid of {n} times")));
        }
        let v = match field_of(field)? {
            PspinField::R => s.r_at(i, j),
            PspinField::C => s.c_at(i, j),
            PspinField::Chi => s.chi_at(i, j),
        };
        write_out(out, v)
    })
}

/// Copies `K` into `buf[0..len]`; `len` must equal the grid size.
#[no_mangle]
pub unsafe extern "C" fn pspin_solution_k(sol: *const PspinSolution, buf: *mut f64, len: usize) -> PspinStatus {
    guard(|| {
        let s = &deref(sol, "solution")?.0;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if len != s.len() {
            return Err((PspinStatus::InvalidArgument, format!("buffer holds {len}, grid has {}", s.len())));
        }
        ptr::copy_nonoverlapping(s.k.as_ptr(), buf, len);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn pspin_solution_free(sol: *mut PspinSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

#[no_mangle]
pub unsafe extern "C" fn pspin_simulate(
    model: *const PspinModel,
    params: *const PspinSimParams,
    out: *mut *mut PspinObservables,
) -> PspinStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let p = deref(params, "params")?;
        let cfg = SimConfig {
            dt: p.dt,
            t_max: p.t_max,
            snapshot_stride: p.snapshot_stride as usize,
            n_realizations: p.n_realizations as usize,
            base_seed: p.seed,
            init: if p.init_variance > 0.0 {
                InitCondition::IidGaussian { variance: p.init_variance }
            } else {
                InitCondition::UniformSphere
            },
            ..SimConfig::default()
        };
        let obs = core(simulate(&m.0, &cfg))?;
        write_out(out, Box::into_raw(Box::new(PspinObservables(obs))))
    })
}

#[no_mangle]
pub unsafe extern "C" fn pspin_observables_len(obs: *const PspinObservables) -> usize {
    obs.as_ref().map_or(0, |o| o.0.len())
}

/// Snapshot time `i`, NaN when out of range.
#[no_mangle]
pub unsafe extern "C" fn pspin_observables_time(obs: *const PspinObservables, i: usize) -> f64 {
    obs.as_ref().and_then(|o| o.0.times.get(i).copied()).unwrap_or(f64::NAN)
}

/// Realization mean of `field` (`C` or `chi`) at snapshot indices `(i, j)`; `R` is not
/// measured and yields `PSPIN_STATUS_UNSUPPORTED`.
#[no_mangle]
pub unsafe extern "C" fn pspin_observables_get(
    obs: *const PspinObservables,
    field: u32,
    i: usize,
    j: usize,
    out: *mut f64,
) -> PspinStatus {
    guard(|| {
        let o = &deref(obs, "observables")?.0;
        let n = o.len();
        if i >= n || j >= n {
            return Err((PspinStatus::OutOfRange, format!("({i}, {j}) outside a grid of {n} snapshots")));
        }
        let v = match field_of(field)? {
            PspinField::C => o.c.get(i, j),
            PspinField::Chi => o.chi.get(i, j),
            PspinField::R => return Err((PspinStatus::Unsupported, "R is not measured by the simulator".into())),
        };
        write_out(out, v)
    })
}

#[no_mangle]
pub unsafe extern "C" fn pspin_observables_free(obs: *mut PspinObservables) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Sup and RMS differences on the common snapshot grid.
#[no_mangle]
pub unsafe extern "C" fn pspin_compare(
    obs: *const PspinObservables,
    sol: *const PspinSolution,
    tol: f64,
    out: *mut PspinComparison,
) -> PspinStatus {
    guard(|| {
        let o = &deref(obs, "observables")?.0;
        let s = &deref(sol, "solution")?.0;
        let r = core(compare_grids(o, s, tol))?;
        write_out(
            out,
            PspinComparison {
                n_times: r.times.len(),
                sup_c: r.sup_c,
                rms_c: r.rms_c,
                sup_chi: r.sup_chi,
                rms_chi: r.rms_chi,
                max_stderr_c: r.max_stderr_c,
                max_stderr_chi: r.max_stderr_chi,
                passed: r.passed() as u8,
            },
        )
    })
}

/// Catalan/Bessel series `h(tau)`; NaN for negative or non-finite `tau`.
#[no_mangle]
pub extern "C" fn pspin_bessel_h(tau: f64) -> f64 {
    if tau >= 0.0 && tau.is_finite() {
        bessel_h(tau)
    } else {
        f64::NAN
    }
}

#[no_mangle]
pub unsafe extern "C" fn pspin_catalan(n: u32, out: *mut u64) -> PspinStatus {
    guard(|| {
        let v = core(catalan(n as usize))?;
        write_out(out, v)
    })
}
