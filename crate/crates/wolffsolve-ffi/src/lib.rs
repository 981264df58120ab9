//! C ABI for the wolffsolve library.
//!
//! Conventions: opaque handles behind pointers, integer status codes from
//! [`wsv_status`], results through out-parameters. Infinite potential values
//! cross the boundary as IEEE `inf` with `WSV_OK`; only invalid inputs and
//! iteration failures are errors. Every function catches panics and reports
//! `WSV_ERR_PANIC` instead of unwinding across the boundary. Error details
//! are retrievable per thread via [`wsv_last_error_message`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wolffsolve::error::Error;
use wolffsolve::measure::{Measure, Point};
use wolffsolve::potential::{finiteness_check, riesz, wolff, PotentialParams};
use wolffsolve::radial::{
    make_counterexample, make_powerlaw_example, radial_solve, RadialGrid, RadialSolution,
};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum wsv_status {
    WSV_OK = 0,
    WSV_ERR_INVALID_INPUT = 1,
    WSV_ERR_UNSUPPORTED = 2,
    WSV_ERR_NOT_CONVERGED = 3,
    WSV_ERR_UTF8 = 4,
    WSV_ERR_PANIC = 5,
    WSV_ERR_NULL_POINTER = 6,
    WSV_ERR_INTERNAL = 7,
}

/// Opaque measure handle.
pub struct wsv_measure {
    inner: Measure,
}

/// Opaque radial solution handle.
pub struct wsv_radial_solution {
    inner: RadialSolution,
}

/// Parameter bundle for the sublinear problem (plain data, passed by value).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct wsv_params {
    pub n: u32,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> wsv_status {
    match err {
        Error::InvalidInput(_) | Error::Json(_) | Error::Io(_) => wsv_status::WSV_ERR_INVALID_INPUT,
        Error::Unsupported(_) => wsv_status::WSV_ERR_UNSUPPORTED,
        Error::NotConverged(_) => wsv_status::WSV_ERR_NOT_CONVERGED,
        Error::Internal(_) => wsv_status::WSV_ERR_INTERNAL,
    }
}

fn guarded<F: FnOnce() -> wsv_status + std::panic::UnwindSafe>(f: F) -> c_int {
    match catch_unwind(f) {
        Ok(status) => status as c_int,
        Err(_) => {
            set_error("panic inside wolffsolve".to_string());
            wsv_status::WSV_ERR_PANIC as c_int
        }
    }
}

/// Message for the most recent error on this thread, or NULL.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wsv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

fn params_of(p: wsv_params) -> Result<PotentialParams, Error> {
    PotentialParams::new(p.n as usize, p.alpha, p.p, p.q, p.r)
}

unsafe fn point_of(coords: *const f64, dim: usize) -> Result<Point, Error> {
    if coords.is_null() {
        return Err(Error::invalid("null coordinate pointer"));
    }
    Point::new(std::slice::from_raw_parts(coords, dim).to_vec())
}

/// Parse a measure from its JSON description.
///
/// # Safety
/// `json` must be a valid NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wsv_measure_from_json(
    json: *const c_char,
    out: *mut *mut wsv_measure,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if json.is_null() || out.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("measure JSON is not valid UTF-8".to_string());
                return wsv_status::WSV_ERR_UTF8;
            }
        };
        match Measure::from_json_str(text) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(wsv_measure { inner: m }));
                wsv_status::WSV_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Serialize a measure back to JSON. The returned string must be released
/// with `wsv_string_free`.
///
/// # Safety
/// `m` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wsv_measure_to_json(
    m: *const wsv_measure,
    out: *mut *mut c_char,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if m.is_null() || out.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        let text = (*m).inner.to_json().to_string();
        match CString::new(text) {
            Ok(c) => {
                *out = c.into_raw();
                wsv_status::WSV_OK
            }
            Err(_) => {
                set_error("measure JSON contained an interior NUL".to_string());
                wsv_status::WSV_ERR_INTERNAL
            }
        }
    }))
}

/// Release a string produced by this library.
///
/// # Safety
/// `s` must come from `wsv_measure_to_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn wsv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build the counterexample measure (existence holds, upper estimate fails).
#[no_mangle]
pub extern "C" fn wsv_measure_counterexample(
    n: u32,
    two_alpha: f64,
    q: f64,
    beta: f64,
    out: *mut *mut wsv_measure,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        match make_counterexample(n as usize, two_alpha, q, beta) {
            Ok(m) => {
                unsafe { *out = Box::into_raw(Box::new(wsv_measure { inner: m })) };
                wsv_status::WSV_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Build the power example `|y|^{-s}` on the unit ball.
#[no_mangle]
pub extern "C" fn wsv_measure_powerlaw(
    n: u32,
    two_alpha: f64,
    q: f64,
    s: f64,
    out: *mut *mut wsv_measure,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if out.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        match make_powerlaw_example(n as usize, two_alpha, q, s) {
            Ok(m) => {
                unsafe { *out = Box::into_raw(Box::new(wsv_measure { inner: m })) };
                wsv_status::WSV_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Release a measure handle.
///
/// # Safety
/// `m` must be a live handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn wsv_measure_free(m: *mut wsv_measure) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `sigma(B(x, t))` for the open ball of radius `t` about `x`.
///
/// # Safety
/// `m` live handle, `x` an array of `dim` doubles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wsv_ball_mass(
    m: *const wsv_measure,
    x: *const f64,
    dim: usize,
    t: f64,
    out: *mut f64,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if m.is_null() || out.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        let point = match point_of(x, dim) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        match (*m).inner.ball_mass(&point, t) {
            Ok(v) => {
                *out = v;
                wsv_status::WSV_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Wolff potential `W_{a,p} sigma (x)`. `divergent` receives 1 when the
/// value is `+inf` (with the reason in the error message slot), else 0.
///
/// # Safety
/// Pointer arguments as in `wsv_ball_mass`.
#[no_mangle]
pub unsafe extern "C" fn wsv_wolff(
    m: *const wsv_measure,
    params: wsv_params,
    x: *const f64,
    dim: usize,
    value: *mut f64,
    abs_error_bound: *mut f64,
    divergent: *mut c_int,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if m.is_null() || value.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        let p = match params_of(params) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        let point = match point_of(x, dim) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        match wolff(&(*m).inner, &p, &point) {
            Ok(v) => {
                *value = v.value;
                if !abs_error_bound.is_null() {
                    *abs_error_bound = v.abs_error_bound;
                }
                if !divergent.is_null() {
                    *divergent = if v.value.is_finite() { 0 } else { 1 };
                }
                if let Some(reason) = v.divergence {
                    set_error(reason.to_string());
                }
                wsv_status::WSV_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Riesz potential `I_{two_alpha} sigma (x)`.
///
/// # Safety
/// Pointer arguments as in `wsv_ball_mass`.
#[no_mangle]
pub unsafe extern "C" fn wsv_riesz(
    m: *const wsv_measure,
    two_alpha: f64,
    x: *const f64,
    dim: usize,
    value: *mut f64,
    abs_error_bound: *mut f64,
    divergent: *mut c_int,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if m.is_null() || value.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        let point = match point_of(x, dim) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        match riesz(&(*m).inner, two_alpha, &point) {
            Ok(v) => {
                *value = v.value;
                if !abs_error_bound.is_null() {
                    *abs_error_bound = v.abs_error_bound;
                }
                if !divergent.is_null() {
                    *divergent = if v.value.is_finite() { 0 } else { 1 };
                }
                wsv_status::WSV_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Analytic tail-finiteness test; writes 1 (finite) or 0.
#[no_mangle]
pub extern "C" fn wsv_finiteness_check(
    m: *const wsv_measure,
    params: wsv_params,
    finite: *mut c_int,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if m.is_null() || finite.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        let p = match params_of(params) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        let fin = unsafe { finiteness_check(&(*m).inner, &p) };
        unsafe { *finite = if fin.finite { 1 } else { 0 } };
        if let Some(reason) = fin.reason {
            set_error(reason);
        }
        wsv_status::WSV_OK
    }))
}

/// Run the radial model-kernel solve; the handle exposes the converged grid.
///
/// # Safety
/// `m` live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wsv_radial_solve(
    m: *const wsv_measure,
    params: wsv_params,
    grid_per_decade: u32,
    tol: f64,
    max_iter: u32,
    out: *mut *mut wsv_radial_solution,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if m.is_null() || out.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        let p = match params_of(params) {
            Ok(p) => p,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        let measure = &(*m).inner;
        let grid = match RadialGrid::for_measure(measure, grid_per_decade as usize, (1e-6, 1e3)) {
            Ok(g) => g,
            Err(e) => {
                set_error(e.to_string());
                return status_of(&e);
            }
        };
        match radial_solve(measure, &p, &grid, tol, max_iter as usize) {
            Ok(sol) => {
                *out = Box::into_raw(Box::new(wsv_radial_solution { inner: sol }));
                wsv_status::WSV_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Number of collocation nodes of a radial solution.
///
/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsv_radial_solution_len(sol: *const wsv_radial_solution) -> usize {
    if sol.is_null() {
        return 0;
    }
    (*sol).inner.field.values.len()
}

/// Fetch node `i` of a radial solution: its radius and value.
///
/// # Safety
/// `sol` live handle; `rho`/`u` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wsv_radial_solution_node(
    sol: *const wsv_radial_solution,
    i: usize,
    rho: *mut f64,
    u: *mut f64,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if sol.is_null() || rho.is_null() || u.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        let field = &(*sol).inner.field;
        let radii = match &field.nodes {
            wolffsolve::solver::NodeSet::Radial { radii } => radii,
            _ => {
                set_error("radial solution carries non-radial nodes".to_string());
                return wsv_status::WSV_ERR_INTERNAL;
            }
        };
        if i >= radii.len() {
            set_error(format!("node index {i} out of range {}", radii.len()));
            return wsv_status::WSV_ERR_INVALID_INPUT;
        }
        *rho = radii[i];
        *u = field.values[i];
        wsv_status::WSV_OK
    }))
}

/// Evaluate the converged radial solution at an arbitrary radius.
///
/// # Safety
/// `sol` live handle; `u` valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wsv_radial_solution_eval(
    sol: *const wsv_radial_solution,
    rho: f64,
    u: *mut f64,
) -> c_int {
    guarded(AssertUnwindSafe(|| {
        if sol.is_null() || u.is_null() {
            set_error("null pointer".to_string());
            return wsv_status::WSV_ERR_NULL_POINTER;
        }
        match (*sol).inner.eval(rho) {
            Ok(v) => {
                *u = v;
                wsv_status::WSV_OK
            }
            Err(e) => {
                set_error(e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Max relative fixed-point residual of the converged solve.
///
/// # Safety
/// `sol` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wsv_radial_solution_residual(sol: *const wsv_radial_solution) -> f64 {
    if sol.is_null() {
        return f64::NAN;
    }
    (*sol).inner.field.residual
}

/// Release a radial solution handle.
///
/// # Safety
/// `sol` from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn wsv_radial_solution_free(sol: *mut wsv_radial_solution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_through_the_c_abi() {
        let json = CString::new(
            r#"{"n":3,"radial_segments":[{"c":1.0,"s":1.5,"beta":0.0,"r_lo":0.0,"r_hi":1.0,"log_scale":1.0}],"atoms":[]}"#,
        )
        .unwrap();
        let mut handle: *mut wsv_measure = std::ptr::null_mut();
        let status = unsafe { wsv_measure_from_json(json.as_ptr(), &mut handle) };
        assert_eq!(status, wsv_status::WSV_OK as c_int);
        assert!(!handle.is_null());

        let mut out: *mut c_char = std::ptr::null_mut();
        let status = unsafe { wsv_measure_to_json(handle, &mut out) };
        assert_eq!(status, wsv_status::WSV_OK as c_int);
        let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_string();
        assert!(text.contains("radial_segments"));
        unsafe { wsv_string_free(out) };

        // potential through the ABI equals the library value
        let x = [0.37f64, 0.0, 0.0];
        let params = wsv_params {
            n: 3,
            alpha: 0.5,
            p: 2.0,
            q: 0.5,
            r: 0.0,
        };
        let mut value = 0.0f64;
        let mut err = 0.0f64;
        let mut div: c_int = -1;
        let status = unsafe {
            wsv_wolff(handle, params, x.as_ptr(), 3, &mut value, &mut err, &mut div)
        };
        assert_eq!(status, wsv_status::WSV_OK as c_int);
        assert_eq!(div, 0);
        let lib = wolff(
            &Measure::from_json_str(json.to_str().unwrap()).unwrap(),
            &PotentialParams::new(3, 0.5, 2.0, 0.5, 0.0).unwrap(),
            &Point::radial(3, 0.37),
        )
        .unwrap();
        assert_eq!(value, lib.value);

        // riesz through the same handle is the same code path
        let mut rv = 0.0f64;
        let status =
            unsafe { wsv_riesz(handle, 1.0, x.as_ptr(), 3, &mut rv, std::ptr::null_mut(), std::ptr::null_mut()) };
        assert_eq!(status, wsv_status::WSV_OK as c_int);
        assert_eq!(rv, value);

        unsafe { wsv_measure_free(handle) };
    }

    #[test]
    fn invalid_json_reports_error_with_message() {
        let json = CString::new(r#"{"n":0,"radial_segments":[],"atoms":[]}"#).unwrap();
        let mut handle: *mut wsv_measure = std::ptr::null_mut();
        let status = unsafe { wsv_measure_from_json(json.as_ptr(), &mut handle) };
        assert_eq!(status, wsv_status::WSV_ERR_INVALID_INPUT as c_int);
        let msg = wsv_last_error_message();
        assert!(!msg.is_null());
        let text = unsafe { CStr::from_ptr(msg) }.to_str().unwrap();
        assert!(text.contains("n must be"), "got {text}");
    }

    #[test]
    fn divergent_potential_crosses_as_inf_with_ok_status() {
        // Lebesgue on R^n: the Wolff tail diverges
        let json = CString::new(
            r#"{"n":3,"radial_segments":[{"c":1.0,"s":0.0,"beta":0.0,"r_lo":0.0,"r_hi":"inf","log_scale":1.0}],"atoms":[]}"#,
        )
        .unwrap();
        let mut handle: *mut wsv_measure = std::ptr::null_mut();
        unsafe { wsv_measure_from_json(json.as_ptr(), &mut handle) };
        let params = wsv_params {
            n: 3,
            alpha: 0.5,
            p: 2.0,
            q: 0.5,
            r: 0.0,
        };
        let mut finite: c_int = -1;
        assert_eq!(
            wsv_finiteness_check(handle, params, &mut finite),
            wsv_status::WSV_OK as c_int
        );
        assert_eq!(finite, 0);
        let x = [1.0f64, 0.0, 0.0];
        let mut value = 0.0f64;
        let mut div: c_int = 0;
        let status = unsafe {
            wsv_wolff(handle, params, x.as_ptr(), 3, &mut value, std::ptr::null_mut(), &mut div)
        };
        assert_eq!(status, wsv_status::WSV_OK as c_int);
        assert!(value.is_infinite());
        assert_eq!(div, 1);
        unsafe { wsv_measure_free(handle) };
    }

    #[test]
    fn radial_solve_through_the_abi() {
        let mut handle: *mut wsv_measure = std::ptr::null_mut();
        let status = wsv_measure_powerlaw(3, 1.0, 0.5, 1.5, &mut handle);
        assert_eq!(status, wsv_status::WSV_OK as c_int);
        let params = wsv_params {
            n: 3,
            alpha: 0.5,
            p: 2.0,
            q: 0.5,
            r: 0.0,
        };
        let mut sol: *mut wsv_radial_solution = std::ptr::null_mut();
        let status = unsafe { wsv_radial_solve(handle, params, 16, 1e-8, 300, &mut sol) };
        assert_eq!(status, wsv_status::WSV_OK as c_int);
        let len = unsafe { wsv_radial_solution_len(sol) };
        assert!(len > 50);
        let mut rho = 0.0;
        let mut u = 0.0;
        unsafe { wsv_radial_solution_node(sol, len / 2, &mut rho, &mut u) };
        assert!(rho > 0.0 && u > 0.0);
        assert!(unsafe { wsv_radial_solution_residual(sol) } < 1e-6);
        let mut ueval = 0.0;
        unsafe { wsv_radial_solution_eval(sol, 1e-3, &mut ueval) };
        assert!(ueval > 0.0);
        unsafe {
            wsv_radial_solution_free(sol);
            wsv_measure_free(handle);
        }
    }

    #[test]
    fn counterexample_constructor_validates_beta() {
        let mut handle: *mut wsv_measure = std::ptr::null_mut();
        let status = wsv_measure_counterexample(3, 1.0, 0.5, 1.0, &mut handle);
        assert_eq!(status, wsv_status::WSV_ERR_INVALID_INPUT as c_int);
        assert!(handle.is_null());
    }
}
