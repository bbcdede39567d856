//! C ABI for `pdcone`.
//!
//! Matrices cross the boundary as row-major `double` arrays of real and
//! imaginary parts. Objects are opaque handles created by `*_new` functions
//! and released with the matching `*_free`. Every fallible function returns a
//! [`PdStatus`]; on failure [`pd_last_error_message`] describes the error.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pdcone::convexity::{lts_check, lts_closure, ExponentialSet, HermSubspace};
use pdcone::geometry::{exp_a, geodesic_distance, log_a, GeodesicSegment};
use pdcone::matcore::CMat;
use pdcone::projection::{project_to_k, ProjectOptions};
use pdcone::{Error, HermMatrix, PParams, PosDefMatrix};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotHermitian = 3,
    NotPositiveDefinite = 4,
    Domain = 5,
    DimensionMismatch = 6,
    UnsupportedExponent = 7,
    NotLieTripleSystem = 8,
    NoConvergence = 9,
    Internal = 10,
}

/// Hermitian matrix handle.
pub struct PdHerm(HermMatrix);

/// Positive-definite matrix handle.
pub struct PdPosDef(PosDefMatrix);

/// Real subspace of Hermitian matrices with an orthonormal basis.
pub struct PdSubspace(HermSubspace);

/// Summary of a projection onto `exp(H)`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct PdProjection {
    pub distance: f64,
    pub first_order_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PdStatus {
    match e {
        Error::NotHermitian { .. } => PdStatus::NotHermitian,
        Error::NotPositiveDefinite { .. } => PdStatus::NotPositiveDefinite,
        Error::Domain { .. } | Error::SingularCongruence { .. } | Error::NonFinite => PdStatus::Domain,
        Error::NotSquare { .. } | Error::DimensionMismatch { .. } => PdStatus::DimensionMismatch,
        Error::UnsupportedExponent { .. } => PdStatus::UnsupportedExponent,
        Error::NotLieTripleSystem => PdStatus::NotLieTripleSystem,
        Error::NoConvergence { .. } | Error::EigenNoConvergence { .. } => PdStatus::NoConvergence,
        _ => PdStatus::InvalidArgument,
    }
}

struct Fail(PdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PdStatus::NullPointer, format!("null pointer: {what}"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            PdStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn exponent(p: f64) -> Result<PParams, Fail> {
    Ok(PParams::new(p)?)
}

/// Read an `n x n` row-major matrix; `im` may be null for a real matrix.
unsafe fn read_matrix(n: usize, re: *const f64, im: *const f64) -> Result<CMat, Fail> {
    if re.is_null() {
        return Err(null("re"));
    }
    if n == 0 {
        return Err(Fail(PdStatus::InvalidArgument, "dimension must be positive".into()));
    }
    let len = n.checked_mul(n).ok_or_else(|| Fail(PdStatus::InvalidArgument, "dimension overflow".into()))?;
    let r = std::slice::from_raw_parts(re, len);
    let i = if im.is_null() { None } else { Some(std::slice::from_raw_parts(im, len)) };
    Ok(CMat::from_fn(n, n, |a, b| {
        num_complex::Complex64::new(r[a * n + b], i.map_or(0.0, |i| i[a * n + b]))
    }))
}

unsafe fn write_matrix(m: &CMat, re: *mut f64, im: *mut f64) -> Result<(), Fail> {
    if re.is_null() {
        return Err(null("re"));
    }
    let n = m.nrows();
    let r = std::slice::from_raw_parts_mut(re, n * n);
    for a in 0..n {
        for b in 0..n {
            r[a * n + b] = m[(a, b)].re;
        }
    }
    if !im.is_null() {
        let i = std::slice::from_raw_parts_mut(im, n * n);
        for a in 0..n {
            for b in 0..n {
                i[a * n + b] = m[(a, b)].im;
            }
        }
    }
    Ok(())
}

/// Tolerance on `|x - x*|` (relative to `max(1, max|x_ij|)`) accepted by the
/// matrix constructors before symmetrizing.
pub const PD_HERMITIAN_TOL: f64 = 1e-9;

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `re` (and `im` unless null) must point to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_herm_new(n: usize, re: *const f64, im: *const f64, out: *mut *mut PdHerm) -> PdStatus {
    guard(|| put(out, PdHerm(HermMatrix::new_checked(read_matrix(n, re, im)?, PD_HERMITIAN_TOL)?)))
}

/// # Safety
/// `h` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_herm_free(h: *mut PdHerm) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_herm_dim(h: *const PdHerm) -> usize {
    h.as_ref().map_or(0, |h| h.0.dim())
}

/// # Safety
/// `re` (and `im` unless null) must have room for `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pd_herm_entries(h: *const PdHerm, re: *mut f64, im: *mut f64) -> PdStatus {
    guard(|| write_matrix(deref(h, "h")?.0.as_matrix(), re, im))
}

/// # Safety
/// As [`pd_herm_new`].
#[no_mangle]
pub unsafe extern "C" fn pd_posdef_new(n: usize, re: *const f64, im: *const f64, out: *mut *mut PdPosDef) -> PdStatus {
    guard(|| {
        let h = HermMatrix::new_checked(read_matrix(n, re, im)?, PD_HERMITIAN_TOL)?;
        put(out, PdPosDef(PosDefMatrix::new(h)?))
    })
}

/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_posdef_free(a: *mut PdPosDef) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// # Safety
/// `a` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_posdef_dim(a: *const PdPosDef) -> usize {
    a.as_ref().map_or(0, |a| a.0.dim())
}

/// # Safety
/// As [`pd_herm_entries`].
#[no_mangle]
pub unsafe extern "C" fn pd_posdef_entries(a: *const PdPosDef, re: *mut f64, im: *mut f64) -> PdStatus {
    guard(|| write_matrix(deref(a, "a")?.0.as_matrix(), re, im))
}

/// Geodesic distance `d_p(a, b)`; pass `INFINITY` for `p = inf`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_distance(a: *const PdPosDef, b: *const PdPosDef, p: f64, out: *mut f64) -> PdStatus {
    guard(|| {
        let d = geodesic_distance(&deref(a, "a")?.0, &deref(b, "b")?.0, exponent(p)?)?;
        *out.as_mut().ok_or_else(|| null("out"))? = d;
        Ok(())
    })
}

/// `gamma_{a,b}(t)`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_geodesic_point(a: *const PdPosDef, b: *const PdPosDef, t: f64, out: *mut *mut PdPosDef) -> PdStatus {
    guard(|| {
        let seg = GeodesicSegment::new(&deref(a, "a")?.0, &deref(b, "b")?.0)?;
        put(out, PdPosDef(seg.point(t)?))
    })
}

/// `Exp^a(x)`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_exp_a(a: *const PdPosDef, x: *const PdHerm, out: *mut *mut PdPosDef) -> PdStatus {
    guard(|| put(out, PdPosDef(exp_a(&deref(a, "a")?.0, &deref(x, "x")?.0)?)))
}

/// `log_a(b)`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_log_a(a: *const PdPosDef, b: *const PdPosDef, out: *mut *mut PdHerm) -> PdStatus {
    guard(|| put(out, PdHerm(log_a(&deref(a, "a")?.0, &deref(b, "b")?.0)?)))
}

unsafe fn read_generators(count: usize, gens: *const *const PdHerm) -> Result<Vec<HermMatrix>, Fail> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if gens.is_null() {
        return Err(null("gens"));
    }
    std::slice::from_raw_parts(gens, count)
        .iter()
        .map(|&g| Ok(deref(g, "generator")?.0.clone()))
        .collect()
}

/// Orthonormalized span of `count` generators in the `n x n` Hermitian matrices.
///
/// # Safety
/// `gens` must point to `count` live handles.
#[no_mangle]
pub unsafe extern "C" fn pd_subspace_new(n: usize, count: usize, gens: *const *const PdHerm, out: *mut *mut PdSubspace) -> PdStatus {
    guard(|| put(out, PdSubspace(HermSubspace::from_spanning(n, &read_generators(count, gens)?)?)))
}

/// Smallest Lie triple system containing the generators.
///
/// # Safety
/// `gens` must point to `count > 0` live handles.
#[no_mangle]
pub unsafe extern "C" fn pd_lts_closure(count: usize, gens: *const *const PdHerm, out: *mut *mut PdSubspace) -> PdStatus {
    guard(|| put(out, PdSubspace(lts_closure(&read_generators(count, gens)?)?)))
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_subspace_free(h: *mut PdSubspace) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Dimension of the subspace, or 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pd_subspace_dim(h: *const PdSubspace) -> usize {
    h.as_ref().map_or(0, |h| h.0.dim())
}

/// Copy basis element `index` into a new handle.
///
/// # Safety
/// `h` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_subspace_basis(h: *const PdSubspace, index: usize, out: *mut *mut PdHerm) -> PdStatus {
    guard(|| {
        let h = &deref(h, "h")?.0;
        let b = h
            .basis()
            .get(index)
            .ok_or_else(|| Fail(PdStatus::InvalidArgument, format!("basis index {index} out of range")))?;
        put(out, PdHerm(b.clone()))
    })
}

/// Whether the subspace is closed under `[x, [y, z]]`, with the worst residual.
///
/// # Safety
/// `h` must be live; `is_lts` and `residual` must be writable (or null).
#[no_mangle]
pub unsafe extern "C" fn pd_subspace_is_lts(h: *const PdSubspace, is_lts: *mut bool, residual: *mut f64) -> PdStatus {
    guard(|| {
        let c = lts_check(&deref(h, "h")?.0);
        if let Some(o) = is_lts.as_mut() {
            *o = c.is_lts;
        }
        if let Some(o) = residual.as_mut() {
            *o = c.max_residual;
        }
        Ok(())
    })
}

/// Nearest point of `exp(H)` to `b` in `d_p` for `1 < p < inf`.
/// `max_iter = 0` and `tol <= 0` select the defaults. Unconverged runs
/// return `NoConvergence` but still fill `argmin` and `info`.
///
/// # Safety
/// Handles must be live; `argmin` and `info` must be writable (`info` may be null).
#[no_mangle]
pub unsafe extern "C" fn pd_project(
    b: *const PdPosDef,
    h: *const PdSubspace,
    p: f64,
    tol: f64,
    max_iter: usize,
    argmin: *mut *mut PdPosDef,
    info: *mut PdProjection,
) -> PdStatus {
    guard(|| {
        let k = ExponentialSet::verified(deref(h, "h")?.0.clone())?;
        let d = ProjectOptions::default();
        let opts = ProjectOptions {
            tol: if tol > 0.0 { tol } else { d.tol },
            max_iter: if max_iter > 0 { max_iter } else { d.max_iter },
            seed: None,
        };
        let r = project_to_k(&deref(b, "b")?.0, &k, exponent(p)?, opts)?;
        if let Some(o) = info.as_mut() {
            *o = PdProjection {
                distance: r.distance,
                first_order_residual: r.first_order_residual,
                iterations: r.iterations,
                converged: r.converged,
            };
        }
        let converged = r.converged;
        let residual = r.first_order_residual;
        put(argmin, PdPosDef(r.argmin))?;
        if converged {
            Ok(())
        } else {
            Err(Fail(PdStatus::NoConvergence, format!("projection did not converge (residual {residual:e})")))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    unsafe fn posdef_diag(d: &[f64]) -> *mut PdPosDef {
        let n = d.len();
        let mut re = vec![0.0; n * n];
        for i in 0..n {
            re[i * n + i] = d[i];
        }
        let mut out = ptr::null_mut();
        assert_eq!(pd_posdef_new(n, re.as_ptr(), ptr::null(), &mut out), PdStatus::Ok);
        out
    }

    #[test]
    fn distance_round_trip() {
        unsafe {
            let e = std::f64::consts::E;
            let a = posdef_diag(&[1.0, 1.0]);
            let b = posdef_diag(&[e, e]);
            let mut d = 0.0;
            assert_eq!(pd_distance(a, b, 3.0, &mut d), PdStatus::Ok);
            assert!((d - 1.0).abs() < 1e-14);
            assert_eq!(pd_distance(a, b, f64::INFINITY, &mut d), PdStatus::Ok);
            assert!((d - 1.0).abs() < 1e-14);
            let mut mid = ptr::null_mut();
            assert_eq!(pd_geodesic_point(a, b, 0.5, &mut mid), PdStatus::Ok);
            let mut re = [0.0; 4];
            assert_eq!(pd_posdef_entries(mid, re.as_mut_ptr(), ptr::null_mut()), PdStatus::Ok);
            assert!((re[0] - e.sqrt()).abs() < 1e-14);
            let mut x = ptr::null_mut();
            assert_eq!(pd_log_a(a, b, &mut x), PdStatus::Ok);
            let mut back = ptr::null_mut();
            assert_eq!(pd_exp_a(a, x, &mut back), PdStatus::Ok);
            let mut d2 = 1.0;
            assert_eq!(pd_distance(back, b, 2.0, &mut d2), PdStatus::Ok);
            assert!(d2 < 1e-12);
            pd_herm_free(x);
            for h in [a, b, mid, back] {
                pd_posdef_free(h);
            }
        }
    }

    #[test]
    fn errors_set_status_and_message() {
        unsafe {
            let re = [1.0, 0.0, 0.0, -1.0];
            let mut out = ptr::null_mut();
            assert_eq!(pd_posdef_new(2, re.as_ptr(), ptr::null(), &mut out), PdStatus::NotPositiveDefinite);
            assert!(out.is_null());
            let msg = CStr::from_ptr(pd_last_error_message()).to_string_lossy();
            assert!(msg.contains("positive definite"), "{msg}");
            assert_eq!(pd_posdef_new(2, ptr::null(), ptr::null(), &mut out), PdStatus::NullPointer);
            let asym = [1.0, 2.0, 0.0, 1.0];
            let mut h = ptr::null_mut();
            assert_eq!(pd_herm_new(2, asym.as_ptr(), ptr::null(), &mut h), PdStatus::NotHermitian);
            let a = posdef_diag(&[1.0, 2.0]);
            let mut d = 0.0;
            assert_eq!(pd_distance(a, ptr::null(), 2.0, &mut d), PdStatus::NullPointer);
            assert_eq!(pd_distance(a, a, 0.5, &mut d), PdStatus::InvalidArgument);
            pd_posdef_free(a);
        }
    }

    #[test]
    fn closure_and_projection() {
        unsafe {
            let sz = [1.0, 0.0, 0.0, -1.0];
            let mut g = ptr::null_mut();
            assert_eq!(pd_herm_new(2, sz.as_ptr(), ptr::null(), &mut g), PdStatus::Ok);
            let gens = [g as *const PdHerm];
            let mut h = ptr::null_mut();
            assert_eq!(pd_lts_closure(1, gens.as_ptr(), &mut h), PdStatus::Ok);
            assert_eq!(pd_subspace_dim(h), 1);
            let mut ok = false;
            assert_eq!(pd_subspace_is_lts(h, &mut ok, ptr::null_mut()), PdStatus::Ok);
            assert!(ok);
            let id = [1.0, 0.0, 0.0, 1.0];
            let mut diag = ptr::null_mut();
            assert_eq!(pd_herm_new(2, id.as_ptr(), ptr::null(), &mut diag), PdStatus::Ok);
            let both = [g as *const PdHerm, diag as *const PdHerm];
            let mut k = ptr::null_mut();
            assert_eq!(pd_subspace_new(2, 2, both.as_ptr(), &mut k), PdStatus::Ok);
            let re = [2.0, 0.5, 0.5, 1.0];
            let mut b = ptr::null_mut();
            assert_eq!(pd_posdef_new(2, re.as_ptr(), ptr::null(), &mut b), PdStatus::Ok);
            let mut argmin = ptr::null_mut();
            let mut info = PdProjection::default();
            assert_eq!(pd_project(b, k, 3.0, 0.0, 0, &mut argmin, &mut info), PdStatus::Ok);
            assert!(info.converged && info.first_order_residual <= 1e-7 && info.distance > 0.0);
            let mut e = [0.0; 4];
            pd_posdef_entries(argmin, e.as_mut_ptr(), ptr::null_mut());
            assert!(e[1].abs() < 1e-12 && e[2].abs() < 1e-12);
            pd_posdef_free(argmin);
            pd_posdef_free(b);
            pd_subspace_free(k);
            pd_subspace_free(h);
            pd_herm_free(g);
            pd_herm_free(diag);
        }
    }
}
