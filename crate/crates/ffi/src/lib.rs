//! C interface to the weaklimit solver.
//!
//! Objects cross the boundary as opaque handles created by `wl_*_new` style
//! constructors and released with the matching `wl_*_free`. Every fallible
//! call returns a [`WlStatus`]; on failure the message is kept per thread and
//! can be fetched with [`wl_last_error`]. Matrices are row-major with separate
//! real and imaginary arrays, and a null imaginary pointer means all zeros.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64 as C64;
use weaklimit::amplimit::{amplification_limit, build_xi_g, build_xi_tilde, AmplificationResult};
use weaklimit::error::Error;
use weaklimit::linalg::{CMatrix, CVector};
use weaklimit::operators::{default_grouping_tol, distinct_count, eigendecompose, HermitianOperator};
use weaklimit::pointer::{
    make_family_state, momentum_operator, position_operator, BasisLabel, DetectorFamily, DetectorFamilySpec, Grid1D,
    PureDetectorState,
};
use weaklimit::weakmeas::MeasurementSetup;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NotHermitian = 3,
    DimensionMismatch = 4,
    GridTooNarrow = 5,
    /// Vanishing probability or overlap, or no valid selection.
    Numerical = 6,
    /// Singular or inconsistent linear algebra.
    Singular = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WlFamily {
    Gaussian = 0,
    Lorentzian = 1,
    Exponential = 2,
}

/// Hermitian operator on a finite space.
pub struct WlOperator {
    inner: HermitianOperator,
}

/// Normalized pure detector state.
pub struct WlState {
    inner: PureDetectorState,
}

/// Outcome of a limit computation.
pub struct WlResult {
    inner: AmplificationResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> WlStatus {
    match e {
        Error::NotHermitian { .. } => WlStatus::NotHermitian,
        Error::DimensionMismatch { .. } => WlStatus::DimensionMismatch,
        Error::GridTooNarrow { .. } => WlStatus::GridTooNarrow,
        Error::VanishingProbability { .. }
        | Error::VanishingOverlap { .. }
        | Error::DegenerateDetector { .. }
        | Error::NoValidSelections { .. } => WlStatus::Numerical,
        Error::Singular(_) | Error::Inconsistent(_) => WlStatus::Singular,
        Error::InvalidInput(_) | Error::Io(_) | Error::Json(_) => WlStatus::InvalidInput,
    }
}

enum Failure {
    Status(WlStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn null() -> Failure {
    Failure::Status(WlStatus::NullPointer, "null pointer argument".into())
}

/// Runs `f`, records any error and converts panics into [`WlStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WlStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("panic inside weaklimit".into());
            WlStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn complex_entries(re: *const f64, im: *const f64, len: usize) -> Result<Vec<C64>, Failure> {
    let re = slice(re, len)?;
    if im.is_null() {
        return Ok(re.iter().map(|&r| C64::new(r, 0.0)).collect());
    }
    let im = slice(im, len)?;
    Ok(re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect())
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(null)
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn positive_dim(dim: usize) -> Result<(), Failure> {
    if dim == 0 {
        return Err(Failure::Core(Error::InvalidInput("dimension must be positive".into())));
    }
    Ok(())
}

/// Copies `values` into `buf` when it is large enough; `len` receives the
/// required length either way.
unsafe fn copy_out(
    values: impl ExactSizeIterator<Item = f64>,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> Result<(), Failure> {
    let n = values.len();
    if !len.is_null() {
        *len = n;
    }
    if buf.is_null() {
        return Ok(());
    }
    if cap < n {
        return Err(Failure::Status(WlStatus::BufferTooSmall, format!("buffer holds {cap} values, need {n}")));
    }
    for (i, v) in values.enumerate() {
        *buf.add(i) = v;
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Operator from a row-major `dim × dim` matrix.
///
/// # Safety
/// `re` must hold `dim * dim` values, and so must `im` unless it is null.
#[no_mangle]
pub unsafe extern "C" fn wl_operator_new(
    dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut WlOperator,
) -> WlStatus {
    guard(|| {
        positive_dim(dim)?;
        let len =
            dim.checked_mul(dim).ok_or_else(|| Failure::Core(Error::InvalidInput("dimension overflow".into())))?;
        let entries = complex_entries(re, im, len)?;
        let inner = HermitianOperator::from_dense(CMatrix::from_row_slice(dim, dim, &entries))?;
        emit(out, WlOperator { inner })
    })
}

/// Diagonal operator with the given real eigenvalues.
///
/// # Safety
/// `values` must hold `dim` entries.
#[no_mangle]
pub unsafe extern "C" fn wl_operator_diagonal(dim: usize, values: *const f64, out: *mut *mut WlOperator) -> WlStatus {
    guard(|| {
        positive_dim(dim)?;
        let inner = HermitianOperator::from_real_diagonal(slice(values, dim)?)?;
        emit(out, WlOperator { inner })
    })
}

/// Position operator on a grid of `n_points` over `[-half_width, half_width)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_operator_position(n_points: usize, half_width: f64, out: *mut *mut WlOperator) -> WlStatus {
    guard(|| {
        let grid = Grid1D::new(n_points, half_width)?;
        emit(out, WlOperator { inner: position_operator(&grid) })
    })
}

/// Momentum operator on the same grid convention as [`wl_operator_position`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_operator_momentum(n_points: usize, half_width: f64, out: *mut *mut WlOperator) -> WlStatus {
    guard(|| {
        let grid = Grid1D::new(n_points, half_width)?;
        emit(out, WlOperator { inner: momentum_operator(&grid) })
    })
}

/// # Safety
/// `op` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wl_operator_dim(op: *const WlOperator) -> usize {
    op.as_ref().map_or(0, |o| o.inner.dim())
}

/// # Safety
/// `op` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn wl_operator_free(op: *mut WlOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// State from `dim` amplitudes; with `normalize` zero the input must already
/// have unit norm.
///
/// # Safety
/// `re` must hold `dim` values, and so must `im` unless it is null.
#[no_mangle]
pub unsafe extern "C" fn wl_state_new(
    dim: usize,
    re: *const f64,
    im: *const f64,
    normalize: bool,
    out: *mut *mut WlState,
) -> WlStatus {
    guard(|| {
        positive_dim(dim)?;
        let v = CVector::from_vec(complex_entries(re, im, dim)?);
        let inner = if normalize {
            PureDetectorState::normalized(v, BasisLabel::Abstract)?
        } else {
            PureDetectorState::new(v, BasisLabel::Abstract)?
        };
        emit(out, WlState { inner })
    })
}

/// Sampled detector profile of the given family and width.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wl_state_family(
    family: WlFamily,
    width: f64,
    n_points: usize,
    half_width: f64,
    out: *mut *mut WlState,
) -> WlStatus {
    guard(|| {
        let family = match family {
            WlFamily::Gaussian => DetectorFamily::Gaussian,
            WlFamily::Lorentzian => DetectorFamily::Lorentzian,
            WlFamily::Exponential => DetectorFamily::Exponential,
        };
        let spec = DetectorFamilySpec::new(family, width)?;
        let inner = make_family_state(&spec, &Grid1D::new(n_points, half_width)?)?;
        emit(out, WlState { inner })
    })
}

/// # Safety
/// `state` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wl_state_dim(state: *const WlState) -> usize {
    state.as_ref().map_or(0, |s| s.inner.dim())
}

/// # Safety
/// `state` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn wl_state_free(state: *mut WlState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Weak-coupling limit: the span generated by `Υ, ΩΥ, ..., Ω^(r-1)Υ` where
/// `r` is the number of distinct eigenvalues of `system`.
///
/// # Safety
/// All handles must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wl_limit_small_g(
    system: *const WlOperator,
    omega: *const WlOperator,
    pointer: *const WlOperator,
    state: *const WlState,
    rank_tol: f64,
    out: *mut *mut WlResult,
) -> WlStatus {
    guard(|| {
        let a = &handle(system)?.inner;
        let (omega, m, up) = (&handle(omega)?.inner, &handle(pointer)?.inner, &handle(state)?.inner);
        let r_a = distinct_count(&eigendecompose(a, default_grouping_tol(a))?);
        let inner = amplification_limit(&build_xi_tilde(omega, up, r_a, rank_tol)?, m, up)?;
        emit(out, WlResult { inner })
    })
}

/// Limit at coupling `g` from the kicked detector states.
///
/// # Safety
/// All handles must come from this library and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wl_limit_finite_g(
    system: *const WlOperator,
    omega: *const WlOperator,
    pointer: *const WlOperator,
    state: *const WlState,
    g: f64,
    rank_tol: f64,
    out: *mut *mut WlResult,
) -> WlStatus {
    guard(|| {
        let a = handle(system)?.inner.clone();
        let (omega, m, up) = (&handle(omega)?.inner, &handle(pointer)?.inner, &handle(state)?.inner);
        let setup = MeasurementSetup::new(g, a, omega.clone())?;
        let inner = amplification_limit(&build_xi_g(&setup, up, rank_tol)?, m, up)?;
        emit(out, WlResult { inner })
    })
}

/// `|⟨ΔM⟩|max`, or NaN for a null handle.
///
/// # Safety
/// `res` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wl_result_limit(res: *const WlResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.limit)
}

/// Signed extremum attaining the limit, or NaN for a null handle.
///
/// # Safety
/// `res` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wl_result_extremum(res: *const WlResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.extremum)
}

/// # Safety
/// `res` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wl_result_rank(res: *const WlResult) -> usize {
    res.as_ref().map_or(0, |r| r.inner.rank)
}

/// # Safety
/// `res` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn wl_result_whiten_condition(res: *const WlResult) -> f64 {
    res.as_ref().map_or(f64::NAN, |r| r.inner.whiten_condition)
}

/// All extremal shifts in ascending order. With a null `buf` only `len` is
/// written.
///
/// # Safety
/// `buf` must be null or hold `cap` values; `len` may be null.
#[no_mangle]
pub unsafe extern "C" fn wl_result_extrema(
    res: *const WlResult,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> WlStatus {
    guard(|| {
        let r = handle(res)?;
        copy_out(r.inner.extrema.iter().copied(), buf, cap, len)
    })
}

/// Extremal coefficients in the generating columns, split into real and
/// imaginary parts. With null buffers only `len` is written.
///
/// # Safety
/// `re` and `im` must both be null or both hold `cap` values; `len` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn wl_result_mu(
    res: *const WlResult,
    re: *mut f64,
    im: *mut f64,
    cap: usize,
    len: *mut usize,
) -> WlStatus {
    guard(|| {
        let r = handle(res)?;
        if re.is_null() != im.is_null() {
            return Err(null());
        }
        copy_out(r.inner.mu.iter().map(|c| c.re), re, cap, len)?;
        copy_out(r.inner.mu.iter().map(|c| c.im), im, cap, len)
    })
}

/// # Safety
/// `res` must be null or a handle from this library not freed before.
#[no_mangle]
pub unsafe extern "C" fn wl_result_free(res: *mut WlResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
