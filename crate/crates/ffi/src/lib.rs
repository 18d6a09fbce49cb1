//! C ABI over `td_core`.
//!
//! Instances are opaque heap handles. Every function returns a [`TdStatus`];
//! on failure the message is kept per thread and read with
//! [`td_last_error_message`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use td_core::densities::{DensityInstance, SmoothConfig};
use td_core::geometry::{point_to_ray, Point, RayCoord};
use td_core::regularity::{holder_exponent_fit, Verdict};
use td_core::transport::{potential_u, sigma, sigma_at_point, sigma_eval};
use td_core::verify::duality_gap;
use td_core::{GammaConfig, TdError};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    OutOfDomain = 3,
    Singular = 4,
    NoConvergence = 5,
    QuadratureFailure = 6,
    Unbalanced = 7,
    TooLarge = 8,
    Io = 9,
    Other = 10,
    Panic = 11,
}

/// Opaque density instance.
pub struct TdInstance {
    inner: DensityInstance,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TdSigmaEval {
    pub x1: f64,
    pub x2: f64,
    pub t: f64,
    pub a: f64,
    pub sigma: f64,
    pub dsigma_dt: f64,
    pub dsigma_da: f64,
    pub dsigma_dx1: f64,
    pub dsigma_dx2: f64,
    pub u: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TdDuality {
    pub primal_cost: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TdScaling {
    pub fitted_exponent: f64,
    pub expected_exponent: f64,
    pub r2: f64,
    /// 1 when the fit agrees with the expected exponent, 0 otherwise.
    pub consistent: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &TdError) -> TdStatus {
    match e {
        TdError::InvalidParameter(_) | TdError::DomainError(_) => TdStatus::InvalidParameter,
        TdError::OutOfDomain { .. } => TdStatus::OutOfDomain,
        TdError::SingularJacobian { .. } | TdError::DegenerateDenominator(_) => TdStatus::Singular,
        TdError::NoConvergence(_) => TdStatus::NoConvergence,
        TdError::QuadratureFailure { .. } => TdStatus::QuadratureFailure,
        TdError::Unbalanced(..) => TdStatus::Unbalanced,
        TdError::TooLarge { .. } => TdStatus::TooLarge,
        TdError::Io(_) => TdStatus::Io,
        _ => TdStatus::Other,
    }
}

enum Failure {
    Null(&'static str),
    Core(TdError),
}

impl From<TdError> for Failure {
    fn from(e: TdError) -> Self {
        Failure::Core(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> TdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TdStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed as {name}"));
            TdStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            TdStatus::Panic
        }
    }
}

unsafe fn instance<'a>(p: *const TdInstance) -> Result<&'a DensityInstance, Failure> {
    p.as_ref().map(|i| &i.inner).ok_or(Failure::Null("instance"))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("output"));
    }
    out.write(v);
    Ok(())
}

fn config(gamma: f64, beta: f64, quad_tol: f64) -> Result<GammaConfig, TdError> {
    let cfg = if beta < 0.0 {
        GammaConfig::new(gamma)?
    } else {
        GammaConfig::with_beta(gamma, beta)?
    };
    if quad_tol > 0.0 {
        cfg.with_tolerances(quad_tol, cfg.root_tol)
    } else {
        Ok(cfg)
    }
}

unsafe fn emit_instance(out: *mut *mut TdInstance, inner: DensityInstance) -> Result<(), Failure> {
    write(out, Box::into_raw(Box::new(TdInstance { inner })))
}

/// Single-triangle instance. A negative `beta` selects the default amplitude;
/// a non-positive `quad_tol` keeps the default tolerance.
///
/// # Safety
/// `out` must be a valid pointer; the handle is released with [`td_instance_free`].
#[no_mangle]
pub unsafe extern "C" fn td_instance_new_single(gamma: f64, beta: f64, quad_tol: f64, out: *mut *mut TdInstance) -> TdStatus {
    guard(|| emit_instance(out, DensityInstance::single(config(gamma, beta, quad_tol)?)))
}

/// Chain of `n_max` triangles.
///
/// # Safety
/// As for [`td_instance_new_single`].
#[no_mangle]
pub unsafe extern "C" fn td_instance_new_chain(
    gamma: f64,
    beta: f64,
    quad_tol: f64,
    n_max: usize,
    out: *mut *mut TdInstance,
) -> TdStatus {
    guard(|| emit_instance(out, DensityInstance::chain(config(gamma, beta, quad_tol)?, n_max)?))
}

/// Smooth variant with cutoffs `eps < eps_prime` and `a0`.
///
/// # Safety
/// As for [`td_instance_new_single`].
#[no_mangle]
pub unsafe extern "C" fn td_instance_new_smooth(
    gamma: f64,
    beta: f64,
    quad_tol: f64,
    eps: f64,
    eps_prime: f64,
    a0: f64,
    out: *mut *mut TdInstance,
) -> TdStatus {
    guard(|| {
        let sc = SmoothConfig::new(eps, eps_prime, a0)?;
        emit_instance(out, DensityInstance::smooth(config(gamma, beta, quad_tol)?, sc)?)
    })
}

/// # Safety
/// `inst` must come from a constructor above and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn td_instance_free(inst: *mut TdInstance) {
    if !inst.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(inst))));
    }
}

/// Density amplitude actually used by the instance.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn td_instance_beta(inst: *const TdInstance, out: *mut f64) -> TdStatus {
    guard(|| write(out, instance(inst)?.cfg.beta))
}

/// `σ` at ray coordinates `(t, a)`.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn td_sigma(inst: *const TdInstance, t: f64, a: f64, out: *mut f64) -> TdStatus {
    guard(|| write(out, sigma(RayCoord::new(t, a), instance(inst)?)?))
}

/// `σ` at a Cartesian point.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn td_sigma_at_point(inst: *const TdInstance, x1: f64, x2: f64, out: *mut f64) -> TdStatus {
    guard(|| write(out, sigma_at_point(Point::new(x1, x2), instance(inst)?)?))
}

/// `σ`, its derivatives and `u` at an interior ray coordinate.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn td_sigma_eval(inst: *const TdInstance, t: f64, a: f64, out: *mut TdSigmaEval) -> TdStatus {
    guard(|| {
        let e = sigma_eval(RayCoord::new(t, a), instance(inst)?)?;
        write(
            out,
            TdSigmaEval {
                x1: e.point.x1,
                x2: e.point.x2,
                t: e.ray.t,
                a: e.ray.a,
                sigma: e.sigma,
                dsigma_dt: e.dsigma_dt,
                dsigma_da: e.dsigma_da,
                dsigma_dx1: e.dsigma_dx1,
                dsigma_dx2: e.dsigma_dx2,
                u: e.u,
            },
        )
    })
}

/// Ray coordinates of a point of the triangle.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn td_point_to_ray(
    inst: *const TdInstance,
    x1: f64,
    x2: f64,
    out_t: *mut f64,
    out_a: *mut f64,
) -> TdStatus {
    guard(|| {
        let r = point_to_ray(Point::new(x1, x2), &instance(inst)?.cfg)?;
        write(out_t, r.t)?;
        write(out_a, r.a)
    })
}

/// Kantorovich potential `u` at a point, normalised by `u(0,0) = 0`.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn td_potential_u(inst: *const TdInstance, x1: f64, x2: f64, out: *mut f64) -> TdStatus {
    guard(|| write(out, potential_u(Point::new(x1, x2), &instance(inst)?.cfg)?))
}

/// Primal cost of the ray plan against the dual value of `u`.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn td_duality_gap(inst: *const TdInstance, out: *mut TdDuality) -> TdStatus {
    guard(|| {
        let d = duality_gap(instance(inst)?)?;
        write(
            out,
            TdDuality {
                primal_cost: d.primal_cost,
                dual_value: d.dual_value,
                gap: d.gap,
                relative_gap: d.relative_gap,
            },
        )
    })
}

/// Log-log fit of `σ(0, ε)` over `n` points in `[eps_min, eps_max]`.
///
/// # Safety
/// `inst` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn td_holder_fit(
    inst: *const TdInstance,
    eps_min: f64,
    eps_max: f64,
    n: usize,
    out: *mut TdScaling,
) -> TdStatus {
    guard(|| {
        let r = holder_exponent_fit(instance(inst)?, eps_min, eps_max, n)?;
        write(
            out,
            TdScaling {
                fitted_exponent: r.fitted_exponent,
                expected_exponent: r.expected_exponent,
                r2: r.r2,
                consistent: i32::from(r.verdict == Verdict::Consistent),
            },
        )
    })
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn td_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn td_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_message_round_trip() {
        let mut h = ptr::null_mut();
        let s = unsafe { td_instance_new_single(-1.0, -1.0, 0.0, &mut h) };
        assert_eq!(s, TdStatus::InvalidParameter);
        assert!(h.is_null());
        let msg = unsafe { CStr::from_ptr(td_last_error_message()) }.to_str().unwrap();
        assert!(msg.contains("gamma"), "{msg}");
    }

    #[test]
    fn null_output_is_reported() {
        let s = unsafe { td_instance_new_single(1.0, -1.0, 0.0, ptr::null_mut()) };
        assert_eq!(s, TdStatus::NullPointer);
    }

    #[test]
    fn version_is_package_version() {
        let v = unsafe { CStr::from_ptr(td_version()) }.to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
