//! C ABI for `cohere`.
//!
//! States are opaque handles created by [`cohere_state_new`] or
//! [`cohere_state_from_json`] and released with [`cohere_state_free`].
//! Every fallible call returns a [`CohereStatus`]; on failure
//! [`cohere_last_error`] describes the problem for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use cohere::distillation::{
    asymptotic_fidelity, fidelity_mio_bit, fidelity_sio_bit_multicopy, multicopy_bounds, FidelityOptions,
};
use cohere::matrix::{c, ComplexMatrix};
use cohere::measures::{eta, mu_k, q_measure, rel_entropy_coherence};
use cohere::sdp::SdpError;
use cohere::{DensityMatrix, Error};

/// Result codes. `Ok` is zero.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CohereStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    DimensionCap = 3,
    Solver = 4,
    NoAdmissiblePair = 5,
    Panic = 6,
}

/// Opaque density matrix.
pub struct CohereState {
    rho: DensityMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let text = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(e: &Error) -> CohereStatus {
    match e {
        Error::DimensionCap { .. } | Error::SubsetBudget { .. } | Error::Sdp(SdpError::DimensionCap { .. }) => {
            CohereStatus::DimensionCap
        }
        Error::Sdp(_) => CohereStatus::Solver,
        Error::NoAdmissiblePair => CohereStatus::NoAdmissiblePair,
        _ => CohereStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), CohereStatus>) -> CohereStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CohereStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            CohereStatus::Panic
        }
    }
}

fn lift<T>(r: cohere::Result<T>) -> Result<T, CohereStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null() -> CohereStatus {
    set_error("null pointer argument".into());
    CohereStatus::NullPointer
}

unsafe fn state<'a>(s: *const CohereState) -> Result<&'a CohereState, CohereStatus> {
    s.as_ref().ok_or_else(null)
}

unsafe fn write_out(out: *mut f64, value: f64) -> Result<(), CohereStatus> {
    if out.is_null() {
        return Err(null());
    }
    *out = value;
    Ok(())
}

fn options(sdp_cap: usize) -> FidelityOptions {
    let mut opts = FidelityOptions::default();
    if sdp_cap > 0 {
        opts.sdp_cap = sdp_cap;
    }
    opts
}

/// Builds a state from `dim * dim` real and imaginary parts in row-major
/// order. `im` may be null for a real matrix.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `dim * dim` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_state_new(
    dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut CohereState,
) -> CohereStatus {
    guard(|| {
        if re.is_null() || out.is_null() {
            return Err(null());
        }
        let len = dim.checked_mul(dim).ok_or(CohereStatus::InvalidInput)?;
        let re = std::slice::from_raw_parts(re, len);
        let entries = if im.is_null() {
            re.iter().map(|&x| c(x, 0.0)).collect()
        } else {
            let im = std::slice::from_raw_parts(im, len);
            re.iter().zip(im).map(|(&x, &y)| c(x, y)).collect()
        };
        let rho = lift(ComplexMatrix::from_row_major(dim, dim, entries).and_then(DensityMatrix::new))?;
        *out = Box::into_raw(Box::new(CohereState { rho }));
        Ok(())
    })
}

/// Builds a state from the JSON file format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_state_from_json(json: *const c_char, out: *mut *mut CohereState) -> CohereStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error(format!("invalid UTF-8: {e}"));
            CohereStatus::InvalidInput
        })?;
        let rho = lift(cohere::io::parse_density(text))?;
        *out = Box::into_raw(Box::new(CohereState { rho }));
        Ok(())
    })
}

/// Releases a state. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cohere_state_free(s: *mut CohereState) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Dimension of the state, or 0 for null.
///
/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cohere_state_dim(s: *const CohereState) -> usize {
    s.as_ref().map_or(0, |s| s.rho.dim())
}

/// Maximal coherence.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_eta(s: *const CohereState, out: *mut f64) -> CohereStatus {
    guard(|| write_out(out, eta(&state(s)?.rho)))
}

/// Block-partition monotone `Q` in bits.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_q(s: *const CohereState, out: *mut f64) -> CohereStatus {
    guard(|| write_out(out, lift(q_measure(&state(s)?.rho))?))
}

/// Relative entropy of coherence in bits.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_rel_entropy_coherence(s: *const CohereState, out: *mut f64) -> CohereStatus {
    guard(|| write_out(out, rel_entropy_coherence(&state(s)?.rho)))
}

/// `mu_k` in bits.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_mu_k(s: *const CohereState, k: usize, out: *mut f64) -> CohereStatus {
    guard(|| write_out(out, lift(mu_k(&state(s)?.rho, k))?))
}

/// SIO fidelity of distilling one coherence bit from `copies` copies.
/// `sdp_cap` bounds the program dimension; 0 selects the default.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_fidelity_sio(
    s: *const CohereState,
    copies: usize,
    sdp_cap: usize,
    out: *mut f64,
) -> CohereStatus {
    guard(|| {
        let r = lift(fidelity_sio_bit_multicopy(&state(s)?.rho, copies, &options(sdp_cap)))?;
        write_out(out, r.value)
    })
}

/// MIO fidelity of distilling one coherence bit from one copy.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_fidelity_mio(s: *const CohereState, sdp_cap: usize, out: *mut f64) -> CohereStatus {
    guard(|| {
        let r = lift(fidelity_mio_bit(&state(s)?.rho, &options(sdp_cap)))?;
        write_out(out, r.value)
    })
}

/// Limit of the SIO fidelity as the number of copies grows.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_asymptotic_fidelity(s: *const CohereState, out: *mut f64) -> CohereStatus {
    guard(|| write_out(out, asymptotic_fidelity(&state(s)?.rho)))
}

/// Analytic lower and upper bounds on the `n`-copy SIO fidelity.
///
/// # Safety
/// `s` must be a live handle and `lower`, `upper` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_multicopy_bounds(
    s: *const CohereState,
    n: usize,
    lower: *mut f64,
    upper: *mut f64,
) -> CohereStatus {
    guard(|| {
        if upper.is_null() {
            return Err(null());
        }
        let b = lift(multicopy_bounds(&state(s)?.rho, n))?;
        write_out(lower, b.lower)?;
        *upper = b.upper;
        Ok(())
    })
}

/// Checks a channel in the JSON file format. Writes 1 to `valid` for a
/// strictly incoherent channel and 0 otherwise; the reason is then
/// available from [`cohere_last_error`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `valid` writable.
#[no_mangle]
pub unsafe extern "C" fn cohere_validate_sio_json(json: *const c_char, tol: f64, valid: *mut c_int) -> CohereStatus {
    guard(|| {
        if json.is_null() || valid.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error(format!("invalid UTF-8: {e}"));
            CohereStatus::InvalidInput
        })?;
        let kraus = lift(cohere::io::parse_kraus(text))?;
        *valid = match cohere::protocols::validate_sio(kraus, tol) {
            Ok(_) => 1,
            Err(e) => {
                set_error(e.to_string());
                0
            }
        };
        Ok(())
    })
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cohere_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cohere_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses_follow_error_kind() {
        assert_eq!(status_of(&Error::DimensionCap { dim: 9, cap: 8 }), CohereStatus::DimensionCap);
        assert_eq!(status_of(&Error::SubsetBudget { needed: 3, budget: 2 }), CohereStatus::DimensionCap);
        assert_eq!(status_of(&Error::NoAdmissiblePair), CohereStatus::NoAdmissiblePair);
        assert_eq!(status_of(&Error::NotPsd(-1.0)), CohereStatus::InvalidInput);
    }

    #[test]
    fn panics_become_status_codes() {
        assert_eq!(guard(|| panic!("boom")), CohereStatus::Panic);
        let msg = unsafe { CStr::from_ptr(cohere_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }
}
