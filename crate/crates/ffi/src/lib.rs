//! C ABI over `dicke3`.
//!
//! Every fallible function returns a [`Dicke3Status`]; on failure the message
//! is kept per thread and read with [`dicke3_last_error_message`]. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dicke3::entanglement::{concurrence_collective, gme, negativity, pairwise_concurrence};
use dicke3::hamiltonians::Method;
use dicke3::hilbert::{DensityKind, DensityMatrix, FockSpace, ModelParams, C64};
use dicke3::sdp::SdpOptions;
use dicke3::spectrum::{solve, EigenSystem};
use dicke3::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dicke3Status {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidDensity = 3,
    SolverFailure = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

pub const DICKE3_METHOD_EXACT: i32 = 0;
pub const DICKE3_METHOD_RWA: i32 = 1;
pub const DICKE3_METHOD_ZEROTH: i32 = 2;
pub const DICKE3_METHOD_GRWA: i32 = 3;

/// Opaque eigen-system handle.
pub struct Dicke3EigenSystem(EigenSystem);

/// Opaque density-matrix handle (4×4 spin sector or 8×8 qubits).
pub struct Dicke3Density(DensityMatrix);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> Dicke3Status {
    match e {
        Error::InvalidDensity(_) | Error::NotHermitian(_) => Dicke3Status::InvalidDensity,
        Error::Solver(_) | Error::Eigensolver(_) => Dicke3Status::SolverFailure,
        _ => Dicke3Status::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (Dicke3Status, String)>) -> Dicke3Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => Dicke3Status::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            Dicke3Status::Panic
        }
    }
}

fn lift(e: Error) -> (Dicke3Status, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (Dicke3Status, String) {
    (Dicke3Status::NullPointer, format!("{what} is null"))
}

fn method_of(code: i32) -> Result<Method, (Dicke3Status, String)> {
    match code {
        DICKE3_METHOD_EXACT => Ok(Method::Exact),
        DICKE3_METHOD_RWA => Ok(Method::Rwa),
        DICKE3_METHOD_ZEROTH => Ok(Method::Zeroth),
        DICKE3_METHOD_GRWA => Ok(Method::Grwa),
        _ => Err((Dicke3Status::InvalidArgument, format!("unknown method code {code}"))),
    }
}

/// Solves one model. On success `*out` owns a new handle.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dicke3_solve(
    method: i32,
    delta: f64,
    omega: f64,
    g: f64,
    n_max: usize,
    out: *mut *mut Dicke3EigenSystem,
) -> Dicke3Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let method = method_of(method)?;
        let params = ModelParams::new(delta, omega, g).map_err(lift)?;
        let fock = FockSpace::new(n_max).map_err(lift)?;
        let es = solve(method, &params, fock).map_err(lift)?;
        *out = Box::into_raw(Box::new(Dicke3EigenSystem(es)));
        Ok(())
    })
}

/// Number of eigenvalues, or 0 for a null handle.
///
/// # Safety
/// `es` must be null or a live handle from [`dicke3_solve`].
#[no_mangle]
pub unsafe extern "C" fn dicke3_eigensystem_len(es: *const Dicke3EigenSystem) -> usize {
    es.as_ref().map_or(0, |e| e.0.len())
}

/// Copies the ascending energies into `buf`, which must hold at least
/// [`dicke3_eigensystem_len`] values.
///
/// # Safety
/// `es` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dicke3_eigensystem_energies(
    es: *const Dicke3EigenSystem,
    buf: *mut f64,
    len: usize,
) -> Dicke3Status {
    guard(|| {
        let es = es.as_ref().ok_or_else(|| null("eigensystem"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let e = es.0.energies();
        if len < e.len() {
            return Err((Dicke3Status::BufferTooSmall, format!("need {} values, got {len}", e.len())));
        }
        std::slice::from_raw_parts_mut(buf, e.len()).copy_from_slice(e);
        Ok(())
    })
}

/// # Safety
/// `es` must be null or a handle from [`dicke3_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dicke3_eigensystem_free(es: *mut Dicke3EigenSystem) {
    if !es.is_null() {
        drop(Box::from_raw(es));
    }
}

/// Builds a density matrix from `dim * dim` row-major complex entries given
/// as interleaved `re, im` doubles (`2 * dim * dim` values). `dim` is 4 or 8.
///
/// # Safety
/// `entries` must point to `2 * dim * dim` readable doubles and `out` to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn dicke3_density_new(
    dim: usize,
    entries: *const f64,
    out: *mut *mut Dicke3Density,
) -> Dicke3Status {
    guard(|| {
        if entries.is_null() {
            return Err(null("entries"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match dim {
            4 => DensityKind::Spin,
            8 => DensityKind::Qubits,
            _ => return Err((Dicke3Status::InvalidArgument, format!("dim must be 4 or 8, got {dim}"))),
        };
        let raw = std::slice::from_raw_parts(entries, 2 * dim * dim);
        let vals: Vec<C64> = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        let rho = DensityMatrix::from_row_major(kind, &vals).map_err(lift)?;
        *out = Box::into_raw(Box::new(Dicke3Density(rho)));
        Ok(())
    })
}

/// # Safety
/// `rho` must be null or a handle from [`dicke3_density_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dicke3_density_free(rho: *mut Dicke3Density) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

unsafe fn with_density(
    rho: *const Dicke3Density,
    out: *mut f64,
    f: impl FnOnce(&DensityMatrix) -> dicke3::Result<f64>,
) -> Dicke3Status {
    guard(|| {
        let rho = rho.as_ref().ok_or_else(|| null("density"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = f(&rho.0).map_err(lift)?;
        Ok(())
    })
}

/// GME estimate `E(ρ)` of an 8×8 state; `tol <= 0` selects the default.
///
/// # Safety
/// `rho` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn dicke3_gme(rho: *const Dicke3Density, tol: f64, out: *mut f64) -> Dicke3Status {
    let mut opts = SdpOptions::default();
    if tol > 0.0 {
        opts.tol = tol;
    }
    with_density(rho, out, |r| gme(r, opts).map(|w| w.value))
}

/// Collective concurrence for a 4×4 state, or the A–B Wootters concurrence
/// for an 8×8 state.
///
/// # Safety
/// `rho` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn dicke3_concurrence(rho: *const Dicke3Density, out: *mut f64) -> Dicke3Status {
    with_density(rho, out, |r| match r.kind() {
        DensityKind::Spin => concurrence_collective(r),
        DensityKind::Qubits => pairwise_concurrence(r, 0, 1),
    })
}

/// Negativity of an 8×8 state for the transposed qubits in `mask`
/// (A = 4, B = 2, C = 1).
///
/// # Safety
/// `rho` must be a live handle and `out` a writable double.
#[no_mangle]
pub unsafe extern "C" fn dicke3_negativity(rho: *const Dicke3Density, mask: u8, out: *mut f64) -> Dicke3Status {
    with_density(rho, out, |r| negativity(r, mask))
}

/// Copies the last error of this thread, NUL-terminated and truncated to
/// `len` bytes. Returns the full message length plus one.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dicke3_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dicke3_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}
