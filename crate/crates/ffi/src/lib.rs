//! C interface to `moment-split`.
//!
//! Moment sequences and decomposition results live behind opaque handles
//! created and released by this library. Every fallible call returns an
//! [`MsStatus`]; on failure a description of the last error on the calling
//! thread is available from [`ms_last_error`]. Arrays are copied into
//! caller-owned buffers; the required length is always reported, so a call
//! with a null buffer queries the size.
//!
//! Panics never cross the boundary: they are caught and reported as
//! [`MsStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use moment_split::atoms::{candidate_atoms, ExtractOptions, DEFAULT_RANK_P};
use moment_split::decomposition::{solve_decomposition, DecompositionProblem, DecompositionSolution, SolveOptions};
use moment_split::io::{from_json_str, to_json_string};
use moment_split::measures::{exact_moments, parse_measure};
use moment_split::moments::MomentSequence;
use moment_split::Error;

/// Result codes. `Ok` is zero; the grouping of errors follows the exit codes
/// of the command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    /// The interior-point solver did not converge.
    SolverFailure = 1,
    /// Malformed input: arguments, measure specs, moment files.
    InvalidInput = 2,
    /// Moments of too low a degree, or of the wrong dimension.
    DegreeMismatch = 3,
    /// A required pointer argument was null.
    NullPointer = 4,
    /// The output buffer is shorter than the data; the required length was
    /// still written.
    BufferTooSmall = 5,
    /// No finitely atomic structure was found.
    ExtractionFailed = 6,
    /// A panic inside the library.
    Internal = 7,
}

/// A truncated moment sequence.
pub struct MsMoments {
    inner: MomentSequence,
}

/// The result of a decomposition.
pub struct MsSolution {
    inner: DecompositionSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MsStatus {
    match e {
        Error::SolverFailure { .. } => MsStatus::SolverFailure,
        Error::DegreeTooLow { .. } | Error::DimensionMismatch { .. } => MsStatus::DegreeMismatch,
        Error::ExtractionFailed(_) => MsStatus::ExtractionFailed,
        _ => MsStatus::InvalidInput,
    }
}

/// Runs `f`, recording errors and panics for [`ms_last_error`].
fn guard(f: impl FnOnce() -> Result<(), (MsStatus, String)>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal error: {message}"));
            MsStatus::Internal
        }
    }
}

fn lib<T>(r: moment_split::Result<T>) -> Result<T, (MsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (MsStatus, String) {
    (MsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (MsStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (MsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, buf_len: usize, len_out: *mut usize) -> Result<(), (MsStatus, String)> {
    if !len_out.is_null() {
        *len_out = src.len();
    }
    if buf.is_null() {
        return Ok(());
    }
    if buf_len < src.len() {
        return Err((MsStatus::BufferTooSmall, format!("buffer holds {buf_len} values, {} needed", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn ms_status_name(status: MsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        MsStatus::Ok => c"ok",
        MsStatus::SolverFailure => c"solver-failure",
        MsStatus::InvalidInput => c"invalid-input",
        MsStatus::DegreeMismatch => c"degree-mismatch",
        MsStatus::NullPointer => c"null-pointer",
        MsStatus::BufferTooSmall => c"buffer-too-small",
        MsStatus::ExtractionFailed => c"extraction-failed",
        MsStatus::Internal => c"internal",
    };
    s.as_ptr()
}

/// Exact moments up to `degree` of the measure described by `spec`
/// (e.g. `"uniform:0:1"`, `"mix:0.5=dirac:0.4,0.5=dirac:0.5"`).
///
/// # Safety
/// `spec` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_moments_from_spec(spec: *const c_char, degree: usize, out: *mut *mut MsMoments) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(spec, "spec")?;
        let measure = lib(parse_measure(text))?;
        let z = lib(exact_moments(&measure, degree))?.with_label(text);
        put(out, MsMoments { inner: z });
        Ok(())
    })
}

/// Moments of dimension `dim` up to `degree` from values in graded
/// lexicographic order of the exponents.
///
/// # Safety
/// `values` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ms_moments_from_values(
    dim: usize,
    degree: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut MsMoments,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if values.is_null() && len > 0 {
            return Err(null("values"));
        }
        let data = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(values, len).to_vec() };
        let z = lib(MomentSequence::new(dim, degree, data, ""))?;
        put(out, MsMoments { inner: z });
        Ok(())
    })
}

/// Parses a moment file held in memory.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_moments_from_json(json: *const c_char, out: *mut *mut MsMoments) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let z = lib(from_json_str(str_arg(json, "json")?))?;
        put(out, MsMoments { inner: z });
        Ok(())
    })
}

/// The canonical moment-file text of `moments`; release it with
/// [`ms_string_free`].
///
/// # Safety
/// `moments` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_moments_to_json(moments: *const MsMoments, out: *mut *mut c_char) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let z = deref(moments, "moments")?;
        let text = CString::new(to_json_string(&z.inner)).map_err(|e| (MsStatus::Internal, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `moments` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_moments_dim(moments: *const MsMoments) -> usize {
    moments.as_ref().map_or(0, |z| z.inner.dim())
}

/// # Safety
/// `moments` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_moments_degree(moments: *const MsMoments) -> usize {
    moments.as_ref().map_or(0, |z| z.inner.max_degree())
}

/// Copies the values (graded lexicographic order) into `buf`.
///
/// # Safety
/// `moments` must be a live handle; `buf` null or writable for `buf_len`
/// doubles; `len_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ms_moments_values(
    moments: *const MsMoments,
    buf: *mut f64,
    buf_len: usize,
    len_out: *mut usize,
) -> MsStatus {
    guard(|| copy_out(deref(moments, "moments")?.inner.values(), buf, buf_len, len_out))
}

/// # Safety
/// `moments` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_moments_free(moments: *mut MsMoments) {
    if !moments.is_null() {
        drop(Box::from_raw(moments));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Splits `mu` into a part bounded by `gamma · lambda` and a remainder with
/// the relaxation of the given order. Nonzero `normalize` rescales `mu` to
/// unit mass first; nonzero `condition` solves in the `lambda`-orthonormal
/// basis.
///
/// # Safety
/// `mu` and `lambda` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_decompose(
    mu: *const MsMoments,
    lambda: *const MsMoments,
    gamma: f64,
    order: usize,
    normalize: c_int,
    condition: c_int,
    out: *mut *mut MsSolution,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mu = deref(mu, "mu")?;
        let lambda = deref(lambda, "lambda")?;
        let problem = lib(DecompositionProblem::new(&mu.inner, &lambda.inner, gamma, order, normalize != 0))?;
        let options = SolveOptions { condition: condition != 0, ..Default::default() };
        let solution = lib(solve_decomposition(&problem, &options))?;
        put(out, MsSolution { inner: solution });
        Ok(())
    })
}

/// Optimal value `y₀` of the relaxation; NaN for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_rho(solution: *const MsSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.inner.rho)
}

/// Value of the dual certificate.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_dual_value(solution: *const MsSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.inner.dual.dual_value)
}

/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_iterations(solution: *const MsSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.inner.stats.iterations)
}

/// New handle holding the moments of the absolutely continuous part.
///
/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_absolutely_continuous(
    solution: *const MsSolution,
    out: *mut *mut MsMoments,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, MsMoments { inner: deref(solution, "solution")?.inner.y.clone() });
        Ok(())
    })
}

/// New handle holding the moments of the singular remainder.
///
/// # Safety
/// `solution` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_singular(solution: *const MsSolution, out: *mut *mut MsMoments) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        put(out, MsMoments { inner: deref(solution, "solution")?.inner.v.clone() });
        Ok(())
    })
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_solution_free(solution: *mut MsSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Looks for a finitely atomic measure behind `moments` (using moment
/// matrices up to `order`) and writes its atoms: `count_out` points, their
/// coordinates row by row into `points` (`count · dim` values) and their
/// weights into `weights`. With null buffers only the count is reported.
/// `rank_p` of zero selects the default threshold exponent.
///
/// # Safety
/// `moments` must be a live handle; buffers null or writable for the given
/// lengths; `count_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ms_extract_atoms(
    moments: *const MsMoments,
    order: usize,
    rank_p: u32,
    seed: u64,
    points: *mut f64,
    points_len: usize,
    weights: *mut f64,
    weights_len: usize,
    count_out: *mut usize,
) -> MsStatus {
    guard(|| {
        let z = &deref(moments, "moments")?.inner;
        let p = if rank_p == 0 { DEFAULT_RANK_P } else { rank_p };
        let options = ExtractOptions { seed, ..Default::default() };
        let atoms = lib(candidate_atoms(z, order, p, &options))?
            .ok_or_else(|| (MsStatus::ExtractionFailed, "moment matrices never become rank-flat".to_string()))?;
        let flat: Vec<f64> = atoms.points.iter().flatten().copied().collect();
        if !count_out.is_null() {
            *count_out = atoms.len();
        }
        copy_out(&flat, points, points_len, ptr::null_mut())?;
        copy_out(&atoms.weights, weights, weights_len, ptr::null_mut())
    })
}
