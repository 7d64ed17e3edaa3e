//! C ABI for polarkit.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`PkStatus`]; on failure the message is available from
//! [`pk_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polarkit::search::{search_permutations, Certificate, SearchOptions};
use polarkit::sim::{simulate_bad_channel, simulate_good_channel, SimOptions};
use polarkit::spectrum::{self, report, ChannelRole, DistanceSpectrum};
use polarkit::{Error, Kernel, Permutation, SignalSet};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    AlphabetMismatch = 3,
    SearchTooLarge = 4,
    BufferTooSmall = 5,
    Utf8 = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkRole {
    Good = 0,
    Bad = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkCertificate {
    Equidistant = 0,
    AlmostEquidistant = 1,
    BestFound = 2,
}

/// Opaque signal set.
pub struct PkSignalSet(SignalSet);

/// Opaque 2x2 kernel.
pub struct PkKernel(Kernel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: PkStatus, msg: impl Into<String>) -> PkStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> PkStatus {
    let status = match e {
        Error::AlphabetMismatch { .. } => PkStatus::AlphabetMismatch,
        Error::SearchTooLarge { .. } => PkStatus::SearchTooLarge,
        _ => PkStatus::Domain,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into [`PkStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), PkStatus>) -> PkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PkStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(PkStatus::Panic, "internal panic"),
    }
}

fn role(r: PkRole) -> ChannelRole {
    match r {
        PkRole::Good => ChannelRole::Good,
        PkRole::Bad => ChannelRole::Bad,
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, PkStatus> {
    p.as_ref().ok_or_else(|| fail(PkStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], PkStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PkStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], PkStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(PkStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, PkStatus> {
    p.as_mut().ok_or_else(|| fail(PkStatus::NullPointer, format!("{name} is null")))
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a preset (`psk:<q>`, `quad-eq`, `pam3-eq`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_set_preset(name: *const c_char, out: *mut *mut PkSignalSet) -> PkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if name.is_null() {
            return Err(fail(PkStatus::NullPointer, "name is null"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| fail(PkStatus::Utf8, "name is not UTF-8"))?;
        let set = SignalSet::from_preset(name).map_err(from_error)?;
        *out = Box::into_raw(Box::new(PkSignalSet(set)));
        Ok(())
    })
}

/// Builds a set from `q * dimension` coordinates, point by point.
///
/// # Safety
/// `coords` must hold `q * dimension` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_set_from_points(
    q: usize,
    dimension: usize,
    coords: *const f64,
    out: *mut *mut PkSignalSet,
) -> PkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = q
            .checked_mul(dimension)
            .ok_or_else(|| fail(PkStatus::Domain, "q * dimension overflows"))?;
        let c = slice(coords, len, "coords")?;
        let points = if dimension == 0 {
            vec![Vec::new(); q]
        } else {
            c.chunks_exact(dimension).map(<[f64]>::to_vec).collect()
        };
        let set = SignalSet::from_points(dimension, points).map_err(from_error)?;
        *out = Box::into_raw(Box::new(PkSignalSet(set)));
        Ok(())
    })
}

/// Alphabet size, or 0 for NULL.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_set_q(set: *const PkSignalSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.q())
}

/// Average energy, or NaN for NULL.
///
/// # Safety
/// `set` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_set_es(set: *const PkSignalSet) -> f64 {
    set.as_ref().map_or(f64::NAN, |s| s.0.es())
}

/// # Safety
/// `set` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pk_signal_set_free(set: *mut PkSignalSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

fn store_kernel(out: &mut *mut PkKernel, k: Result<Kernel, Error>) -> Result<(), PkStatus> {
    *out = Box::into_raw(Box::new(PkKernel(k.map_err(from_error)?)));
    Ok(())
}

/// `f(u1, u2) = u1 + u2 mod q`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pk_kernel_standard(q: usize, out: *mut *mut PkKernel) -> PkStatus {
    guard(|| store_kernel(out_ptr(out, "out")?, polarkit::standard_kernel(q)))
}

/// `f(u1, u2) = u1 + image[u2] mod q`.
///
/// # Safety
/// `image` must hold `q` entries and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pk_kernel_permutation(image: *const usize, q: usize, out: *mut *mut PkKernel) -> PkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let image = slice(image, q, "image")?;
        let pi = Permutation::new(image.to_vec()).map_err(from_error)?;
        store_kernel(out, Ok(polarkit::permutation_kernel(&pi)))
    })
}

/// `f(u1, u2) = u1 + gamma * u2 mod q`, `q` prime.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pk_kernel_reed_solomon(q: usize, gamma: usize, out: *mut *mut PkKernel) -> PkStatus {
    guard(|| store_kernel(out_ptr(out, "out")?, polarkit::reed_solomon_kernel(q, gamma)))
}

/// Kernel from a row-major `q * q` Latin square, `table[u1 * q + u2]`.
///
/// # Safety
/// `table` must hold `q * q` entries and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pk_kernel_from_table(table: *const usize, q: usize, out: *mut *mut PkKernel) -> PkStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = q
            .checked_mul(q)
            .ok_or_else(|| fail(PkStatus::Domain, "q * q overflows"))?;
        let t = slice(table, len, "table")?;
        let rows: Vec<Vec<usize>> = if q == 0 {
            Vec::new()
        } else {
            t.chunks_exact(q).map(<[usize]>::to_vec).collect()
        };
        store_kernel(out, Kernel::from_table(&rows))
    })
}

/// Writes `f(u1, u2)` to `out`.
///
/// # Safety
/// `kernel` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pk_kernel_apply(kernel: *const PkKernel, u1: usize, u2: usize, out: *mut usize) -> PkStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        *out_ptr(out, "out")? = k.0.apply(u1, u2).map_err(from_error)?;
        Ok(())
    })
}

/// Alphabet size, or 0 for NULL.
///
/// # Safety
/// `kernel` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pk_kernel_q(kernel: *const PkKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.0.q())
}

/// # Safety
/// `kernel` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pk_kernel_free(kernel: *mut PkKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

unsafe fn write_spectrum(
    s: &DistanceSpectrum,
    d_over_sqrt_es: *mut f64,
    counts: *mut usize,
    capacity: usize,
    lines: *mut usize,
) -> Result<(), PkStatus> {
    let n = s.entries().len();
    *out_ptr(lines, "lines")? = n;
    if capacity < n {
        return Err(fail(
            PkStatus::BufferTooSmall,
            format!("spectrum has {n} lines, buffer holds {capacity}"),
        ));
    }
    let d = slice_mut(d_over_sqrt_es, n, "d_over_sqrt_es")?;
    let c = slice_mut(counts, n, "counts")?;
    for (i, l) in s.entries().iter().enumerate() {
        d[i] = l.d();
        c[i] = l.count;
    }
    Ok(())
}

/// Distance spectrum at reference `(u1, u2)`. Writes the number of lines to
/// `lines` and, when `capacity` suffices, the normalized distances and
/// multiplicities in increasing distance order.
///
/// # Safety
/// Handles must be live; the output arrays must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn pk_spectrum(
    set: *const PkSignalSet,
    kernel: *const PkKernel,
    role_: PkRole,
    u1: usize,
    u2: usize,
    d_over_sqrt_es: *mut f64,
    counts: *mut usize,
    capacity: usize,
    lines: *mut usize,
) -> PkStatus {
    guard(|| {
        let (set, k) = (&deref(set, "set")?.0, &deref(kernel, "kernel")?.0);
        let s = match role(role_) {
            ChannelRole::Good => spectrum::good_spectrum(set, k, u1, u2),
            ChannelRole::Bad => spectrum::bad_spectrum(set, k, u1, u2),
        }
        .map_err(from_error)?;
        write_spectrum(&s, d_over_sqrt_es, counts, capacity, lines)
    })
}

/// Union bound of the worst-reference spectrum at `snr_db`.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pk_union_bound(
    set: *const PkSignalSet,
    kernel: *const PkKernel,
    role_: PkRole,
    snr_db: f64,
    out: *mut f64,
) -> PkStatus {
    guard(|| {
        let (set, k) = (&deref(set, "set")?.0, &deref(kernel, "kernel")?.0);
        let out = out_ptr(out, "out")?;
        let r = report(set, k, role(role_)).map_err(from_error)?;
        *out = polarkit::union_bound(r.worst(), spectrum::db_to_linear(snr_db));
        Ok(())
    })
}

/// Gaussian tail probability `Q(x)`.
#[no_mangle]
pub extern "C" fn pk_q_function(x: f64) -> f64 {
    spectrum::q_function(x)
}

/// Exhaustive search over `u1 + π(u2)` kernels for `set` (q <= 10).
/// Writes the best `π` (q entries), its worst-reference `d_min / sqrt(Es)`
/// and multiplicity, and the certificate.
///
/// # Safety
/// `set` must be live; `best_pi` must hold `q` entries; other outputs valid.
#[no_mangle]
pub unsafe extern "C" fn pk_search(
    set: *const PkSignalSet,
    best_pi: *mut usize,
    d_min: *mut f64,
    n_min: *mut usize,
    certificate: *mut PkCertificate,
) -> PkStatus {
    guard(|| {
        let set = &deref(set, "set")?.0;
        let pi = slice_mut(best_pi, set.q(), "best_pi")?;
        let (d_min, n_min, certificate) = (
            out_ptr(d_min, "d_min")?,
            out_ptr(n_min, "n_min")?,
            out_ptr(certificate, "certificate")?,
        );
        let r = search_permutations(set, SearchOptions::default()).map_err(from_error)?;
        pi.copy_from_slice(r.best_pi.image());
        *d_min = r.spectrum.d_min();
        *n_min = r.spectrum.n_min();
        *certificate = match r.certificate {
            Certificate::Equidistant => PkCertificate::Equidistant,
            Certificate::AlmostEquidistant => PkCertificate::AlmostEquidistant,
            Certificate::BestFound => PkCertificate::BestFound,
        };
        Ok(())
    })
}

/// One-step SER campaign. For each of the `points` SNR values writes the
/// error count to `errors`. `threads = 0` uses the default pool.
///
/// # Safety
/// Handles must be live; `snr_db` and `errors` must hold `points` entries.
#[no_mangle]
pub unsafe extern "C" fn pk_simulate(
    set: *const PkSignalSet,
    kernel: *const PkKernel,
    role_: PkRole,
    snr_db: *const f64,
    points: usize,
    trials: u64,
    seed: u64,
    threads: usize,
    errors: *mut u64,
) -> PkStatus {
    guard(|| {
        let (set, k) = (&deref(set, "set")?.0, &deref(kernel, "kernel")?.0);
        let snr = slice(snr_db, points, "snr_db")?;
        let errors = slice_mut(errors, points, "errors")?;
        let mut opts = SimOptions::new(trials, seed);
        opts.threads = (threads > 0).then_some(threads);
        let r = match role(role_) {
            ChannelRole::Good => simulate_good_channel(set, k, snr, &opts),
            ChannelRole::Bad => simulate_bad_channel(set, k, snr, &opts),
        }
        .map_err(from_error)?;
        for (e, p) in errors.iter_mut().zip(&r.points) {
            *e = p.errors;
        }
        Ok(())
    })
}
