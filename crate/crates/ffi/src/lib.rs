//! C ABI over `kahlerlab`.
//!
//! Every fallible entry point returns a [`KlStatus`]; on failure the message is
//! kept per thread and read back with [`kl_last_error_message`]. Objects cross
//! the boundary as opaque handles that the caller releases with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kahlerlab::cli::{self, Cli, Command, ConfigDoc};
use kahlerlab::error::Error;
use kahlerlab::hermitian_cone::{self as cone, HermitianMatrix};
use kahlerlab::stability::{self, IntersectionData};
use num_complex::Complex64;

/// Status codes. The tens digit of a library error is its CLI exit code;
/// `kl_status_exit_code` maps every status, including the 9x ones.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlStatus {
    Ok = 0,
    Usage = 10,
    Config = 11,
    Io = 12,
    Data = 13,
    Domain = 20,
    Precondition = 21,
    NotKahler = 22,
    BranchUndefined = 23,
    NoConvergence = 30,
    ConeBreach = 40,
    EllipticityLost = 41,
    NullPointer = 90,
    InvalidUtf8 = 91,
    Panic = 99,
}

/// Hermitian matrix handle.
pub struct KlHermitian(HermitianMatrix);

/// Parsed configuration document handle.
pub struct KlConfig(ConfigDoc);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> KlStatus {
    match e {
        Error::Usage(_) => KlStatus::Usage,
        Error::Config(_) => KlStatus::Config,
        Error::Io(_) => KlStatus::Io,
        Error::Data(_) => KlStatus::Data,
        Error::Domain(_) => KlStatus::Domain,
        Error::Precondition(_) => KlStatus::Precondition,
        Error::NotKahler { .. } => KlStatus::NotKahler,
        Error::BranchUndefined { .. } => KlStatus::BranchUndefined,
        Error::NoConvergence(_) => KlStatus::NoConvergence,
        Error::ConeBreach(_) => KlStatus::ConeBreach,
        Error::EllipticityLost { .. } => KlStatus::EllipticityLost,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Utf8(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> KlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KlStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(arg))) => {
            set_error(format!("null pointer passed for `{arg}`"));
            KlStatus::NullPointer
        }
        Ok(Err(Fail::Utf8(arg))) => {
            set_error(format!("`{arg}` is not valid UTF-8"));
            KlStatus::InvalidUtf8
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| p.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            set_error(format!("panic: {msg}"));
            KlStatus::Panic
        }
    }
}

unsafe fn nonnull<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8(name))
}

unsafe fn write_out<T>(out: *mut T, v: T, name: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(name));
    }
    out.write(v);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn kl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// CLI exit code (0..=4) for a status.
#[no_mangle]
pub extern "C" fn kl_status_exit_code(status: KlStatus) -> i32 {
    match status {
        KlStatus::Ok => 0,
        KlStatus::NullPointer | KlStatus::InvalidUtf8 | KlStatus::Panic => 1,
        s => s as i32 / 10,
    }
}

/// Builds a `dim x dim` Hermitian matrix from row-major real and imaginary
/// parts. `im` may be NULL for a real symmetric matrix.
///
/// # Safety
/// `re` (and `im` when non-null) must point to `dim * dim` doubles; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_hermitian_new(
    dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut KlHermitian,
) -> KlStatus {
    guard(|| {
        let len = dim.checked_mul(dim).ok_or(Error::Usage("dimension overflow".into()))?;
        let re = slice(re, len, "re")?;
        let entries: Vec<Complex64> = if im.is_null() {
            re.iter().map(|&r| Complex64::new(r, 0.0)).collect()
        } else {
            let im = slice(im, len, "im")?;
            re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect()
        };
        let m = HermitianMatrix::new(dim, &entries)?;
        write_out(out, Box::into_raw(Box::new(KlHermitian(m))), "out")
    })
}

/// Releases a matrix handle. NULL is ignored.
///
/// # Safety
/// `m` must come from `kl_hermitian_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kl_hermitian_free(m: *mut KlHermitian) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Matrix dimension, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kl_hermitian_dim(m: *const KlHermitian) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// Roots of `det(omega - lambda chi) = 0`, ascending, into `out[0..dim]`.
///
/// # Safety
/// Handles must be live; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kl_relative_spectrum(
    chi: *const KlHermitian,
    omega: *const KlHermitian,
    out: *mut f64,
    len: usize,
) -> KlStatus {
    guard(|| {
        let spec = cone::relative_spectrum(&nonnull(chi, "chi")?.0, &nonnull(omega, "omega")?.0)?;
        let vals = spec.values();
        if len < vals.len() {
            return Err(Error::Usage(format!("output holds {len} values, need {}", vals.len())).into());
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        std::slice::from_raw_parts_mut(out, vals.len()).copy_from_slice(vals);
        Ok(())
    })
}

/// `c - P(lambda)` for the spectrum of `chi` relative to `omega`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_j_cone_margin(
    chi: *const KlHermitian,
    omega: *const KlHermitian,
    c: f64,
    out: *mut f64,
) -> KlStatus {
    guard(|| {
        let spec = cone::relative_spectrum(&nonnull(chi, "chi")?.0, &nonnull(omega, "omega")?.0)?;
        write_out(out, cone::j_cone_margin(&spec, c), "out")
    })
}

/// `theta0 - P_arctan(lambda)` for the spectrum of `chi` relative to `omega`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_dhym_cone_margin(
    chi: *const KlHermitian,
    omega: *const KlHermitian,
    theta0: f64,
    out: *mut f64,
) -> KlStatus {
    guard(|| {
        let spec = cone::relative_spectrum(&nonnull(chi, "chi")?.0, &nonnull(omega, "omega")?.0)?;
        write_out(out, cone::dhym_cone_margin(&spec, theta0), "out")
    })
}

/// Slope margin of one subvariety; `a` holds `p + 1` intersection numbers.
///
/// # Safety
/// `a` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_slope_margin(
    p: usize,
    n: usize,
    a: *const f64,
    len: usize,
    c: f64,
    epsilon: f64,
    out: *mut f64,
) -> KlStatus {
    guard(|| {
        let data = IntersectionData::new(p, n, slice(a, len, "a")?.to_vec(), "V")?;
        write_out(out, stability::slope_test(&data, c, epsilon)?, "out")
    })
}

/// Parses a JSON configuration document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kl_config_from_json(json: *const c_char, out: *mut *mut KlConfig) -> KlStatus {
    guard(|| {
        let cfg = ConfigDoc::from_json(string(json, "json")?, "<ffi>")?;
        write_out(out, Box::into_raw(Box::new(KlConfig(cfg))), "out")
    })
}

/// Releases a config handle. NULL is ignored.
///
/// # Safety
/// `cfg` must come from `kl_config_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kl_config_free(cfg: *mut KlConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn parse_command(s: &str) -> Result<Command, Error> {
    Ok(match s {
        "solve-j" => Command::SolveJ,
        "solve-dhym" => Command::SolveDhym,
        "check-stability" => Command::CheckStability,
        "functionals" => Command::Functionals,
        "verify-lemmas" => Command::VerifyLemmas,
        other => return Err(Error::Usage(format!("unknown command `{other}`"))),
    })
}

/// Runs a CLI command (`"solve-j"`, `"check-stability"`, ...) and writes its
/// reports into `out_dir`. `cfg` may be NULL for `"verify-lemmas"`.
///
/// # Safety
/// Strings must be NUL-terminated; `cfg` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kl_run(
    cfg: *const KlConfig,
    command: *const c_char,
    out_dir: *const c_char,
    seed: u64,
    trials: usize,
) -> KlStatus {
    guard(|| {
        let command = parse_command(string(command, "command")?)?;
        let default = ConfigDoc::default();
        let cfg = match cfg.as_ref() {
            Some(c) => &c.0,
            None if command == Command::VerifyLemmas => &default,
            None => return Err(Fail::Null("cfg")),
        };
        let args = Cli {
            command,
            config: None,
            out: Some(PathBuf::from(string(out_dir, "out_dir")?)),
            seed,
            jobs: None,
            trials,
        };
        cli::run(command, cfg, &args)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_exit_code_agrees_with_library() {
        let errors = [
            Error::Usage(String::new()),
            Error::Config(String::new()),
            Error::Io(String::new()),
            Error::Data(String::new()),
            Error::Domain(String::new()),
            Error::Precondition(String::new()),
            Error::NotKahler { point: 0, margin: 0.0 },
            Error::BranchUndefined { lo: 0.0, hi: 1.0 },
            Error::NoConvergence(String::new()),
            Error::ConeBreach(String::new()),
            Error::EllipticityLost { point: 0, margin: 0.0 },
        ];
        for e in &errors {
            assert_eq!(kl_status_exit_code(status_of(e)), e.exit_code(), "{e:?}");
        }
    }

    #[test]
    fn panics_become_status() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, KlStatus::Panic);
        let msg = unsafe { CStr::from_ptr(kl_last_error_message()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
    }
}
