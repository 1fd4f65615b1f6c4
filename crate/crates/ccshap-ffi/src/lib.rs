//! C ABI for the attribution library: opaque model handles, numeric error
//! codes, and a thread-local last-error message. The header
//! `include/ccshap.h` is generated at build time.
//!
//! Conventions: every function returning `int32_t` uses the codes
//! [`CCS_OK`], [`CCS_ERR_COMPUTATION`], [`CCS_ERR_INVALID_INPUT`], and
//! [`CCS_ERR_NULL_POINTER`]. On any non-zero return, `ccs_last_error()`
//! holds a UTF-8 description valid until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use ccshap::attribution::{cc_shapley_values, shapley_values};
use ccshap::dataset::Dataset;
use ccshap::error::Error;
use ccshap::estimator::{EstimatorKind, EstimatorSpec};
use ccshap::experiments::write_results;
use ccshap::scm::parse_scm_toml;
use ccshap::seed::derive_seed;
use ccshap::Scm;

/// Success.
pub const CCS_OK: i32 = 0;
/// A computation failed (fitting, sampling, numerical preconditions).
pub const CCS_ERR_COMPUTATION: i32 = 1;
/// The input was malformed (parse errors, unknown names, bad arguments).
pub const CCS_ERR_INVALID_INPUT: i32 = 2;
/// A required pointer argument was null.
pub const CCS_ERR_NULL_POINTER: i32 = 3;

/// Attribution with all contexts treated observationally.
pub const CCS_METHOD_SHAPLEY: i32 = 0;
/// Attribution with contexts entering through interventions.
pub const CCS_METHOD_CC_SHAPLEY: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

fn code_of(e: &Error) -> i32 {
    match e.exit_code() {
        2 => CCS_ERR_INVALID_INPUT,
        _ => CCS_ERR_COMPUTATION,
    }
}

fn fail(e: Error) -> i32 {
    set_error(&e.to_string());
    code_of(&e)
}

fn null_arg(name: &str) -> i32 {
    set_error(&format!("`{name}` must not be null"));
    CCS_ERR_NULL_POINTER
}

/// # Safety
/// `ptr` must be a valid, NUL-terminated C string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, i32> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(&format!("`{name}` is not valid UTF-8"));
        CCS_ERR_INVALID_INPUT
    })
}

/// An opaque structural causal model handle. Create with
/// `ccs_scm_parse`, destroy with `ccs_scm_free`.
pub struct CcsScm {
    inner: Scm,
}

/// The message of the most recent error on this thread, or an empty
/// string. The pointer stays valid until the next failing call on the
/// same thread; do not free it.
#[no_mangle]
pub extern "C" fn ccs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse a TOML model declaration into a model handle. Returns null on
/// failure (consult `ccs_last_error`).
///
/// # Safety
/// `text` must be a valid, NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn ccs_scm_parse(text: *const c_char) -> *mut CcsScm {
    let Ok(text) = utf8_arg(text, "text") else {
        return std::ptr::null_mut();
    };
    match parse_scm_toml(text) {
        Ok(inner) => Box::into_raw(Box::new(CcsScm { inner })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Destroy a model handle. Null is a no-op.
///
/// # Safety
/// `scm` must be a handle returned by `ccs_scm_parse` that has not been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn ccs_scm_free(scm: *mut CcsScm) {
    if !scm.is_null() {
        drop(Box::from_raw(scm));
    }
}

/// Number of nodes in the model's graph, or -1 on a null handle.
///
/// # Safety
/// `scm` must be a live handle from `ccs_scm_parse` or null.
#[no_mangle]
pub unsafe extern "C" fn ccs_scm_node_count(scm: *const CcsScm) -> i32 {
    if scm.is_null() {
        null_arg("scm");
        return -1;
    }
    (*scm).inner.graph().len() as i32
}

/// Sample `n_rows` observational rows and write them as CSV to `path`.
///
/// # Safety
/// `scm` must be a live handle; `path` a valid NUL-terminated C string.
#[no_mangle]
pub unsafe extern "C" fn ccs_scm_sample_csv(
    scm: *const CcsScm,
    n_rows: u64,
    seed: u64,
    path: *const c_char,
) -> i32 {
    if scm.is_null() {
        return null_arg("scm");
    }
    let path = match utf8_arg(path, "path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    let d = match (*scm).inner.sample(n_rows as usize, seed) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    match d.save_csv(Path::new(path)) {
        Ok(()) => CCS_OK,
        Err(e) => fail(e),
    }
}

/// Compute attributions and write `attributions.csv`, `contexts.csv`, and
/// `plan.txt` into the directory `out_dir` (created if missing).
///
/// `method` is `CCS_METHOD_SHAPLEY` or `CCS_METHOD_CC_SHAPLEY`;
/// `estimator` is `"linear"`, `"cpt"`, or `"binned"`. `n_eval = 0` writes
/// headers-only files.
///
/// # Safety
/// `scm` must be a live handle; `estimator` and `out_dir` valid
/// NUL-terminated C strings.
#[no_mangle]
pub unsafe extern "C" fn ccs_attribute(
    scm: *const CcsScm,
    method: i32,
    estimator: *const c_char,
    n_fit: u64,
    n_eval: u64,
    seed: u64,
    out_dir: *const c_char,
) -> i32 {
    if scm.is_null() {
        return null_arg("scm");
    }
    let estimator = match utf8_arg(estimator, "estimator") {
        Ok(s) => s,
        Err(code) => return code,
    };
    let out_dir = match utf8_arg(out_dir, "out_dir") {
        Ok(s) => s,
        Err(code) => return code,
    };
    let kind = match EstimatorKind::parse(estimator) {
        Ok(k) => k,
        Err(e) => return fail(e),
    };
    let spec = EstimatorSpec::new(kind);
    let m = &(*scm).inner;
    let result = (|| {
        let target = m.graph().target().to_string();
        let eval = if n_eval == 0 {
            Dataset::new(m.graph().node_names())?
        } else {
            m.sample(n_eval as usize, derive_seed(seed, "ffi-eval", 0))?
        };
        match method {
            CCS_METHOD_SHAPLEY => {
                let d = m.sample(n_fit as usize, derive_seed(seed, "ffi-fit", 0))?;
                shapley_values(&d, &target, &eval, &spec)
            }
            CCS_METHOD_CC_SHAPLEY => {
                cc_shapley_values(m, &eval, &spec, n_fit as usize, derive_seed(seed, "ffi-cc", 0))
            }
            other => Err(Error::InvalidArgument(format!(
                "unknown method code {other}; expected 0 (shapley) or 1 (cc-shapley)"
            ))),
        }
    })();
    match result.and_then(|r| write_results(Path::new(out_dir), &[&r])) {
        Ok(()) => CCS_OK,
        Err(e) => fail(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = r#"
target = "Y"

[[nodes]]
name = "X1"
mechanism = "exogenous"
noise = "bernoulli(0.5)"

[[nodes]]
name = "X2"
mechanism = "exogenous"
noise = "bernoulli(0.5)"

[[nodes]]
name = "Y"
parents = ["X1", "X2"]
mechanism = "X1 * X2"
"#;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error() -> String {
        unsafe {
            CStr::from_ptr(ccs_last_error())
                .to_string_lossy()
                .into_owned()
        }
    }

    #[test]
    fn parse_sample_attribute_roundtrip() {
        unsafe {
            let text = cstr(MODEL);
            let scm = ccs_scm_parse(text.as_ptr());
            assert!(!scm.is_null(), "{}", last_error());
            assert_eq!(ccs_scm_node_count(scm), 3);

            let dir = tempfile::tempdir().unwrap();
            let csv = cstr(dir.path().join("d.csv").to_str().unwrap());
            assert_eq!(ccs_scm_sample_csv(scm, 500, 7, csv.as_ptr()), CCS_OK);
            let d = Dataset::load_csv(dir.path().join("d.csv")).unwrap();
            assert_eq!(d.n_rows(), 500);

            let out = cstr(dir.path().join("attr").to_str().unwrap());
            let est = cstr("cpt");
            let code = ccs_attribute(scm, CCS_METHOD_CC_SHAPLEY, est.as_ptr(), 4000, 50, 7, out.as_ptr());
            assert_eq!(code, CCS_OK, "{}", last_error());
            assert!(dir.path().join("attr/attributions.csv").exists());
            assert!(dir.path().join("attr/plan.txt").exists());

            ccs_scm_free(scm);
        }
    }

    #[test]
    fn error_codes_and_messages() {
        unsafe {
            // Parse failure -> null + message.
            let bad = cstr("target = \"Y\"\n[[nodes]]\nname = \"Y\"\nmechanism = \"noise\"");
            assert!(ccs_scm_parse(bad.as_ptr()).is_null());
            assert!(!last_error().is_empty());

            // Null handle -> 3.
            let p = cstr("/tmp/x.csv");
            assert_eq!(
                ccs_scm_sample_csv(std::ptr::null(), 10, 1, p.as_ptr()),
                CCS_ERR_NULL_POINTER
            );

            // Bad estimator name -> 2.
            let text = cstr(MODEL);
            let scm = ccs_scm_parse(text.as_ptr());
            let dir = tempfile::tempdir().unwrap();
            let out = cstr(dir.path().join("o").to_str().unwrap());
            let est = cstr("spline");
            assert_eq!(
                ccs_attribute(scm, CCS_METHOD_SHAPLEY, est.as_ptr(), 100, 10, 1, out.as_ptr()),
                CCS_ERR_INVALID_INPUT
            );
            // Bad method code -> 2.
            let est = cstr("cpt");
            assert_eq!(
                ccs_attribute(scm, 9, est.as_ptr(), 100, 10, 1, out.as_ptr()),
                CCS_ERR_INVALID_INPUT
            );
            ccs_scm_free(scm);
        }
    }

    #[test]
    fn generated_header_covers_the_surface() {
        let header = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/include/ccshap.h"
        ))
        .expect("header generated at build time");
        for symbol in [
            "ccs_scm_parse",
            "ccs_scm_free",
            "ccs_scm_sample_csv",
            "ccs_scm_node_count",
            "ccs_attribute",
            "ccs_last_error",
            "CCS_OK",
            "CCS_ERR_NULL_POINTER",
        ] {
            assert!(header.contains(symbol), "header misses {symbol}");
        }
    }
}
