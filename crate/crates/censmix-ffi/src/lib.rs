//! C interface for the censmix library: opaque handles, integer status
//! codes, and a thread-local last-error message.
//!
//! Every function returns [`CensmixStatus`]; outputs travel through pointer
//! arguments. Handles must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use censmix::dataset::read_dataset;
use censmix::ecme::{fit, FitOptions, FitReport};
use censmix::model::CensoredObservation;
use censmix::smn::FamilyKind;
use censmix::Error;

/// Result code of every interface call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CensmixStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or inconsistent.
    InvalidArgument = 2,
    /// The dataset file could not be read.
    Io = 3,
    /// The dataset file could not be parsed.
    Parse = 4,
    /// Model fitting failed.
    Fit = 5,
    /// An internal invariant failed; the message has details.
    Internal = 6,
}

/// A loaded dataset (opaque).
pub struct CensmixDataset {
    inner: Vec<CensoredObservation>,
}

/// A completed fit (opaque).
pub struct CensmixFit {
    inner: FitReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = clean);
}

fn status_of(err: &Error) -> CensmixStatus {
    match err {
        Error::Io(_) => CensmixStatus::Io,
        Error::Csv(_) | Error::Dataset { .. } => CensmixStatus::Parse,
        Error::InvalidParameter(_) | Error::DimensionMismatch(_) | Error::Config(_) => {
            CensmixStatus::InvalidArgument
        }
        _ => CensmixStatus::Fit,
    }
}

fn fail(err: &Error) -> CensmixStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn guarded(f: impl FnOnce() -> CensmixStatus) -> CensmixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            CensmixStatus::Internal
        }
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn censmix_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Read a dataset file (header `y,cens,c1,c2,x1..,r1..`) into a new handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn censmix_dataset_read(
    path: *const c_char,
    out: *mut *mut CensmixDataset,
) -> CensmixStatus {
    if path.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("path is not valid UTF-8");
            return CensmixStatus::InvalidArgument;
        }
    };
    guarded(|| match read_dataset(Path::new(path)) {
        Ok(data) => {
            *out = Box::into_raw(Box::new(CensmixDataset { inner: data }));
            CensmixStatus::Ok
        }
        Err(e) => fail(&e),
    })
}

/// Number of observations in the dataset.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn censmix_dataset_len(
    ds: *const CensmixDataset,
    out: *mut usize,
) -> CensmixStatus {
    if ds.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    *out = (*ds).inner.len();
    CensmixStatus::Ok
}

/// Release a dataset handle; a null pointer is ignored.
///
/// # Safety
/// `ds` must be a pointer returned by `censmix_dataset_read`, released at
/// most once.
#[no_mangle]
pub unsafe extern "C" fn censmix_dataset_free(ds: *mut CensmixDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fit a mixture of linear experts.
///
/// `family` is one of "n", "t", "sl", "cn"; `tie_nu` is 0 or 1; `max_iter`
/// and `tol` of 0 select the defaults (1000 and 1e-5).
///
/// # Safety
/// `ds` must be a live dataset handle, `family` a valid NUL-terminated
/// string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_run(
    ds: *const CensmixDataset,
    components: usize,
    family: *const c_char,
    tie_nu: i32,
    seed: u64,
    max_iter: usize,
    tol: f64,
    out: *mut *mut CensmixFit,
) -> CensmixStatus {
    if ds.is_null() || family.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    let family = match CStr::from_ptr(family).to_str() {
        Ok(s) => s,
        Err(_) => {
            set_error("family is not valid UTF-8");
            return CensmixStatus::InvalidArgument;
        }
    };
    let data = &(*ds).inner;
    guarded(|| {
        let kind = match FamilyKind::parse(family) {
            Ok(k) => k,
            Err(e) => return fail(&e),
        };
        let defaults = FitOptions::default();
        let opts = FitOptions {
            tie_nu: tie_nu != 0,
            seed,
            max_iter: if max_iter == 0 { defaults.max_iter } else { max_iter },
            tol: if tol == 0.0 { defaults.tol } else { tol },
            ..defaults
        };
        match fit(data, components, kind, &opts) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(CensmixFit { inner: report }));
                CensmixStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a fit handle; a null pointer is ignored.
///
/// # Safety
/// `fit` must be a pointer returned by `censmix_fit_run`, released at most
/// once.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_free(fit: *mut CensmixFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

unsafe fn fit_scalar(
    fit: *const CensmixFit,
    out: *mut f64,
    get: impl Fn(&FitReport) -> f64,
) -> CensmixStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    *out = get(&(*fit).inner);
    CensmixStatus::Ok
}

/// Maximized observed-data log-likelihood.
///
/// # Safety
/// `fit` must be a live fit handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_loglik(
    fit: *const CensmixFit,
    out: *mut f64,
) -> CensmixStatus {
    fit_scalar(fit, out, FitReport::loglik)
}

/// Akaike information criterion of the fit.
///
/// # Safety
/// `fit` must be a live fit handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_aic(fit: *const CensmixFit, out: *mut f64) -> CensmixStatus {
    fit_scalar(fit, out, |r| r.aic)
}

/// Bayesian information criterion of the fit.
///
/// # Safety
/// `fit` must be a live fit handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_bic(fit: *const CensmixFit, out: *mut f64) -> CensmixStatus {
    fit_scalar(fit, out, |r| r.bic)
}

/// Whether the stopping rule was met (1) or iteration limits ended the fit
/// (0).
///
/// # Safety
/// `fit` must be a live fit handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_converged(
    fit: *const CensmixFit,
    out: *mut i32,
) -> CensmixStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    *out = i32::from((*fit).inner.converged);
    CensmixStatus::Ok
}

/// Number of components, expert coefficients, and gating coefficients.
///
/// # Safety
/// `fit` must be a live fit handle; each non-null output pointer must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_shape(
    fit: *const CensmixFit,
    g: *mut usize,
    p: *mut usize,
    q: *mut usize,
) -> CensmixStatus {
    if fit.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    let theta = &(*fit).inner.theta_hat;
    if !g.is_null() {
        *g = theta.g();
    }
    if !p.is_null() {
        *p = theta.p();
    }
    if !q.is_null() {
        *q = theta.q();
    }
    CensmixStatus::Ok
}

/// Expert coefficients of one component (0-based), written into `out`
/// (capacity `cap >= p`).
///
/// # Safety
/// `fit` must be a live fit handle and `out` must point to at least `cap`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_beta(
    fit: *const CensmixFit,
    component: usize,
    out: *mut f64,
    cap: usize,
) -> CensmixStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    let theta = &(*fit).inner.theta_hat;
    if component >= theta.g() {
        set_error("component index out of range");
        return CensmixStatus::InvalidArgument;
    }
    let beta = &theta.beta[component];
    if cap < beta.len() {
        set_error("output buffer too small");
        return CensmixStatus::InvalidArgument;
    }
    for (i, v) in beta.iter().enumerate() {
        *out.add(i) = *v;
    }
    CensmixStatus::Ok
}

/// Scale parameter of one component (0-based).
///
/// # Safety
/// `fit` must be a live fit handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_sigma2(
    fit: *const CensmixFit,
    component: usize,
    out: *mut f64,
) -> CensmixStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    let theta = &(*fit).inner.theta_hat;
    if component >= theta.g() {
        set_error("component index out of range");
        return CensmixStatus::InvalidArgument;
    }
    *out = theta.sigma2[component];
    CensmixStatus::Ok
}

/// Gating coefficients of one non-reference component (0-based index below
/// g - 1), written into `out` (capacity `cap >= q`).
///
/// # Safety
/// `fit` must be a live fit handle and `out` must point to at least `cap`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_tau(
    fit: *const CensmixFit,
    component: usize,
    out: *mut f64,
    cap: usize,
) -> CensmixStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    let theta = &(*fit).inner.theta_hat;
    if component + 1 >= theta.g() {
        set_error("gating index out of range");
        return CensmixStatus::InvalidArgument;
    }
    let tau = &theta.tau[component];
    if cap < tau.len() {
        set_error("output buffer too small");
        return CensmixStatus::InvalidArgument;
    }
    for (i, v) in tau.iter().enumerate() {
        *out.add(i) = *v;
    }
    CensmixStatus::Ok
}

/// Maximum-responsibility component labels (0-based), one per observation,
/// written into `out` (capacity `cap >= n`).
///
/// # Safety
/// `fit` must be a live fit handle and `out` must point to at least `cap`
/// entries.
#[no_mangle]
pub unsafe extern "C" fn censmix_fit_labels(
    fit: *const CensmixFit,
    out: *mut usize,
    cap: usize,
) -> CensmixStatus {
    if fit.is_null() || out.is_null() {
        set_error("null pointer argument");
        return CensmixStatus::NullPointer;
    }
    let labels = &(*fit).inner.labels;
    if cap < labels.len() {
        set_error("output buffer too small");
        return CensmixStatus::InvalidArgument;
    }
    for (i, &l) in labels.iter().enumerate() {
        *out.add(i) = l;
    }
    CensmixStatus::Ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::io::Write;

    fn write_demo_dataset() -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "y,cens,c1,c2,x1,r1").unwrap();
        for i in 0..40 {
            let x = -1.0 + 2.0 * (i as f64) / 39.0;
            let y = 0.5 + 1.5 * x + 0.01 * ((i * 7 % 11) as f64 - 5.0);
            writeln!(f, "{y},0,,,{x},{x}").unwrap();
        }
        writeln!(f, ",1,1.5,inf,0.9,0.9").unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn dataset_and_fit_round_trip() {
        let file = write_demo_dataset();
        let path = CString::new(file.path().to_str().unwrap()).unwrap();
        let mut ds: *mut CensmixDataset = std::ptr::null_mut();
        unsafe {
            assert_eq!(censmix_dataset_read(path.as_ptr(), &mut ds), CensmixStatus::Ok);
            let mut n = 0usize;
            assert_eq!(censmix_dataset_len(ds, &mut n), CensmixStatus::Ok);
            assert_eq!(n, 41);

            let family = CString::new("n").unwrap();
            let mut fit: *mut CensmixFit = std::ptr::null_mut();
            assert_eq!(
                censmix_fit_run(ds, 1, family.as_ptr(), 1, 7, 0, 0.0, &mut fit),
                CensmixStatus::Ok
            );
            let (mut g, mut p, mut q) = (0usize, 0usize, 0usize);
            assert_eq!(censmix_fit_shape(fit, &mut g, &mut p, &mut q), CensmixStatus::Ok);
            // One component keeps no gating rows, so q reports 0.
            assert_eq!((g, p, q), (1, 2, 0));

            let mut beta = [0.0f64; 2];
            assert_eq!(censmix_fit_beta(fit, 0, beta.as_mut_ptr(), 2), CensmixStatus::Ok);
            assert!((beta[0] - 0.5).abs() < 0.1, "intercept {}", beta[0]);
            assert!((beta[1] - 1.5).abs() < 0.1, "slope {}", beta[1]);

            let mut s2 = 0.0f64;
            assert_eq!(censmix_fit_sigma2(fit, 0, &mut s2), CensmixStatus::Ok);
            assert!(s2 > 0.0 && s2 < 0.1);

            let mut ll = 0.0f64;
            let mut aic = 0.0f64;
            let mut bic = 0.0f64;
            assert_eq!(censmix_fit_loglik(fit, &mut ll), CensmixStatus::Ok);
            assert_eq!(censmix_fit_aic(fit, &mut aic), CensmixStatus::Ok);
            assert_eq!(censmix_fit_bic(fit, &mut bic), CensmixStatus::Ok);
            assert!((aic - (2.0 * 3.0 - 2.0 * ll)).abs() < 1e-9);
            assert!(bic > aic);

            let mut converged = 0i32;
            assert_eq!(censmix_fit_converged(fit, &mut converged), CensmixStatus::Ok);
            assert_eq!(converged, 1);

            let mut labels = vec![0usize; 41];
            assert_eq!(censmix_fit_labels(fit, labels.as_mut_ptr(), 41), CensmixStatus::Ok);
            assert!(labels.iter().all(|&l| l == 0));

            censmix_fit_free(fit);
            censmix_dataset_free(ds);
        }
    }

    #[test]
    fn error_paths_set_message() {
        unsafe {
            let mut ds: *mut CensmixDataset = std::ptr::null_mut();
            let missing = CString::new("/nonexistent/file.csv").unwrap();
            assert_eq!(
                censmix_dataset_read(missing.as_ptr(), &mut ds),
                CensmixStatus::Io
            );
            let msg = CStr::from_ptr(censmix_last_error());
            assert!(!msg.to_bytes().is_empty());

            assert_eq!(
                censmix_dataset_read(std::ptr::null(), &mut ds),
                CensmixStatus::NullPointer
            );

            // Bad family string on a real dataset.
            let file = write_demo_dataset();
            let path = CString::new(file.path().to_str().unwrap()).unwrap();
            assert_eq!(censmix_dataset_read(path.as_ptr(), &mut ds), CensmixStatus::Ok);
            let bad = CString::new("zz").unwrap();
            let mut fit: *mut CensmixFit = std::ptr::null_mut();
            assert_eq!(
                censmix_fit_run(ds, 1, bad.as_ptr(), 1, 7, 0, 0.0, &mut fit),
                CensmixStatus::InvalidArgument
            );

            // Too many components for the sample size.
            let family = CString::new("n").unwrap();
            assert_eq!(
                censmix_fit_run(ds, 30, family.as_ptr(), 1, 7, 0, 0.0, &mut fit),
                CensmixStatus::Fit
            );
            censmix_dataset_free(ds);
        }
    }

    #[test]
    fn buffer_capacity_is_checked() {
        let file = write_demo_dataset();
        let path = CString::new(file.path().to_str().unwrap()).unwrap();
        unsafe {
            let mut ds: *mut CensmixDataset = std::ptr::null_mut();
            assert_eq!(censmix_dataset_read(path.as_ptr(), &mut ds), CensmixStatus::Ok);
            let family = CString::new("n").unwrap();
            let mut fit: *mut CensmixFit = std::ptr::null_mut();
            assert_eq!(
                censmix_fit_run(ds, 1, family.as_ptr(), 1, 7, 0, 0.0, &mut fit),
                CensmixStatus::Ok
            );
            let mut one = [0.0f64; 1];
            assert_eq!(
                censmix_fit_beta(fit, 0, one.as_mut_ptr(), 1),
                CensmixStatus::InvalidArgument
            );
            assert_eq!(
                censmix_fit_beta(fit, 5, one.as_mut_ptr(), 1),
                CensmixStatus::InvalidArgument
            );
            let mut tau = [0.0f64; 4];
            // g = 1 has no gating rows.
            assert_eq!(
                censmix_fit_tau(fit, 0, tau.as_mut_ptr(), 4),
                CensmixStatus::InvalidArgument
            );
            censmix_fit_free(fit);
            censmix_dataset_free(ds);
        }
    }
}
