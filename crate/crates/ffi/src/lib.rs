//! C ABI over the `sciu` engine.
//!
//! Every function returns a [`SciuStatus`]; results come back through out
//! pointers. On failure, [`sciu_last_error`] describes what went wrong on the
//! calling thread. Handles are opaque and must be released with their `_free`
//! function. Strings returned by the library are freed with
//! [`sciu_string_free`].
//!
//! Configurations are passed as JSON objects. Missing keys keep their default
//! value, so `"{\"lambda\": 0.6}"` is a complete training config. A null
//! pointer means "all defaults".

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use sciu::dataset::{load_dataset, save_dataset};
use sciu::synth::generate;
use sciu::{Dataset, Mode, RunReport, SciuError, SynthConfig, TrainConfig};

/// Status codes. The numeric values of `SCIU_STATUS_INVALID_ARGUMENT`,
/// `SCIU_STATUS_DEGENERATE` and `SCIU_STATUS_NUMERIC` match the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SciuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Degenerate = 3,
    Numeric = 4,
    Io = 5,
    Parse = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SciuMode {
    Baseline = 0,
    Cgp = 1,
    Fgc = 2,
    Sciu = 3,
}

fn mode_arg(m: u32) -> Result<Mode, (SciuStatus, String)> {
    Ok(match m {
        0 => Mode::Baseline,
        1 => Mode::CgpOnly,
        2 => Mode::FgcOnly,
        3 => Mode::Sciu,
        other => return Err((SciuStatus::InvalidArgument, format!("unknown mode {other}"))),
    })
}

/// Opaque dataset handle.
pub struct SciuDataset(Dataset);

/// Opaque run report handle.
pub struct SciuReport(RunReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &SciuError) -> SciuStatus {
    match e {
        SciuError::Usage(_) | SciuError::Config(_) | SciuError::Validation(_) => {
            SciuStatus::InvalidArgument
        }
        SciuError::AllPruned { .. } => SciuStatus::Degenerate,
        SciuError::NonFinite { .. } => SciuStatus::Numeric,
        SciuError::Io { .. } => SciuStatus::Io,
        SciuError::Parse { .. } => SciuStatus::Parse,
        _ => SciuStatus::Internal,
    }
}

type Outcome = Result<(), (SciuStatus, String)>;

fn fail(e: SciuError) -> (SciuStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SciuStatus, String) {
    (SciuStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error and turns panics into `SCIU_STATUS_INTERNAL`.
fn guard(f: impl FnOnce() -> Outcome) -> SciuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SciuStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SciuStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SciuStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SciuStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Overlays a partial JSON object on the defaults of `T`.
unsafe fn config_arg<T: Serialize + DeserializeOwned + Default>(
    json: *const c_char,
    what: &str,
) -> Result<T, (SciuStatus, String)> {
    if json.is_null() {
        return Ok(T::default());
    }
    let text = str_arg(json, what)?;
    let parse = |e: serde_json::Error| (SciuStatus::Parse, format!("{what}: {e}"));
    let overrides: Value = serde_json::from_str(text).map_err(parse)?;
    let Value::Object(overrides) = overrides else {
        return Err((SciuStatus::Parse, format!("{what}: expected a JSON object")));
    };
    let mut base = serde_json::to_value(T::default()).map_err(parse)?;
    let obj = base
        .as_object_mut()
        .expect("config serializes to an object");
    for (k, v) in overrides {
        if !obj.contains_key(&k) {
            return Err((
                SciuStatus::InvalidArgument,
                format!("{what}: unknown key '{k}'"),
            ));
        }
        obj.insert(k, v);
    }
    serde_json::from_value(base).map_err(parse)
}

unsafe fn out_string(s: String, out: *mut *mut c_char) -> Outcome {
    let c = CString::new(s).map_err(|_| (SciuStatus::Internal, "interior NUL".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn sciu_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sciu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a synthetic dataset. `synth_json` may be null.
///
/// # Safety
/// `synth_json` must be null or a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_dataset_generate(
    synth_json: *const c_char,
    out: *mut *mut SciuDataset,
) -> SciuStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: SynthConfig = config_arg(synth_json, "synth config")?;
        let data = generate(&cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(SciuDataset(data)));
        Ok(())
    })
}

/// Loads a dataset file. `n_classes` of 0 infers the count from the labels.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_dataset_load(
    path: *const c_char,
    n_classes: usize,
    out: *mut *mut SciuDataset,
) -> SciuStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let data = load_dataset(path, (n_classes > 0).then_some(n_classes)).map_err(fail)?;
        *out = Box::into_raw(Box::new(SciuDataset(data)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle; `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn sciu_dataset_save(
    dataset: *const SciuDataset,
    path: *const c_char,
) -> SciuStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let path = str_arg(path, "path")?;
        save_dataset(&d.0, path).map_err(fail)
    })
}

/// Copy of `dataset` with oracle fields removed.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_dataset_strip_oracle(
    dataset: *const SciuDataset,
    out: *mut *mut SciuDataset,
) -> SciuStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(SciuDataset(d.0.strip_oracle())));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_dataset_len(
    dataset: *const SciuDataset,
    len: *mut usize,
) -> SciuStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        *len.as_mut().ok_or_else(|| null("len"))? = d.0.len();
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sciu_dataset_free(dataset: *mut SciuDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Default training config as JSON. Free with [`sciu_string_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_default_config_json(out: *mut *mut c_char) -> SciuStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string_pretty(&TrainConfig::default())
            .map_err(|e| (SciuStatus::Internal, e.to_string()))?;
        out_string(json, out)
    })
}

/// Runs one pipeline mode (a [`SciuMode`] value). `config_json` may be null.
///
/// # Safety
/// `dataset` must be a live handle; `config_json` null or a valid C string;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_run(
    dataset: *const SciuDataset,
    mode: u32,
    config_json: *const c_char,
    out: *mut *mut SciuReport,
) -> SciuStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mode = mode_arg(mode)?;
        let cfg: TrainConfig = config_arg(config_json, "train config")?;
        let report = sciu::run_pipeline(&cfg, &d.0, mode).map_err(fail)?;
        *out = Box::into_raw(Box::new(SciuReport(report)));
        Ok(())
    })
}

unsafe fn with_report<T>(
    report: *const SciuReport,
    out: *mut T,
    f: impl FnOnce(&RunReport) -> T,
) -> SciuStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = f(&r.0);
        Ok(())
    })
}

/// Test-split weighted average recall.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_report_war(report: *const SciuReport, out: *mut f64) -> SciuStatus {
    with_report(report, out, |r| r.final_test.war)
}

/// Test-split unweighted average recall.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_report_uar(report: *const SciuReport, out: *mut f64) -> SciuStatus {
    with_report(report, out, |r| r.final_test.uar)
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_report_pruned(
    report: *const SciuReport,
    out: *mut usize,
) -> SciuStatus {
    with_report(report, out, |r| r.pruned_total)
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_report_corrected(
    report: *const SciuReport,
    out: *mut usize,
) -> SciuStatus {
    with_report(report, out, |r| r.corrected_total)
}

/// Full report as JSON, byte-identical to the CLI's `report.struct`.
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sciu_report_to_json(
    report: *const SciuReport,
    out: *mut *mut c_char,
) -> SciuStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        out_string(r.0.to_json(), out)
    })
}

/// # Safety
/// `report` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sciu_report_free(report: *mut SciuReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sciu_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let json = CString::new(r#"{"lambda": 0.6, "epochs": 3}"#).unwrap();
        let cfg: TrainConfig = unsafe { config_arg(json.as_ptr(), "c") }.unwrap();
        assert_eq!(cfg.lambda, 0.6);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.tau, TrainConfig::default().tau);
    }

    #[test]
    fn null_config_is_default() {
        let cfg: SynthConfig = unsafe { config_arg(ptr::null(), "c") }.unwrap();
        assert_eq!(cfg, SynthConfig::default());
    }

    #[test]
    fn non_object_config_is_rejected() {
        let json = CString::new("[1, 2]").unwrap();
        let err = unsafe { config_arg::<TrainConfig>(json.as_ptr(), "c") }.unwrap_err();
        assert_eq!(err.0, SciuStatus::Parse);
    }

    #[test]
    fn status_codes_follow_error_kind() {
        assert_eq!(
            status_of(&SciuError::AllPruned {
                epoch: 1,
                lambda: 0.5
            }),
            SciuStatus::Degenerate
        );
        assert_eq!(
            status_of(&SciuError::NonFinite {
                epoch: 1,
                batch: 0,
                sample_ids: vec![]
            }),
            SciuStatus::Numeric
        );
        assert_eq!(
            status_of(&SciuError::Usage("x".into())),
            SciuStatus::InvalidArgument
        );
    }

    #[test]
    fn panics_become_internal() {
        assert_eq!(guard(|| panic!("boom")), SciuStatus::Internal);
        assert!(!sciu_last_error().is_null());
        assert_eq!(guard(|| Ok(())), SciuStatus::Ok);
        assert!(sciu_last_error().is_null());
    }
}
