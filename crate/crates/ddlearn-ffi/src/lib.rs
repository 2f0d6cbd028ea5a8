//! C ABI for the dictionary-learning toolkit: opaque model handles, status
//! codes, and a thread-local last-error message. The header is generated
//! into `include/ddlearn.h` by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ndarray::{Array2, ArrayView1};

use ddlearn::classifiers::LabelMatrix;
use ddlearn::dictionary::InitKind;
use ddlearn::error::Error;
use ddlearn::inference::{predict, PredictMode, PredictOptions};
use ddlearn::losses::LossKind;
use ddlearn::model::{load_model, save_model};
use ddlearn::trainer::{train, train_baseline, DdlModel, TrainConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    DataError = 3,
    NumericError = 4,
    IoError = 5,
    InternalError = 6,
}

/// Classification loss selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdlLoss {
    Square = 0,
    Exponential = 1,
    Logistic = 2,
    SmoothHinge = 3,
}

/// Dictionary initialization selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdlInit {
    FromSamples = 0,
    GaussianRandom = 1,
}

/// Inference mode selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdlMode {
    FastTsc = 0,
    FullDsc = 1,
}

/// Training hyperparameters. `ridge < 0` selects the default (`1e-6 * N`);
/// `hinge_rho`/`hinge_eps` only matter for the smooth hinge loss.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DdlTrainConfig {
    pub k: u32,
    pub t: u32,
    pub loss: DdlLoss,
    pub hinge_rho: f64,
    pub hinge_eps: f64,
    pub q_max: u32,
    pub p_max: u32,
    pub stop_rel_change: f64,
    pub ridge: f64,
    pub init: DdlInit,
    pub seed: u64,
    /// Nonzero trains the decoupled baseline instead of the joint model.
    pub baseline: u8,
}

/// Prediction options mirroring the library's inference settings.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DdlPredictOptions {
    pub mode: DdlMode,
    /// Nonzero encodes over the identity-augmented dictionary.
    pub robust: u8,
    pub t_test: u32,
    pub e_budget: u32,
}

/// Opaque trained-model handle.
pub struct DdlModelHandle {
    model: DdlModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let cstr = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstr));
}

fn status_for(err: &Error) -> DdlStatus {
    match err {
        Error::InvalidConfig(_) | Error::NonFinite(_) | Error::DimensionMismatch { .. } => {
            DdlStatus::InvalidArgument
        }
        Error::NonConvergence(_) | Error::Numeric(_) => DdlStatus::NumericError,
        Error::Io { .. } => DdlStatus::IoError,
        _ => DdlStatus::DataError,
    }
}

fn fail(err: Error) -> DdlStatus {
    let status = status_for(&err);
    set_last_error(err.to_string());
    status
}

fn guarded(body: impl FnOnce() -> DdlStatus) -> DdlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic".into());
            DdlStatus::InternalError
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ddl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Last error message for this thread, or NULL when none was recorded.
/// Free the returned string with `ddl_string_free`.
#[no_mangle]
pub extern "C" fn ddl_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Frees a string previously returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer returned by `ddl_last_error_message`,
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Frees a model handle. NULL is a no-op.
///
/// # Safety
/// `handle` must be NULL or a pointer returned by a model-producing
/// function of this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddl_model_free(handle: *mut DdlModelHandle) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

unsafe fn cstr_arg(ptr: *const c_char, what: &str) -> Result<String, DdlStatus> {
    if ptr.is_null() {
        set_last_error(format!("{what} is NULL"));
        return Err(DdlStatus::NullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| {
            set_last_error(format!("{what} is not valid UTF-8"));
            DdlStatus::InvalidArgument
        })
}

/// Loads a model file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ddl_model_load(
    path: *const c_char,
    out: *mut *mut DdlModelHandle,
) -> DdlStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("out is NULL".into());
            return DdlStatus::NullArgument;
        }
        let path = match cstr_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_model(&path) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(DdlModelHandle { model }));
                DdlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Saves the handle's model to a file.
///
/// # Safety
/// `handle` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ddl_model_save(
    handle: *const DdlModelHandle,
    path: *const c_char,
) -> DdlStatus {
    guarded(|| {
        if handle.is_null() {
            set_last_error("handle is NULL".into());
            return DdlStatus::NullArgument;
        }
        let path = match cstr_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match save_model(&(*handle).model, &path) {
            Ok(()) => DdlStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Reports the model dimensions. Any output pointer may be NULL to skip it.
///
/// # Safety
/// `handle` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddl_model_dims(
    handle: *const DdlModelHandle,
    out_d: *mut u32,
    out_k: *mut u32,
    out_c: *mut u32,
    out_t: *mut u32,
) -> DdlStatus {
    guarded(|| {
        if handle.is_null() {
            set_last_error("handle is NULL".into());
            return DdlStatus::NullArgument;
        }
        let model = &(*handle).model;
        if !out_d.is_null() {
            *out_d = model.dictionary.signal_dim() as u32;
        }
        if !out_k.is_null() {
            *out_k = model.dictionary.atom_count() as u32;
        }
        if !out_c.is_null() {
            *out_c = model.classifiers.class_count() as u32;
        }
        if !out_t.is_null() {
            *out_t = model.config.t as u32;
        }
        DdlStatus::Ok
    })
}

fn loss_from_ffi(cfg: &DdlTrainConfig) -> Result<LossKind, Error> {
    Ok(match cfg.loss {
        DdlLoss::Square => LossKind::Square,
        DdlLoss::Exponential => LossKind::Exponential,
        DdlLoss::Logistic => LossKind::Logistic,
        DdlLoss::SmoothHinge => LossKind::smooth_hinge(cfg.hinge_rho, cfg.hinge_eps)?,
    })
}

/// Trains a model from raw arrays. `samples` is column-major `d x n`
/// (sample `i` occupies `samples[i*d .. (i+1)*d]`); `labels` holds `n`
/// class indices below `class_count`.
///
/// # Safety
/// `samples` must point to `d * n` doubles, `labels` to `n` u32 values,
/// and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ddl_train_from_arrays(
    samples: *const f64,
    d: usize,
    n: usize,
    labels: *const u32,
    class_count: u32,
    config: DdlTrainConfig,
    out: *mut *mut DdlModelHandle,
) -> DdlStatus {
    guarded(|| {
        if samples.is_null() || labels.is_null() || out.is_null() {
            set_last_error("samples, labels, and out must be non-NULL".into());
            return DdlStatus::NullArgument;
        }
        if d == 0 || n == 0 {
            set_last_error("d and n must be positive".into());
            return DdlStatus::InvalidArgument;
        }
        let flat = std::slice::from_raw_parts(samples, d * n);
        let mut y = Array2::zeros((d, n));
        for i in 0..n {
            for r in 0..d {
                y[(r, i)] = flat[i * d + r];
            }
        }
        let label_slice = std::slice::from_raw_parts(labels, n);
        let labels_vec: Vec<usize> = label_slice.iter().map(|&l| l as usize).collect();
        let lm = match LabelMatrix::from_class_indices(&labels_vec, class_count as usize) {
            Ok(lm) => lm,
            Err(e) => return fail(e),
        };
        let loss = match loss_from_ffi(&config) {
            Ok(l) => l,
            Err(e) => return fail(e),
        };
        let mut tc = TrainConfig::new(config.k as usize, config.t as usize, loss);
        tc.q_max = config.q_max as usize;
        tc.p_max = config.p_max as usize;
        tc.stop_rel_change = config.stop_rel_change;
        tc.ridge = if config.ridge < 0.0 {
            None
        } else {
            Some(config.ridge)
        };
        tc.init_kind = match config.init {
            DdlInit::FromSamples => InitKind::FromSamples,
            DdlInit::GaussianRandom => InitKind::GaussianRandom,
        };
        tc.seed = config.seed;
        let result = if config.baseline != 0 {
            train_baseline(&y.view(), &lm, &tc)
        } else {
            train(&y.view(), &lm, &tc)
        };
        match result {
            Ok(model) => {
                *out = Box::into_raw(Box::new(DdlModelHandle { model }));
                DdlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Predicts the class of one sample. `out_scores`, when non-NULL, receives
/// `C` per-class hypothesis scores.
///
/// # Safety
/// `sample` must point to `len` doubles; `out_class` must be valid;
/// `out_scores` must be NULL or point to `C` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ddl_model_predict(
    handle: *const DdlModelHandle,
    sample: *const f64,
    len: usize,
    options: DdlPredictOptions,
    out_class: *mut u32,
    out_scores: *mut f64,
) -> DdlStatus {
    guarded(|| {
        if handle.is_null() || sample.is_null() || out_class.is_null() {
            set_last_error("handle, sample, and out_class must be non-NULL".into());
            return DdlStatus::NullArgument;
        }
        let model = &(*handle).model;
        let y = std::slice::from_raw_parts(sample, len);
        let opts = PredictOptions {
            mode: match options.mode {
                DdlMode::FastTsc => PredictMode::FastTsc,
                DdlMode::FullDsc => PredictMode::FullDsc,
            },
            robust: options.robust != 0,
            t_test: options.t_test as usize,
            e_budget: options.e_budget as usize,
        };
        match predict(model, &ArrayView1::from(y), &opts) {
            Ok(p) => {
                *out_class = p.class as u32;
                if !out_scores.is_null() {
                    let out = std::slice::from_raw_parts_mut(
                        out_scores,
                        model.classifiers.class_count(),
                    );
                    for (dst, &s) in out.iter_mut().zip(p.scores.iter()) {
                        *dst = s;
                    }
                }
                DdlStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
