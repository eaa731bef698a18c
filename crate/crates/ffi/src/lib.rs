//! C interface to trained classifiers and error-matrix statistics.
//!
//! Every function returns an `int32_t` status: `PBRNN_OK` (0) or a
//! negative `PBRNN_ERR_*` code. After a failure,
//! [`pbrnn_last_error_message`] describes it. Handles are opaque and
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use pbrnn::assessment::{self, ErrorMatrix};
use pbrnn::checkpoint::Checkpoint;
use pbrnn::math::Vector;
use pbrnn::pipeline::TrainedSystem;
use pbrnn::reference_tables;
use pbrnn::sampling::{SampleClassifier, SampleSequence};
use pbrnn::Error;

pub const PBRNN_OK: i32 = 0;
pub const PBRNN_ERR_NULL: i32 = -1;
pub const PBRNN_ERR_ARGUMENT: i32 = -2;
pub const PBRNN_ERR_SHAPE: i32 = -3;
pub const PBRNN_ERR_FORMAT: i32 = -4;
pub const PBRNN_ERR_IO: i32 = -5;
/// The statistic is undefined for this matrix (e.g. an empty row).
pub const PBRNN_ERR_UNDEFINED: i32 = -6;
pub const PBRNN_ERR_VERIFICATION: i32 = -7;
pub const PBRNN_ERR_PANIC: i32 = -8;

/// A trained classifier loaded from a checkpoint.
pub struct PbrnnModel {
    system: TrainedSystem,
}

/// A square error matrix; rows classified, columns reference.
pub struct PbrnnMatrix {
    inner: ErrorMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Argument(_) | Error::Index(_) | Error::Config { .. } | Error::Boundary { .. } | Error::Unlabeled { .. } => {
            PBRNN_ERR_ARGUMENT
        }
        Error::Shape(_) => PBRNN_ERR_SHAPE,
        Error::Format(_) => PBRNN_ERR_FORMAT,
        Error::Io { .. } => PBRNN_ERR_IO,
        Error::UndefinedKappa(_) => PBRNN_ERR_UNDEFINED,
        Error::Verification(_) => PBRNN_ERR_VERIFICATION,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (i32, String)>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PBRNN_OK,
        Ok(Err((code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(_) => {
            set_last_error("internal panic");
            PBRNN_ERR_PANIC
        }
    }
}

fn lib<T>(r: pbrnn::Result<T>) -> Result<T, (i32, String)> {
    r.map_err(|e| (code_of(&e), e.to_string()))
}

fn null(what: &str) -> (i32, String) {
    (PBRNN_ERR_NULL, format!("{what} is null"))
}

unsafe fn model_ref<'a>(m: *const PbrnnModel) -> Result<&'a PbrnnModel, (i32, String)> {
    m.as_ref().ok_or_else(|| null("model"))
}

unsafe fn matrix_ref<'a>(m: *const PbrnnMatrix) -> Result<&'a PbrnnMatrix, (i32, String)> {
    m.as_ref().ok_or_else(|| null("matrix"))
}

/// Message of the last failure on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pbrnn_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), (i32, String)> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must point to writable
/// storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_model_load(path: *const c_char, out: *mut *mut PbrnnModel) -> i32 {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (PBRNN_ERR_ARGUMENT, "path is not UTF-8".to_string()))?;
        let ckpt = lib(Checkpoint::load(Path::new(path)))?;
        store(out, PbrnnModel { system: ckpt.system })
    })
}

/// Loads a checkpoint from memory.
///
/// # Safety
/// `bytes` must point to `len` readable bytes; `out` as in
/// [`pbrnn_model_load`].
#[no_mangle]
pub unsafe extern "C" fn pbrnn_model_load_bytes(bytes: *const u8, len: usize, out: *mut *mut PbrnnModel) -> i32 {
    guard(|| {
        if bytes.is_null() {
            return Err(null("bytes"));
        }
        let ckpt = lib(Checkpoint::decode(std::slice::from_raw_parts(bytes, len)))?;
        store(out, PbrnnModel { system: ckpt.system })
    })
}

/// # Safety
/// `model` must be null or a handle from `pbrnn_model_load*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_model_free(model: *mut PbrnnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Values per datum (window pixels × bands); 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_model_input_dim(model: *const PbrnnModel) -> usize {
    model.as_ref().map_or(0, |m| m.system.model.input_dim())
}

/// Datums per sample; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_model_seq_len(model: *const PbrnnModel) -> usize {
    model.as_ref().map_or(0, |m| m.system.model.seq_len())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_model_num_classes(model: *const PbrnnModel) -> usize {
    model.as_ref().map_or(0, |m| m.system.model.num_classes())
}

/// System code: 0 pb-rnn, 1 pixel-rnn, 2 pixel-nn-single,
/// 3 pixel-nn-multi, 4 patch-nn-single, 5 patch-nn-multi; -1 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_model_mode(model: *const PbrnnModel) -> i32 {
    model.as_ref().map_or(-1, |m| i32::from(m.system.mode.code()))
}

/// Classifies one sample given as `seq_len` consecutive datums of
/// `input_dim` values (a masked datum is all zeros). Writes the class to
/// `class_out` and, when `probs_out` is non-null, the `num_classes`
/// posterior probabilities.
///
/// # Safety
/// `values` must point to `len` doubles; `probs_out` (if non-null) to
/// `probs_len` writable doubles; `class_out` to one writable `uint32_t`.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_model_classify(
    model: *const PbrnnModel,
    values: *const f64,
    len: usize,
    probs_out: *mut f64,
    probs_len: usize,
    class_out: *mut u32,
) -> i32 {
    guard(|| {
        let m = model_ref(model)?;
        if values.is_null() {
            return Err(null("values"));
        }
        if class_out.is_null() {
            return Err(null("class_out"));
        }
        let (n, p, k) = (m.system.model.seq_len(), m.system.model.input_dim(), m.system.model.num_classes());
        if len != n * p {
            return Err((
                PBRNN_ERR_SHAPE,
                format!("{len} values given, model takes {n} datums of {p}"),
            ));
        }
        if !probs_out.is_null() && probs_len < k {
            return Err((PBRNN_ERR_SHAPE, format!("room for {probs_len} probabilities, model has {k} classes")));
        }
        let values = std::slice::from_raw_parts(values, len);
        let vectors: Vec<Vector> = values.chunks(p).map(|c| Vector::from(c.to_vec())).collect();
        let sample = SampleSequence {
            valid: vectors.iter().map(|v| !v.is_zero()).collect(),
            vectors,
            label: None,
            row: 0,
            col: 0,
        };
        let probs = lib(m.system.model.probabilities(&sample))?;
        let class = pbrnn::math::argmax(&probs);
        if !probs_out.is_null() {
            std::slice::from_raw_parts_mut(probs_out, k).copy_from_slice(&probs);
        }
        *class_out = class as u32;
        Ok(())
    })
}

/// A `k`×`k` matrix of zeros with classes named `0..k`.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_matrix_new(k: usize, out: *mut *mut PbrnnMatrix) -> i32 {
    guard(|| {
        let inner = lib(ErrorMatrix::unnamed(k))?;
        store(out, PbrnnMatrix { inner })
    })
}

/// A `k`×`k` matrix from row-major counts (row = classified class).
///
/// # Safety
/// `counts` must point to `k*k` readable values; `out` as above.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_matrix_from_counts(counts: *const u64, k: usize, out: *mut *mut PbrnnMatrix) -> i32 {
    guard(|| {
        if counts.is_null() {
            return Err(null("counts"));
        }
        let cells = k
            .checked_mul(k)
            .ok_or((PBRNN_ERR_ARGUMENT, format!("{k} classes is too many")))?;
        let flat = std::slice::from_raw_parts(counts, cells);
        let rows: Vec<Vec<u64>> = flat.chunks(k.max(1)).map(<[u64]>::to_vec).collect();
        let inner = lib(ErrorMatrix::from_rows(&rows, (0..k).map(|i| i.to_string()).collect()))?;
        store(out, PbrnnMatrix { inner })
    })
}

/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_matrix_free(matrix: *mut PbrnnMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Adds one observation: classified as `classified`, reference `reference`.
///
/// # Safety
/// `matrix` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_matrix_add(matrix: *mut PbrnnMatrix, classified: usize, reference: usize) -> i32 {
    guard(|| {
        let m = matrix.as_mut().ok_or_else(|| null("matrix"))?;
        let k = m.inner.k();
        if classified >= k || reference >= k {
            return Err((PBRNN_ERR_ARGUMENT, format!("class {} outside {k}", classified.max(reference))));
        }
        m.inner.add(classified, reference);
        Ok(())
    })
}

fn write_out(out: *mut f64, v: f64) -> Result<(), (i32, String)> {
    if out.is_null() {
        return Err(null("output"));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { *out = v };
    Ok(())
}

/// Overall accuracy as a fraction.
///
/// # Safety
/// `matrix` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_matrix_overall_accuracy(matrix: *const PbrnnMatrix, out: *mut f64) -> i32 {
    guard(|| write_out(out, lib(assessment::overall_accuracy(&matrix_ref(matrix)?.inner))?))
}

/// Cohen's kappa; `PBRNN_ERR_UNDEFINED` when chance agreement is total.
///
/// # Safety
/// `matrix` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_matrix_overall_kappa(matrix: *const PbrnnMatrix, out: *mut f64) -> i32 {
    guard(|| write_out(out, lib(assessment::overall_kappa(&matrix_ref(matrix)?.inner))?))
}

/// Producer's accuracy, user's accuracy and conditional kappa of one
/// class. An undefined value is written as NaN.
///
/// # Safety
/// `matrix` must be a live handle; the three outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_matrix_class_stats(
    matrix: *const PbrnnMatrix,
    class: usize,
    producer_out: *mut f64,
    user_out: *mut f64,
    kappa_out: *mut f64,
) -> i32 {
    guard(|| {
        let m = &matrix_ref(matrix)?.inner;
        let (pa, ua) = lib(assessment::producer_user_accuracy(m, class))?;
        let kappa = match assessment::conditional_kappa(m, class) {
            Ok(k) => k,
            Err(Error::UndefinedKappa(_)) => f64::NAN,
            Err(e) => return Err((code_of(&e), e.to_string())),
        };
        write_out(producer_out, pa.unwrap_or(f64::NAN))?;
        write_out(user_out, ua.unwrap_or(f64::NAN))?;
        write_out(kappa_out, kappa)
    })
}

/// Total count of the matrix, or 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbrnn_matrix_total(matrix: *const PbrnnMatrix) -> u64 {
    matrix.as_ref().map_or(0, |m| m.inner.total())
}

/// Recomputes the bundled published tables; `PBRNN_ERR_VERIFICATION`
/// names the failing ones in the last-error message.
#[no_mangle]
pub extern "C" fn pbrnn_verify_tables() -> i32 {
    guard(|| {
        let checks = lib(reference_tables::verify_all())?;
        let failed: Vec<String> = checks.iter().filter(|c| !c.passed()).map(|c| c.summary_line()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err((PBRNN_ERR_VERIFICATION, failed.join("; ")))
        }
    })
}
