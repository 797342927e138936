//! C interface to the micronas model runtime.
//!
//! Every function returns an [`MnasStatus`]. On failure a description is
//! kept per thread and can be read with [`mnas_last_error`]. Handles are
//! opaque; free them with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use micronas::baselines::{self, EnsembleModel};
use micronas::data::{Sample, WindowConfig, CHANNELS};
use micronas::nn::{load_model, load_model_from, save_model, ExportFormat, Model};
use micronas::space::{param_count, text, FeatureShape};
use micronas::tensor::Tensor;
use micronas::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MnasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Data = 6,
    BufferTooSmall = 7,
    Panic = 8,
    Internal = 9,
}

/// A loaded network.
pub struct MnasModel {
    inner: Model<f32>,
}

/// A loaded tree ensemble.
pub struct MnasEnsemble {
    inner: EnsembleModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> MnasStatus {
    match err.root() {
        Error::Io { .. } => MnasStatus::Io,
        Error::Format(_) => MnasStatus::Format,
        Error::Shape(_) | Error::UnresolvableShape { .. } => MnasStatus::Shape,
        Error::InvalidArgument(_) | Error::Grammar(_) | Error::Config(_) => MnasStatus::InvalidArgument,
        Error::Data(_) | Error::Schema { .. } | Error::NonFinite(_) => MnasStatus::Data,
        _ => MnasStatus::Internal,
    }
}

struct Fail(MnasStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MnasStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MnasStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            MnasStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MnasStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Fail(MnasStatus::InvalidArgument, "path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut_arg<'a, T>(ptr: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn out_arg<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or_else(|| null(what))
}

/// Copies `text` plus a terminating NUL into `buf` when it fits; `needed`
/// always receives the required size including the NUL.
unsafe fn write_text(text: &str, buf: *mut c_char, capacity: usize, needed: *mut usize) -> Result<(), Fail> {
    let bytes = text.as_bytes();
    if let Some(n) = needed.as_mut() {
        *n = bytes.len() + 1;
    }
    if capacity < bytes.len() + 1 {
        return Err(Fail(
            MnasStatus::BufferTooSmall,
            format!("buffer of {capacity} bytes, {} needed", bytes.len() + 1),
        ));
    }
    let out = slice_mut_arg(buf as *mut u8, capacity, "buffer")?;
    out[..bytes.len()].copy_from_slice(bytes);
    out[bytes.len()] = 0;
    Ok(())
}

/// Message describing the most recent failure on this thread, or NULL.
/// The pointer stays valid until the next call into this library from the
/// same thread.
#[no_mangle]
pub extern "C" fn mnas_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mnas_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Loads a network file (dense or sparse).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mnas_model_load(path: *const c_char, out: *mut *mut MnasModel) -> MnasStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let model = load_model::<f32>(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(MnasModel { inner: model }));
        Ok(())
    })
}

/// Loads a network from an in-memory file image.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mnas_model_load_bytes(data: *const u8, len: usize, out: *mut *mut MnasModel) -> MnasStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let bytes = slice_arg(data, len, "data")?;
        let model = load_model_from::<f32, _>(bytes)?;
        *out = Box::into_raw(Box::new(MnasModel { inner: model }));
        Ok(())
    })
}

/// Writes the model; `sparse` selects the bitmap-compressed layout.
///
/// # Safety
/// `model` must come from a load call and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mnas_model_save(model: *const MnasModel, path: *const c_char, sparse: bool) -> MnasStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let format = if sparse {
            ExportFormat::Sparse
        } else {
            ExportFormat::Dense
        };
        save_model(&m.inner, format, path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mnas_model_free(model: *mut MnasModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input shape per example. Sequence models report `length` timesteps of
/// `channels` values; flat models report `length = 0` and the feature
/// count in `channels`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mnas_model_input_shape(
    model: *const MnasModel,
    length: *mut usize,
    channels: *mut usize,
) -> MnasStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let (l, c) = match m.inner.input_shape() {
            FeatureShape::Seq { len, channels } => (len, channels),
            FeatureShape::Flat(n) => (0, n),
        };
        *out_arg(length, "length")? = l;
        *out_arg(channels, "channels")? = c;
        Ok(())
    })
}

/// Total and nonzero parameter counts, and memory in KB (nonzero × 4 / 1024).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mnas_model_stats(
    model: *const MnasModel,
    total_params: *mut usize,
    nonzero_params: *mut usize,
    memory_kb: *mut f64,
) -> MnasStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out_arg(total_params, "total_params")? = m.inner.param_count();
        *out_arg(nonzero_params, "nonzero_params")? = m.inner.nonzero_params();
        *out_arg(memory_kb, "memory_kb")? = m.inner.memory_kb();
        Ok(())
    })
}

/// Fall probabilities for `batch` examples laid out row-major as
/// `batch × length × channels` (or `batch × features` for flat models).
/// `output` receives `batch` values.
///
/// # Safety
/// `input` must hold `batch` examples and `output` room for `batch` floats.
#[no_mangle]
pub unsafe extern "C" fn mnas_model_predict(
    model: *const MnasModel,
    input: *const f32,
    batch: usize,
    output: *mut f32,
) -> MnasStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if batch == 0 {
            return Ok(());
        }
        let shape = m.inner.input_shape();
        let per = shape.numel();
        let n = batch
            .checked_mul(per)
            .ok_or_else(|| Fail(MnasStatus::InvalidArgument, "batch size overflows".into()))?;
        let x = slice_arg(input, n, "input")?;
        let out = slice_mut_arg(output, batch, "output")?;
        let mut dims = vec![batch];
        dims.extend(shape.dims());
        let probs = m.inner.predict(&Tensor::new(dims, x.to_vec())?)?;
        out.copy_from_slice(probs.data());
        Ok(())
    })
}

/// Writes the architecture text (one layer per line) into `buf`.
/// `needed` receives the size including the terminating NUL, so a call with
/// `capacity = 0` can be used to size the buffer.
///
/// # Safety
/// `buf` must have `capacity` writable bytes; `needed` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mnas_model_describe(
    model: *const MnasModel,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> MnasStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write_text(
            &text::format_spec(m.inner.spec(), m.inner.input_shape()),
            buf,
            capacity,
            needed,
        )
    })
}

/// Memory estimate in KB for an architecture in the text format.
///
/// # Safety
/// `spec_text` must be NUL-terminated and `memory_kb` valid.
#[no_mangle]
pub unsafe extern "C" fn mnas_estimate_memory(spec_text: *const c_char, memory_kb: *mut f64) -> MnasStatus {
    guard(|| {
        if spec_text.is_null() {
            return Err(null("spec_text"));
        }
        let s = CStr::from_ptr(spec_text)
            .to_str()
            .map_err(|_| Fail(MnasStatus::InvalidArgument, "spec text is not valid UTF-8".into()))?;
        let (spec, input) = text::parse_spec(s)?;
        *out_arg(memory_kb, "memory_kb")? = param_count(&spec, input)?.kilobytes;
        Ok(())
    })
}

/// Loads a tree-ensemble file.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mnas_ensemble_load(path: *const c_char, out: *mut *mut MnasEnsemble) -> MnasStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let e = baselines::load_ensemble(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(MnasEnsemble { inner: e }));
        Ok(())
    })
}

/// Releases an ensemble. NULL is ignored.
///
/// # Safety
/// `ensemble` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mnas_ensemble_free(ensemble: *mut MnasEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Per-sample class (0 ADL, 1 fall) for `n` rows of 6 values each.
///
/// # Safety
/// `samples` must hold `6 × n` doubles and `labels` room for `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn mnas_ensemble_predict(
    ensemble: *const MnasEnsemble,
    samples: *const f64,
    n: usize,
    labels: *mut u8,
) -> MnasStatus {
    guard(|| {
        let e = ensemble.as_ref().ok_or_else(|| null("ensemble"))?;
        let len = n
            .checked_mul(CHANNELS)
            .ok_or_else(|| Fail(MnasStatus::InvalidArgument, "sample count overflows".into()))?;
        let flat = slice_arg(samples, len, "samples")?;
        let rows: Vec<Sample> = flat.chunks_exact(CHANNELS).map(|c| c.try_into().unwrap()).collect();
        slice_mut_arg(labels, n, "labels")?.copy_from_slice(&e.inner.predict_samples(&rows));
        Ok(())
    })
}

/// Majority vote over 120-prediction windows with a 12-sample hop.
/// `written` receives the window count; `output` must have room for it
/// (`(n - 120) / 12 + 1`).
///
/// # Safety
/// `predictions` must hold `n` bytes and `output` `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn mnas_smooth_predictions(
    predictions: *const u8,
    n: usize,
    output: *mut u8,
    capacity: usize,
    written: *mut usize,
) -> MnasStatus {
    guard(|| {
        let preds = slice_arg(predictions, n, "predictions")?;
        let windows = baselines::smooth_predictions(preds, WindowConfig::default())?;
        let written = out_arg(written, "written")?;
        *written = windows.len();
        if capacity < windows.len() {
            return Err(Fail(
                MnasStatus::BufferTooSmall,
                format!("room for {capacity} windows, {} needed", windows.len()),
            ));
        }
        slice_mut_arg(output, capacity, "output")?[..windows.len()].copy_from_slice(&windows);
        Ok(())
    })
}
