//! C ABI over the `deepcfl` crate.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `dcfl_*_new`/`load` style function and released by the matching
//! `dcfl_*_free`. Fallible functions return a [`DcflStatus`] and write their
//! result through an out pointer; the message of the most recent failure on
//! the calling thread is available from [`dcfl_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use deepcfl::backbone::Backbone;
use deepcfl::types::{ImageTensor, Mask, RunConfig, RunReport, Task};
use deepcfl::{io, masking, metrics, trainer, Error};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DcflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Dimension = 4,
    Io = 5,
    /// Training produced a non-finite loss.
    NonFinite = 6,
    Failed = 7,
    Panic = 8,
}

pub struct DcflImage(ImageTensor);
pub struct DcflMask(Mask);
pub struct DcflConfig(RunConfig);
pub struct DcflBackbone(Backbone);
pub struct DcflReport(RunReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> DcflStatus {
    match e {
        Error::Config(_) => DcflStatus::Config,
        Error::Dimension { .. } => DcflStatus::Dimension,
        Error::Image(_) | Error::Mask(_) | Error::Metric(_) => DcflStatus::InvalidArgument,
        Error::Io { .. } | Error::Decode { .. } => DcflStatus::Io,
        Error::NonFinite { .. } => DcflStatus::NonFinite,
        _ => DcflStatus::Failed,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), DcflStatus>) -> DcflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DcflStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            DcflStatus::Panic
        }
    }
}

fn fail(e: Error) -> DcflStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> DcflStatus {
    set_error(format!("{what} is null"));
    DcflStatus::NullPointer
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, DcflStatus> {
    // SAFETY: caller passes a pointer obtained from this library or null.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn borrow_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, DcflStatus> {
    // SAFETY: as for `borrow`, and the caller holds no other reference.
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn text(p: *const c_char, what: &str) -> Result<String, DcflStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller guarantees a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) };
    s.to_str().map(str::to_owned).map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        DcflStatus::InvalidArgument
    })
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), DcflStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: checked non-null; the caller owns the slot.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn put_value<T>(out: *mut T, value: T) -> Result<(), DcflStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: checked non-null.
    unsafe { *out = value };
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: pointer came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn dcfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dcfl_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by CString::into_raw.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Creates an image from `height*width*3` interleaved RGB values in `[0,1]`.
///
/// # Safety
/// `hwc` must point to `height*width*3` readable floats; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_image_new(height: usize, width: usize, hwc: *const f32, out: *mut *mut DcflImage) -> DcflStatus {
    guard(|| {
        if hwc.is_null() {
            return Err(null("hwc"));
        }
        // SAFETY: caller guarantees the length.
        let data = unsafe { std::slice::from_raw_parts(hwc, height * width * 3) };
        let img = ImageTensor::from_interleaved(height, width, data).map_err(fail)?;
        unsafe { put(out, DcflImage(img)) }
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_image_load(path: *const c_char, out: *mut *mut DcflImage) -> DcflStatus {
    guard(|| {
        let p = unsafe { text(path, "path") }?;
        let img = io::load_image(&PathBuf::from(p)).map_err(fail)?;
        unsafe { put(out, DcflImage(img)) }
    })
}

/// Writes an 8-bit PNG.
///
/// # Safety
/// `image` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dcfl_image_save(image: *const DcflImage, path: *const c_char) -> DcflStatus {
    guard(|| {
        let img = unsafe { borrow(image, "image") }?;
        let p = unsafe { text(path, "path") }?;
        io::save_image(&img.0, &PathBuf::from(p)).map_err(fail)
    })
}

/// # Safety
/// `image` must be a live handle; `height` and `width` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_image_dims(image: *const DcflImage, height: *mut usize, width: *mut usize) -> DcflStatus {
    guard(|| {
        let img = unsafe { borrow(image, "image") }?;
        unsafe { put_value(height, img.0.height()) }?;
        unsafe { put_value(width, img.0.width()) }
    })
}

/// Copies interleaved RGB values into `buf`, which holds `len` floats.
///
/// # Safety
/// `image` must be a live handle; `buf` must have room for `len` floats.
#[no_mangle]
pub unsafe extern "C" fn dcfl_image_read(image: *const DcflImage, buf: *mut f32, len: usize) -> DcflStatus {
    guard(|| {
        let img = unsafe { borrow(image, "image") }?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let hwc = img.0.to_interleaved();
        if len < hwc.len() {
            set_error(format!("buffer holds {len} values, need {}", hwc.len()));
            return Err(DcflStatus::InvalidArgument);
        }
        // SAFETY: length checked above.
        unsafe { ptr::copy_nonoverlapping(hwc.as_ptr(), buf, hwc.len()) };
        Ok(())
    })
}

/// # Safety
/// `image` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcfl_image_free(image: *mut DcflImage) {
    unsafe { release(image) }
}

/// Outpainting mask removing `round(width*fraction)` border columns.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_mask_outpaint(height: usize, width: usize, fraction: f64, out: *mut *mut DcflMask) -> DcflStatus {
    guard(|| {
        let m = masking::make_outpaint_mask(height, width, fraction).map_err(fail)?;
        unsafe { put(out, DcflMask(m)) }
    })
}

/// Mask with exactly `round(height*width*percent/100)` missing pixels.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_mask_random(height: usize, width: usize, percent: f64, seed: u64, out: *mut *mut DcflMask) -> DcflStatus {
    guard(|| {
        let m = masking::make_random_mask(height, width, percent, seed).map_err(fail)?;
        unsafe { put(out, DcflMask(m)) }
    })
}

/// Reads a raster mask (dark = missing) that must be `height x width`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_mask_load(path: *const c_char, height: usize, width: usize, out: *mut *mut DcflMask) -> DcflStatus {
    guard(|| {
        let p = unsafe { text(path, "path") }?;
        let m = masking::load_mask(&PathBuf::from(p), (height, width)).map_err(fail)?;
        unsafe { put(out, DcflMask(m)) }
    })
}

/// # Safety
/// `mask` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_mask_zero_count(mask: *const DcflMask, count: *mut usize) -> DcflStatus {
    guard(|| {
        let m = unsafe { borrow(mask, "mask") }?;
        unsafe { put_value(count, m.0.zero_count()) }
    })
}

/// # Safety
/// `mask` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcfl_mask_free(mask: *mut DcflMask) {
    unsafe { release(mask) }
}

/// `image ⊙ mask` as a new image.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_corrupt(image: *const DcflImage, mask: *const DcflMask, out: *mut *mut DcflImage) -> DcflStatus {
    guard(|| {
        let img = unsafe { borrow(image, "image") }?;
        let m = unsafe { borrow(mask, "mask") }?;
        let r = masking::corrupt(&img.0, &m.0).map_err(fail)?;
        unsafe { put(out, DcflImage(r)) }
    })
}

/// Known pixels from `source`, holes from `restored`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_composite(
    restored: *const DcflImage,
    source: *const DcflImage,
    mask: *const DcflMask,
    out: *mut *mut DcflImage,
) -> DcflStatus {
    guard(|| {
        let r = unsafe { borrow(restored, "restored") }?;
        let s = unsafe { borrow(source, "source") }?;
        let m = unsafe { borrow(mask, "mask") }?;
        let c = masking::composite(&r.0, &s.0, &m.0).map_err(fail)?;
        unsafe { put(out, DcflImage(c)) }
    })
}

/// # Safety
/// Handles must be live; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_psnr(a: *const DcflImage, b: *const DcflImage, value: *mut f64) -> DcflStatus {
    guard(|| {
        let (a, b) = unsafe { (borrow(a, "a")?, borrow(b, "b")?) };
        let v = metrics::psnr(&a.0, &b.0).map_err(fail)?;
        unsafe { put_value(value, v) }
    })
}

/// # Safety
/// Handles must be live; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_ssim(a: *const DcflImage, b: *const DcflImage, value: *mut f64) -> DcflStatus {
    guard(|| {
        let (a, b) = unsafe { (borrow(a, "a")?, borrow(b, "b")?) };
        let v = metrics::ssim(&a.0, &b.0).map_err(fail)?;
        unsafe { put_value(value, v) }
    })
}

/// SSIM averaged over the mask's missing pixels.
///
/// # Safety
/// Handles must be live; `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_masked_ssim(a: *const DcflImage, b: *const DcflImage, mask: *const DcflMask, value: *mut f64) -> DcflStatus {
    guard(|| {
        let (a, b) = unsafe { (borrow(a, "a")?, borrow(b, "b")?) };
        let m = unsafe { borrow(mask, "mask") }?;
        let v = metrics::masked_ssim(&a.0, &b.0, &m.0).map_err(fail)?;
        unsafe { put_value(value, v) }
    })
}

fn task_from(name: &str) -> Result<Task, DcflStatus> {
    Ok(match name {
        "outpaint" => Task::Outpaint,
        "inpaint" => Task::Inpaint,
        "restore_random" => Task::RestoreRandom,
        "restore_wordcloud" => Task::RestoreWordcloud,
        "resize" => Task::Resize,
        other => {
            set_error(format!("unknown task {other}"));
            return Err(DcflStatus::InvalidArgument);
        }
    })
}

/// Default configuration for a task name such as `"restore_random"`.
///
/// # Safety
/// `task` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_config_new(task: *const c_char, out: *mut *mut DcflConfig) -> DcflStatus {
    guard(|| {
        let t = task_from(&unsafe { text(task, "task") }?)?;
        unsafe { put(out, DcflConfig(RunConfig::new(t))) }
    })
}

/// Parses a TOML configuration document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_config_from_toml(toml: *const c_char, out: *mut *mut DcflConfig) -> DcflStatus {
    guard(|| {
        let s = unsafe { text(toml, "toml") }?;
        let c = RunConfig::from_toml_str(&s).map_err(fail)?;
        unsafe { put(out, DcflConfig(c)) }
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcfl_config_set_iterations(config: *mut DcflConfig, iterations: usize) -> DcflStatus {
    guard(|| {
        unsafe { borrow_mut(config, "config") }?.0.iterations = iterations;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcfl_config_set_seed(config: *mut DcflConfig, seed: u64) -> DcflStatus {
    guard(|| {
        unsafe { borrow_mut(config, "config") }?.0.seed = seed;
        Ok(())
    })
}

/// Sets the four loss weights (generator, reconstruction, adversarial,
/// contextual).
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcfl_config_set_weights(
    config: *mut DcflConfig,
    lambda_g: f64,
    lambda_r: f64,
    lambda_cal: f64,
    lambda_cvl: f64,
) -> DcflStatus {
    guard(|| {
        let w = &mut unsafe { borrow_mut(config, "config") }?.0.loss_weights;
        w.lambda_g = lambda_g;
        w.lambda_r = lambda_r;
        w.lambda_cal = lambda_cal;
        w.lambda_cvl = lambda_cvl;
        Ok(())
    })
}

/// Serializes the configuration as TOML; free with [`dcfl_string_free`].
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_config_to_toml(config: *const DcflConfig, out: *mut *mut c_char) -> DcflStatus {
    guard(|| {
        let c = unsafe { borrow(config, "config") }?;
        let s = c.0.to_toml_string().map_err(fail)?;
        let cs = CString::new(s).map_err(|_| DcflStatus::Failed)?;
        unsafe { put_value(out, cs.into_raw()) }
    })
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcfl_config_free(config: *mut DcflConfig) {
    unsafe { release(config) }
}

/// Opens the perceptual backbone: `"random"` for the seeded stand-in, a
/// weight file path, or an empty string for the weights cache directory.
///
/// # Safety
/// `setting` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_backbone_open(setting: *const c_char, out: *mut *mut DcflBackbone) -> DcflStatus {
    guard(|| {
        let s = unsafe { text(setting, "setting") }?;
        let b = Backbone::from_setting(&s).map_err(fail)?;
        unsafe { put(out, DcflBackbone(b)) }
    })
}

/// # Safety
/// `backbone` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcfl_backbone_free(backbone: *mut DcflBackbone) {
    unsafe { release(backbone) }
}

/// Restores `source` under `mask`. Writes the output image and the report.
///
/// # Safety
/// Handles must be live; both out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_train_restore(
    source: *const DcflImage,
    mask: *const DcflMask,
    config: *const DcflConfig,
    backbone: *const DcflBackbone,
    out_image: *mut *mut DcflImage,
    out_report: *mut *mut DcflReport,
) -> DcflStatus {
    guard(|| {
        let s = unsafe { borrow(source, "source") }?;
        let m = unsafe { borrow(mask, "mask") }?;
        let c = unsafe { borrow(config, "config") }?;
        let b = unsafe { borrow(backbone, "backbone") }?;
        if out_image.is_null() || out_report.is_null() {
            return Err(null("out"));
        }
        let (img, report) = trainer::train_restore(&s.0, &m.0, &c.0, &b.0).map_err(fail)?;
        unsafe { put(out_image, DcflImage(img)) }?;
        unsafe { put(out_report, DcflReport(report)) }
    })
}

/// Number of completed iterations and the final total loss.
///
/// # Safety
/// `report` must be a live handle; out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_report_summary(report: *const DcflReport, iterations: *mut usize, final_tl: *mut f64) -> DcflStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        unsafe { put_value(iterations, r.0.iterations) }?;
        let tl = r.0.trace.last().map_or(f64::NAN, |b| b.tl);
        unsafe { put_value(final_tl, tl) }
    })
}

/// The report as JSON; free with [`dcfl_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcfl_report_json(report: *const DcflReport, out: *mut *mut c_char) -> DcflStatus {
    guard(|| {
        let r = unsafe { borrow(report, "report") }?;
        let s = serde_json::to_string(&r.0).map_err(|e| {
            set_error(e.to_string());
            DcflStatus::Failed
        })?;
        let cs = CString::new(s).map_err(|_| DcflStatus::Failed)?;
        unsafe { put_value(out, cs.into_raw()) }
    })
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dcfl_report_free(report: *mut DcflReport) {
    unsafe { release(report) }
}
