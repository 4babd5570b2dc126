//! C ABI over `ssvep-cstl`.
//!
//! Every fallible call returns an [`SsvepStatus`]. On failure the message is
//! kept per thread and can be fetched with [`ssvep_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Sample buffers are channel-major `f64`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ssvep_cstl::decoder::FuzzyDecoder;
use ssvep_cstl::emd::{sift, ImfSet, SiftConfig};
use ssvep_cstl::evaluation::{itr, paired_ttest};
use ssvep_cstl::signal::{Epoch, StimulusSpec};
use ssvep_cstl::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsvepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NonFinite = 4,
    Io = 5,
    Format = 6,
    Numerical = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

impl From<&Error> for SsvepStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Nyquist { .. } | Error::HarmonicCollision(_) => {
                Self::InvalidArgument
            }
            Error::Dimension(_) => Self::Dimension,
            Error::NonFinite(_) => Self::NonFinite,
            Error::Io { .. } | Error::Net(_) => Self::Io,
            Error::Format { .. } | Error::Protocol(_) => Self::Format,
            _ => Self::Numerical,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(SsvepStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

fn fail(status: SsvepStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SsvepStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SsvepStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SsvepStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(SsvepStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(SsvepStatus::NullPointer, format!("{what} is null")))
}

/// Length in bytes of the last error message on this thread, including the
/// terminating NUL. Zero if the last call succeeded.
#[no_mangle]
pub extern "C" fn ssvep_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |m| m.len() + 1))
}

/// Copies the last error message into `buf` as a NUL-terminated string,
/// truncating if needed. Returns the number of bytes the full message needs.
///
/// # Safety
/// `buf` must be valid for `len` writable bytes, or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn ssvep_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ssvep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// A trained fuzzy decoder loaded from a checkpoint.
pub struct SsvepDecoder(FuzzyDecoder);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SsvepDecoderInfo {
    pub fs_hz: f64,
    pub n_channels: usize,
    pub n_classes: usize,
    /// Samples per channel that `ssvep_decoder_classify` expects at minimum.
    pub raw_len: usize,
    pub window_s: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SsvepPrediction {
    pub class_index: usize,
    pub freq_hz: f64,
    pub confidence: f64,
}

/// # Safety
/// `path` must be a NUL-terminated string and `out_decoder` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ssvep_decoder_load(
    path: *const c_char,
    out_decoder: *mut *mut SsvepDecoder,
) -> SsvepStatus {
    guard(|| {
        let slot = out(out_decoder, "out_decoder")?;
        *slot = ptr::null_mut();
        if path.is_null() {
            return Err(fail(SsvepStatus::NullPointer, "path is null"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(SsvepStatus::InvalidArgument, "path is not UTF-8"))?;
        let d = FuzzyDecoder::load(Path::new(path))?;
        *slot = Box::into_raw(Box::new(SsvepDecoder(d)));
        Ok(())
    })
}

/// # Safety
/// `decoder` must come from `ssvep_decoder_load` and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ssvep_decoder_free(decoder: *mut SsvepDecoder) {
    if !decoder.is_null() {
        drop(Box::from_raw(decoder));
    }
}

/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssvep_decoder_info(
    decoder: *const SsvepDecoder,
    info: *mut SsvepDecoderInfo,
) -> SsvepStatus {
    guard(|| {
        let d = &decoder
            .as_ref()
            .ok_or_else(|| fail(SsvepStatus::NullPointer, "decoder is null"))?
            .0;
        *out(info, "info")? = SsvepDecoderInfo {
            fs_hz: d.meta.fs_hz,
            n_channels: d.meta.n_channels,
            n_classes: d.meta.freqs_hz.len(),
            raw_len: d.raw_len(),
            window_s: d.meta.pipeline.window_s,
        };
        Ok(())
    })
}

/// Decodes one raw trial starting at stimulus onset.
///
/// `data` holds `n_channels * n_samples` values, channel-major. If `scores`
/// is non-null it receives the per-class logits and `scores_len` must be at
/// least the class count.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `scores` may be null.
#[no_mangle]
pub unsafe extern "C" fn ssvep_decoder_classify(
    decoder: *const SsvepDecoder,
    data: *const f64,
    n_channels: usize,
    n_samples: usize,
    fs_hz: f64,
    prediction: *mut SsvepPrediction,
    scores: *mut f64,
    scores_len: usize,
) -> SsvepStatus {
    guard(|| {
        let d = &decoder
            .as_ref()
            .ok_or_else(|| fail(SsvepStatus::NullPointer, "decoder is null"))?
            .0;
        let pred_out = out(prediction, "prediction")?;
        let len = n_channels
            .checked_mul(n_samples)
            .ok_or_else(|| fail(SsvepStatus::InvalidArgument, "buffer size overflows"))?;
        let samples = slice(data, len, "data")?;
        let table = d.meta.table()?;
        let placeholder = table.entries()[0];
        let epoch = Epoch::new(samples.to_vec(), n_channels, fs_hz, placeholder, 0)?;
        let p = d.classify_raw(&epoch)?;
        if !scores.is_null() {
            if scores_len < p.logits.len() {
                return Err(fail(
                    SsvepStatus::BufferTooSmall,
                    format!("scores needs {} slots, got {scores_len}", p.logits.len()),
                ));
            }
            std::slice::from_raw_parts_mut(scores, p.logits.len()).copy_from_slice(&p.logits);
        }
        *pred_out = SsvepPrediction {
            class_index: p.class_index,
            freq_hz: table
                .get(p.class_index)
                .map_or(f64::NAN, |s: &StimulusSpec| s.freq_hz),
            confidence: p.confidence,
        };
        Ok(())
    })
}

/// Intrinsic mode functions of one signal, highest frequency first, plus
/// the residue.
pub struct SsvepImfSet(ImfSet);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsvepSiftConfig {
    pub max_imfs: usize,
    pub sd_stop: f64,
    pub max_sift_iters: usize,
}

/// Default sifting controls.
#[no_mangle]
pub extern "C" fn ssvep_sift_config_default() -> SsvepSiftConfig {
    let c = SiftConfig::default();
    SsvepSiftConfig {
        max_imfs: c.max_imfs,
        sd_stop: c.sd_stop,
        max_sift_iters: c.max_sift_iters,
    }
}

/// Decomposes `signal` into IMFs. `config` may be null for defaults.
///
/// # Safety
/// `signal` must hold `len` values; `out_set` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssvep_emd_sift(
    signal: *const f64,
    len: usize,
    fs_hz: f64,
    config: *const SsvepSiftConfig,
    out_set: *mut *mut SsvepImfSet,
) -> SsvepStatus {
    guard(|| {
        let slot = out(out_set, "out_set")?;
        *slot = ptr::null_mut();
        let x = slice(signal, len, "signal")?;
        let cfg = config
            .as_ref()
            .map_or_else(SiftConfig::default, |c| SiftConfig {
                max_imfs: c.max_imfs,
                sd_stop: c.sd_stop,
                max_sift_iters: c.max_sift_iters,
            });
        *slot = Box::into_raw(Box::new(SsvepImfSet(sift(x, fs_hz, &cfg)?)));
        Ok(())
    })
}

/// # Safety
/// `set` must come from `ssvep_emd_sift`. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ssvep_imfs_free(set: *mut SsvepImfSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Number of IMFs, excluding the residue. Zero for a null handle.
///
/// # Safety
/// `set` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ssvep_imfs_count(set: *const SsvepImfSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Samples per component. Zero for a null handle.
///
/// # Safety
/// `set` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ssvep_imfs_signal_len(set: *const SsvepImfSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.signal_len())
}

/// Copies component `index` into `buf`. Index `count` is the residue.
///
/// # Safety
/// `buf` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ssvep_imfs_copy(
    set: *const SsvepImfSet,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> SsvepStatus {
    guard(|| {
        let s = &set
            .as_ref()
            .ok_or_else(|| fail(SsvepStatus::NullPointer, "set is null"))?
            .0;
        let src = match index.cmp(&s.len()) {
            std::cmp::Ordering::Less => &s.imfs[index],
            std::cmp::Ordering::Equal => &s.residue,
            std::cmp::Ordering::Greater => {
                return Err(fail(
                    SsvepStatus::InvalidArgument,
                    format!("component {index} out of range, set has {} IMFs", s.len()),
                ))
            }
        };
        if buf.is_null() {
            return Err(fail(SsvepStatus::NullPointer, "buf is null"));
        }
        if len < src.len() {
            return Err(fail(
                SsvepStatus::BufferTooSmall,
                format!("buf needs {} slots, got {len}", src.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, src.len()).copy_from_slice(src);
        Ok(())
    })
}

/// Information transfer rate in bits per minute.
///
/// # Safety
/// `bits_per_min` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssvep_itr(
    accuracy: f64,
    n_classes: usize,
    t_total_s: f64,
    bits_per_min: *mut f64,
) -> SsvepStatus {
    guard(|| {
        *out(bits_per_min, "bits_per_min")? = itr(accuracy, n_classes, t_total_s)?;
        Ok(())
    })
}

/// Two-sided paired t-test on `a` and `b`, each of length `n`.
///
/// # Safety
/// `a` and `b` must hold `n` values; `t` and `p` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ssvep_paired_ttest(
    a: *const f64,
    b: *const f64,
    n: usize,
    t: *mut f64,
    p: *mut f64,
) -> SsvepStatus {
    guard(|| {
        let r = paired_ttest(slice(a, n, "a")?, slice(b, n, "b")?)?;
        *out(t, "t")? = r.t;
        *out(p, "p")? = r.p;
        Ok(())
    })
}
