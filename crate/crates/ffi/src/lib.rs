//! C interface to impsep.
//!
//! Every fallible call returns an [`ImpsepStatus`]; on failure a message is
//! kept per thread and read back with [`impsep_last_error_message`]. Sample
//! buffers are `double` arrays owned by the caller. Output buffers must hold
//! `len` samples.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use impsep::baselines::{hpss_separate, wavelet_impulse_separate};
use impsep::config::GlobalConfig;
use impsep::filtering::{separate_oracle, SeparationMode};
use impsep::metrics::{loss_total, si_sdr};
use impsep::{AudioBuffer, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpsepStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    SingularSystem = 4,
    InconsistentStems = 5,
    UndefinedReference = 6,
    Io = 7,
    Panic = 8,
}

pub const IMPSEP_MODE_ERB_ONLY: u32 = 0;
pub const IMPSEP_MODE_DF_ONLY: u32 = 1;
pub const IMPSEP_MODE_TWO_STAGE: u32 = 2;

/// Weighted loss terms; `total` is their sum.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ImpsepLossBreakdown {
    pub impulsive: f64,
    pub stationary: f64,
    pub mixture: f64,
    pub total: f64,
}

/// Opaque configuration shared by the separation and loss calls.
pub struct ImpsepSeparator {
    config: GlobalConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> ImpsepStatus {
    match e {
        Error::InvalidInput(_) | Error::Packing(_) => ImpsepStatus::InvalidInput,
        Error::InvalidConfig(_) | Error::Toml(_) => ImpsepStatus::InvalidConfig,
        Error::SingularSystem { .. } => ImpsepStatus::SingularSystem,
        Error::InconsistentStems { .. } => ImpsepStatus::InconsistentStems,
        Error::UndefinedReference => ImpsepStatus::UndefinedReference,
        Error::Io { .. } | Error::Wav { .. } | Error::Json(_) => ImpsepStatus::Io,
    }
}

fn fail(e: Error) -> ImpsepStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn guard(f: impl FnOnce() -> Result<(), ImpsepStatus>) -> ImpsepStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ImpsepStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            ImpsepStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], ImpsepStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(ImpsepStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], ImpsepStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(ImpsepStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn separator<'a>(p: *const ImpsepSeparator) -> Result<&'a ImpsepSeparator, ImpsepStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("separator is null");
        ImpsepStatus::NullPointer
    })
}

fn audio(x: &[f64], rate: u32) -> Result<AudioBuffer, ImpsepStatus> {
    AudioBuffer::new(x.to_vec(), rate).map_err(fail)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn impsep_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn impsep_schema_version() -> u32 {
    impsep::SCHEMA_VERSION
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn impsep_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Creates a separator from a TOML configuration, or from defaults when
/// `config_toml` is NULL. Free with `impsep_separator_free`.
///
/// # Safety
/// `config_toml` must be NULL or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn impsep_separator_new(
    config_toml: *const c_char,
    out: *mut *mut ImpsepSeparator,
) -> ImpsepStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return Err(ImpsepStatus::NullPointer);
        }
        let config = if config_toml.is_null() {
            GlobalConfig::default()
        } else {
            let text = CStr::from_ptr(config_toml).to_str().map_err(|_| {
                set_error("configuration is not UTF-8");
                ImpsepStatus::InvalidConfig
            })?;
            GlobalConfig::from_toml_str(text).map_err(fail)?
        };
        *out = Box::into_raw(Box::new(ImpsepSeparator { config }));
        Ok(())
    })
}

/// # Safety
/// `sep` must be NULL or a pointer returned by `impsep_separator_new` that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn impsep_separator_free(sep: *mut ImpsepSeparator) {
    if !sep.is_null() {
        drop(Box::from_raw(sep));
    }
}

unsafe fn run_separation(
    mixture: *const f64,
    len: usize,
    sample_rate: u32,
    out_impulsive: *mut f64,
    out_stationary: *mut f64,
    f: impl FnOnce(&AudioBuffer) -> impsep::Result<(AudioBuffer, AudioBuffer)>,
) -> ImpsepStatus {
    guard(|| {
        let mix = audio(input(mixture, len, "mixture")?, sample_rate)?;
        let oi = output(out_impulsive, len, "out_impulsive")?;
        let os = output(out_stationary, len, "out_stationary")?;
        let (i, s) = f(&mix).map_err(fail)?;
        oi.copy_from_slice(i.samples());
        os.copy_from_slice(s.samples());
        Ok(())
    })
}

/// Median-filtering harmonic/percussive split using the separator's HPSS
/// and STFT settings.
///
/// # Safety
/// `sep` must be a live separator; `mixture`, `out_impulsive` and
/// `out_stationary` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn impsep_separate_hpss(
    sep: *const ImpsepSeparator,
    mixture: *const f64,
    len: usize,
    sample_rate: u32,
    out_impulsive: *mut f64,
    out_stationary: *mut f64,
) -> ImpsepStatus {
    let sep = match separator(sep) {
        Ok(s) => s,
        Err(s) => return s,
    };
    run_separation(mixture, len, sample_rate, out_impulsive, out_stationary, |m| {
        hpss_separate(m, &sep.config.hpss, &sep.config.stft)
    })
}

/// Wavelet-threshold impulse extraction.
///
/// # Safety
/// As for `impsep_separate_hpss`.
#[no_mangle]
pub unsafe extern "C" fn impsep_separate_wavelet(
    sep: *const ImpsepSeparator,
    mixture: *const f64,
    len: usize,
    sample_rate: u32,
    out_impulsive: *mut f64,
    out_stationary: *mut f64,
) -> ImpsepStatus {
    let sep = match separator(sep) {
        Ok(s) => s,
        Err(s) => return s,
    };
    run_separation(mixture, len, sample_rate, out_impulsive, out_stationary, |m| {
        wavelet_impulse_separate(m, &sep.config.wavelet)
    })
}

/// Two-stage filtering with gains and filters fitted to the given true
/// stems. `mode` is one of the `IMPSEP_MODE_*` constants.
///
/// # Safety
/// As for `impsep_separate_hpss`; `impulsive_ref` and `stationary_ref` must
/// also point to `len` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn impsep_separate_oracle(
    sep: *const ImpsepSeparator,
    mode: u32,
    mixture: *const f64,
    impulsive_ref: *const f64,
    stationary_ref: *const f64,
    len: usize,
    sample_rate: u32,
    out_impulsive: *mut f64,
    out_stationary: *mut f64,
) -> ImpsepStatus {
    let sep = match separator(sep) {
        Ok(s) => s,
        Err(s) => return s,
    };
    let mode = match mode {
        IMPSEP_MODE_ERB_ONLY => SeparationMode::ErbOnly,
        IMPSEP_MODE_DF_ONLY => SeparationMode::DfOnly,
        IMPSEP_MODE_TWO_STAGE => SeparationMode::TwoStage,
        other => {
            set_error(format!("unknown mode {other}"));
            return ImpsepStatus::InvalidInput;
        }
    };
    let refs = (|| -> Result<(AudioBuffer, AudioBuffer), ImpsepStatus> {
        Ok((
            audio(input(impulsive_ref, len, "impulsive_ref")?, sample_rate)?,
            audio(input(stationary_ref, len, "stationary_ref")?, sample_rate)?,
        ))
    })();
    let (ri, rs) = match refs {
        Ok(r) => r,
        Err(s) => return s,
    };
    run_separation(mixture, len, sample_rate, out_impulsive, out_stationary, |m| {
        separate_oracle(m, &ri, &rs, &sep.config.two_stage, mode, &sep.config.stft)
    })
}

/// Scale-invariant SDR of `est` against `reference`, in dB.
///
/// # Safety
/// `est` and `reference` must point to `len` doubles; `out_db` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn impsep_si_sdr(
    est: *const f64,
    reference: *const f64,
    len: usize,
    out_db: *mut f64,
) -> ImpsepStatus {
    guard(|| {
        let e = input(est, len, "est")?;
        let r = input(reference, len, "reference")?;
        if out_db.is_null() {
            set_error("out_db is null");
            return Err(ImpsepStatus::NullPointer);
        }
        *out_db = si_sdr(e, r).map_err(fail)?;
        Ok(())
    })
}

/// Weighted spectral loss of a pair of estimates, with the separator's
/// loss settings.
///
/// # Safety
/// All signal pointers must point to `len` doubles; `sep` must be live and
/// `out` valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn impsep_loss_total(
    sep: *const ImpsepSeparator,
    est_impulsive: *const f64,
    est_stationary: *const f64,
    ref_impulsive: *const f64,
    ref_stationary: *const f64,
    mixture: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut ImpsepLossBreakdown,
) -> ImpsepStatus {
    guard(|| {
        let sep = separator(sep)?;
        if out.is_null() {
            set_error("out is null");
            return Err(ImpsepStatus::NullPointer);
        }
        let buf = |p, what| -> Result<AudioBuffer, ImpsepStatus> { audio(input(p, len, what)?, sample_rate) };
        let b = loss_total(
            &buf(est_impulsive, "est_impulsive")?,
            &buf(est_stationary, "est_stationary")?,
            &buf(ref_impulsive, "ref_impulsive")?,
            &buf(ref_stationary, "ref_stationary")?,
            &buf(mixture, "mixture")?,
            &sep.config.loss,
        )
        .map_err(fail)?;
        *out = ImpsepLossBreakdown {
            impulsive: b.impulsive,
            stationary: b.stationary,
            mixture: b.mixture,
            total: b.total,
        };
        Ok(())
    })
}
