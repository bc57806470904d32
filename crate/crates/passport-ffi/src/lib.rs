//! C ABI over the router-geolocation engine.
//!
//! The surface follows the usual opaque-handle pattern: `passport_engine_open`
//! loads a corpus (by config file) and a model snapshot directory and hands
//! back a `PassportEngine*`; prediction calls return JSON documents allocated
//! by this library and released with `passport_string_free`. Every call
//! reports a `PassportStatus`; the message for the most recent failure on
//! the calling thread is available from `passport_last_error_message`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::Path;

use passport::config::{self, AppConfig};
use passport::pipeline;
use passport::service::Engine;

/// Result codes for every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassportStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    LoadFailed = 3,
    ParseFailed = 4,
    PredictFailed = 5,
    Panic = 6,
}

/// Opaque engine handle: an immutable corpus view plus a trained model.
pub struct PassportEngine {
    inner: Engine,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).ok();
    });
}

fn catch<F: FnOnce() -> PassportStatus + std::panic::UnwindSafe>(f: F) -> PassportStatus {
    match std::panic::catch_unwind(f) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            PassportStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be either null or a NUL-terminated string valid for the call.
unsafe fn required_str<'a>(ptr: *const c_char) -> Result<&'a str, PassportStatus> {
    if ptr.is_null() {
        set_last_error("null argument");
        return Err(PassportStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error("argument is not valid UTF-8");
        PassportStatus::InvalidUtf8
    })
}

fn export_string(text: String, out: *mut *mut c_char) -> PassportStatus {
    match CString::new(text.replace('\0', " ")) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            PassportStatus::Ok
        }
        Err(_) => {
            set_last_error("output contained interior NUL");
            PassportStatus::PredictFailed
        }
    }
}

/// Load a corpus (named by a config file) and a model snapshot directory.
/// On success writes an engine handle to `out_engine`; release it with
/// [`passport_engine_close`].
///
/// # Safety
/// `config_path` and `model_dir` must be NUL-terminated strings;
/// `out_engine` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn passport_engine_open(
    config_path: *const c_char,
    model_dir: *const c_char,
    out_engine: *mut *mut PassportEngine,
) -> PassportStatus {
    catch(|| {
        if out_engine.is_null() {
            set_last_error("null out_engine");
            return PassportStatus::NullArgument;
        }
        let config_path = match unsafe { required_str(config_path) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let model_dir = match unsafe { required_str(model_dir) } {
            Ok(s) => s,
            Err(status) => return status,
        };

        let open = || -> passport::Result<Engine> {
            let config = AppConfig::load(Path::new(config_path))?;
            let corpus = config::load_corpus(&config)?;
            let model = pipeline::load_model_snapshot(Path::new(model_dir))?;
            Ok(Engine { corpus, model })
        };
        match open() {
            Ok(inner) => {
                let handle = Box::new(PassportEngine { inner });
                unsafe { *out_engine = Box::into_raw(handle) };
                PassportStatus::Ok
            }
            Err(e) => {
                set_last_error(e.to_string());
                PassportStatus::LoadFailed
            }
        }
    })
}

/// Release an engine handle.
///
/// # Safety
/// `engine` must be null or a pointer previously returned by
/// [`passport_engine_open`] that has not been closed.
#[no_mangle]
pub unsafe extern "C" fn passport_engine_close(engine: *mut PassportEngine) {
    if !engine.is_null() {
        drop(unsafe { Box::from_raw(engine) });
    }
}

/// Predict the country set for a single IPv4 address. On success writes a
/// JSON document describing the staged prediction to `out_json`; release
/// it with [`passport_string_free`].
///
/// # Safety
/// `engine` must be a live handle; `ip` a NUL-terminated string; `out_json`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn passport_predict_ip(
    engine: *const PassportEngine,
    ip: *const c_char,
    out_json: *mut *mut c_char,
) -> PassportStatus {
    catch(|| {
        if engine.is_null() || out_json.is_null() {
            set_last_error("null argument");
            return PassportStatus::NullArgument;
        }
        let engine = unsafe { &*engine };
        let ip_text = match unsafe { required_str(ip) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let target: passport::corpus::RouterIp = match ip_text.parse() {
            Ok(ip) => ip,
            Err(e) => {
                set_last_error(format!("{e}"));
                return PassportStatus::ParseFailed;
            }
        };
        if target.is_private_or_reserved() {
            set_last_error("private or reserved address");
            return PassportStatus::PredictFailed;
        }
        match engine.inner.predict_ip(target) {
            Ok(prediction) => match serde_json::to_string(&prediction) {
                Ok(json) => export_string(json, out_json),
                Err(e) => {
                    set_last_error(e.to_string());
                    PassportStatus::PredictFailed
                }
            },
            Err(e) => {
                set_last_error(e.to_string());
                PassportStatus::PredictFailed
            }
        }
    })
}

/// Predict every responsive hop of raw traceroute text. On success writes
/// a JSON array of per-hop outcomes to `out_json`; release it with
/// [`passport_string_free`].
///
/// # Safety
/// `engine` must be a live handle; `text` a NUL-terminated string;
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn passport_predict_traceroute(
    engine: *const PassportEngine,
    text: *const c_char,
    out_json: *mut *mut c_char,
) -> PassportStatus {
    catch(|| {
        if engine.is_null() || out_json.is_null() {
            set_last_error("null argument");
            return PassportStatus::NullArgument;
        }
        let engine = unsafe { &*engine };
        let text = match unsafe { required_str(text) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let hops = pipeline::predict_raw(text, &engine.inner.model, &engine.inner.corpus, &[]);
        match hops {
            Ok(hops) => match serde_json::to_string(&hops) {
                Ok(json) => export_string(json, out_json),
                Err(e) => {
                    set_last_error(e.to_string());
                    PassportStatus::PredictFailed
                }
            },
            Err(e) => {
                set_last_error(e.to_string());
                PassportStatus::ParseFailed
            }
        }
    })
}

/// Speed-of-light feasibility radius in kilometers for a sub-cutoff RTT.
///
/// # Safety
/// `out_radius_km` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn passport_radius_km(
    min_rtt_ms: f64,
    out_radius_km: *mut f64,
) -> PassportStatus {
    if out_radius_km.is_null() {
        set_last_error("null out_radius_km");
        return PassportStatus::NullArgument;
    }
    match passport::sol::radius_km(min_rtt_ms) {
        Ok(radius) => {
            unsafe { *out_radius_km = radius };
            PassportStatus::Ok
        }
        Err(e) => {
            set_last_error(e.to_string());
            PassportStatus::ParseFailed
        }
    }
}

/// Release a string allocated by this library.
///
/// # Safety
/// `s` must be null or a pointer previously returned through an `out_json`
/// parameter, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn passport_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; never free it.
#[no_mangle]
pub extern "C" fn passport_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn passport_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}
