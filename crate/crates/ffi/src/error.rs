use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use teacache::Error;

/// Result code of every fallible call. `TC_STATUS_OK` is zero; on any other
/// value `tc_last_error_message` describes the failure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    InvalidConfig = 4,
    BadRange = 5,
    ZeroDenominator = 6,
    NoCachedResidual = 7,
    FitFailed = 8,
    Io = 9,
    Format = 10,
    MissingRescaler = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for TcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ShapeMismatch { .. }
            | Error::InvalidShape { .. }
            | Error::GridTooSmall { .. } => TcStatus::ShapeMismatch,
            Error::InvalidModelConfig(_) | Error::Config { .. } => TcStatus::InvalidConfig,
            Error::BadRange(_) | Error::BadInterval { .. } | Error::BadDataRange(_) => {
                TcStatus::BadRange
            }
            Error::ZeroDenominator => TcStatus::ZeroDenominator,
            Error::NoCachedResidual => TcStatus::NoCachedResidual,
            Error::InsufficientData { .. }
            | Error::DegenerateDesign
            | Error::DegenerateVariance => TcStatus::FitFailed,
            Error::Io { .. } => TcStatus::Io,
            Error::MissingRescaler(_) => TcStatus::MissingRescaler,
            Error::NonFinite { .. } | Error::OddDimension(_) => TcStatus::InvalidArgument,
            Error::Format { .. } => TcStatus::Format,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

pub(crate) fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

pub(crate) fn fail(status: TcStatus, message: impl Into<String>) -> TcStatus {
    set_last_error(message.into());
    status
}

pub(crate) fn from_error(e: Error) -> TcStatus {
    let status = TcStatus::from(&e);
    set_last_error(format!("{}: {e}", e.kind()));
    status
}

/// Runs `f`, mapping errors and panics to status codes.
pub(crate) fn guard(f: impl FnOnce() -> Result<(), TcStatus>) -> TcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TcStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(TcStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// Message for the most recent failure on the calling thread, or NULL if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}
