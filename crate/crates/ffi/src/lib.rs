//! C ABI over the decision engine.
//!
//! Every function returns an [`FgStatus`]. On failure the message is kept in a
//! thread-local slot readable through [`fg_last_error`]. Handles are opaque and
//! released with their `_free` function; strings handed out by the library are
//! released with [`fg_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use formation_genius::catalog::{load_catalog, Catalog};
use formation_genius::formation::Formation;
use formation_genius::profile::PreferencesDocument;
use formation_genius::session::{Clock, EventLog, Session};
use formation_genius::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    InvalidMatrix = 6,
    UnknownComponent = 7,
    AlreadyCommitted = 8,
    NoPendingComponent = 9,
    NotEvaluated = 10,
    NoFeasibleCombination = 11,
    InfeasibleSelection = 12,
    ReplayMismatch = 13,
    Panic = 14,
}

impl From<&Error> for FgStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => FgStatus::Io,
            Error::Parse { .. } => FgStatus::Parse,
            Error::InvalidMatrix(_) | Error::MissingMatrix(_) => FgStatus::InvalidMatrix,
            Error::Validation { .. } | Error::TypeMismatch { .. } | Error::NegativeValue { .. } | Error::EmptyRanking => {
                FgStatus::Validation
            }
            Error::UnknownComponent(_) => FgStatus::UnknownComponent,
            Error::AlreadyCommitted(_) => FgStatus::AlreadyCommitted,
            Error::NoPendingComponent => FgStatus::NoPendingComponent,
            Error::NotEvaluated(_) => FgStatus::NotEvaluated,
            Error::NoFeasibleCombination(_) => FgStatus::NoFeasibleCombination,
            Error::InfeasibleSelection { .. } => FgStatus::InfeasibleSelection,
            Error::ReplayMismatch { .. } => FgStatus::ReplayMismatch,
        }
    }
}

/// Loaded catalog. Shared by every session created from it.
pub struct FgCatalog {
    inner: Arc<Catalog>,
}

/// One migration session.
pub struct FgSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

struct Failure(FgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(FgStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FgStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FgStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FgStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(FgStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(FgStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(FgStatus::NullArgument, format!("`{name}` is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(FgStatus::NullArgument, format!("`{name}` is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut *mut T) -> Result<&'a mut *mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(FgStatus::NullArgument, "output pointer is null".into()))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no interior nul").into_raw()
}

fn to_json<T: serde::Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn fg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn fg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[no_mangle]
pub unsafe extern "C" fn fg_catalog_load(path: *const c_char, out: *mut *mut FgCatalog) -> FgStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let catalog = load_catalog(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(FgCatalog { inner: Arc::new(catalog) }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fg_catalog_from_json(json: *const c_char, out: *mut *mut FgCatalog) -> FgStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let catalog = Catalog::from_json(text(json, "json")?)?;
        *out = Box::into_raw(Box::new(FgCatalog { inner: Arc::new(catalog) }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fg_catalog_counts(
    catalog: *const FgCatalog,
    images: *mut usize,
    services: *mut usize,
) -> FgStatus {
    guard(|| {
        let c = &handle(catalog, "catalog")?.inner;
        if let Some(n) = images.as_mut() {
            *n = c.images().len();
        }
        if let Some(n) = services.as_mut() {
            *n = c.services().len();
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fg_catalog_free(catalog: *mut FgCatalog) {
    if !catalog.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(catalog))));
    }
}

/// Starts a session over `formation_json`. A non-zero `logical_clock` stamps
/// events with a counter instead of wall-clock milliseconds, which makes the
/// event log reproducible.
#[no_mangle]
pub unsafe extern "C" fn fg_session_new(
    catalog: *const FgCatalog,
    session_id: *const c_char,
    formation_json: *const c_char,
    logical_clock: bool,
    out: *mut *mut FgSession,
) -> FgStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let catalog = handle(catalog, "catalog")?.inner.clone();
        let formation = Formation::from_json(text(formation_json, "formation_json")?)?;
        let clock = if logical_clock { Clock::Logical(0) } else { Clock::System };
        let inner = Session::new(text(session_id, "session_id")?, catalog, formation, clock);
        *out = Box::into_raw(Box::new(FgSession { inner }));
        Ok(())
    })
}

/// Rebuilds a session from a recorded event log, checking every evaluation.
#[no_mangle]
pub unsafe extern "C" fn fg_session_replay(
    catalog: *const FgCatalog,
    log_json: *const c_char,
    out: *mut *mut FgSession,
) -> FgStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let catalog = handle(catalog, "catalog")?.inner.clone();
        let log = EventLog::from_json(text(log_json, "log_json")?)?;
        let inner = Session::replay(catalog, &log)?;
        *out = Box::into_raw(Box::new(FgSession { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fg_session_free(session: *mut FgSession) {
    if !session.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(session))));
    }
}

/// Makes `component` pending. `candidates_json` (nullable) receives the
/// candidate image ids as a JSON array.
#[no_mangle]
pub unsafe extern "C" fn fg_session_select(
    session: *mut FgSession,
    component: *const c_char,
    candidates_json: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let s = &mut handle_mut(session, "session")?.inner;
        let ids = s.select_component(text(component, "component")?)?;
        if let Some(out) = candidates_json.as_mut() {
            *out = owned_string(to_json(ids));
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fg_session_set_preferences(
    session: *mut FgSession,
    component: *const c_char,
    preferences_json: *const c_char,
) -> FgStatus {
    guard(|| {
        let s = &mut handle_mut(session, "session")?.inner;
        let doc = PreferencesDocument::from_json(text(preferences_json, "preferences_json")?)?;
        s.set_preferences(text(component, "component")?, doc)?;
        Ok(())
    })
}

/// Evaluates the pending component. The recommendation is written to
/// `result_json` and must be released with `fg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn fg_session_evaluate(session: *mut FgSession, result_json: *mut *mut c_char) -> FgStatus {
    guard(|| {
        let out = out_ptr(result_json)?;
        let s = &mut handle_mut(session, "session")?.inner;
        *out = owned_string(to_json(s.evaluate()?));
        Ok(())
    })
}

/// Commits a pair for the pending component. `note` and `entry_json` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn fg_session_commit(
    session: *mut FgSession,
    image: *const c_char,
    service: *const c_char,
    note: *const c_char,
    entry_json: *mut *mut c_char,
) -> FgStatus {
    guard(|| {
        let s = &mut handle_mut(session, "session")?.inner;
        let note = if note.is_null() { None } else { Some(text(note, "note")?.to_owned()) };
        let entry = s.commit(text(image, "image")?, text(service, "service")?, note)?;
        if let Some(out) = entry_json.as_mut() {
            *out = owned_string(to_json(entry));
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fg_session_event_log(session: *const FgSession, log_json: *mut *mut c_char) -> FgStatus {
    guard(|| {
        let out = out_ptr(log_json)?;
        *out = owned_string(handle(session, "session")?.inner.event_log().to_json());
        Ok(())
    })
}
