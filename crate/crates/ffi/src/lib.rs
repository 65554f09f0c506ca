//! C interface to the prover.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a [`CtpStatus`];
//! the message of the most recent failure on the calling thread is available
//! from [`ctp_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctp::autodiff::Graph;
use ctp::logic::{load_kb, Atom, FactFormat, KnowledgeBase};
use ctp::model::Model;
use ctp::prover::{CompiledKb, ProverConfig, Session};
use ctp::training::Checkpoint;
use ctp::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    UnknownSymbol = 5,
    Invalid = 6,
    Panic = 7,
}

/// Fact file layout accepted by [`ctp_kb_load`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CtpFormat {
    Prolog = 0,
    Tsv = 1,
}

/// A trained model with the prover settings it was trained with.
pub struct CtpModel {
    model: Model,
    prover: ProverConfig,
}

/// A knowledge base of ground facts.
pub struct CtpKb {
    kb: KnowledgeBase,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> CtpStatus {
    match e {
        Error::Io { .. } => CtpStatus::Io,
        Error::Parse { .. } | Error::ParseFile { .. } | Error::Json(_) => CtpStatus::Parse,
        Error::UnknownSymbol { .. } => CtpStatus::UnknownSymbol,
        _ => CtpStatus::Invalid,
    }
}

/// Runs `f`, recording its error or panic for `ctp_last_error_message`.
fn guard(f: impl FnOnce() -> Result<(), (CtpStatus, String)>) -> CtpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CtpStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CtpStatus::Panic
        }
    }
}

fn lib(e: Error) -> (CtpStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CtpStatus, String)> {
    if p.is_null() {
        return Err((CtpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CtpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), (CtpStatus, String)> {
    if p.is_null() {
        Err((CtpStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ctp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a checkpoint written by `ctp train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ctp_model_load(path: *const c_char, out: *mut *mut CtpModel) -> CtpStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = text(path, "path")?;
        let checkpoint = Checkpoint::load(path).map_err(lib)?;
        let model = checkpoint.to_model().map_err(lib)?;
        let prover = checkpoint.config.prover_config();
        *out = Box::into_raw(Box::new(CtpModel { model, prover }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ctp_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ctp_model_free(model: *mut CtpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Proof depth the model was trained with.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctp_model_depth(model: *const CtpModel) -> c_int {
    model.as_ref().map_or(-1, |m| m.prover.depth as c_int)
}

/// Loads ground facts from a file. Rules in the file are ignored.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ctp_kb_load(path: *const c_char, format: CtpFormat, out: *mut *mut CtpKb) -> CtpStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = text(path, "path")?;
        let format = match format {
            CtpFormat::Prolog => FactFormat::Prolog,
            CtpFormat::Tsv => FactFormat::Tsv,
        };
        let (kb, _) = load_kb(path, format).map_err(lib)?;
        *out = Box::into_raw(Box::new(CtpKb { kb }));
        Ok(())
    })
}

/// # Safety
/// `kb` must come from [`ctp_kb_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ctp_kb_free(kb: *mut CtpKb) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Number of facts in `kb`, or -1 for a null handle.
///
/// # Safety
/// `kb` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn ctp_kb_len(kb: *const CtpKb) -> c_int {
    kb.as_ref().map_or(-1, |k| k.kb.len() as c_int)
}

/// Scores `predicate(subject, object)` against `kb`. A negative `depth`
/// uses the model's training depth.
///
/// # Safety
/// Handles must be live, strings NUL-terminated and `score` valid.
#[no_mangle]
pub unsafe extern "C" fn ctp_prove(
    model: *const CtpModel,
    kb: *const CtpKb,
    predicate: *const c_char,
    subject: *const c_char,
    object: *const c_char,
    depth: c_int,
    score: *mut f64,
) -> CtpStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(kb, "kb")?;
        non_null(score, "score")?;
        let (m, k) = (&*model, &*kb);
        let goal = Atom::ground(
            text(predicate, "predicate")?,
            text(subject, "subject")?,
            text(object, "object")?,
        );
        let mut config = m.prover.clone();
        if depth >= 0 {
            config.depth = depth as usize;
        }
        let compiled = CompiledKb::new(&k.kb, &m.model.store).map_err(lib)?;
        let mut g = Graph::new();
        let value = Session::new(&mut g, &m.model, &compiled, &config)
            .and_then(|mut s| s.score(&goal))
            .map_err(lib)?;
        *score = value;
        Ok(())
    })
}
