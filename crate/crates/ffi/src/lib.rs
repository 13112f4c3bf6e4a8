//! C ABI over the r2h harness.
//!
//! Objects are opaque handles released with their `_free` function. Every
//! fallible call returns an [`R2hStatus`]; on failure the message is available
//! from [`r2h_last_error_message`] on the same thread. Strings returned through
//! `char **` out-parameters must be released with [`r2h_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use r2h::bench::{run_suite, BenchConfig};
use r2h::helper::HelperModel;
use r2h::metrics::{bleu2, metric_tokens, rouge_l};
use r2h::parse_step::{parse_by_step, Backend};
use r2h::world::{generate_world, LabelSet, WorldGraph, WorldParams, DEFAULT_WINDOW};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum R2hStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    Io = 5,
    Panic = 6,
}

/// Opaque world graph.
pub struct R2hWorld {
    inner: WorldGraph,
}

/// Opaque trained helper.
pub struct R2hHelper {
    inner: HelperModel<f32>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(R2hStatus, String);

type FResult<T> = Result<T, Failure>;

fn fail<T>(status: R2hStatus, msg: impl Into<String>) -> FResult<T> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> FResult<()>) -> R2hStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => R2hStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            R2hStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FResult<&'a str> {
    if p.is_null() {
        return fail(R2hStatus::NullPointer, format!("{name} is null"));
    }
    CStr::from_ptr(p).to_str().or_else(|_| fail(R2hStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> FResult<&'a T> {
    p.as_ref().map_or_else(|| fail(R2hStatus::NullPointer, format!("{name} is null")), Ok)
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> FResult<&'a mut T> {
    p.as_mut().map_or_else(|| fail(R2hStatus::NullPointer, format!("{name} is null")), Ok)
}

fn c_string(s: String) -> FResult<*mut c_char> {
    CString::new(s).map(CString::into_raw).or_else(|_| fail(R2hStatus::InvalidArgument, "output contains NUL"))
}

/// Message of the last failure on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn r2h_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn r2h_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Generates a world with `node_count` viewpoints and default parameters otherwise.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_world_generate(seed: u64, node_count: usize, out: *mut *mut R2hWorld) -> R2hStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params = WorldParams { node_count, ..WorldParams::default() };
        let g = generate_world(seed, &params).or_else(|e| fail(R2hStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(R2hWorld { inner: g }));
        Ok(())
    })
}

/// Parses a world from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_world_from_json(json: *const c_char, out: *mut *mut R2hWorld) -> R2hStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let out = out_arg(out, "out")?;
        let g = WorldGraph::from_json(json).or_else(|e| fail(R2hStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(R2hWorld { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `world` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_world_to_json(world: *const R2hWorld, out: *mut *mut c_char) -> R2hStatus {
    guard(|| {
        let w = ref_arg(world, "world")?;
        let out = out_arg(out, "out")?;
        *out = c_string(w.inner.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `world` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_world_node_count(world: *const R2hWorld, out: *mut usize) -> R2hStatus {
    guard(|| {
        let w = ref_arg(world, "world")?;
        *out_arg(out, "out")? = w.inner.node_count();
        Ok(())
    })
}

/// Shortest-path distance in meters between two viewpoint ids.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn r2h_world_distance(
    world: *const R2hWorld,
    from: *const c_char,
    to: *const c_char,
    out: *mut f64,
) -> R2hStatus {
    guard(|| {
        let w = &ref_arg(world, "world")?.inner;
        let a = w.node_index(str_arg(from, "from")?).or_else(|e| fail(R2hStatus::NotFound, e.to_string()))?;
        let b = w.node_index(str_arg(to, "to")?).or_else(|e| fail(R2hStatus::NotFound, e.to_string()))?;
        *out_arg(out, "out")? = w.distance(a, b).or_else(|e| fail(R2hStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Releases a world. NULL is ignored.
///
/// # Safety
/// `world` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn r2h_world_free(world: *mut R2hWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Rule-based step parse; writes a JSON array of `{index, text}`.
///
/// # Safety
/// `response` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_parse_steps(response: *const c_char, out: *mut *mut c_char) -> R2hStatus {
    guard(|| {
        let r = str_arg(response, "response")?;
        let out = out_arg(out, "out")?;
        let steps = parse_by_step(r, &Backend::rule()).or_else(|e| fail(R2hStatus::InvalidArgument, e.to_string()))?;
        *out = c_string(serde_json::to_string(&steps).expect("steps serialize"))?;
        Ok(())
    })
}

/// BLEU-2 of `candidate` against a single reference.
///
/// # Safety
/// Strings must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_bleu2(candidate: *const c_char, reference: *const c_char, out: *mut f64) -> R2hStatus {
    guard(|| {
        let c = metric_tokens(str_arg(candidate, "candidate")?);
        let r = metric_tokens(str_arg(reference, "reference")?);
        *out_arg(out, "out")? = bleu2(&c, &[r]);
        Ok(())
    })
}

/// ROUGE-L F-measure of `candidate` against `reference`.
///
/// # Safety
/// Strings must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_rouge_l(candidate: *const c_char, reference: *const c_char, out: *mut f64) -> R2hStatus {
    guard(|| {
        let c = metric_tokens(str_arg(candidate, "candidate")?);
        let r = metric_tokens(str_arg(reference, "reference")?);
        *out_arg(out, "out")? = rouge_l(&c, &r);
        Ok(())
    })
}

/// Loads a helper checkpoint.
///
/// # Safety
/// `path` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_helper_load(path: *const c_char, out: *mut *mut R2hHelper) -> R2hStatus {
    guard(|| {
        let p = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        if !Path::new(p).exists() {
            return fail(R2hStatus::NotFound, format!("no checkpoint at {p}"));
        }
        let m = HelperModel::<f32>::load(Path::new(p)).or_else(|e| fail(R2hStatus::Io, e.to_string()))?;
        *out = Box::into_raw(Box::new(R2hHelper { inner: m }));
        Ok(())
    })
}

/// Answers `inquiry` from observations at `current` toward `goal`.
///
/// # Safety
/// Handles must be live; strings NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_helper_respond(
    helper: *const R2hHelper,
    world: *const R2hWorld,
    current: *const c_char,
    goal: *const c_char,
    inquiry: *const c_char,
    out: *mut *mut c_char,
) -> R2hStatus {
    guard(|| {
        let h = &ref_arg(helper, "helper")?.inner;
        let w = &ref_arg(world, "world")?.inner;
        let cur = w.node_index(str_arg(current, "current")?).or_else(|e| fail(R2hStatus::NotFound, e.to_string()))?;
        let goal = w.node_index(str_arg(goal, "goal")?).or_else(|e| fail(R2hStatus::NotFound, e.to_string()))?;
        let q = str_arg(inquiry, "inquiry")?;
        let out = out_arg(out, "out")?;
        let obs = w
            .sample_observations(cur, goal, DEFAULT_WINDOW, h.config.t_frames, &LabelSet::standard())
            .or_else(|e| fail(R2hStatus::InvalidArgument, e.to_string()))?;
        let text = h.generate_response(q, &obs).or_else(|e| fail(R2hStatus::InvalidArgument, e.to_string()))?;
        *out = c_string(text)?;
        Ok(())
    })
}

/// Releases a helper. NULL is ignored.
///
/// # Safety
/// `helper` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn r2h_helper_free(helper: *mut R2hHelper) {
    if !helper.is_null() {
        drop(Box::from_raw(helper));
    }
}

/// Runs a suite from a TOML configuration; writes the metric report as JSON.
///
/// # Safety
/// `config_toml` must be NUL-terminated and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn r2h_bench_run(config_toml: *const c_char, out: *mut *mut c_char) -> R2hStatus {
    guard(|| {
        let text = str_arg(config_toml, "config_toml")?;
        let out = out_arg(out, "out")?;
        let cfg = BenchConfig::from_toml(text).or_else(|e| fail(R2hStatus::InvalidArgument, e.to_string()))?;
        let suite = run_suite(&cfg).or_else(|e| fail(R2hStatus::InvalidArgument, e.to_string()))?;
        *out = c_string(serde_json::to_string(&suite.report).expect("report serializes"))?;
        Ok(())
    })
}
