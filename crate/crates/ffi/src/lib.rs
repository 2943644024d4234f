//! C ABI over the evacsim library.
//!
//! Graphs and run results are opaque handles owned by the caller and released
//! with the matching `_free` function. Every fallible call returns an
//! `EvacsimStatus`; on failure a message is kept per thread and can be read
//! with `evacsim_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use evacsim::sim::{run_paired_seeded, DelayMode};
use evacsim::{
    average_delta, generate_synthetic, parse_graph, rng, Error, GeneratorParams, NavGraph,
    RunResult, ScenarioConfig, SimError,
};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvacsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Graph = 4,
    Io = 5,
    TimeCap = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Loaded navigation graph.
pub struct EvacsimGraph {
    inner: NavGraph,
}

/// Paired ideal and perturbed run.
pub struct EvacsimResults {
    ideal: RunResult,
    perturbed: RunResult,
}

/// Scenario parameters. Obtain defaults with `evacsim_scenario_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EvacsimScenario {
    pub t_s: f64,
    pub t_a: f64,
    pub t_el: f64,
    pub refresh_interval: f64,
    pub pod: f64,
    pub sod: u32,
    pub poe: f64,
    pub persistence: f64,
    /// Non-zero freezes the traversal-time field.
    pub static_field: u8,
    /// Non-zero draws the stale-table flag once per node instead of per decision.
    pub delay_per_node: u8,
    pub master_seed: u64,
}

/// Outcome of one evacuee in a paired run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EvacsimOutcome {
    pub start: usize,
    pub ideal_arrival: f64,
    pub actual_arrival: f64,
    pub deadline_violated: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: EvacsimStatus, msg: impl Into<String>) -> EvacsimStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> EvacsimStatus {
    match err {
        Error::Graph(_) => EvacsimStatus::Graph,
        Error::Config(_) | Error::Metrics(_) => EvacsimStatus::Config,
        Error::Sim(SimError::TimeCap { .. }) => EvacsimStatus::TimeCap,
        Error::Sim(SimError::UnknownStart(_)) => EvacsimStatus::OutOfRange,
        Error::Sim(_) => EvacsimStatus::Config,
        Error::Io { .. } => EvacsimStatus::Io,
    }
}

fn guarded(f: impl FnOnce() -> EvacsimStatus) -> EvacsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(EvacsimStatus::Panic, "internal panic"),
    }
}

fn boxed<T>(out: *mut *mut T, value: T) -> EvacsimStatus {
    // SAFETY: callers check `out` for null before building the value.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    EvacsimStatus::Ok
}

impl From<&EvacsimScenario> for ScenarioConfig {
    fn from(s: &EvacsimScenario) -> Self {
        ScenarioConfig {
            t_s: s.t_s,
            t_a: s.t_a,
            t_el: s.t_el,
            refresh_interval: s.refresh_interval,
            pod: s.pod,
            sod: s.sod as usize,
            poe: s.poe,
            persistence: s.persistence,
            static_field: s.static_field != 0,
            delay_mode: if s.delay_per_node != 0 {
                DelayMode::PerNode
            } else {
                DelayMode::PerDecision
            },
            master_seed: s.master_seed,
            ..ScenarioConfig::default()
        }
    }
}

/// Default scenario: 1800 s deadline, 5 s refresh, no delay, no errors.
#[no_mangle]
pub extern "C" fn evacsim_scenario_default() -> EvacsimScenario {
    let d = ScenarioConfig::default();
    EvacsimScenario {
        t_s: d.t_s,
        t_a: d.t_a,
        t_el: d.t_el,
        refresh_interval: d.refresh_interval,
        pod: d.pod,
        sod: d.sod as u32,
        poe: d.poe,
        persistence: d.persistence,
        static_field: d.static_field as u8,
        delay_per_node: 0,
        master_seed: d.master_seed,
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn evacsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Reads and validates a graph file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evacsim_graph_load(
    path: *const c_char,
    out: *mut *mut EvacsimGraph,
) -> EvacsimStatus {
    guarded(|| {
        if path.is_null() || out.is_null() {
            return fail(EvacsimStatus::NullPointer, "null argument");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(EvacsimStatus::InvalidArgument, "path is not UTF-8");
        };
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(EvacsimStatus::Io, Error::io(Path::new(path), e).to_string()),
        };
        match parse_graph(&text) {
            Ok(g) => boxed(out, EvacsimGraph { inner: g }),
            Err(e) => fail(EvacsimStatus::Graph, e.to_string()),
        }
    })
}

/// Generates a synthetic multi-deck graph.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evacsim_graph_generate(
    decks: u32,
    nodes: usize,
    passages: usize,
    stairs: usize,
    seed: u64,
    out: *mut *mut EvacsimGraph,
) -> EvacsimStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EvacsimStatus::NullPointer, "null argument");
        }
        let params = GeneratorParams::new(decks, nodes, passages, stairs);
        match generate_synthetic(&params, seed) {
            Ok(g) => boxed(out, EvacsimGraph { inner: g }),
            Err(e) => fail(EvacsimStatus::Graph, e.to_string()),
        }
    })
}

/// # Safety
/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evacsim_graph_free(graph: *mut EvacsimGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evacsim_graph_node_count(graph: *const EvacsimGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.node_count())
}

/// Number of edges, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evacsim_graph_edge_count(graph: *const EvacsimGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.edge_count())
}

/// Exit node id.
///
/// # Safety
/// `graph` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evacsim_graph_exit(
    graph: *const EvacsimGraph,
    out: *mut usize,
) -> EvacsimStatus {
    match (graph.as_ref(), out.is_null()) {
        (Some(g), false) => {
            *out = g.inner.exit();
            EvacsimStatus::Ok
        }
        _ => fail(EvacsimStatus::NullPointer, "null argument"),
    }
}

/// Runs the ideal and perturbed simulations of run `run_index` for the given
/// start nodes. With `starts` null, every non-exit node starts.
///
/// # Safety
/// `graph` and `scenario` must be valid; `starts` must point to `n_starts`
/// ids or be null; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evacsim_run_paired(
    graph: *const EvacsimGraph,
    scenario: *const EvacsimScenario,
    starts: *const usize,
    n_starts: usize,
    run_index: u64,
    out: *mut *mut EvacsimResults,
) -> EvacsimStatus {
    guarded(|| {
        let (Some(g), Some(s)) = (graph.as_ref(), scenario.as_ref()) else {
            return fail(EvacsimStatus::NullPointer, "null argument");
        };
        if out.is_null() {
            return fail(EvacsimStatus::NullPointer, "null argument");
        }
        let starts: Vec<usize> = if starts.is_null() {
            g.inner.non_exit_nodes()
        } else {
            std::slice::from_raw_parts(starts, n_starts).to_vec()
        };
        let cfg = ScenarioConfig::from(s);
        let seed = rng::run_seed(cfg.master_seed, run_index);
        match run_paired_seeded(&g.inner, &cfg, &starts, seed) {
            Ok((ideal, perturbed)) => boxed(out, EvacsimResults { ideal, perturbed }),
            Err(e) => {
                let e = Error::from(e);
                fail(status_of(&e), e.to_string())
            }
        }
    })
}

/// # Safety
/// `results` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn evacsim_results_free(results: *mut EvacsimResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}

/// Number of evacuees, or 0 for a null handle.
///
/// # Safety
/// `results` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evacsim_results_len(results: *const EvacsimResults) -> usize {
    results.as_ref().map_or(0, |r| r.ideal.evacuees.len())
}

/// Outcome of evacuee `index`.
///
/// # Safety
/// `results` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evacsim_results_get(
    results: *const EvacsimResults,
    index: usize,
    out: *mut EvacsimOutcome,
) -> EvacsimStatus {
    let Some(r) = results.as_ref() else {
        return fail(EvacsimStatus::NullPointer, "null argument");
    };
    if out.is_null() {
        return fail(EvacsimStatus::NullPointer, "null argument");
    }
    let (Some(ideal), Some(actual)) = (r.ideal.evacuees.get(index), r.perturbed.evacuees.get(index))
    else {
        return fail(
            EvacsimStatus::OutOfRange,
            format!("index {index} out of range for {} evacuees", r.ideal.evacuees.len()),
        );
    };
    *out = EvacsimOutcome {
        start: ideal.start,
        ideal_arrival: ideal.arrival,
        actual_arrival: actual.arrival,
        deadline_violated: actual.deadline_violated as u8,
    };
    EvacsimStatus::Ok
}

/// Relative difference of the summed arrival times, perturbed against ideal.
///
/// # Safety
/// `results` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn evacsim_results_delta_avg(
    results: *const EvacsimResults,
    out: *mut f64,
) -> EvacsimStatus {
    let Some(r) = results.as_ref() else {
        return fail(EvacsimStatus::NullPointer, "null argument");
    };
    if out.is_null() {
        return fail(EvacsimStatus::NullPointer, "null argument");
    }
    let pairs: Vec<(f64, f64)> = r
        .ideal
        .evacuees
        .iter()
        .zip(&r.perturbed.evacuees)
        .map(|(i, p)| (p.arrival, i.arrival))
        .collect();
    match average_delta(&pairs) {
        Ok(d) => {
            *out = d;
            EvacsimStatus::Ok
        }
        Err(e) => fail(EvacsimStatus::Config, e.to_string()),
    }
}
