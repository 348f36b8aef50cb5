//! C ABI for the scaled-consensus library.
//!
//! Conventions:
//!
//! - Every fallible function returns an [`ScStatus`]; results go through
//!   out-pointers that are only written on `SC_STATUS_OK`.
//! - Handles (`ScGraph`, `ScScenario`, `ScTrajectory`) are opaque and owned
//!   by the caller once created; release them with the matching `*_free`.
//!   Passing NULL to a `*_free` function is a no-op.
//! - On failure a human-readable message is stored per thread and can be
//!   fetched with [`sc_last_error_message`].
//! - Panics never cross the boundary; they surface as `SC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};

use scaled_consensus::attracting_law::{
    settling_bounds_state_dependent, settling_bounds_state_independent, transformed_params,
    AlParams, OddRatio,
};
use scaled_consensus::config::{self, PreparedScenario, ScenarioConfig};
use scaled_consensus::graph::{self, WeightedGraph};
use scaled_consensus::linalg::SquareMatrix;
use scaled_consensus::simulator::{simulate, Trajectory};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    ParseError = 4,
    GraphError = 5,
    NumericalFailure = 6,
    IoError = 7,
    Panic = 8,
}

/// Attracting-law parameters; `gamma1 = q/p`, `gamma2 = m/n`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScAlParams {
    pub rho: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub q: u32,
    pub p: u32,
    pub m: u32,
    pub n: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Opaque weighted graph.
pub struct ScGraph {
    inner: WeightedGraph,
}

/// Opaque validated scenario.
pub struct ScScenario {
    inner: PreparedScenario,
}

/// Opaque simulation result.
pub struct ScTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type FfiResult = Result<(), (ScStatus, String)>;

fn fail<T>(status: ScStatus, msg: impl ToString) -> Result<T, (ScStatus, String)> {
    Err((status, msg.to_string()))
}

fn guard(f: impl FnOnce() -> FfiResult) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            ScStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, (ScStatus, String)> {
    ptr.as_ref()
        .ok_or_else(|| (ScStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &str) -> Result<&'a mut T, (ScStatus, String)> {
    ptr.as_mut()
        .ok_or_else(|| (ScStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn c_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, (ScStatus, String)> {
    if ptr.is_null() {
        return fail(ScStatus::NullPointer, format!("{what} is NULL"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| (ScStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn to_params(p: &ScAlParams) -> Result<AlParams, (ScStatus, String)> {
    let ratio =
        |num, den| OddRatio::new(num, den).map_err(|e| (ScStatus::InvalidArgument, e.to_string()));
    AlParams::new(
        p.rho,
        p.kappa1,
        p.kappa2,
        ratio(p.q, p.p)?,
        ratio(p.m, p.n)?,
    )
    .map_err(|e| (ScStatus::InvalidArgument, e.to_string()))
}

fn from_params(p: &AlParams) -> ScAlParams {
    ScAlParams {
        rho: p.rho(),
        kappa1: p.kappa1(),
        kappa2: p.kappa2(),
        q: p.gamma1().num(),
        p: p.gamma1().den(),
        m: p.gamma2().num(),
        n: p.gamma2().den(),
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len` bytes) and returns the full message length
/// in bytes excluding the terminator. Returns 0 if no error was recorded.
/// `buf` may be NULL to query the length.
///
/// # Safety
/// `buf` must be NULL or valid for `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Settling-time bounds that hold for every initial state.
///
/// # Safety
/// `params` and `out_bounds` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_bounds_state_independent(
    params: *const ScAlParams,
    out_bounds: *mut ScBounds,
) -> ScStatus {
    guard(|| {
        let p = to_params(deref(params, "params")?)?;
        let dst = out(out_bounds, "out_bounds")?;
        let b = settling_bounds_state_independent(&p);
        *dst = ScBounds {
            lower: b.lower,
            upper: b.upper,
        };
        Ok(())
    })
}

/// Settling-time bounds for the scalar law started at `x0`.
///
/// # Safety
/// `params` and `out_bounds` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_bounds_state_dependent(
    params: *const ScAlParams,
    x0: f64,
    out_bounds: *mut ScBounds,
) -> ScStatus {
    guard(|| {
        let p = to_params(deref(params, "params")?)?;
        let dst = out(out_bounds, "out_bounds")?;
        if !x0.is_finite() {
            return fail(ScStatus::InvalidArgument, "x0 must be finite");
        }
        let b = settling_bounds_state_dependent(&p, x0);
        *dst = ScBounds {
            lower: b.lower,
            upper: b.upper,
        };
        Ok(())
    })
}

/// Parameters of the scalar law obeyed by `sqrt(V)` on a network with
/// algebraic connectivity `lambda2` and `n_agents` agents.
///
/// # Safety
/// `params` and `out_params` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_transformed_params(
    params: *const ScAlParams,
    lambda2: f64,
    n_agents: usize,
    out_params: *mut ScAlParams,
) -> ScStatus {
    guard(|| {
        let p = to_params(deref(params, "params")?)?;
        let dst = out(out_params, "out_params")?;
        let t = transformed_params(&p, lambda2, n_agents)
            .map_err(|e| (ScStatus::InvalidArgument, e.to_string()))?;
        *dst = from_params(&t);
        Ok(())
    })
}

/// Builds a graph from an `n x n` row-major weight matrix.
///
/// # Safety
/// `weights` must be valid for `n * n` reads; `out_graph` must be NULL or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn sc_graph_new(
    weights: *const f64,
    n: usize,
    directed: bool,
    out_graph: *mut *mut ScGraph,
) -> ScStatus {
    guard(|| {
        let dst = out(out_graph, "out_graph")?;
        if weights.is_null() {
            return fail(ScStatus::NullPointer, "weights is NULL");
        }
        let len = n
            .checked_mul(n)
            .ok_or_else(|| (ScStatus::InvalidArgument, "n * n overflows".to_string()))?;
        let data = std::slice::from_raw_parts(weights, len).to_vec();
        let m = SquareMatrix::from_row_major(data).ok_or_else(|| {
            (
                ScStatus::InvalidArgument,
                "weight matrix is not square".to_string(),
            )
        })?;
        let g = WeightedGraph::from_matrix(m, directed)
            .map_err(|e| (ScStatus::GraphError, e.to_string()))?;
        *dst = Box::into_raw(Box::new(ScGraph { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `graph` must be NULL or a pointer returned by [`sc_graph_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn sc_graph_free(graph: *mut ScGraph) {
    if !graph.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(graph))));
    }
}

/// Second-smallest Laplacian eigenvalue. Directed graphs use the mirror
/// graph built from their detail-balance parameters rescaled to the
/// smallest integer vector, as scenarios do.
///
/// # Safety
/// `graph` and `out_lambda2` must be NULL or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_graph_algebraic_connectivity(
    graph: *const ScGraph,
    out_lambda2: *mut f64,
) -> ScStatus {
    guard(|| {
        let g = &deref(graph, "graph")?.inner;
        let dst = out(out_lambda2, "out_lambda2")?;
        let l = if g.is_directed() {
            let db = graph::analysis_detail_balance(g);
            graph::mirror_laplacian(g, &db).map_err(|e| (ScStatus::GraphError, e.to_string()))?
        } else {
            graph::laplacian(g)
        };
        *dst = graph::algebraic_connectivity(&l)
            .map_err(|e| (ScStatus::NumericalFailure, e.to_string()))?;
        Ok(())
    })
}

/// Detail-balance parameters `p` (with `p[0] = 1`) written to `out_p`,
/// which must hold `len >= n` values. `*out_valid` reports whether the graph
/// is detail-balanced; `out_p` is only meaningful if it is.
///
/// # Safety
/// `out_p` must be valid for `len` writes; other pointers must be NULL or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn sc_graph_detail_balance(
    graph: *const ScGraph,
    out_p: *mut f64,
    len: usize,
    out_valid: *mut bool,
) -> ScStatus {
    guard(|| {
        let g = &deref(graph, "graph")?.inner;
        let valid = out(out_valid, "out_valid")?;
        if out_p.is_null() {
            return fail(ScStatus::NullPointer, "out_p is NULL");
        }
        if len < g.n() {
            return fail(
                ScStatus::InvalidArgument,
                format!("out_p holds {len} values, graph has {} agents", g.n()),
            );
        }
        let db = graph::find_detail_balance(g);
        std::slice::from_raw_parts_mut(out_p, g.n()).copy_from_slice(&db.p);
        *valid = db.valid;
        Ok(())
    })
}

fn prepare(cfg: ScenarioConfig) -> Result<*mut ScScenario, (ScStatus, String)> {
    let prepared = cfg
        .prepare()
        .map_err(|e| (ScStatus::ParseError, e.to_string()))?;
    Ok(Box::into_raw(Box::new(ScScenario { inner: prepared })))
}

/// Parses and validates a TOML scenario.
///
/// # Safety
/// `toml` must be NULL or a NUL-terminated string; `out_scenario` must be
/// NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_from_toml(
    toml: *const c_char,
    out_scenario: *mut *mut ScScenario,
) -> ScStatus {
    guard(|| {
        let src = c_str(toml, "toml")?;
        let dst = out(out_scenario, "out_scenario")?;
        let cfg = ScenarioConfig::from_toml_str(src)
            .map_err(|e| (ScStatus::ParseError, e.to_string()))?;
        *dst = prepare(cfg)?;
        Ok(())
    })
}

/// Loads one of the bundled scenarios, e.g. `"example1_c1_gal"`.
///
/// # Safety
/// `name` must be NULL or a NUL-terminated string; `out_scenario` must be
/// NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_bundled(
    name: *const c_char,
    out_scenario: *mut *mut ScScenario,
) -> ScStatus {
    guard(|| {
        let name = c_str(name, "name")?;
        let dst = out(out_scenario, "out_scenario")?;
        let cfg = config::bundled(name).ok_or_else(|| {
            (
                ScStatus::InvalidArgument,
                format!("no bundled scenario named {name:?}"),
            )
        })?;
        *dst = prepare(cfg)?;
        Ok(())
    })
}

/// Algebraic connectivity used by the scenario's settling-time bounds.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_lambda2(
    scenario: *const ScScenario,
    out_lambda2: *mut f64,
) -> ScStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.inner;
        *out(out_lambda2, "out_lambda2")? = s.lambda2;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a live pointer from `sc_scenario_*`.
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_free(scenario: *mut ScScenario) {
    if !scenario.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(scenario))));
    }
}

/// Integrates the scenario over its horizon.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn sc_scenario_simulate(
    scenario: *const ScScenario,
    out_trajectory: *mut *mut ScTrajectory,
) -> ScStatus {
    guard(|| {
        let s = &deref(scenario, "scenario")?.inner;
        let dst = out(out_trajectory, "out_trajectory")?;
        let traj =
            simulate(&s.scenario).map_err(|e| (ScStatus::NumericalFailure, e.to_string()))?;
        *dst = Box::into_raw(Box::new(ScTrajectory { inner: traj }));
        Ok(())
    })
}

/// Number of recorded samples.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn sc_trajectory_len(
    traj: *const ScTrajectory,
    out_len: *mut usize,
) -> ScStatus {
    guard(|| {
        let t = &deref(traj, "trajectory")?.inner;
        *out(out_len, "out_len")? = t.len();
        Ok(())
    })
}

/// Number of agents.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn sc_trajectory_agents(
    traj: *const ScTrajectory,
    out_agents: *mut usize,
) -> ScStatus {
    guard(|| {
        let t = &deref(traj, "trajectory")?.inner;
        *out(out_agents, "out_agents")? = t.n_agents();
        Ok(())
    })
}

/// First sample time after which the scaled-state spread stays below
/// epsilon. `*out_settled` is false (and `*out_time` untouched) if the run
/// never settled.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn sc_trajectory_settling_time(
    traj: *const ScTrajectory,
    out_time: *mut f64,
    out_settled: *mut bool,
) -> ScStatus {
    guard(|| {
        let t = &deref(traj, "trajectory")?.inner;
        let time = out(out_time, "out_time")?;
        let settled = out(out_settled, "out_settled")?;
        *settled = t.settling_time.is_some();
        if let Some(ts) = t.settling_time {
            *time = ts;
        }
        Ok(())
    })
}

/// Copies sample `k`: its time, raw states `x` and scaled states `g`.
/// `x` and `g` may be NULL; otherwise they must hold `n` values, where `n`
/// is at least the number of agents.
///
/// # Safety
/// Non-NULL buffers must be valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn sc_trajectory_sample(
    traj: *const ScTrajectory,
    k: usize,
    out_t: *mut f64,
    x: *mut f64,
    g: *mut f64,
    n: usize,
) -> ScStatus {
    guard(|| {
        let t = &deref(traj, "trajectory")?.inner;
        if k >= t.len() {
            return fail(
                ScStatus::InvalidArgument,
                format!("sample {k} out of range (len {})", t.len()),
            );
        }
        let agents = t.n_agents();
        if (!x.is_null() || !g.is_null()) && n < agents {
            return fail(
                ScStatus::InvalidArgument,
                format!("buffer holds {n} values, trajectory has {agents} agents"),
            );
        }
        if !out_t.is_null() {
            *out_t = t.times[k];
        }
        if !x.is_null() {
            std::slice::from_raw_parts_mut(x, agents).copy_from_slice(&t.states[k]);
        }
        if !g.is_null() {
            std::slice::from_raw_parts_mut(g, agents).copy_from_slice(&t.scaled_states[k]);
        }
        Ok(())
    })
}

/// Writes the trajectory as CSV (`t,x_1..x_N,g_1..g_N,V`).
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sc_trajectory_write_csv(
    traj: *const ScTrajectory,
    path: *const c_char,
) -> ScStatus {
    guard(|| {
        let t = &deref(traj, "trajectory")?.inner;
        let path = c_str(path, "path")?;
        let io = |e: std::io::Error| (ScStatus::IoError, format!("{path}: {e}"));
        let file = File::create(path).map_err(io)?;
        t.write_csv(BufWriter::new(file)).map_err(io)
    })
}

/// # Safety
/// `traj` must be NULL or a live pointer from [`sc_scenario_simulate`].
#[no_mangle]
pub unsafe extern "C" fn sc_trajectory_free(traj: *mut ScTrajectory) {
    if !traj.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(traj))));
    }
}
