//! C ABI over the `oversmooth` library.
//!
//! Every fallible function returns an [`OsStatus`] and writes its results
//! through out-pointers. On failure the message is kept per thread and can
//! be copied out with [`os_last_error_message`]. Matrices cross the boundary
//! as row-major `double` buffers. Graphs and trajectories are opaque handles
//! released with their `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use oversmooth::asymptotics::{counterexample_system, lambda_vs_jsr, positivity_horizon};
use oversmooth::attention::AttentionSpec;
use oversmooth::dynamics::{run_trajectory, LayerRule, NonlinearitySpec, TrajectoryRecord, WeightInit, WeightSequence};
use oversmooth::graph::{generate_graph, graph_lambda, Graph as CoreGraph, GraphSpec};
use oversmooth::measures::mu;
use oversmooth::numerics::{matrix_norm, spectral_radius, NormKind};
use oversmooth::{Error, Matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    A1Violated = 4,
    A4Violated = 5,
    Overflow = 6,
    EpsilonTooLarge = 7,
    BudgetExceeded = 8,
    NoConvergence = 9,
    Io = 10,
    Panic = 11,
    Other = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsGraphKind {
    ErdosRenyi = 0,
    Cycle = 1,
    Complete = 2,
    Star = 3,
    Path = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsNorm {
    One = 0,
    Two = 1,
    Inf = 2,
    Frobenius = 3,
    Max = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsNonlinearity {
    Identity = 0,
    Relu = 1,
    /// Slope in `param`.
    LeakyRelu = 2,
    Gelu = 3,
    Silu = 4,
    Tanh = 5,
    /// Alpha in `param`.
    Elu = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OsAttention {
    Gat = 0,
    GatV2 = 1,
    DotProduct = 2,
    /// Random-walk aggregation `D⁻¹A`.
    Constant = 3,
}

/// Settings for [`os_trajectory_run`]. Weights are drawn per layer with
/// `‖|W|‖_∞ = 1`; attention parameters are `N(0, gain²)`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OsRunConfig {
    pub nonlinearity: OsNonlinearity,
    pub nonlinearity_param: f64,
    pub attention: OsAttention,
    pub attention_gain: f64,
    pub leaky_slope: f64,
    pub hidden_dim: usize,
    pub depth: usize,
    /// Entries uniform on `[0, 1)` instead of `(−1, 1)`.
    pub nonnegative_weights: bool,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OsLambdaReport {
    pub lambda: f64,
    pub lambda_modulus: f64,
    pub jsr_lower: f64,
    pub jsr_upper: f64,
    pub rho_reduced_random_walk: f64,
    pub identity_error: f64,
    pub holds: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OsCounterexample {
    pub mu_min: f64,
    pub mu_max: f64,
    pub max_state_drift: f64,
}

/// Opaque graph handle.
pub struct OsGraph(CoreGraph);

/// Opaque trajectory handle.
pub struct OsTrajectory(TrajectoryRecord);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OsStatus {
    match e {
        Error::InvalidArgument(_)
        | Error::EmptyMatrix
        | Error::NonFinite { .. }
        | Error::NodeOutOfRange(..)
        | Error::UnexpectedSelfPair(_)
        | Error::EmptyGraph
        | Error::IsolatedNode(_)
        | Error::ResampleBudget { .. }
        | Error::WindowTooShort { .. }
        | Error::NonPositive { .. }
        | Error::NotSymmetric { .. }
        | Error::Config(_)
        | Error::Parse { .. } => OsStatus::InvalidArgument,
        Error::DimensionMismatch(_) | Error::NotSquare { .. } => OsStatus::DimensionMismatch,
        Error::A1Violated(_) => OsStatus::A1Violated,
        Error::A4Violated { .. } => OsStatus::A4Violated,
        Error::Overflow { .. } => OsStatus::Overflow,
        Error::EpsilonTooLarge { .. } => OsStatus::EpsilonTooLarge,
        Error::BudgetExceeded(_) => OsStatus::BudgetExceeded,
        Error::NoConvergence(_) => OsStatus::NoConvergence,
        Error::Io(_) => OsStatus::Io,
        Error::Seeded { inner, .. } => status_of(inner),
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, clears the last error on success and records it otherwise.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OsStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            OsStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            OsStatus::Panic
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: callers pass pointers that are either null or valid for reads.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: callers pass pointers that are either null or valid for writes.
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn read_matrix(data: *const f64, rows: usize, cols: usize) -> Result<Matrix, Fail> {
    if data.is_null() {
        return Err(Fail::Null("matrix data"));
    }
    let len = rows.checked_mul(cols).ok_or(Error::InvalidArgument("matrix size overflows".into()))?;
    // SAFETY: the caller guarantees `rows * cols` readable doubles.
    let v = unsafe { slice::from_raw_parts(data, len) }.to_vec();
    Ok(Matrix::new(rows, cols, v)?)
}

fn write_slice(dst: *mut f64, len: usize, src: &[f64]) -> Result<(), Fail> {
    if dst.is_null() {
        return Err(Fail::Null("output buffer"));
    }
    if len < src.len() {
        return Err(Error::DimensionMismatch(format!("buffer holds {len} values, need {}", src.len())).into());
    }
    // SAFETY: the caller guarantees `len` writable doubles and `len >= src.len()`.
    unsafe { slice::from_raw_parts_mut(dst, src.len()) }.copy_from_slice(src);
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the length the full message
/// needs including the NUL, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn os_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: `buf` is valid for `len >= n` bytes.
            let dst = unsafe { slice::from_raw_parts_mut(buf as *mut u8, n) };
            dst.copy_from_slice(&bytes[..n]);
            dst[n - 1] = 0;
        }
        bytes.len()
    })
}

/// Generates a graph. `p` is used by Erdős–Rényi only.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_graph_generate(
    kind: OsGraphKind,
    n: usize,
    p: f64,
    seed: u64,
    self_loops: bool,
    out_graph: *mut *mut OsGraph,
) -> OsStatus {
    guard(|| {
        let slot = out(out_graph, "out_graph")?;
        let spec = match kind {
            OsGraphKind::ErdosRenyi => GraphSpec::ErdosRenyi { n, p },
            OsGraphKind::Cycle => GraphSpec::Cycle { n },
            OsGraphKind::Complete => GraphSpec::Complete { n },
            OsGraphKind::Star => GraphSpec::Star { n },
            OsGraphKind::Path => GraphSpec::Path { n },
        };
        let g = generate_graph(spec, seed, self_loops)?;
        *slot = Box::into_raw(Box::new(OsGraph(g)));
        Ok(())
    })
}

/// Builds a graph from `n_edges` pairs stored as `edges[2k], edges[2k+1]`.
///
/// # Safety
/// `edges` must hold `2 * n_edges` values (or be null when `n_edges` is 0)
/// and `out_graph` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_graph_from_edges(
    n: usize,
    edges: *const usize,
    n_edges: usize,
    self_loops: bool,
    out_graph: *mut *mut OsGraph,
) -> OsStatus {
    guard(|| {
        let slot = out(out_graph, "out_graph")?;
        let pairs: Vec<(usize, usize)> = if n_edges == 0 {
            Vec::new()
        } else {
            if edges.is_null() {
                return Err(Fail::Null("edges"));
            }
            // SAFETY: the caller guarantees `2 * n_edges` readable values.
            let flat = unsafe { slice::from_raw_parts(edges, 2 * n_edges) };
            flat.chunks_exact(2).map(|c| (c[0], c[1])).collect()
        };
        *slot = Box::into_raw(Box::new(OsGraph(CoreGraph::new(n, &pairs, self_loops)?)));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn os_graph_free(graph: *mut OsGraph) {
    if !graph.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// # Safety
/// `graph` must be a live handle; `out_n` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_graph_num_nodes(graph: *const OsGraph, out_n: *mut usize) -> OsStatus {
    guard(|| {
        *out(out_n, "out_n")? = non_null(graph, "graph")?.0.n_nodes();
        Ok(())
    })
}

/// Second largest eigenvalue of `D^{−1/2} A D^{−1/2}`.
///
/// # Safety
/// `graph` must be a live handle; `out_lambda` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_graph_lambda(graph: *const OsGraph, out_lambda: *mut f64) -> OsStatus {
    guard(|| {
        *out(out_lambda, "out_lambda")? = graph_lambda(&non_null(graph, "graph")?.0)?;
        Ok(())
    })
}

/// `μ(X)` for a row-major `rows × cols` matrix.
///
/// # Safety
/// `x` must hold `rows * cols` values; `out_mu` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_mu(x: *const f64, rows: usize, cols: usize, out_mu: *mut f64) -> OsStatus {
    guard(|| {
        let slot = out(out_mu, "out_mu")?;
        *slot = mu(&read_matrix(x, rows, cols)?);
        Ok(())
    })
}

/// # Safety
/// `m` must hold `rows * cols` values; `out_norm` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_matrix_norm(
    m: *const f64,
    rows: usize,
    cols: usize,
    kind: OsNorm,
    out_norm: *mut f64,
) -> OsStatus {
    guard(|| {
        let slot = out(out_norm, "out_norm")?;
        let kind = match kind {
            OsNorm::One => NormKind::One,
            OsNorm::Two => NormKind::Two,
            OsNorm::Inf => NormKind::Inf,
            OsNorm::Frobenius => NormKind::Frobenius,
            OsNorm::Max => NormKind::Max,
        };
        *slot = matrix_norm(&read_matrix(m, rows, cols)?, kind)?;
        Ok(())
    })
}

/// # Safety
/// `m` must hold `n * n` values; `out_rho` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_spectral_radius(m: *const f64, n: usize, out_rho: *mut f64) -> OsStatus {
    guard(|| {
        let slot = out(out_rho, "out_rho")?;
        *slot = spectral_radius(&read_matrix(m, n, n)?)?;
        Ok(())
    })
}

/// Positivity horizon `T` and entry floor `c = ε^T`.
///
/// # Safety
/// `graph` must be a live handle; the out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_positivity_horizon(
    graph: *const OsGraph,
    eps: f64,
    out_t: *mut usize,
    out_c: *mut f64,
) -> OsStatus {
    guard(|| {
        let (t, c) = (out(out_t, "out_t")?, out(out_c, "out_c")?);
        let h = positivity_horizon(&non_null(graph, "graph")?.0, eps)?;
        *t = h.t;
        *c = h.c;
        Ok(())
    })
}

/// # Safety
/// `graph` must be a live handle; `out_report` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_lambda_vs_jsr(
    graph: *const OsGraph,
    eps: f64,
    k_max: usize,
    samples: usize,
    seed: u64,
    out_report: *mut OsLambdaReport,
) -> OsStatus {
    guard(|| {
        let slot = out(out_report, "out_report")?;
        let r = lambda_vs_jsr(&non_null(graph, "graph")?.0, eps, k_max, samples, seed)?;
        *slot = OsLambdaReport {
            lambda: r.lambda_algebraic,
            lambda_modulus: r.lambda_modulus,
            jsr_lower: r.estimate.lower,
            jsr_upper: r.estimate.upper,
            rho_reduced_random_walk: r.rho_reduced_random_walk,
            identity_error: r.identity_error,
            holds: r.holds,
        };
        Ok(())
    })
}

fn nonlinearity(kind: OsNonlinearity, param: f64) -> NonlinearitySpec {
    match kind {
        OsNonlinearity::Identity => NonlinearitySpec::Identity,
        OsNonlinearity::Relu => NonlinearitySpec::Relu,
        OsNonlinearity::LeakyRelu => NonlinearitySpec::LeakyRelu { slope: param },
        OsNonlinearity::Gelu => NonlinearitySpec::Gelu,
        OsNonlinearity::Silu => NonlinearitySpec::Silu,
        OsNonlinearity::Tanh => NonlinearitySpec::Tanh,
        OsNonlinearity::Elu => NonlinearitySpec::Elu { alpha: param },
    }
}

/// Runs `cfg.depth` layers from `x0` (row-major, `n_nodes × cols`). Pass a
/// null `x0` to draw standard normal features with `cols` columns from
/// `cfg.seed`.
///
/// # Safety
/// `graph` must be a live handle, `x0` null or holding `n_nodes * cols`
/// values, and `out_traj` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_trajectory_run(
    graph: *const OsGraph,
    x0: *const f64,
    cols: usize,
    cfg: *const OsRunConfig,
    out_traj: *mut *mut OsTrajectory,
) -> OsStatus {
    guard(|| {
        let slot = out(out_traj, "out_traj")?;
        let g = &non_null(graph, "graph")?.0;
        let cfg = non_null(cfg, "cfg")?;
        let n = g.n_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let x = if x0.is_null() {
            Matrix::from_fn(n, cols, |_, _| StandardNormal.sample(&mut rng))
        } else {
            read_matrix(x0, n, cols)?
        };
        let d = cfg.hidden_dim;
        let init = if cfg.nonnegative_weights { WeightInit::Nonnegative } else { WeightInit::Signed };
        let ws = WeightSequence::random_a3_with(cols, d, cfg.depth, cfg.seed, init);
        let aspec = match cfg.attention {
            OsAttention::Gat => AttentionSpec::random_gat(d, cfg.leaky_slope, cfg.attention_gain, &mut rng),
            OsAttention::GatV2 => AttentionSpec::random_gatv2(d, d, cfg.leaky_slope, cfg.attention_gain, &mut rng),
            OsAttention::DotProduct => AttentionSpec::DotProduct { scale: None },
            OsAttention::Constant => AttentionSpec::Constant,
        };
        let nspec = nonlinearity(cfg.nonlinearity, cfg.nonlinearity_param);
        nspec.validate()?;
        let rec = run_trajectory(g, &x, &ws, &LayerRule::new(aspec, nspec), cfg.depth)?;
        *slot = Box::into_raw(Box::new(OsTrajectory(rec)));
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn os_trajectory_free(traj: *mut OsTrajectory) {
    if !traj.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(traj) });
    }
}

/// Number of layers run.
///
/// # Safety
/// `traj` must be a live handle; `out_depth` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_trajectory_depth(traj: *const OsTrajectory, out_depth: *mut usize) -> OsStatus {
    guard(|| {
        *out(out_depth, "out_depth")? = non_null(traj, "traj")?.0.depth();
        Ok(())
    })
}

/// Copies `μ(X^(t))` for `t = 0..=depth` into `buf`.
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn os_trajectory_mu(traj: *const OsTrajectory, buf: *mut f64, len: usize) -> OsStatus {
    guard(|| write_slice(buf, len, &non_null(traj, "traj")?.0.series.mu))
}

/// Shape of `X^(layer)`.
///
/// # Safety
/// `traj` must be a live handle; the out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_trajectory_state_shape(
    traj: *const OsTrajectory,
    layer: usize,
    out_rows: *mut usize,
    out_cols: *mut usize,
) -> OsStatus {
    guard(|| {
        let (r, c) = (out(out_rows, "out_rows")?, out(out_cols, "out_cols")?);
        let x = state(non_null(traj, "traj")?, layer)?;
        *r = x.rows();
        *c = x.cols();
        Ok(())
    })
}

fn state(t: &OsTrajectory, layer: usize) -> Result<&Matrix, Fail> {
    t.0.states
        .get(layer)
        .ok_or_else(|| Error::InvalidArgument(format!("layer {layer} beyond depth {}", t.0.depth())).into())
}

/// Copies `X^(layer)` row-major into `buf`.
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn os_trajectory_state(
    traj: *const OsTrajectory,
    layer: usize,
    buf: *mut f64,
    len: usize,
) -> OsStatus {
    guard(|| write_slice(buf, len, state(non_null(traj, "traj")?, layer)?.as_slice()))
}

/// Runs the two-node fixed-point system for `steps` layers.
///
/// # Safety
/// `out_result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn os_counterexample(steps: usize, out_result: *mut OsCounterexample) -> OsStatus {
    guard(|| {
        let slot = out(out_result, "out_result")?;
        let sys = counterexample_system();
        let rec = run_trajectory(&sys.graph, &sys.x, &sys.weights(steps), &sys.rule(), steps)?;
        let mus = &rec.series.mu;
        *slot = OsCounterexample {
            mu_min: mus.iter().copied().fold(f64::INFINITY, f64::min),
            mu_max: mus.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            max_state_drift: rec.states.iter().map(|s| s.max_abs_diff(&sys.x)).fold(0.0, f64::max),
        };
        Ok(())
    })
}
