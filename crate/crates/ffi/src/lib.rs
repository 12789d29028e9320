//! C ABI for the interference engine: opaque handles, integer status
//! codes, and a thread-local last-error message.
//!
//! Every function returning [`IlStatus`] sets the error message on
//! failure; query it with [`il_last_error`]. Handles own their data and
//! must be released with the matching `_free` function exactly once.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use interference_lab::design::{Design, DEFAULT_SUPPORT_CAP};
use interference_lab::error::Error;
use interference_lab::estimator::Contrast;
use interference_lab::exposure::{Cell, ExposureModel};
use interference_lab::graph::{generate_graph, GraphModel, InterferenceGraph};
use interference_lab::harness::{self, EstimatorSpec, ExperimentConfig};
use interference_lab::outcomes::{
    generate_params, EstimandKind, ExposedConvention, ParamSpec, PotentialOutcomeTable,
};
use interference_lab::propensity::{
    analytic_propensity, enumerated_propensity, mc_propensity, PropensityTable,
};

/// Status codes returned by fallible functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlStatus {
    IlOk = 0,
    IlErrNullPointer = -1,
    IlErrInvalidArgument = -2,
    IlErrUnsupported = -3,
    IlErrPositivity = -4,
    IlErrTooLarge = -5,
    IlErrRuntime = -6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> IlStatus {
    match err {
        Error::InvalidParam(_)
        | Error::Config(_)
        | Error::Parse(_)
        | Error::EndpointOutOfRange { .. }
        | Error::SelfLoop { .. }
        | Error::LevelOutOfRange { .. } => IlStatus::IlErrInvalidArgument,
        Error::NoAnalyticFormula(_) => IlStatus::IlErrUnsupported,
        Error::PositivityViolation { .. } => IlStatus::IlErrPositivity,
        Error::SupportTooLarge { .. } => IlStatus::IlErrTooLarge,
        _ => IlStatus::IlErrRuntime,
    }
}

fn fail(err: Error) -> IlStatus {
    set_error(&err.to_string());
    status_of(&err)
}

/// Opaque interference graph.
pub struct IlGraph(InterferenceGraph);
/// Opaque treatment design.
pub struct IlDesign(Design);
/// Opaque potential-outcome table.
pub struct IlTable(PotentialOutcomeTable);
/// Opaque propensity table.
pub struct IlPropensity(PropensityTable);

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`). Returns the full message length in bytes, excluding the NUL.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes, or be null when
/// `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn il_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let copy = (bytes.len() - 1).min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, copy);
            *buf.add(copy) = 0;
        }
        bytes.len() - 1
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn il_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ── graphs ────────────────────────────────────────────────────────────

/// Builds a graph from `edge_count` pairs laid out as `[i0, j0, i1, j1, …]`.
///
/// # Safety
/// `edges` must point to `2 * edge_count` readable u32 values (or be null
/// when `edge_count == 0`); `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_graph_from_edge_list(
    n: usize,
    edges: *const u32,
    edge_count: usize,
    out: *mut *mut IlGraph,
) -> IlStatus {
    if out.is_null() || (edges.is_null() && edge_count > 0) {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    let pairs: Vec<(usize, usize)> = (0..edge_count)
        .map(|k| (*edges.add(2 * k) as usize, *edges.add(2 * k + 1) as usize))
        .collect();
    match InterferenceGraph::from_edge_list(n, &pairs) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(IlGraph(g)));
            IlStatus::IlOk
        }
        Err(e) => fail(e),
    }
}

/// Random-graph families exposed over the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlGraphModel {
    IlErdosRenyi = 0,
    IlBarabasiAlbert = 1,
    IlSmallWorld = 2,
}

/// Draws a graph. Parameter meaning by family: Erdős–Rényi uses `p1` as
/// the edge probability; preferential attachment uses `int_param` as the
/// minimum degree and `p1` as the attractiveness; the ring model uses
/// `int_param` as the per-side neighborhood size and `p1` as the rewiring
/// probability.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_graph_generate(
    model: IlGraphModel,
    n: usize,
    int_param: usize,
    p1: f64,
    seed: u64,
    out: *mut *mut IlGraph,
) -> IlStatus {
    if out.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    let model = match model {
        IlGraphModel::IlErdosRenyi => GraphModel::ErdosRenyi { p: p1 },
        IlGraphModel::IlBarabasiAlbert => GraphModel::BarabasiAlbert {
            min_degree: int_param,
            attractiveness: p1,
        },
        IlGraphModel::IlSmallWorld => GraphModel::SmallWorld {
            neighborhood_size: int_param,
            rewire_p: p1,
        },
    };
    match generate_graph(model, n, seed) {
        Ok(g) => {
            *out = Box::into_raw(Box::new(IlGraph(g)));
            IlStatus::IlOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn il_graph_n(g: *const IlGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn il_graph_edge_count(g: *const IlGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// # Safety
/// `g` must be a live graph handle and `unit < n`.
#[no_mangle]
pub unsafe extern "C" fn il_graph_degree(g: *const IlGraph, unit: usize) -> usize {
    g.as_ref().map_or(0, |g| g.0.degree(unit))
}

/// # Safety
/// `g` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn il_graph_free(g: *mut IlGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

// ── designs ───────────────────────────────────────────────────────────

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_design_crd(n: usize, n_t: usize, out: *mut *mut IlDesign) -> IlStatus {
    wrap_design(Design::crd(n, n_t), out)
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_design_bernoulli(
    n: usize,
    p: f64,
    out: *mut *mut IlDesign,
) -> IlStatus {
    wrap_design(Design::bernoulli(n, p), out)
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_design_restricted_bernoulli(
    n: usize,
    p: f64,
    out: *mut *mut IlDesign,
) -> IlStatus {
    wrap_design(Design::restricted_bernoulli(n, p), out)
}

/// Cluster design over the `n`-entry `partition` array (cluster ids must
/// cover `0..K` with no empty cluster), treating `k_t` clusters.
///
/// # Safety
/// `partition` must point to `n` readable usize values; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_design_cluster(
    partition: *const usize,
    n: usize,
    k_t: usize,
    out: *mut *mut IlDesign,
) -> IlStatus {
    if partition.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    let part: Vec<usize> = (0..n).map(|i| *partition.add(i)).collect();
    wrap_design(Design::cluster(part, k_t), out)
}

/// Independent-set design on the given graph; the graph is copied into
/// the design, so the handle stays caller-owned.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_design_independent_set(
    g: *const IlGraph,
    k_t: usize,
    mix_p: f64,
    out: *mut *mut IlDesign,
) -> IlStatus {
    let Some(g) = g.as_ref() else {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    };
    wrap_design(
        Design::independent_set(Arc::new(g.0.clone()), k_t, mix_p),
        out,
    )
}

unsafe fn wrap_design(
    design: interference_lab::Result<Design>,
    out: *mut *mut IlDesign,
) -> IlStatus {
    if out.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    match design {
        Ok(d) => {
            *out = Box::into_raw(Box::new(IlDesign(d)));
            IlStatus::IlOk
        }
        Err(e) => fail(e),
    }
}

/// Draws one treatment vector into the caller's buffer; the same seed
/// reproduces the same draw.
///
/// # Safety
/// `d` must be a live design handle; `z_out` must point to `len` writable
/// bytes, with `len` equal to the design's unit count.
#[no_mangle]
pub unsafe extern "C" fn il_design_sample(
    d: *const IlDesign,
    seed: u64,
    z_out: *mut u8,
    len: usize,
) -> IlStatus {
    let Some(d) = d.as_ref() else {
        set_error("null design");
        return IlStatus::IlErrNullPointer;
    };
    if z_out.is_null() || len != d.0.n() {
        set_error("output buffer must have exactly n entries");
        return IlStatus::IlErrInvalidArgument;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match d.0.sample(&mut rng) {
        Ok(z) => {
            std::ptr::copy_nonoverlapping(z.as_ptr(), z_out, len);
            IlStatus::IlOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `d` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn il_design_free(d: *mut IlDesign) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

// ── outcome tables ────────────────────────────────────────────────────

/// Stock parameter generators.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlParamSpec {
    IlUncorrelated = 0,
    IlCorrelated = 1,
}

/// # Safety
/// `g` must be a live graph handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_table_generate(
    spec: IlParamSpec,
    g: *const IlGraph,
    seed: u64,
    out: *mut *mut IlTable,
) -> IlStatus {
    let Some(g) = g.as_ref() else {
        set_error("null graph");
        return IlStatus::IlErrNullPointer;
    };
    if out.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    let spec = match spec {
        IlParamSpec::IlUncorrelated => ParamSpec::Uncorrelated,
        IlParamSpec::IlCorrelated => ParamSpec::Correlated,
    };
    *out = Box::into_raw(Box::new(IlTable(generate_params(spec, &g.0, seed))));
    IlStatus::IlOk
}

/// Parses a table from the columnar replay text format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_table_from_text(
    text: *const c_char,
    out: *mut *mut IlTable,
) -> IlStatus {
    if text.is_null() || out.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    let Ok(text) = CStr::from_ptr(text).to_str() else {
        set_error("table text is not valid UTF-8");
        return IlStatus::IlErrInvalidArgument;
    };
    match PotentialOutcomeTable::from_columnar_text(text) {
        Ok(t) => {
            *out = Box::into_raw(Box::new(IlTable(t)));
            IlStatus::IlOk
        }
        Err(e) => fail(e),
    }
}

/// Estimands addressable over the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlEstimand {
    IlDte = 0,
    IlTte = 1,
    IlGamma1 = 2,
    IlGamma2 = 3,
}

fn estimand_of(e: IlEstimand) -> EstimandKind {
    match e {
        IlEstimand::IlDte => EstimandKind::Dte,
        IlEstimand::IlTte => EstimandKind::Tte,
        IlEstimand::IlGamma1 => EstimandKind::Gamma1,
        IlEstimand::IlGamma2 => EstimandKind::Gamma2,
    }
}

/// True estimand value from the table; the "exposed" level is the one a
/// unit reaches when all its neighbors are treated.
///
/// # Safety
/// `t` must be a live table handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_table_true_estimand(
    t: *const IlTable,
    which: IlEstimand,
    out: *mut f64,
) -> IlStatus {
    let Some(t) = t.as_ref() else {
        set_error("null table");
        return IlStatus::IlErrNullPointer;
    };
    if out.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    match t
        .0
        .true_estimand(estimand_of(which), ExposedConvention::AllNeighborsTreated)
    {
        Ok(v) => {
            *out = v;
            IlStatus::IlOk
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `t` must be a live table handle.
#[no_mangle]
pub unsafe extern "C" fn il_table_n(t: *const IlTable) -> usize {
    t.as_ref().map_or(0, |t| t.0.n())
}

/// # Safety
/// `t` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn il_table_free(t: *mut IlTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

// ── propensities ──────────────────────────────────────────────────────

/// Exposure rules addressable over the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlExposure {
    IlBinary = 0,
    IlSymmetric = 1,
    IlGeneral = 2,
}

fn exposure_of(m: IlExposure) -> ExposureModel {
    match m {
        IlExposure::IlBinary => ExposureModel::BinaryAny,
        IlExposure::IlSymmetric => ExposureModel::SymmetricCount,
        IlExposure::IlGeneral => ExposureModel::GeneralPattern,
    }
}

/// Closed-form propensities where published formulas exist.
///
/// # Safety
/// `d` and `g` must be live handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_propensity_analytic(
    d: *const IlDesign,
    g: *const IlGraph,
    model: IlExposure,
    out: *mut *mut IlPropensity,
) -> IlStatus {
    let (Some(d), Some(g)) = (d.as_ref(), g.as_ref()) else {
        set_error("null handle");
        return IlStatus::IlErrNullPointer;
    };
    wrap_propensity(analytic_propensity(&d.0, &g.0, exposure_of(model)), out)
}

/// Exact propensities by support enumeration. Joint probabilities are not
/// exposed over the ABI; use the core crate for variance work.
///
/// # Safety
/// `d` and `g` must be live handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_propensity_enumerated(
    d: *const IlDesign,
    g: *const IlGraph,
    model: IlExposure,
    out: *mut *mut IlPropensity,
) -> IlStatus {
    let (Some(d), Some(g)) = (d.as_ref(), g.as_ref()) else {
        set_error("null handle");
        return IlStatus::IlErrNullPointer;
    };
    wrap_propensity(
        enumerated_propensity(&d.0, &g.0, exposure_of(model), DEFAULT_SUPPORT_CAP).map(|(t, _)| t),
        out,
    )
}

/// Monte-Carlo propensity frequencies.
///
/// # Safety
/// `d` and `g` must be live handles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_propensity_mc(
    d: *const IlDesign,
    g: *const IlGraph,
    model: IlExposure,
    samples: u64,
    seed: u64,
    out: *mut *mut IlPropensity,
) -> IlStatus {
    let (Some(d), Some(g)) = (d.as_ref(), g.as_ref()) else {
        set_error("null handle");
        return IlStatus::IlErrNullPointer;
    };
    wrap_propensity(
        mc_propensity(&d.0, &g.0, exposure_of(model), samples, seed),
        out,
    )
}

unsafe fn wrap_propensity(
    table: interference_lab::Result<PropensityTable>,
    out: *mut *mut IlPropensity,
) -> IlStatus {
    if out.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    match table {
        Ok(t) => {
            *out = Box::into_raw(Box::new(IlPropensity(t)));
            IlStatus::IlOk
        }
        Err(e) => fail(e),
    }
}

/// Reads `π_unit(z, e)`; cells outside the support read as 0.
///
/// # Safety
/// `p` must be a live propensity handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn il_propensity_get(
    p: *const IlPropensity,
    unit: usize,
    z: u8,
    e: u32,
    out: *mut f64,
) -> IlStatus {
    let Some(p) = p.as_ref() else {
        set_error("null propensity table");
        return IlStatus::IlErrNullPointer;
    };
    if out.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    if unit >= p.0.n() {
        set_error("unit out of range");
        return IlStatus::IlErrInvalidArgument;
    }
    *out = p.0.pi(unit, Cell::new(z, e));
    IlStatus::IlOk
}

/// Renders the table as `unit,z,e,pi,provenance,se` CSV. Free with
/// [`il_string_free`].
///
/// # Safety
/// `p` must be a live propensity handle.
#[no_mangle]
pub unsafe extern "C" fn il_propensity_csv(p: *const IlPropensity) -> *mut c_char {
    let Some(p) = p.as_ref() else {
        set_error("null propensity table");
        return std::ptr::null_mut();
    };
    match CString::new(p.0.to_csv()) {
        Ok(s) => s.into_raw(),
        Err(_) => std::ptr::null_mut(),
    }
}

/// # Safety
/// `p` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn il_propensity_free(p: *mut IlPropensity) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// ── evaluation ────────────────────────────────────────────────────────

/// Estimators addressable over the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlEstimator {
    IlNaive = 0,
    IlDom = 1,
    IlHt = 2,
    IlHajek = 3,
    IlGreg = 4,
    IlModelDep = 5,
}

/// Exact mean, variance and undefined probability mass of an estimator
/// over the design's support, targeting the given estimand's contrast.
///
/// # Safety
/// All handles must be live; the three `out_*` pointers must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn il_exact_expectation(
    d: *const IlDesign,
    g: *const IlGraph,
    model: IlExposure,
    t: *const IlTable,
    estimator: IlEstimator,
    estimand: IlEstimand,
    out_mean: *mut f64,
    out_var: *mut f64,
    out_undefined_mass: *mut f64,
) -> IlStatus {
    let (Some(d), Some(g), Some(t)) = (d.as_ref(), g.as_ref(), t.as_ref()) else {
        set_error("null handle");
        return IlStatus::IlErrNullPointer;
    };
    if out_mean.is_null() || out_var.is_null() || out_undefined_mass.is_null() {
        set_error("null pointer");
        return IlStatus::IlErrNullPointer;
    }
    let spec = match estimator {
        IlEstimator::IlNaive => EstimatorSpec::Naive,
        IlEstimator::IlDom => EstimatorSpec::Dom,
        IlEstimator::IlHt => EstimatorSpec::Ht,
        IlEstimator::IlHajek => EstimatorSpec::Hajek,
        IlEstimator::IlGreg => EstimatorSpec::Greg,
        IlEstimator::IlModelDep => EstimatorSpec::ModelDep,
    };
    let contrast = match estimand {
        IlEstimand::IlDte => Contrast::dte(),
        IlEstimand::IlTte => Contrast::tte(),
        IlEstimand::IlGamma1 => Contrast::gamma1(),
        IlEstimand::IlGamma2 => Contrast::gamma2(),
    };
    match harness::exact_expectation(
        &d.0,
        &g.0,
        exposure_of(model),
        &t.0,
        spec,
        contrast,
        DEFAULT_SUPPORT_CAP,
    ) {
        Ok(m) => {
            *out_mean = m.expectation;
            *out_var = m.variance;
            *out_undefined_mass = m.undefined_mass;
            IlStatus::IlOk
        }
        Err(e) => fail(e),
    }
}

/// Runs a full experiment from a TOML config string and returns the
/// result table as CSV (free with [`il_string_free`]); null on error.
///
/// # Safety
/// `config` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn il_run_toml(config: *const c_char) -> *mut c_char {
    if config.is_null() {
        set_error("null config");
        return std::ptr::null_mut();
    }
    let Ok(text) = CStr::from_ptr(config).to_str() else {
        set_error("config is not valid UTF-8");
        return std::ptr::null_mut();
    };
    let run = || -> interference_lab::Result<String> {
        let cfg = ExperimentConfig::from_toml(text)?;
        let out = harness::run(&cfg)?;
        Ok(harness::to_csv(&out.results))
    };
    match run() {
        Ok(csv) => CString::new(csv).map_or(std::ptr::null_mut(), CString::into_raw),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}
