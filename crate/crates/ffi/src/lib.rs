//! C interface to the ossnet library.
//!
//! Every function returns an [`OssnetStatus`]; on failure a message is
//! available from [`ossnet_last_error`] on the calling thread. Objects are
//! opaque handles created by `*_new`/`*_load`/`*_compute` functions and
//! released with the matching `*_free`. Node identifiers are written as
//! 32 lowercase hex digits plus a terminating NUL.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ossnet::export::{export_graph_csv, read_graph_csv};
use ossnet::ingest::node_id;
use ossnet::metrics::{EdgeSelection, GraphIndex, MetricOptions, NodeMetrics, PivotCount};
use ossnet::pipeline::{run_pipeline, LanguageStatus, PipelineConfig};
use ossnet::slicing::{plan_slices, SlicePlan};
use ossnet::{EcosystemGraph, Error, GraphMode, NodeKind};

/// Length of a node id buffer, terminator included.
pub const OSSNET_NODE_ID_LEN: usize = 33;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OssnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Config = 5,
    Empty = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OssnetNodeKind {
    Author = 0,
    Project = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OssnetEdgeSelection {
    Union = 0,
    Collaboration = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OssnetSlice {
    pub index: usize,
    pub start: i64,
    pub end: i64,
    pub commit_count: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OssnetNetworkMetrics {
    pub author_count: u64,
    pub project_count: u64,
    pub contribution_count: u64,
    pub collaboration_count: u64,
    pub contribution_density: f64,
    pub collaboration_density: f64,
    pub component_count: u64,
    pub largest_component_size: u64,
    pub largest_component_fraction: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OssnetMetricOptions {
    /// Betweenness pivots; 0 selects the default for the graph size.
    pub pivots: usize,
    pub seed: u64,
    pub edges: OssnetEdgeSelection,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct OssnetNodeRow {
    pub node_id: [c_char; OSSNET_NODE_ID_LEN],
    pub kind: OssnetNodeKind,
    pub contribution_degree: u64,
    /// -1 for projects.
    pub collaboration_degree: i64,
    pub betweenness: f64,
    /// NaN for projects.
    pub clustering: f64,
}

pub struct OssnetSlicePlan(SlicePlan);

pub struct OssnetGraph {
    graph: EcosystemGraph,
    index: Option<GraphIndex>,
}

impl OssnetGraph {
    fn index(&mut self) -> &GraphIndex {
        self.index.get_or_insert_with(|| GraphIndex::new(&self.graph))
    }
}

pub struct OssnetNodeTable(Vec<NodeMetrics>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(OssnetStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Parse(_) | Error::Malformed { .. } | Error::Json(_) => OssnetStatus::Parse,
            Error::File { .. } | Error::Io(_) => OssnetStatus::Io,
            Error::Config(_) => OssnetStatus::Config,
            Error::InvalidArgument(_) => OssnetStatus::InvalidArgument,
            Error::Empty(_) => OssnetStatus::Empty,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: OssnetStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OssnetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OssnetStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            OssnetStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(OssnetStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(OssnetStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .map_or_else(|| fail(OssnetStatus::NullPointer, format!("{what} is null")), Ok)
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .map_or_else(|| fail(OssnetStatus::NullPointer, format!("{what} is null")), Ok)
}

fn write_id(out: &mut [c_char; OSSNET_NODE_ID_LEN], id: &ossnet::NodeId) {
    for (dst, src) in out.iter_mut().zip(id.to_string().bytes()) {
        *dst = src as c_char;
    }
    out[OSSNET_NODE_ID_LEN - 1] = 0;
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ossnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ossnet_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// MD5 node id of `name`, written to `out` (at least `OSSNET_NODE_ID_LEN` bytes).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` must be writable for
/// `OSSNET_NODE_ID_LEN` bytes.
#[no_mangle]
pub unsafe extern "C" fn ossnet_node_id(name: *const c_char, out: *mut c_char) -> OssnetStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let out = mut_arg(out.cast::<[c_char; OSSNET_NODE_ID_LEN]>(), "out")?;
        write_id(out, &node_id(name)?);
        Ok(())
    })
}

/// Plans slices over `len` non-decreasing timestamps.
///
/// # Safety
/// `timestamps` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ossnet_plan_slices(
    timestamps: *const i64,
    len: usize,
    n_target: usize,
    min_span_seconds: i64,
    out: *mut *mut OssnetSlicePlan,
) -> OssnetStatus {
    guard(|| {
        let out = mut_arg(out, "out")?;
        if timestamps.is_null() && len > 0 {
            return fail(OssnetStatus::NullPointer, "timestamps is null");
        }
        let ts = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(timestamps, len)
        };
        let plan = plan_slices(ts, n_target, min_span_seconds)?;
        *out = Box::into_raw(Box::new(OssnetSlicePlan(plan)));
        Ok(())
    })
}

/// Number of slices, 0 for a null plan.
///
/// # Safety
/// `plan` must be null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn ossnet_plan_len(plan: *const OssnetSlicePlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.len())
}

/// Whether fewer slices than requested fit.
///
/// # Safety
/// `plan` must be null or a live plan handle.
#[no_mangle]
pub unsafe extern "C" fn ossnet_plan_shortfall(plan: *const OssnetSlicePlan) -> bool {
    plan.as_ref().is_some_and(|p| p.0.shortfall())
}

/// # Safety
/// `plan` must be a live plan handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ossnet_plan_get(
    plan: *const OssnetSlicePlan,
    index: usize,
    out: *mut OssnetSlice,
) -> OssnetStatus {
    guard(|| {
        let plan = ref_arg(plan, "plan")?;
        let out = mut_arg(out, "out")?;
        let Some(s) = plan.0.slices.get(index) else {
            return fail(OssnetStatus::OutOfRange, format!("slice {index} of {}", plan.0.len()));
        };
        *out = OssnetSlice {
            index: s.index,
            start: s.start,
            end: s.end,
            commit_count: s.commit_count,
        };
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ossnet_plan_free(plan: *mut OssnetSlicePlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// An empty graph.
#[no_mangle]
pub extern "C" fn ossnet_graph_new() -> *mut OssnetGraph {
    Box::into_raw(Box::new(OssnetGraph {
        graph: EcosystemGraph::empty(0, GraphMode::Windowed),
        index: None,
    }))
}

/// Loads `<stem>.nodes.csv` and `<stem>.edges.csv`.
///
/// # Safety
/// `stem` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ossnet_graph_load_csv(stem: *const c_char, out: *mut *mut OssnetGraph) -> OssnetStatus {
    guard(|| {
        let stem = str_arg(stem, "stem")?;
        let out = mut_arg(out, "out")?;
        let graph = read_graph_csv(Path::new(stem), 0, GraphMode::Windowed)?;
        *out = Box::into_raw(Box::new(OssnetGraph { graph, index: None }));
        Ok(())
    })
}

/// Writes the graph as `<stem>.nodes.csv` and `<stem>.edges.csv`.
///
/// # Safety
/// `graph` must be a live handle and `stem` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ossnet_graph_write_csv(graph: *const OssnetGraph, stem: *const c_char) -> OssnetStatus {
    guard(|| {
        let graph = ref_arg(graph, "graph")?;
        export_graph_csv(&graph.graph, Path::new(str_arg(stem, "stem")?))?;
        Ok(())
    })
}

/// Adds an author → project contribution, creating both nodes.
///
/// # Safety
/// `graph` must be a live handle; names must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ossnet_graph_add_contribution(
    graph: *mut OssnetGraph,
    author: *const c_char,
    project: *const c_char,
) -> OssnetStatus {
    guard(|| {
        let g = mut_arg(graph, "graph")?;
        let a = node_id(str_arg(author, "author")?)?;
        let p = node_id(str_arg(project, "project")?)?;
        g.graph.authors.insert(a);
        g.graph.projects.insert(p);
        g.graph.contribution_edges.insert((a, p));
        g.index = None;
        Ok(())
    })
}

/// Adds a collaboration between two distinct authors, creating both nodes.
///
/// # Safety
/// `graph` must be a live handle; names must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ossnet_graph_add_collaboration(
    graph: *mut OssnetGraph,
    author_a: *const c_char,
    author_b: *const c_char,
) -> OssnetStatus {
    guard(|| {
        let g = mut_arg(graph, "graph")?;
        let a = node_id(str_arg(author_a, "author_a")?)?;
        let b = node_id(str_arg(author_b, "author_b")?)?;
        if a == b {
            return fail(OssnetStatus::InvalidArgument, "an author cannot collaborate with itself");
        }
        g.graph.authors.insert(a);
        g.graph.authors.insert(b);
        g.graph.collaboration_edges.insert((a.min(b), a.max(b)));
        g.index = None;
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ossnet_graph_node_count(graph: *const OssnetGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.node_count())
}

/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ossnet_graph_network_metrics(
    graph: *mut OssnetGraph,
    out: *mut OssnetNetworkMetrics,
) -> OssnetStatus {
    guard(|| {
        let g = mut_arg(graph, "graph")?;
        let out = mut_arg(out, "out")?;
        let m = g.index().network_metrics();
        *out = OssnetNetworkMetrics {
            author_count: m.author_count,
            project_count: m.project_count,
            contribution_count: m.contribution_count,
            collaboration_count: m.collaboration_count,
            contribution_density: m.contribution_density,
            collaboration_density: m.collaboration_density,
            component_count: m.component_sizes.len() as u64,
            largest_component_size: m.component_sizes.first().copied().unwrap_or(0),
            largest_component_fraction: m.largest_component_fraction,
        };
        Ok(())
    })
}

/// Per-node metrics in node id order. `options` may be null for defaults.
///
/// # Safety
/// `graph` must be a live handle, `options` null or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ossnet_graph_node_metrics(
    graph: *mut OssnetGraph,
    options: *const OssnetMetricOptions,
    out: *mut *mut OssnetNodeTable,
) -> OssnetStatus {
    guard(|| {
        let g = mut_arg(graph, "graph")?;
        let out = mut_arg(out, "out")?;
        let options = match options.as_ref() {
            None => MetricOptions::default(),
            Some(o) => MetricOptions {
                pivots: if o.pivots == 0 {
                    PivotCount::Auto
                } else {
                    PivotCount::Fixed(o.pivots)
                },
                seed: o.seed,
                betweenness_edges: match o.edges {
                    OssnetEdgeSelection::Union => EdgeSelection::Union,
                    OssnetEdgeSelection::Collaboration => EdgeSelection::Collaboration,
                },
            },
        };
        let rows = g.index().node_metrics(&options)?;
        *out = Box::into_raw(Box::new(OssnetNodeTable(rows)));
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ossnet_node_table_len(table: *const OssnetNodeTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ossnet_node_table_get(
    table: *const OssnetNodeTable,
    index: usize,
    out: *mut OssnetNodeRow,
) -> OssnetStatus {
    guard(|| {
        let table = ref_arg(table, "table")?;
        let out = mut_arg(out, "out")?;
        let Some(m) = table.0.get(index) else {
            return fail(OssnetStatus::OutOfRange, format!("row {index} of {}", table.0.len()));
        };
        let mut row = OssnetNodeRow {
            node_id: [0; OSSNET_NODE_ID_LEN],
            kind: match m.node.kind {
                NodeKind::Author => OssnetNodeKind::Author,
                NodeKind::Project => OssnetNodeKind::Project,
            },
            contribution_degree: m.contribution_degree,
            collaboration_degree: m.collaboration_degree.map_or(-1, |d| d as i64),
            betweenness: m.betweenness,
            clustering: m.clustering.unwrap_or(f64::NAN),
        };
        write_id(&mut row.node_id, &m.node.id);
        *out = row;
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ossnet_node_table_free(table: *mut OssnetNodeTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// # Safety
/// `graph` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ossnet_graph_free(graph: *mut OssnetGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Runs every stage for the languages in a key=value config file. The number
/// of languages that aborted is stored in `aborted` when it is non-null.
///
/// # Safety
/// `config_path` must be a NUL-terminated string; `aborted` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ossnet_run_pipeline(config_path: *const c_char, aborted: *mut usize) -> OssnetStatus {
    guard(|| {
        let path = str_arg(config_path, "config_path")?;
        let config = PipelineConfig::from_path(Path::new(path))?;
        let report = run_pipeline(&config)?;
        if let Some(out) = aborted.as_mut() {
            *out = report
                .languages
                .iter()
                .filter(|l| l.status == LanguageStatus::Aborted)
                .count();
        }
        Ok(())
    })
}
