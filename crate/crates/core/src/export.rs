//! Dataset files.
//!
//! ```text
//! <root>/<language>/slice_<NN>.nodes.csv   node_id,node_type
//! <root>/<language>/slice_<NN>.edges.csv   source,target,edge_type
//! <root>/<language>/nodes_<NN>.tsv         per-node metrics
//! <root>/<language>/network_<NN>.json      per-network metrics
//! <root>/<language>/components.json        component sizes of every slice
//! ```
//!
//! Every writer sorts its rows and prints floats in shortest round-trip form,
//! so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EcosystemGraph, FileFilterReport, GraphMode};
use crate::ingest::{NodeId, Timestamp};
use crate::metrics::{NetworkMetrics, NodeKey, NodeKind, NodeMetrics};
use crate::slicing::SliceSpec;

pub const NODES_TSV_HEADER: &str =
    "node_id\tnode_type\tcontribution_degree\tcollaboration_degree\tbetweenness\tclustering";
pub const NODES_CSV_HEADER: &str = "node_id,node_type";
pub const EDGES_CSV_HEADER: &str = "source,target,edge_type";
pub const CONTRIBUTED_TO: &str = "CONTRIBUTED_TO";
pub const COLLABORATED: &str = "COLLABORATED";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub language: String,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>, language: impl Into<String>) -> Self {
        DatasetLayout {
            root: root.into(),
            language: language.into(),
        }
    }

    pub fn dir(&self) -> PathBuf {
        self.root.join(&self.language)
    }

    pub fn create_dir(&self) -> Result<PathBuf> {
        let dir = self.dir();
        fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
        Ok(dir)
    }

    pub fn graph_stem(&self, slice: usize) -> PathBuf {
        self.dir().join(format!("slice_{slice:02}"))
    }

    pub fn nodes_tsv(&self, slice: usize) -> PathBuf {
        self.dir().join(format!("nodes_{slice:02}.tsv"))
    }

    pub fn network_json(&self, slice: usize) -> PathBuf {
        self.dir().join(format!("network_{slice:02}.json"))
    }

    pub fn components_json(&self) -> PathBuf {
        self.dir().join("components.json")
    }

    pub fn plan_json(&self) -> PathBuf {
        self.dir().join("plan.json")
    }

    pub fn filters_json(&self) -> PathBuf {
        self.dir().join("filters.json")
    }
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::file(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::file(path, e))
}

pub fn format_nodes_tsv(metrics: &[NodeMetrics]) -> String {
    let mut rows: Vec<&NodeMetrics> = metrics.iter().collect();
    rows.sort_by_key(|m| m.node);
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(NODES_TSV_HEADER);
    out.push('\n');
    for m in rows {
        let _ = write!(
            out,
            "{}\t{}\t{}\t",
            m.node.id,
            m.node.kind.as_str(),
            m.contribution_degree
        );
        if let Some(d) = m.collaboration_degree {
            let _ = write!(out, "{d}");
        }
        let _ = write!(out, "\t{}\t", m.betweenness);
        if let Some(c) = m.clustering {
            let _ = write!(out, "{c}");
        }
        out.push('\n');
    }
    out
}

pub fn export_nodes_tsv(metrics: &[NodeMetrics], path: &Path) -> Result<()> {
    write_file(path, format_nodes_tsv(metrics).as_bytes())
}

/// One slice's row of the per-network JSON, keys in emission order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub slice_index: usize,
    pub start: Timestamp,
    pub end: Timestamp,
    pub commit_count: u64,
    pub author_count: u64,
    pub project_count: u64,
    pub contribution_count: u64,
    pub collaboration_count: u64,
    pub contribution_density: f64,
    pub collaboration_density: f64,
    pub component_count: u64,
    pub largest_component_size: u64,
    pub largest_component_fraction: f64,
    pub component_sizes: Vec<u64>,
    pub filter: FileFilterReport,
}

impl NetworkRecord {
    pub fn new(metrics: &NetworkMetrics, slice: &SliceSpec, filter: &FileFilterReport) -> Self {
        NetworkRecord {
            slice_index: slice.index,
            start: slice.start,
            end: slice.end,
            commit_count: slice.commit_count,
            author_count: metrics.author_count,
            project_count: metrics.project_count,
            contribution_count: metrics.contribution_count,
            collaboration_count: metrics.collaboration_count,
            contribution_density: metrics.contribution_density,
            collaboration_density: metrics.collaboration_density,
            component_count: metrics.component_sizes.len() as u64,
            largest_component_size: metrics.component_sizes.first().copied().unwrap_or(0),
            largest_component_fraction: metrics.largest_component_fraction,
            component_sizes: metrics.component_sizes.clone(),
            filter: *filter,
        }
    }

    pub fn metrics(&self) -> NetworkMetrics {
        NetworkMetrics {
            author_count: self.author_count,
            project_count: self.project_count,
            collaboration_count: self.collaboration_count,
            contribution_count: self.contribution_count,
            component_sizes: self.component_sizes.clone(),
            largest_component_fraction: self.largest_component_fraction,
            collaboration_density: self.collaboration_density,
            contribution_density: self.contribution_density,
        }
    }

    pub fn slice(&self) -> SliceSpec {
        SliceSpec {
            index: self.slice_index,
            start: self.start,
            end: self.end,
            commit_count: self.commit_count,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn export_network_json(
    metrics: &NetworkMetrics,
    slice: &SliceSpec,
    filter: &FileFilterReport,
    path: &Path,
) -> Result<()> {
    write_file(path, NetworkRecord::new(metrics, slice, filter).to_json()?.as_bytes())
}

pub fn read_network_json(path: &Path) -> Result<NetworkRecord> {
    NetworkRecord::from_json(&read_file(path)?)
}

pub fn format_components_json(component_sizes: &[Vec<u64>]) -> Result<String> {
    let mut text = serde_json::to_string(component_sizes)?;
    text.push('\n');
    Ok(text)
}

pub fn export_components_json(component_sizes: &[Vec<u64>], path: &Path) -> Result<()> {
    write_file(path, format_components_json(component_sizes)?.as_bytes())
}

fn node_label(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Author => "AUTHOR",
        NodeKind::Project => "PROJECT",
    }
}

/// Node and edge CSV text for a graph.
pub fn format_graph_csv(g: &EcosystemGraph) -> (String, String) {
    let mut nodes: Vec<NodeKey> = g
        .authors
        .iter()
        .map(|&id| NodeKey::author(id))
        .chain(g.projects.iter().map(|&id| NodeKey::project(id)))
        .collect();
    nodes.sort_unstable();
    let mut node_text = String::with_capacity(48 * (nodes.len() + 1));
    node_text.push_str(NODES_CSV_HEADER);
    node_text.push('\n');
    for key in &nodes {
        let _ = writeln!(node_text, "{},{}", key.id, node_label(key.kind));
    }

    let ordered = |a: NodeId, b: NodeId| (a.min(b), a.max(b));
    let mut edges: Vec<(&str, NodeId, NodeId)> = g
        .contribution_edges
        .iter()
        .map(|&(a, p)| {
            let (s, t) = ordered(a, p);
            (CONTRIBUTED_TO, s, t)
        })
        .chain(g.collaboration_edges.iter().map(|&(a, b)| {
            let (s, t) = ordered(a, b);
            (COLLABORATED, s, t)
        }))
        .collect();
    edges.sort_unstable();
    let mut edge_text = String::with_capacity(80 * (edges.len() + 1));
    edge_text.push_str(EDGES_CSV_HEADER);
    edge_text.push('\n');
    for (kind, s, t) in edges {
        let _ = writeln!(edge_text, "{s},{t},{kind}");
    }
    (node_text, edge_text)
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut name = stem.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn graph_csv_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(stem, ".nodes.csv"), with_suffix(stem, ".edges.csv"))
}

pub fn export_graph_csv(g: &EcosystemGraph, stem: &Path) -> Result<()> {
    let (nodes, edges) = format_graph_csv(g);
    let (node_path, edge_path) = graph_csv_paths(stem);
    write_file(&node_path, nodes.as_bytes())?;
    write_file(&edge_path, edges.as_bytes())
}

/// Rebuilds a graph from its node and edge CSV text.
///
/// Contribution edges are stored endpoint-sorted, so the author end is
/// recovered from the node table; a pair whose ids are both author and
/// project is ambiguous and rejected.
pub fn parse_graph_csv(nodes: &str, edges: &str, slice_index: usize, mode: GraphMode) -> Result<EcosystemGraph> {
    let mut g = EcosystemGraph::empty(slice_index, mode);
    let mut lines = nodes.lines();
    if lines.next() != Some(NODES_CSV_HEADER) {
        return Err(Error::malformed("nodes csv", 1, format!("expected header {NODES_CSV_HEADER:?}")));
    }
    for (i, line) in lines.enumerate() {
        let bad = |reason: String| Error::malformed("nodes csv", i + 2, reason);
        let (id, label) = line.split_once(',').ok_or_else(|| bad("expected two fields".into()))?;
        let id: NodeId = id.parse().map_err(|e: Error| bad(e.to_string()))?;
        let fresh = match label {
            "AUTHOR" => g.authors.insert(id),
            "PROJECT" => g.projects.insert(id),
            other => return Err(bad(format!("unknown node type {other:?}"))),
        };
        if !fresh {
            return Err(bad(format!("duplicate node {id}")));
        }
    }

    let mut lines = edges.lines();
    if lines.next() != Some(EDGES_CSV_HEADER) {
        return Err(Error::malformed("edges csv", 1, format!("expected header {EDGES_CSV_HEADER:?}")));
    }
    for (i, line) in lines.enumerate() {
        let bad = |reason: String| Error::malformed("edges csv", i + 2, reason);
        let mut fields = line.split(',');
        let (Some(s), Some(t), Some(kind), None) = (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected three fields".into()));
        };
        let s: NodeId = s.parse().map_err(|e: Error| bad(e.to_string()))?;
        let t: NodeId = t.parse().map_err(|e: Error| bad(e.to_string()))?;
        if s >= t {
            return Err(bad("endpoints not in ascending order".into()));
        }
        let fresh = match kind {
            COLLABORATED => {
                if !g.authors.contains(&s) || !g.authors.contains(&t) {
                    return Err(bad("collaboration endpoint is not an author".into()));
                }
                g.collaboration_edges.insert((s, t))
            }
            CONTRIBUTED_TO => {
                let forward = g.authors.contains(&s) && g.projects.contains(&t);
                let backward = g.authors.contains(&t) && g.projects.contains(&s);
                let edge = match (forward, backward) {
                    (true, false) => (s, t),
                    (false, true) => (t, s),
                    (true, true) => return Err(bad("ambiguous contribution edge".into())),
                    (false, false) => return Err(bad("contribution edge lacks author or project".into())),
                };
                g.contribution_edges.insert(edge)
            }
            other => return Err(bad(format!("unknown edge type {other:?}"))),
        };
        if !fresh {
            return Err(bad("duplicate edge".into()));
        }
    }
    g.validate()?;
    Ok(g)
}

pub fn read_graph_csv(stem: &Path, slice_index: usize, mode: GraphMode) -> Result<EcosystemGraph> {
    let (node_path, edge_path) = graph_csv_paths(stem);
    parse_graph_csv(&read_file(&node_path)?, &read_file(&edge_path)?, slice_index, mode)
}
