//! Per-slice ecosystem graphs.
//!
//! Authors and projects become nodes keyed by the MD5 of their canonical
//! name. An author–project contribution edge exists for every pair seen in a
//! commit. Two authors collaborate when both touched the same file of the same
//! project, unless that file has more authors than the chosen percentile of
//! all files in the range.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CommitRecord, NodeId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMode {
    /// Commits of one slice only.
    #[default]
    Windowed,
    /// Commits of all slices up to and including this one.
    Cumulative,
}

impl fmt::Display for GraphMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphMode::Windowed => "windowed",
            GraphMode::Cumulative => "cumulative",
        })
    }
}

impl FromStr for GraphMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "windowed" => Ok(GraphMode::Windowed),
            "cumulative" => Ok(GraphMode::Cumulative),
            other => Err(Error::Config(format!("unknown graph mode {other:?}"))),
        }
    }
}

/// Simple undirected graph with typed nodes.
///
/// Contribution edges are stored `(author, project)`; collaboration edges
/// with the smaller id first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EcosystemGraph {
    pub slice_index: usize,
    pub mode: GraphMode,
    pub authors: BTreeSet<NodeId>,
    pub projects: BTreeSet<NodeId>,
    pub contribution_edges: BTreeSet<(NodeId, NodeId)>,
    pub collaboration_edges: BTreeSet<(NodeId, NodeId)>,
}

impl EcosystemGraph {
    pub fn empty(slice_index: usize, mode: GraphMode) -> Self {
        EcosystemGraph {
            slice_index,
            mode,
            ..Default::default()
        }
    }

    pub fn node_count(&self) -> usize {
        self.authors.len() + self.projects.len()
    }

    pub fn edge_count(&self) -> usize {
        self.contribution_edges.len() + self.collaboration_edges.len()
    }

    /// Checks the structural invariants: typed endpoints, no self-loops,
    /// ordered collaboration pairs, no isolated nodes.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let mut touched_authors = BTreeSet::new();
        let mut touched_projects = BTreeSet::new();
        for (a, p) in &self.contribution_edges {
            if !self.authors.contains(a) || !self.projects.contains(p) {
                return bad(format!("contribution edge {a}–{p} has an untyped endpoint"));
            }
            touched_authors.insert(*a);
            touched_projects.insert(*p);
        }
        for (a, b) in &self.collaboration_edges {
            if a >= b {
                return bad(format!("collaboration edge {a}–{b} is a loop or unordered"));
            }
            if !self.authors.contains(a) || !self.authors.contains(b) {
                return bad(format!("collaboration edge {a}–{b} joins a non-author"));
            }
            touched_authors.insert(*a);
            touched_authors.insert(*b);
        }
        if touched_authors.len() != self.authors.len() || touched_projects.len() != self.projects.len() {
            return bad("graph has isolated nodes".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FileKey {
    pub project: NodeId,
    pub path: String,
}

/// Distinct authors per `(project, path)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FileAuthorIndex {
    files: HashMap<FileKey, Vec<NodeId>>,
}

impl FileAuthorIndex {
    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Sorted, distinct authors of one file.
    pub fn authors(&self, project: NodeId, path: &str) -> Option<&[NodeId]> {
        self.files
            .get(&FileKey {
                project,
                path: path.to_string(),
            })
            .map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FileKey, &[NodeId])> {
        self.files.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn author_counts(&self) -> Vec<u64> {
        self.files.values().map(|a| a.len() as u64).collect()
    }
}

/// Memoizes MD5 ids for repeated names.
#[derive(Default)]
struct IdCache<'a> {
    ids: HashMap<&'a str, NodeId>,
}

impl<'a> IdCache<'a> {
    fn get(&mut self, name: &'a str) -> NodeId {
        *self.ids.entry(name).or_insert_with(|| NodeId::of(name))
    }
}

pub fn build_file_index(records: &[CommitRecord]) -> FileAuthorIndex {
    let mut ids = IdCache::default();
    let mut files: HashMap<FileKey, Vec<NodeId>> = HashMap::new();
    for record in records {
        let author = ids.get(&record.author_key);
        let project = ids.get(&record.project_key);
        for path in &record.files {
            let key = FileKey {
                project,
                path: path.clone(),
            };
            let authors = files.entry(key).or_default();
            if authors.last() != Some(&author) {
                authors.push(author);
            }
        }
    }
    for authors in files.values_mut() {
        authors.sort_unstable();
        authors.dedup();
    }
    FileAuthorIndex { files }
}

/// A fraction in `(0, 1]` held as an exact ratio, so `ceil(q * F)` has no
/// floating-point rounding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quantile {
    num: u64,
    den: u64,
}

impl Quantile {
    /// 99.99%.
    pub const DEFAULT: Quantile = Quantile { num: 9999, den: 10000 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 || num > den {
            return Err(Error::InvalidArgument(format!("quantile {num}/{den} not in (0, 1]")));
        }
        Ok(Quantile { num, den })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// 1-based nearest rank `ceil(q * count)`.
    pub fn rank(&self, count: u64) -> u64 {
        (count as u128 * self.num as u128).div_ceil(self.den as u128) as u64
    }
}

impl FromStr for Quantile {
    type Err = Error;

    /// Accepts plain decimals such as `0.9999` or `1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("{s:?} is not a decimal fraction"));
        let s = s.trim();
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() || frac.len() > 18 {
            return Err(bad());
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        Quantile::new(num, den)
    }
}

impl fmt::Display for Quantile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

/// Nearest-rank percentile of per-file author counts.
pub fn percentile_threshold(index: &FileAuthorIndex, q: Quantile) -> Result<u64> {
    let mut counts = index.author_counts();
    nearest_rank(&mut counts, q)
}

pub(crate) fn nearest_rank(counts: &mut [u64], q: Quantile) -> Result<u64> {
    if counts.is_empty() {
        return Err(Error::Empty("percentile of an empty file index"));
    }
    let rank = q.rank(counts.len() as u64).max(1) as usize;
    let (_, value, _) = counts.select_nth_unstable(rank - 1);
    Ok(*value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileFilterReport {
    pub percentile_q: f64,
    pub threshold_author_count: u64,
    pub files_total: u64,
    pub files_discarded: u64,
}

/// Files with more than `max_authors` authors yield no collaboration edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FileFilter {
    pub quantile: Quantile,
    pub max_authors: u64,
}

impl FileFilter {
    pub fn compute(index: &FileAuthorIndex, quantile: Quantile) -> Result<Self> {
        Ok(FileFilter {
            quantile,
            max_authors: percentile_threshold(index, quantile)?,
        })
    }

    pub fn retains(&self, author_count: usize) -> bool {
        author_count as u64 <= self.max_authors
    }
}

/// Builds the graph for one commit range from its file index and filter.
pub fn build_graph(
    records: &[CommitRecord],
    index: &FileAuthorIndex,
    filter: FileFilter,
    slice_index: usize,
    mode: GraphMode,
) -> (EcosystemGraph, FileFilterReport) {
    let mut ids = IdCache::default();
    let mut graph = EcosystemGraph::empty(slice_index, mode);

    let mut contributions = HashSet::new();
    for record in records {
        contributions.insert((ids.get(&record.author_key), ids.get(&record.project_key)));
    }
    graph.contribution_edges = contributions.into_iter().collect();
    for (a, p) in &graph.contribution_edges {
        graph.authors.insert(*a);
        graph.projects.insert(*p);
    }

    let mut collaborations: HashSet<(NodeId, NodeId)> = HashSet::new();
    let mut discarded = 0u64;
    for authors in index.files.values() {
        if !filter.retains(authors.len()) {
            discarded += 1;
            continue;
        }
        for (i, a) in authors.iter().enumerate() {
            for b in &authors[i + 1..] {
                collaborations.insert((*a, *b));
            }
        }
    }
    graph.collaboration_edges = collaborations.into_iter().collect();

    let report = FileFilterReport {
        percentile_q: filter.quantile.as_f64(),
        threshold_author_count: filter.max_authors,
        files_total: index.len() as u64,
        files_discarded: discarded,
    };
    (graph, report)
}

/// Index, threshold and graph for one commit range in a single call. An empty
/// range gives an empty graph and an all-zero filter report.
pub fn build_range_graph(
    records: &[CommitRecord],
    quantile: Quantile,
    slice_index: usize,
    mode: GraphMode,
) -> (EcosystemGraph, FileFilterReport) {
    let index = build_file_index(records);
    match FileFilter::compute(&index, quantile) {
        Ok(filter) => build_graph(records, &index, filter, slice_index, mode),
        Err(_) => (
            EcosystemGraph::empty(slice_index, mode),
            FileFilterReport {
                percentile_q: quantile.as_f64(),
                threshold_author_count: 0,
                files_total: 0,
                files_discarded: 0,
            },
        ),
    }
}
