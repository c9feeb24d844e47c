//! Whole-graph and per-node metrics.
//!
//! Betweenness is unnormalized and undirected: each unordered pair of
//! endpoints is counted once and endpoints get no credit. The approximation
//! runs single-source dependency accumulation from a seeded uniform sample
//! of pivots and scales by `n / k`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EcosystemGraph;
use crate::ingest::NodeId;
use crate::union_find::DisjointSets;

/// Above this many nodes exact betweenness is refused.
pub const EXACT_BETWEENNESS_NODE_LIMIT: usize = 10_000;

const PIVOT_BATCH: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Author,
    Project,
}

impl NodeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Author => "author",
            NodeKind::Project => "project",
        }
    }
}

/// A node is its id plus its kind; an author and a project with the same
/// name are different nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl NodeKey {
    pub fn author(id: NodeId) -> Self {
        NodeKey {
            id,
            kind: NodeKind::Author,
        }
    }

    pub fn project(id: NodeId) -> Self {
        NodeKey {
            id,
            kind: NodeKind::Project,
        }
    }
}

/// Edge set used for shortest paths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSelection {
    #[default]
    Union,
    Collaboration,
}

impl FromStr for EdgeSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(EdgeSelection::Union),
            "collaboration" => Ok(EdgeSelection::Collaboration),
            other => Err(Error::Config(format!("unknown betweenness edge set {other:?}"))),
        }
    }
}

impl fmt::Display for EdgeSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeSelection::Union => "union",
            EdgeSelection::Collaboration => "collaboration",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub author_count: u64,
    pub project_count: u64,
    pub collaboration_count: u64,
    pub contribution_count: u64,
    /// Descending.
    pub component_sizes: Vec<u64>,
    pub largest_component_fraction: f64,
    pub collaboration_density: f64,
    pub contribution_density: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Degrees {
    pub contribution: u64,
    /// `None` for projects.
    pub collaboration: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node: NodeKey,
    pub contribution_degree: u64,
    pub collaboration_degree: Option<u64>,
    pub betweenness: f64,
    pub clustering: Option<f64>,
}

/// Number of betweenness pivots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PivotCount {
    /// `min(n, max(100, ceil(n / 100)))`.
    #[default]
    Auto,
    Fixed(usize),
}

impl PivotCount {
    /// Pivots to use on an `n`-node graph; fixed counts are capped at `n`.
    pub fn resolve(&self, n: usize) -> usize {
        match *self {
            PivotCount::Auto => n.min(100.max(n.div_ceil(100))),
            PivotCount::Fixed(k) => k.min(n),
        }
    }
}

impl FromStr for PivotCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(PivotCount::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(PivotCount::Fixed(k)),
            _ => Err(Error::Config(format!("pivot count {s:?} is neither `auto` nor a positive integer"))),
        }
    }
}

impl fmt::Display for PivotCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PivotCount::Auto => f.write_str("auto"),
            PivotCount::Fixed(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MetricOptions {
    pub pivots: PivotCount,
    pub seed: u64,
    pub betweenness_edges: EdgeSelection,
}

/// Compressed adjacency lists.
#[derive(Clone, Debug, Default)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(a, b) in edges {
            offsets[a as usize + 1] += 1;
            offsets[b as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        for &(a, b) in edges {
            targets[fill[a as usize]] = b;
            fill[a as usize] += 1;
            targets[fill[b as usize]] = a;
            fill[b as usize] += 1;
        }
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Adjacency { offsets, targets }
    }

    fn neighbors(&self, v: u32) -> &[u32] {
        &self.targets[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    fn degree(&self, v: u32) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }
}

/// Dense, index-addressed view of an [`EcosystemGraph`]. Nodes are numbered
/// in [`NodeKey`] order.
pub struct GraphIndex {
    nodes: Vec<NodeKey>,
    contribution_count: u64,
    collaboration_count: u64,
    author_count: u64,
    project_count: u64,
    union: Adjacency,
    contribution: Adjacency,
    collaboration: Adjacency,
}

impl GraphIndex {
    pub fn new(g: &EcosystemGraph) -> Self {
        let mut nodes: Vec<NodeKey> = g
            .authors
            .iter()
            .map(|&id| NodeKey::author(id))
            .chain(g.projects.iter().map(|&id| NodeKey::project(id)))
            .collect();
        nodes.sort_unstable();
        let n = nodes.len();
        let position = |key: NodeKey| {
            nodes
                .binary_search(&key)
                .unwrap_or_else(|_| panic!("edge endpoint {key:?} is not a node of the graph")) as u32
        };
        let contribution: Vec<(u32, u32)> = g
            .contribution_edges
            .iter()
            .map(|&(a, p)| (position(NodeKey::author(a)), position(NodeKey::project(p))))
            .collect();
        let collaboration: Vec<(u32, u32)> = g
            .collaboration_edges
            .iter()
            .map(|&(a, b)| (position(NodeKey::author(a)), position(NodeKey::author(b))))
            .collect();
        let union: Vec<(u32, u32)> = contribution.iter().chain(&collaboration).copied().collect();
        GraphIndex {
            contribution_count: contribution.len() as u64,
            collaboration_count: collaboration.len() as u64,
            author_count: g.authors.len() as u64,
            project_count: g.projects.len() as u64,
            union: Adjacency::from_edges(n, &union),
            contribution: Adjacency::from_edges(n, &contribution),
            collaboration: Adjacency::from_edges(n, &collaboration),
            nodes,
        }
    }

    pub fn nodes(&self) -> &[NodeKey] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Components over both edge types, largest first; members sorted.
    pub fn components(&self) -> Vec<Vec<NodeKey>> {
        let n = self.nodes.len();
        let mut sets = DisjointSets::new(n);
        for v in 0..n as u32 {
            for &w in self.union.neighbors(v) {
                if w > v {
                    sets.union(v, w);
                }
            }
        }
        let mut groups: std::collections::HashMap<u32, Vec<NodeKey>> = std::collections::HashMap::new();
        for v in 0..n as u32 {
            groups.entry(sets.find(v)).or_default().push(self.nodes[v as usize]);
        }
        let mut components: Vec<Vec<NodeKey>> = groups.into_values().collect();
        components.sort_unstable_by(|a, b| b.len().cmp(&a.len()).then_with(|| a[0].cmp(&b[0])));
        components
    }

    pub fn network_metrics(&self) -> NetworkMetrics {
        let component_sizes: Vec<u64> = self.components().iter().map(|c| c.len() as u64).collect();
        let total = self.nodes.len() as f64;
        let largest_component_fraction = component_sizes.first().map_or(0.0, |&s| s as f64 / total);
        let author_pairs = self.author_count as u128 * self.author_count.saturating_sub(1) as u128 / 2;
        let collaboration_density = if author_pairs == 0 {
            0.0
        } else {
            self.collaboration_count as f64 / author_pairs as f64
        };
        let bipartite_pairs = self.author_count as u128 * self.project_count as u128;
        let contribution_density = if bipartite_pairs == 0 {
            0.0
        } else {
            self.contribution_count as f64 / bipartite_pairs as f64
        };
        NetworkMetrics {
            author_count: self.author_count,
            project_count: self.project_count,
            collaboration_count: self.collaboration_count,
            contribution_count: self.contribution_count,
            component_sizes,
            largest_component_fraction,
            collaboration_density,
            contribution_density,
        }
    }

    pub fn degrees(&self) -> Vec<Degrees> {
        (0..self.nodes.len() as u32)
            .map(|v| Degrees {
                contribution: self.contribution.degree(v) as u64,
                collaboration: (self.nodes[v as usize].kind == NodeKind::Author)
                    .then(|| self.collaboration.degree(v) as u64),
            })
            .collect()
    }

    fn adjacency(&self, edges: EdgeSelection) -> &Adjacency {
        match edges {
            EdgeSelection::Union => &self.union,
            EdgeSelection::Collaboration => &self.collaboration,
        }
    }

    /// Betweenness from every node as a source.
    pub fn betweenness_exact(&self, edges: EdgeSelection) -> Result<Vec<f64>> {
        let n = self.nodes.len();
        if n > EXACT_BETWEENNESS_NODE_LIMIT {
            return Err(Error::InvalidArgument(format!(
                "exact betweenness refused on {n} nodes (limit {EXACT_BETWEENNESS_NODE_LIMIT})"
            )));
        }
        let sources: Vec<u32> = (0..n as u32).collect();
        Ok(self.betweenness_from_sources(&sources, edges))
    }

    /// Betweenness estimated from `k` pivots drawn without replacement.
    pub fn betweenness_approx(&self, k: usize, seed: u64, edges: EdgeSelection) -> Result<Vec<f64>> {
        let n = self.nodes.len();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("pivot count {k} not in 1..={n}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pivots: Vec<u32> = rand::seq::index::sample(&mut rng, n, k)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        pivots.sort_unstable();
        Ok(self.betweenness_from_sources(&pivots, edges))
    }

    /// Dependencies summed over `sources` in the given order, scaled by
    /// `n / len(sources)` and halved for undirected pairs.
    pub fn betweenness_from_sources(&self, sources: &[u32], edges: EdgeSelection) -> Vec<f64> {
        let n = self.nodes.len();
        let adj = self.adjacency(edges);
        let mut acc = vec![0.0f64; n];
        if sources.is_empty() {
            return acc;
        }
        for batch in sources.chunks(PIVOT_BATCH) {
            let partials: Vec<Vec<(u32, f64)>> = batch
                .par_iter()
                .map_init(|| BrandesScratch::new(n), |scratch, &s| scratch.dependencies(adj, s))
                .collect();
            for partial in partials {
                for (v, d) in partial {
                    acc[v as usize] += d;
                }
            }
        }
        let scale = n as f64 / sources.len() as f64;
        for value in &mut acc {
            *value = *value * scale / 2.0;
        }
        acc
    }

    /// Local clustering over collaboration edges; `None` for projects, 0 below degree 2.
    pub fn clustering(&self) -> Vec<Option<f64>> {
        let n = self.nodes.len();
        (0..n as u32)
            .into_par_iter()
            .map_init(
                || vec![u32::MAX; n],
                |mark, u| {
                    if self.nodes[u as usize].kind != NodeKind::Author {
                        return None;
                    }
                    let neighbors = self.collaboration.neighbors(u);
                    let d = neighbors.len() as u64;
                    if d < 2 {
                        return Some(0.0);
                    }
                    for &v in neighbors {
                        mark[v as usize] = u;
                    }
                    let mut triangles = 0u64;
                    for &v in neighbors {
                        triangles += self
                            .collaboration
                            .neighbors(v)
                            .iter()
                            .filter(|&&w| w > v && mark[w as usize] == u)
                            .count() as u64;
                    }
                    Some((2 * triangles) as f64 / (d * (d - 1)) as f64)
                },
            )
            .collect()
    }

    pub fn node_metrics(&self, options: &MetricOptions) -> Result<Vec<NodeMetrics>> {
        let n = self.nodes.len();
        let betweenness = if n == 0 {
            Vec::new()
        } else {
            self.betweenness_approx(options.pivots.resolve(n), options.seed, options.betweenness_edges)?
        };
        let degrees = self.degrees();
        let clustering = self.clustering();
        Ok((0..n)
            .map(|v| NodeMetrics {
                node: self.nodes[v],
                contribution_degree: degrees[v].contribution,
                collaboration_degree: degrees[v].collaboration,
                betweenness: betweenness[v],
                clustering: clustering[v],
            })
            .collect())
    }
}

struct BrandesScratch {
    dist: Vec<i32>,
    sigma: Vec<f64>,
    delta: Vec<f64>,
    order: Vec<u32>,
}

impl BrandesScratch {
    fn new(n: usize) -> Self {
        BrandesScratch {
            dist: vec![-1; n],
            sigma: vec![0.0; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
        }
    }

    /// Non-zero dependencies `delta_s(v)`, `v != s`, in BFS order.
    fn dependencies(&mut self, adj: &Adjacency, s: u32) -> Vec<(u32, f64)> {
        self.order.clear();
        self.order.push(s);
        self.dist[s as usize] = 0;
        self.sigma[s as usize] = 1.0;
        let mut head = 0;
        while head < self.order.len() {
            let v = self.order[head];
            head += 1;
            let next = self.dist[v as usize] + 1;
            for &w in adj.neighbors(v) {
                if self.dist[w as usize] < 0 {
                    self.dist[w as usize] = next;
                    self.order.push(w);
                }
                if self.dist[w as usize] == next {
                    self.sigma[w as usize] += self.sigma[v as usize];
                }
            }
        }
        for &v in self.order.iter().rev() {
            let next = self.dist[v as usize] + 1;
            let mut d = 0.0;
            for &w in adj.neighbors(v) {
                if self.dist[w as usize] == next {
                    d += self.sigma[v as usize] / self.sigma[w as usize] * (1.0 + self.delta[w as usize]);
                }
            }
            self.delta[v as usize] = d;
        }
        let out = self
            .order
            .iter()
            .skip(1)
            .filter(|&&v| self.delta[v as usize] != 0.0)
            .map(|&v| (v, self.delta[v as usize]))
            .collect();
        for &v in &self.order {
            self.dist[v as usize] = -1;
            self.sigma[v as usize] = 0.0;
            self.delta[v as usize] = 0.0;
        }
        out
    }
}

pub fn network_metrics(g: &EcosystemGraph) -> NetworkMetrics {
    GraphIndex::new(g).network_metrics()
}

pub fn connected_components(g: &EcosystemGraph) -> Vec<Vec<NodeKey>> {
    GraphIndex::new(g).components()
}

pub fn degrees(g: &EcosystemGraph) -> Vec<(NodeKey, Degrees)> {
    let index = GraphIndex::new(g);
    index.nodes().iter().copied().zip(index.degrees()).collect()
}

pub fn betweenness_exact(g: &EcosystemGraph, edges: EdgeSelection) -> Result<Vec<(NodeKey, f64)>> {
    let index = GraphIndex::new(g);
    let values = index.betweenness_exact(edges)?;
    Ok(index.nodes().iter().copied().zip(values).collect())
}

pub fn betweenness_approx(
    g: &EcosystemGraph,
    pivots: usize,
    seed: u64,
    edges: EdgeSelection,
) -> Result<Vec<(NodeKey, f64)>> {
    let index = GraphIndex::new(g);
    let values = index.betweenness_approx(pivots, seed, edges)?;
    Ok(index.nodes().iter().copied().zip(values).collect())
}

/// Clustering coefficient of every author.
pub fn local_clustering(g: &EcosystemGraph) -> Vec<(NodeId, f64)> {
    let index = GraphIndex::new(g);
    index
        .nodes()
        .iter()
        .zip(index.clustering())
        .filter_map(|(key, c)| c.map(|c| (key.id, c)))
        .collect()
}

pub fn node_metrics(g: &EcosystemGraph, options: &MetricOptions) -> Result<Vec<NodeMetrics>> {
    GraphIndex::new(g).node_metrics(options)
}
