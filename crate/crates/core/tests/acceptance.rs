//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Extra arguments select criteria by substring.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ossnet::export::{export_graph_csv, read_graph_csv, NetworkRecord};
use ossnet::graph::{build_file_index, build_graph, build_range_graph, percentile_threshold, FileFilter};
use ossnet::ingest::{ingest_stream, node_id, AliasMap, IngestContext, TimeBounds};
use ossnet::metrics::{betweenness_approx, betweenness_exact, local_clustering, EdgeSelection, GraphIndex};
use ossnet::pipeline::{generate_synthetic, generate_to_path, run_pipeline, PipelineConfig, SynthSpec};
use ossnet::slicing::{assign_slice, plan_slices, SECONDS_PER_DAY};
use ossnet::{CommitRecord, EcosystemGraph, GraphMode, LanguageConfig, NodeId, NodeKey, Quantile};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Random graphs and oracles

fn random_graph(r: &mut ChaCha8Rng, max_nodes: usize) -> EcosystemGraph {
    let n = r.gen_range(1..=max_nodes);
    let n_projects = r.gen_range(0..=n / 3);
    let n_authors = n - n_projects;
    let p_collab = r.gen_range(0.01..0.35);
    let p_contrib = r.gen_range(0.0..0.2);
    let authors: Vec<NodeId> = (0..n_authors).map(|i| node_id(&format!("author{i}")).unwrap()).collect();
    let projects: Vec<NodeId> = (0..n_projects).map(|i| node_id(&format!("project{i}")).unwrap()).collect();
    let mut g = EcosystemGraph::empty(0, GraphMode::Windowed);
    g.authors.extend(authors.iter().copied());
    g.projects.extend(projects.iter().copied());
    for i in 0..n_authors {
        for j in i + 1..n_authors {
            if r.gen_bool(p_collab) {
                let (a, b) = (authors[i], authors[j]);
                g.collaboration_edges.insert((a.min(b), a.max(b)));
            }
        }
        for p in &projects {
            if r.gen_bool(p_contrib) {
                g.contribution_edges.insert((authors[i], *p));
            }
        }
    }
    g
}

/// Undirected adjacency sets keyed by node, over the chosen edge set.
fn adjacency(g: &EcosystemGraph, edges: EdgeSelection) -> BTreeMap<NodeKey, BTreeSet<NodeKey>> {
    let mut adj: BTreeMap<NodeKey, BTreeSet<NodeKey>> = BTreeMap::new();
    for &a in &g.authors {
        adj.entry(NodeKey::author(a)).or_default();
    }
    for &p in &g.projects {
        adj.entry(NodeKey::project(p)).or_default();
    }
    let mut link = |x: NodeKey, y: NodeKey| {
        adj.get_mut(&x).unwrap().insert(y);
        adj.get_mut(&y).unwrap().insert(x);
    };
    for &(a, b) in &g.collaboration_edges {
        link(NodeKey::author(a), NodeKey::author(b));
    }
    if edges == EdgeSelection::Union {
        for &(a, p) in &g.contribution_edges {
            link(NodeKey::author(a), NodeKey::project(p));
        }
    }
    adj
}

/// Betweenness from all-pairs BFS: for every pair (s, t) and every v with
/// d(s,v) + d(v,t) = d(s,t), v carries sigma(s,v) * sigma(v,t) / sigma(s,t)
/// of the pair. Quadratic memory, cubic time; fine for small graphs.
fn betweenness_oracle(g: &EcosystemGraph, edges: EdgeSelection) -> BTreeMap<NodeKey, f64> {
    let adj = adjacency(g, edges);
    let keys: Vec<NodeKey> = adj.keys().copied().collect();
    let pos: HashMap<NodeKey, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    let n = keys.len();
    let mut dist = vec![vec![usize::MAX; n]; n];
    let mut sigma = vec![vec![0f64; n]; n];
    for s in 0..n {
        dist[s][s] = 0;
        sigma[s][s] = 1.0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for w in &adj[&keys[u]] {
                let w = pos[w];
                if dist[s][w] == usize::MAX {
                    dist[s][w] = dist[s][u] + 1;
                    queue.push_back(w);
                }
                if dist[s][w] == dist[s][u] + 1 {
                    sigma[s][w] += sigma[s][u];
                }
            }
        }
    }
    let mut bc = vec![0f64; n];
    for s in 0..n {
        for t in s + 1..n {
            if dist[s][t] == usize::MAX {
                continue;
            }
            for v in 0..n {
                if v == s || v == t || dist[s][v] == usize::MAX || dist[v][t] == usize::MAX {
                    continue;
                }
                if dist[s][v] + dist[v][t] == dist[s][t] {
                    bc[v] += sigma[s][v] * sigma[v][t] / sigma[s][t];
                }
            }
        }
    }
    keys.into_iter().zip(bc).collect()
}

/// Clustering by checking every neighbor pair of every author.
fn clustering_oracle(g: &EcosystemGraph) -> BTreeMap<NodeId, f64> {
    let mut nbrs: BTreeMap<NodeId, BTreeSet<NodeId>> = g.authors.iter().map(|a| (*a, BTreeSet::new())).collect();
    for &(a, b) in &g.collaboration_edges {
        nbrs.get_mut(&a).unwrap().insert(b);
        nbrs.get_mut(&b).unwrap().insert(a);
    }
    let connected = |x: NodeId, y: NodeId| g.collaboration_edges.contains(&(x.min(y), x.max(y)));
    nbrs.iter()
        .map(|(a, ns)| {
            let ns: Vec<NodeId> = ns.iter().copied().collect();
            let d = ns.len();
            if d < 2 {
                return (*a, 0.0);
            }
            let mut t = 0u64;
            for i in 0..d {
                for j in i + 1..d {
                    if connected(ns[i], ns[j]) {
                        t += 1;
                    }
                }
            }
            (*a, (2 * t) as f64 / (d * (d - 1)) as f64)
        })
        .collect()
}

fn compare_betweenness(got: &[(NodeKey, f64)], want: &BTreeMap<NodeKey, f64>, what: &str) -> Result<f64, String> {
    ensure!(got.len() == want.len(), "{what}: {} values for {} nodes", got.len(), want.len());
    let mut worst = 0f64;
    for (key, value) in got {
        let expected = want
            .get(key)
            .ok_or_else(|| format!("{what}: unexpected node {}", key.id))?;
        let diff = (value - expected).abs();
        ensure!(diff <= 1e-9, "{what}: node {} has {value}, oracle {expected}", key.id);
        worst = worst.max(diff);
    }
    Ok(worst)
}

fn c1_metric_oracles() -> Check {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0f64;
    let mut nodes = 0;
    for i in 0..200 {
        let g = random_graph(&mut r, 100);
        nodes += g.node_count();
        let clustering = local_clustering(&g);
        let want = clustering_oracle(&g);
        ensure!(clustering.len() == want.len(), "graph {i}: clustering covers {} authors", clustering.len());
        for (id, c) in &clustering {
            ensure!(want[id] == *c, "graph {i}: clustering of {id} is {c}, oracle {}", want[id]);
        }
        let edges = if i % 4 == 3 {
            EdgeSelection::Collaboration
        } else {
            EdgeSelection::Union
        };
        let got = betweenness_exact(&g, edges).map_err(|e| e.to_string())?;
        worst = worst.max(compare_betweenness(&got, &betweenness_oracle(&g, edges), &format!("graph {i}"))?);
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("200 graphs, {nodes} nodes, max betweenness error {worst:.1e}"))
}

// ---------------------------------------------------------------------------

fn collaboration_graph(n: usize, edges: impl FnOnce(&mut dyn FnMut(usize, usize))) -> EcosystemGraph {
    let mut g = EcosystemGraph::empty(0, GraphMode::Windowed);
    let ids: Vec<NodeId> = (0..n).map(|i| node_id(&format!("dev{i}")).unwrap()).collect();
    g.authors.extend(ids.iter().copied());
    edges(&mut |a, b| {
        if a != b {
            let (x, y) = (ids[a], ids[b]);
            g.collaboration_edges.insert((x.min(y), x.max(y)));
        }
    });
    g
}

/// Mean of `seeds` estimates with k = n/2 against the exact values: the
/// number of nodes with exact betweenness >= 5 and their worst relative error.
fn mean_estimate_error(g: &EcosystemGraph, seeds: u64) -> Result<(usize, f64), String> {
    let exact = betweenness_exact(g, EdgeSelection::Union).map_err(|e| e.to_string())?;
    let k = g.node_count() / 2;
    let mut sums = vec![0f64; exact.len()];
    for seed in 0..seeds {
        let approx = betweenness_approx(g, k, seed, EdgeSelection::Union).map_err(|e| e.to_string())?;
        for (sum, (_, v)) in sums.iter_mut().zip(approx) {
            *sum += v;
        }
    }
    let mut checked = 0;
    let mut worst = 0f64;
    for ((_, x), sum) in exact.iter().zip(&sums) {
        if *x >= 5.0 {
            checked += 1;
            worst = worst.max((sum / seeds as f64 - x).abs() / x);
        }
    }
    Ok((checked, worst))
}

fn c2_approximation() -> Check {
    let start = Instant::now();
    let mut r = rng(2);
    for i in 0..40 {
        let g = random_graph(&mut r, 200);
        let n = g.node_count();
        let exact = betweenness_exact(&g, EdgeSelection::Union).map_err(|e| e.to_string())?;
        let want: BTreeMap<NodeKey, f64> = exact.into_iter().collect();
        let approx = betweenness_approx(&g, n, r.gen(), EdgeSelection::Union).map_err(|e| e.to_string())?;
        compare_betweenness(&approx, &want, &format!("graph {i}, k = n"))?;
    }

    // 10 x 10 lattice of collaborators.
    let grid = collaboration_graph(100, |add| {
        for v in 0..100 {
            if v % 10 < 9 {
                add(v, v + 1);
            }
            if v < 90 {
                add(v, v + 10);
            }
        }
    });
    let (checked, worst) = mean_estimate_error(&grid, 50)?;
    ensure!(checked > 0, "no node with betweenness >= 5");
    ensure!(worst <= 0.10, "worst relative error of the 50-seed mean is {:.1}%", worst * 100.0);

    // Consistency on a sparse random network: the mean approaches the exact
    // value as seeds accumulate.
    let sparse = collaboration_graph(100, |add| {
        for v in 1..100 {
            add(v, r.gen_range(0..v));
        }
        for _ in 0..100 {
            add(r.gen_range(0..100), r.gen_range(0..100));
        }
    });
    let (_, sparse50) = mean_estimate_error(&sparse, 50)?;
    let (_, sparse2000) = mean_estimate_error(&sparse, 2000)?;
    ensure!(sparse2000 <= 0.05, "2000-seed mean still {:.1}% off", sparse2000 * 100.0);
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(300), "took {elapsed:?}");
    Ok(format!(
        "k = n exact on 40 graphs; k = n/2 over 50 seeds on a lattice: {checked} nodes, worst {:.1}%; \
         sparse random graph: worst {:.1}% at 50 seeds, {:.1}% at 2000",
        worst * 100.0,
        sparse50 * 100.0,
        sparse2000 * 100.0
    ))
}

// ---------------------------------------------------------------------------

/// Linear re-simulation of the slicing rule, one commit at a time.
fn slicing_oracle(ts: &[i64], n: usize, span: i64) -> Vec<(i64, i64, u64)> {
    let total = ts.len();
    let last = ts[total - 1];
    let mut out = Vec::new();
    let mut start = ts[0];
    let mut consumed = 0usize;
    for i in 0..n {
        let mut cut = None;
        if i + 1 < n {
            let quota = ((i + 1) * total).div_ceil(n).max(consumed + 1);
            // t_quota: first commit time with `quota` commits strictly before it.
            let mut j = quota;
            while j < total && ts[j] == ts[quota - 1] {
                j += 1;
            }
            if j < total {
                let end = ts[j].max(start + span);
                if end <= last {
                    cut = Some(end);
                }
            }
        }
        match cut {
            Some(end) => {
                let mut hi = consumed;
                while ts[hi] < end {
                    hi += 1;
                }
                out.push((start, end, (hi - consumed) as u64));
                consumed = hi;
                start = end;
            }
            None => {
                out.push((start, last, (total - consumed) as u64));
                break;
            }
        }
    }
    out
}

fn random_stream(r: &mut ChaCha8Rng, distinct: bool) -> Vec<i64> {
    let len = r.gen_range(1..=3000);
    let horizon = r.gen_range(1..=5000) * SECONDS_PER_DAY;
    let base = 1_000_000_000 + r.gen_range(0..1_000_000);
    let shape = r.gen_range(0..3);
    let mut ts: Vec<i64> = (0..len)
        .map(|_| {
            let u: f64 = r.gen();
            let x = match shape {
                0 => u,
                1 => (u * 4f64.exp_m1()).ln_1p() / 4.0,
                _ => (u * 8.0).floor() / 8.0 + r.gen::<f64>() / 400.0,
            };
            base + (x * horizon as f64) as i64
        })
        .collect();
    ts.sort_unstable();
    if distinct {
        ts.dedup();
    } else if r.gen_bool(0.5) {
        // Heavy ties.
        for t in ts.iter_mut() {
            *t -= *t % (7 * SECONDS_PER_DAY);
        }
    }
    ts
}

fn c3_slicing() -> Check {
    let mut r = rng(3);
    let mut span_zero = 0;
    for case in 0..1000 {
        let distinct = case % 2 == 0;
        let ts = random_stream(&mut r, distinct);
        let n = r.gen_range(1..=40);
        let span = match case % 4 {
            0 | 1 => 0,
            2 => r.gen_range(0..=30) * SECONDS_PER_DAY,
            _ => r.gen_range(30..=400) * SECONDS_PER_DAY,
        };
        let plan = plan_slices(&ts, n, span).map_err(|e| format!("case {case}: {e}"))?;
        let got: Vec<(i64, i64, u64)> = plan.slices.iter().map(|s| (s.start, s.end, s.commit_count)).collect();
        let want = slicing_oracle(&ts, n, span);
        ensure!(got == want, "case {case} (n={n}, span={span}): plan {got:?} differs from oracle {want:?}");

        let total = ts.len() as u64;
        ensure!(plan.len() <= n, "case {case}: {} slices for n={n}", plan.len());
        ensure!(plan.shortfall() == (plan.len() < n), "case {case}: shortfall flag");
        ensure!(plan.slices[0].start == ts[0], "case {case}: first slice starts late");
        ensure!(plan.slices.last().unwrap().end == ts[ts.len() - 1], "case {case}: last slice end");
        ensure!(got.iter().map(|s| s.2).sum::<u64>() == total, "case {case}: commits not conserved");
        for (i, w) in plan.slices.windows(2).enumerate() {
            ensure!(w[0].end == w[1].start, "case {case}: gap after slice {i}");
            ensure!(w[0].end - w[0].start >= span, "case {case}: slice {i} shorter than min span");
        }
        let ranges = plan.partition(&ts);
        let mut next = 0;
        for (i, (range, slice)) in ranges.iter().zip(&plan.slices).enumerate() {
            ensure!(range.start == next, "case {case}: partition not contiguous at slice {i}");
            ensure!(range.len() as u64 == slice.commit_count, "case {case}: slice {i} count");
            next = range.end;
        }
        ensure!(next == ts.len(), "case {case}: partition misses commits");
        for k in (0..ts.len()).step_by(37) {
            let i = assign_slice(ts[k], &plan).map_err(|e| e.to_string())?;
            ensure!(ranges[i].contains(&k), "case {case}: commit {k} assigned to slice {i}");
        }

        if span == 0 && distinct {
            span_zero += 1;
            let quota = ts.len().div_ceil(n) as u64;
            if ts.len() >= n {
                ensure!(plan.len() == n, "case {case}: {} slices without a min span", plan.len());
            }
            for s in &plan.slices[..plan.len() - 1] {
                ensure!(
                    s.commit_count + 1 >= quota && s.commit_count <= quota + 1,
                    "case {case}: slice {} holds {} commits, quota {quota}",
                    s.index,
                    s.commit_count
                );
            }
        }
    }
    Ok(format!("1000 streams match the oracle; {span_zero} zero-span streams within ceil(T/N) +- 1"))
}

// ---------------------------------------------------------------------------

/// Records that give file `k` exactly `counts[k]` distinct authors.
fn records_for_counts(counts: &[u64]) -> Vec<CommitRecord> {
    let max = counts.iter().copied().max().unwrap_or(0);
    (0..max)
        .map(|a| CommitRecord {
            timestamp: 1_500_000_000,
            commit_id: format!("c{a}"),
            author_key: format!("author{a}"),
            project_key: "proj".into(),
            files: counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > a)
                .map(|(k, _)| format!("f{k}.rs"))
                .collect(),
        })
        .collect()
}

/// Value at rank ceil(num/den * F) of the ascending counts.
fn nearest_rank_oracle(counts: &[u64], num: u64, den: u64) -> u64 {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let rank = (num * sorted.len() as u64).div_ceil(den).max(1);
    sorted[rank as usize - 1]
}

fn filter_case(counts: &[u64], num: u64, den: u64) -> Result<(u64, u64), String> {
    let records = records_for_counts(counts);
    let index = build_file_index(&records);
    ensure!(index.len() == counts.len(), "index has {} files, expected {}", index.len(), counts.len());
    let q = Quantile::new(num, den).map_err(|e| e.to_string())?;
    let threshold = percentile_threshold(&index, q).map_err(|e| e.to_string())?;
    let oracle = nearest_rank_oracle(counts, num, den);
    ensure!(threshold == oracle, "q={num}/{den}: threshold {threshold}, oracle {oracle}");
    let filter = FileFilter::compute(&index, q).map_err(|e| e.to_string())?;
    let (_, report) = build_graph(&records, &index, filter, 0, GraphMode::Windowed);
    let expected_discards = counts.iter().filter(|&&c| c > oracle).count() as u64;
    ensure!(
        report.files_discarded == expected_discards,
        "q={num}/{den}: {} files discarded, expected {expected_discards}",
        report.files_discarded
    );
    Ok((threshold, report.files_discarded))
}

fn c4_percentile() -> Check {
    let ones = vec![1u64; 500];
    let (t, d) = filter_case(&ones, 9999, 10_000)?;
    ensure!((t, d) == (1, 0), "constant distribution gave threshold {t}, {d} discarded");

    let mut ten_k = vec![1u64; 9_998];
    ten_k.extend([5, 1000]);
    let (t10, d10) = filter_case(&ten_k, 9999, 10_000)?;

    let mut r = rng(4);
    let mut hundred_k: Vec<u64> = (0..99_999).map(|_| r.gen_range(1..=3)).collect();
    hundred_k.push(5_000);
    hundred_k.shuffle(&mut r);
    let (t100, d100) = filter_case(&hundred_k, 9999, 10_000)?;
    ensure!((t100, d100) == (3, 1), "100,000-file case gave threshold {t100}, {d100} discarded");

    let qs = [(1, 2), (9, 10), (99, 100), (999, 1000), (9999, 10_000), (1, 1)];
    for case in 0..60 {
        let f = r.gen_range(1..=2000);
        let heavy = r.gen_range(1.0..4.0);
        let counts: Vec<u64> = (0..f)
            .map(|_| {
                let u: f64 = r.gen_range(1e-6..1.0);
                (u.powf(-1.0 / heavy).floor() as u64).clamp(1, 500)
            })
            .collect();
        let mut last_discarded = u64::MAX;
        for &(num, den) in &qs {
            let (_, discarded) = filter_case(&counts, num, den).map_err(|e| format!("case {case}: {e}"))?;
            ensure!(
                discarded <= last_discarded,
                "case {case}: raising q to {num}/{den} discarded more files"
            );
            last_discarded = discarded;
        }
    }
    Ok(format!(
        "10,000 files: threshold {t10}, {d10} discarded; 100,000 files: threshold {t100}, {d100} discarded; \
         monotone over 60 distributions"
    ))
}

// ---------------------------------------------------------------------------

fn synthetic_records(spec: &SynthSpec) -> Result<Vec<CommitRecord>, String> {
    let mut buf = Vec::new();
    generate_synthetic(spec, &mut buf).map_err(|e| e.to_string())?;
    let language = LanguageConfig::new("rust", ["rs"]).map_err(|e| e.to_string())?;
    let none = AliasMap::new();
    let ctx = IngestContext {
        aliases: &none,
        forks: &none,
        language: &language,
        bounds: TimeBounds::until(ossnet::pipeline::DEFAULT_COLLECTION_DATE).map_err(|e| e.to_string())?,
        memory_budget: 64 << 20,
        tmpdir: None,
    };
    let out = ingest_stream(buf.as_slice(), &ctx).map_err(|e| e.to_string())?;
    out.records.collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())
}

struct RandomSlice {
    records: Vec<CommitRecord>,
    index: usize,
    mode: GraphMode,
    quantile: Quantile,
    spec: ossnet::SliceSpec,
}

fn random_slices(seed: u64, count: usize, commits: usize) -> Result<Vec<RandomSlice>, String> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let spec = SynthSpec {
            authors: r.gen_range(5..300),
            projects: r.gen_range(1..60),
            commits,
            files_per_project: r.gen_range(2..30),
            mean_files_per_commit: r.gen_range(1.0..4.0),
            foreign_fraction: 0.05,
            seed: r.gen(),
            ..Default::default()
        };
        let records = synthetic_records(&spec)?;
        let ts: Vec<i64> = records.iter().map(|c| c.timestamp).collect();
        let plan = plan_slices(&ts, r.gen_range(2..=30), 0).map_err(|e| e.to_string())?;
        let ranges = plan.partition(&ts);
        for _ in 0..5 {
            let i = r.gen_range(0..plan.len());
            let mode = if r.gen_bool(0.3) {
                GraphMode::Cumulative
            } else {
                GraphMode::Windowed
            };
            let range = match mode {
                GraphMode::Windowed => ranges[i].clone(),
                GraphMode::Cumulative => 0..ranges[i].end,
            };
            let (num, den) = [(1, 2), (9, 10), (99, 100), (9999, 10_000), (1, 1)][r.gen_range(0..5)];
            out.push(RandomSlice {
                records: records[range].to_vec(),
                index: i,
                mode,
                quantile: Quantile::new(num, den).map_err(|e| e.to_string())?,
                spec: plan.slices[i],
            });
        }
    }
    out.truncate(count);
    Ok(out)
}

fn c5_collaboration_witness() -> Check {
    let mut edges_seen = 0;
    let mut discarded = 0;
    for (k, s) in random_slices(5, 100, 2_000)?.into_iter().enumerate() {
        let (g, report) = build_range_graph(&s.records, s.quantile, s.index, s.mode);
        // Author sets per (project, path) by plain scanning.
        let mut files: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
        for c in &s.records {
            for f in &c.files {
                files
                    .entry((c.project_key.clone(), f.clone()))
                    .or_default()
                    .insert(c.author_key.clone());
            }
        }
        let counts: Vec<u64> = files.values().map(|a| a.len() as u64).collect();
        let threshold = nearest_rank_oracle(&counts, s.quantile.num(), s.quantile.den());
        ensure!(report.threshold_author_count == threshold, "slice {k}: threshold differs");

        let retained = |project: &str, path: &str| files[&(project.to_string(), path.to_string())].len() as u64 <= threshold;
        let mut witnessed = HashSet::new();
        for (i, c1) in s.records.iter().enumerate() {
            for c2 in &s.records[i + 1..] {
                if c1.author_key == c2.author_key || c1.project_key != c2.project_key {
                    continue;
                }
                if c1.files.iter().any(|f| c2.files.contains(f) && retained(&c1.project_key, f)) {
                    let (a, b) = (node_id(&c1.author_key).unwrap(), node_id(&c2.author_key).unwrap());
                    witnessed.insert((a.min(b), a.max(b)));
                }
            }
        }
        for e in &g.collaboration_edges {
            ensure!(witnessed.contains(e), "slice {k}: edge {} - {} has no witness", e.0, e.1);
        }
        for e in &witnessed {
            ensure!(g.collaboration_edges.contains(e), "slice {k}: witnessed pair {} - {} missing", e.0, e.1);
        }
        let contributions: BTreeSet<(NodeId, NodeId)> = s
            .records
            .iter()
            .map(|c| (node_id(&c.author_key).unwrap(), node_id(&c.project_key).unwrap()))
            .collect();
        ensure!(g.contribution_edges == contributions, "slice {k}: contribution edges differ");
        edges_seen += witnessed.len();
        discarded += report.files_discarded;
    }
    Ok(format!("100 slices, {edges_seen} collaboration edges witnessed, {discarded} files filtered"))
}

// ---------------------------------------------------------------------------

struct BigRun {
    _dir: tempfile::TempDir,
    commits: PathBuf,
    language: LanguageConfig,
    output: PathBuf,
    generate: Duration,
    pipeline: Duration,
    peak_rss: Option<(u64, bool)>,
    slices: usize,
}

/// VmHWM in KiB and whether the peak counter could be reset first.
fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn reset_peak_rss() -> bool {
    std::fs::write("/proc/self/clear_refs", "5").is_ok()
}

fn big_config(run: &BigRun, output: &Path) -> PipelineConfig {
    PipelineConfig::new(&run.commits, output, vec![run.language.clone()])
}

fn big_run() -> &'static Result<BigRun, String> {
    static RUN: OnceLock<Result<BigRun, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let commits = dir.path().join("commits.tsv");
        let spec = SynthSpec {
            authors: 100_000,
            projects: 20_000,
            commits: 1_000_000,
            start: 788_918_400, // 1995-01-01
            growth: 1.0,
            foreign_fraction: 0.01,
            bogus_timestamp_fraction: 0.001,
            seed: 2021,
            ..Default::default()
        };
        let t = Instant::now();
        generate_to_path(&spec, &commits).map_err(|e| e.to_string())?;
        let generate = t.elapsed();

        let mut run = BigRun {
            commits,
            language: LanguageConfig::new("rust", ["rs"])
                .map_err(|e| e.to_string())?
                .with_min_commits(1),
            output: dir.path().join("first"),
            _dir: dir,
            generate,
            pipeline: Duration::ZERO,
            peak_rss: None,
            slices: 0,
        };
        let reset = reset_peak_rss();
        let t = Instant::now();
        let report = run_pipeline(&big_config(&run, &run.output)).map_err(|e| e.to_string())?;
        run.pipeline = t.elapsed();
        run.peak_rss = peak_rss_kib().map(|kib| (kib, reset));
        let lang = &report.languages[0];
        ensure!(
            lang.status == ossnet::pipeline::LanguageStatus::Completed,
            "pipeline did not complete: {:?}",
            lang.warnings
        );
        ensure!(
            lang.sliced_commits == lang.ingest.map_or(0, |s| s.records_emitted),
            "sliced commits differ from emitted records"
        );
        run.slices = lang.slice_count;
        Ok(run)
    })
}

fn tree_files(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

const TOY_TS: i64 = 1_500_000_000;

fn toy_run(name: &str, lines: &[(&str, &str)], edges: EdgeSelection) -> Result<(String, String), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commits = dir.path().join("commits.tsv");
    let mut text = String::new();
    for (i, (author, files)) in lines.iter().enumerate() {
        text.push_str(&format!("c{i}\t{author}\ttoy/project\t{}\t{files}\n", TOY_TS + i as i64));
    }
    std::fs::write(&commits, text).map_err(|e| e.to_string())?;
    let language = LanguageConfig::new("toy", ["rs"]).map_err(|e| e.to_string())?.with_min_commits(1);
    let mut config = PipelineConfig::new(&commits, dir.path().join("out"), vec![language]);
    config.n_target = 1;
    config.min_span_seconds = 0;
    config.betweenness_edges = edges;
    run_pipeline(&config).map_err(|e| format!("{name}: {e}"))?;
    let read = |f: &str| std::fs::read_to_string(dir.path().join("out/toy").join(f)).map_err(|e| e.to_string());
    Ok((read("nodes_00.tsv")?, read("network_00.json")?))
}

fn tsv_field(tsv: &str, author: &str, column: usize) -> Option<String> {
    let id = node_id(author).unwrap().to_string();
    tsv.lines()
        .find(|l| l.starts_with(&id) && l.contains("\tauthor\t"))
        .and_then(|l| l.split('\t').nth(column))
        .map(str::to_string)
}

fn c6_determinism() -> Check {
    // Toy graphs first: exact formula values must appear verbatim.
    let (tsv, json) = toy_run(
        "triangle with pendant",
        &[("a", "f1.rs"), ("b", "f1.rs"), ("c", "f1.rs"), ("a", "f2.rs"), ("d", "f2.rs")],
        EdgeSelection::Union,
    )?;
    ensure!(
        tsv_field(&tsv, "a", 5).as_deref() == Some("0.3333333333333333"),
        "clustering 1/3 not in node table:\n{tsv}"
    );
    ensure!(json.contains("\"collaboration_density\": 0.6666666666666666"), "{json}");

    let (tsv, _) = toy_run(
        "path",
        &[("a", "f1.rs"), ("b", "f1.rs"), ("b", "f2.rs"), ("c", "f2.rs")],
        EdgeSelection::Collaboration,
    )?;
    ensure!(tsv_field(&tsv, "b", 4).as_deref() == Some("1"), "path middle betweenness:\n{tsv}");

    let (tsv, _) = toy_run(
        "star",
        &[
            ("hub", "f1.rs;f2.rs;f3.rs;f4.rs"),
            ("l1", "f1.rs"),
            ("l2", "f2.rs"),
            ("l3", "f3.rs"),
            ("l4", "f4.rs"),
        ],
        EdgeSelection::Collaboration,
    )?;
    ensure!(tsv_field(&tsv, "hub", 4).as_deref() == Some("6"), "star center betweenness:\n{tsv}");

    let (_, json) = toy_run(
        "clique",
        &[("a", "f.rs"), ("b", "f.rs"), ("c", "f.rs")],
        EdgeSelection::Union,
    )?;
    ensure!(json.contains("\"collaboration_density\": 1.0"), "{json}");
    ensure!(json.contains("\"contribution_density\": 1.0"), "{json}");
    let (_, json) = toy_run("loners", &[("a", "x.rs"), ("b", "y.rs")], EdgeSelection::Union)?;
    ensure!(json.contains("\"collaboration_density\": 0.0"), "{json}");

    // Then the full pipeline twice on a million commits.
    let run = big_run().as_ref().map_err(|e| e.clone())?;
    let second = run.output.with_file_name("second");
    run_pipeline(&big_config(run, &second)).map_err(|e| e.to_string())?;
    let files = tree_files(&run.output);
    ensure!(files == tree_files(&second), "output trees list different files");
    let mut bytes = 0u64;
    for f in &files {
        let a = std::fs::read(run.output.join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(second.join(f)).map_err(|e| e.to_string())?;
        ensure!(a == b, "{} differs between runs", f.display());
        bytes += a.len() as u64;
    }
    std::fs::remove_dir_all(&second).ok();
    Ok(format!(
        "toy formulas verbatim; 1M-commit runs identical ({} files, {:.1} MB)",
        files.len(),
        bytes as f64 / 1e6
    ))
}

fn c7_performance() -> Check {
    let run = big_run().as_ref().map_err(|e| e.clone())?;
    let total = run.generate + run.pipeline;
    ensure!(total < Duration::from_secs(600), "took {total:?}");
    let memory = match run.peak_rss {
        Some((kib, reset)) => {
            ensure!(kib < 4 * 1024 * 1024, "peak resident memory {} MiB", kib / 1024);
            let scope = if reset { "" } else { " (process lifetime peak)" };
            format!("{} MiB peak resident{scope}", kib / 1024)
        }
        None => return Err("peak resident memory unavailable".into()),
    };
    Ok(format!(
        "{} slices; generate {:.1} s, pipeline {:.1} s; {memory}; {} cores available",
        run.slices,
        run.generate.as_secs_f64(),
        run.pipeline.as_secs_f64(),
        std::thread::available_parallelism().map_or(1, |n| n.get())
    ))
}

// ---------------------------------------------------------------------------

fn c8_round_trip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut nodes = 0;
    for (k, s) in random_slices(8, 100, 3_000)?.into_iter().enumerate() {
        let (g, filter) = build_range_graph(&s.records, s.quantile, s.index, s.mode);
        let stem = dir.path().join(format!("slice_{k:03}"));
        export_graph_csv(&g, &stem).map_err(|e| e.to_string())?;
        let back = read_graph_csv(&stem, s.index, s.mode).map_err(|e| e.to_string())?;
        ensure!(back == g, "slice {k}: reloaded graph differs");
        nodes += g.node_count();

        let metrics = GraphIndex::new(&g).network_metrics();
        let record = NetworkRecord::new(&metrics, &s.spec, &filter);
        let json = record.to_json().map_err(|e| e.to_string())?;
        let parsed = NetworkRecord::from_json(&json).map_err(|e| e.to_string())?;
        ensure!(parsed == record, "slice {k}: network record changed after parsing");
        ensure!(parsed.to_json().map_err(|e| e.to_string())? == json, "slice {k}: re-emitted JSON differs");
        ensure!(parsed.metrics() == metrics, "slice {k}: metrics not recovered");
    }
    Ok(format!("100 slices ({nodes} nodes) survive CSV and JSON round trips"))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("metric oracle equivalence", c1_metric_oracles),
        ("approximation consistency", c2_approximation),
        ("slicing rule fidelity", c3_slicing),
        ("percentile filter fidelity", c4_percentile),
        ("collaboration edge witness", c5_collaboration_witness),
        ("end-to-end determinism", c6_determinism),
        ("desk-scale performance", c7_performance),
        ("export round trip", c8_round_trip),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1} s]", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name}: {e} [{secs:.1} s]", i + 1);
            }
        }
        std::io::stdout().flush().ok();
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
