//! End-to-end runs: ingest → slice → graph → metrics → export, once per
//! configured language.

mod config;
mod synth;

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{
    export_components_json, export_graph_csv, export_network_json, export_nodes_tsv, write_file, DatasetLayout,
};
use crate::graph::{build_range_graph, EcosystemGraph, FileFilterReport, GraphMode, Quantile};
use crate::ingest::{ingest_stream, AliasMap, CommitRecord, ForkMap, IngestContext, IngestStats, LanguageConfig};
use crate::metrics::{GraphIndex, MetricOptions};
use crate::slicing::{plan_slices, SlicePlan, SliceSpec};

pub use config::{parse_iso8601, ConfigSettings, PipelineConfig, DEFAULT_COLLECTION_DATE};
pub use synth::{generate_synthetic, SynthSpec, SynthSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Slicing,
    Graph,
    Metrics,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Slicing => "slicing",
            Stage::Graph => "graph",
            Stage::Metrics => "metrics",
            Stage::Export => "export",
        };
        f.write_str(name)
    }
}

/// A failure tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LanguageStatus {
    Completed,
    Skipped,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageReport {
    pub language: String,
    pub status: LanguageStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failed_stage: Option<Stage>,
    pub ingest: Option<IngestStats>,
    pub slice_count: usize,
    pub sliced_commits: u64,
    pub shortfall: bool,
    pub warnings: Vec<String>,
    pub filters: Vec<FileFilterReport>,
    /// Wall-clock timings; left out of the serialized report so that reruns
    /// produce identical files.
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl LanguageReport {
    fn new(language: &str) -> Self {
        LanguageReport {
            language: language.to_string(),
            status: LanguageStatus::Completed,
            failed_stage: None,
            ingest: None,
            slice_count: 0,
            sliced_commits: 0,
            shortfall: false,
            warnings: Vec::new(),
            filters: Vec::new(),
            timings: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub languages: Vec<LanguageReport>,
}

impl RunReport {
    pub fn any_aborted(&self) -> bool {
        self.languages.iter().any(|l| l.status == LanguageStatus::Aborted)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

pub fn load_maps(config: &PipelineConfig) -> Result<(AliasMap, ForkMap)> {
    let load = |path: &Option<std::path::PathBuf>| match path {
        Some(p) => AliasMap::from_path(p),
        None => Ok(AliasMap::new()),
    };
    Ok((load(&config.aliases)?, load(&config.forks)?))
}

/// Sorted, filtered commits of one language.
pub fn ingest_language(
    config: &PipelineConfig,
    language: &LanguageConfig,
    aliases: &AliasMap,
    forks: &ForkMap,
) -> Result<(Vec<CommitRecord>, IngestStats)> {
    let file = File::open(&config.commits).map_err(|e| Error::file(&config.commits, e))?;
    let ctx = IngestContext {
        aliases,
        forks,
        language,
        bounds: config.time_bounds()?,
        memory_budget: config.memory_budget,
        tmpdir: config.tmpdir.clone(),
    };
    let output = ingest_stream(BufReader::with_capacity(1 << 20, file), &ctx)?;
    let records = output.records.collect::<Result<Vec<_>>>()?;
    Ok((records, output.stats))
}

/// Commit range of slice `index`: its own window, or everything up to its end.
pub fn slice_records<'a>(
    records: &'a [CommitRecord],
    ranges: &[Range<usize>],
    index: usize,
    mode: GraphMode,
) -> &'a [CommitRecord] {
    match mode {
        GraphMode::Windowed => &records[ranges[index].clone()],
        GraphMode::Cumulative => &records[..ranges[index].end],
    }
}

/// Graph of every slice in `plan`, in slice order.
pub fn build_slice_graphs(
    records: &[CommitRecord],
    plan: &SlicePlan,
    quantile: Quantile,
    mode: GraphMode,
) -> Vec<(EcosystemGraph, FileFilterReport)> {
    let timestamps: Vec<i64> = records.iter().map(|r| r.timestamp).collect();
    let ranges = plan.partition(&timestamps);
    (0..plan.len())
        .into_par_iter()
        .map(|i| build_range_graph(slice_records(records, &ranges, i, mode), quantile, i, mode))
        .collect()
}

/// Writes the node TSV and network JSON of one slice; returns its component
/// sizes.
pub fn export_slice(
    layout: &DatasetLayout,
    graph: &EcosystemGraph,
    slice: &SliceSpec,
    filter: &FileFilterReport,
    options: &MetricOptions,
) -> std::result::Result<Vec<u64>, StageError> {
    let index = GraphIndex::new(graph);
    let network = index.network_metrics();
    let nodes = index.node_metrics(options).at(Stage::Metrics)?;
    export_nodes_tsv(&nodes, &layout.nodes_tsv(slice.index)).at(Stage::Export)?;
    export_network_json(&network, slice, filter, &layout.network_json(slice.index)).at(Stage::Export)?;
    Ok(network.component_sizes)
}

fn timed<T>(timings: &mut Vec<StageTiming>, stage: Stage, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.push(StageTiming {
        stage,
        seconds: start.elapsed().as_secs_f64(),
    });
    out
}

/// How far a language run goes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunScope {
    /// Slice plan, filter reports and graph CSVs only.
    Graphs,
    /// Everything, including metrics and the dataset files.
    All,
}

/// Mode and filter reports of a built slice set, stored next to the graph CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildManifest {
    pub mode: GraphMode,
    pub filters: Vec<FileFilterReport>,
}

fn write_build(
    layout: &DatasetLayout,
    plan: &SlicePlan,
    mode: GraphMode,
    graphs: &[(EcosystemGraph, FileFilterReport)],
) -> Result<()> {
    layout.create_dir()?;
    write_file(&layout.plan_json(), format!("{}\n", plan.to_json()?).as_bytes())?;
    let manifest = BuildManifest {
        mode,
        filters: graphs.iter().map(|(_, f)| *f).collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&layout.filters_json(), text.as_bytes())?;
    graphs
        .par_iter()
        .try_for_each(|(graph, _)| export_graph_csv(graph, &layout.graph_stem(graph.slice_index)))
}

fn export_all(
    layout: &DatasetLayout,
    plan: &SlicePlan,
    graphs: &[(EcosystemGraph, FileFilterReport)],
    options: &MetricOptions,
) -> std::result::Result<(), StageError> {
    let components = graphs
        .par_iter()
        .zip(plan.slices.par_iter())
        .map(|((graph, filter), slice)| export_slice(layout, graph, slice, filter, options))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    export_components_json(&components, &layout.components_json()).at(Stage::Export)
}

/// Computes metrics for a directory written by a [`RunScope::Graphs`] run and
/// adds the node tables, network records and component sizes.
pub fn export_built(layout: &DatasetLayout, options: &MetricOptions) -> std::result::Result<(), StageError> {
    let plan = crate::export::read_file(&layout.plan_json())
        .and_then(|t| SlicePlan::from_json(&t))
        .at(Stage::Export)?;
    let manifest: BuildManifest = crate::export::read_file(&layout.filters_json())
        .and_then(|t| Ok(serde_json::from_str(&t)?))
        .at(Stage::Export)?;
    if manifest.filters.len() != plan.len() {
        return Err(StageError {
            stage: Stage::Export,
            error: Error::malformed(
                "build manifest",
                0,
                format!("{} filter reports for {} slices", manifest.filters.len(), plan.len()),
            ),
        });
    }
    let graphs = (0..plan.len())
        .into_par_iter()
        .map(|i| {
            crate::export::read_graph_csv(&layout.graph_stem(i), i, manifest.mode).map(|g| (g, manifest.filters[i]))
        })
        .collect::<Result<Vec<_>>>()
        .at(Stage::Graph)?;
    export_all(layout, &plan, &graphs, options)
}

fn run_language_stages(
    config: &PipelineConfig,
    language: &LanguageConfig,
    maps: &(AliasMap, ForkMap),
    scope: RunScope,
    report: &mut LanguageReport,
) -> std::result::Result<(), StageError> {
    let (records, stats) = timed(&mut report.timings, Stage::Ingest, || {
        ingest_language(config, language, &maps.0, &maps.1)
    })
    .at(Stage::Ingest)?;
    report.ingest = Some(stats);

    if records.is_empty() {
        report.status = LanguageStatus::Skipped;
        report.warnings.push("no commits after filtering; nothing exported".into());
        return Ok(());
    }
    if stats.records_emitted < language.min_ecosystem_commits {
        report.status = LanguageStatus::Skipped;
        report.warnings.push(format!(
            "{} commits is below the ecosystem threshold of {}; nothing exported",
            stats.records_emitted, language.min_ecosystem_commits
        ));
        return Ok(());
    }

    let plan = timed(&mut report.timings, Stage::Slicing, || {
        let timestamps: Vec<i64> = records.iter().map(|r| r.timestamp).collect();
        plan_slices(&timestamps, config.n_target, config.min_span_seconds)
    })
    .at(Stage::Slicing)?;
    report.slice_count = plan.len();
    report.sliced_commits = plan.slices.iter().map(|s| s.commit_count).sum();
    report.shortfall = plan.shortfall();
    if plan.shortfall() {
        report.warnings.push(format!(
            "slicing shortfall: {} of {} slices fit with a minimum span of {} s",
            plan.len(),
            plan.n_target,
            plan.min_span_seconds
        ));
    }

    let graphs = timed(&mut report.timings, Stage::Graph, || {
        build_slice_graphs(&records, &plan, config.percentile_q, config.mode)
    });
    drop(records);
    report.filters = graphs.iter().map(|(_, f)| *f).collect();

    let layout = DatasetLayout::new(&config.output_root, &language.language_name);
    write_build(&layout, &plan, config.mode, &graphs).at(Stage::Export)?;
    if scope == RunScope::All {
        let options = config.metric_options();
        timed(&mut report.timings, Stage::Metrics, || export_all(&layout, &plan, &graphs, &options))?;
    }
    Ok(())
}

/// Runs one language; failures are recorded in the report, not returned.
pub fn run_language(
    config: &PipelineConfig,
    language: &LanguageConfig,
    maps: &(AliasMap, ForkMap),
    scope: RunScope,
) -> LanguageReport {
    let mut report = LanguageReport::new(&language.language_name);
    if let Err(e) = run_language_stages(config, language, maps, scope, &mut report) {
        warn!("{}: {e}", language.language_name);
        report.status = LanguageStatus::Aborted;
        report.failed_stage = Some(e.stage);
        report.warnings.push(e.to_string());
    }
    for w in &report.warnings {
        info!("{}: {w}", language.language_name);
    }
    report
}

/// Runs every language. Configuration problems are returned as errors
/// before any output is written; a failing language is recorded in the
/// report and the others continue.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport> {
    run_scoped(config, RunScope::All)
}

pub fn run_scoped(config: &PipelineConfig, scope: RunScope) -> Result<RunReport> {
    config.validate()?;
    let maps = load_maps(config).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::create_dir_all(&config.output_root).map_err(|e| Error::file(&config.output_root, e))?;
    let report = RunReport {
        languages: config
            .languages
            .iter()
            .map(|language| run_language(config, language, &maps, scope))
            .collect(),
    };
    write_file(&config.output_root.join("report.json"), report.to_json()?.as_bytes())?;
    Ok(report)
}

/// Convenience for tests and demos: generate a log into `path`.
pub fn generate_to_path(spec: &SynthSpec, path: &Path) -> Result<SynthSummary> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    generate_synthetic(spec, std::io::BufWriter::new(file))
}
