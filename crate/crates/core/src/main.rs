use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use ossnet::export::{export_nodes_tsv, read_graph_csv, DatasetLayout};
use ossnet::ingest::{parse_commit_line, TimeBounds, DEFAULT_EPOCH_MIN};
use ossnet::metrics::{EdgeSelection, GraphIndex, MetricOptions, PivotCount};
use ossnet::pipeline::{
    export_built, generate_synthetic, ingest_language, load_maps, parse_iso8601, run_scoped, ConfigSettings,
    PipelineConfig, RunReport, RunScope, SynthSpec, DEFAULT_COLLECTION_DATE,
};
use ossnet::slicing::{plan_slices, DEFAULT_MIN_SPAN, DEFAULT_SLICE_COUNT, SECONDS_PER_DAY};
use ossnet::{Error, GraphMode, Quantile};

#[derive(Parser)]
#[command(name = "ossnet", version, about = "Build ecosystem collaboration networks from commit logs")]
struct Cli {
    /// Log progress and stage timings to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic commit log.
    Generate(GenerateArgs),
    /// Slice one ecosystem's timeline and write the plan as JSON.
    PlanSlices {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        slicing: SlicingArgs,
        /// Plan file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ingest, slice and write per-slice graph CSVs.
    Build {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        slicing: SlicingArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrics of a single graph given its CSV stem (STEM.nodes.csv, STEM.edges.csv).
    Metrics {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0)]
        slice_index: usize,
        /// Also write the per-node table here.
        #[arg(long)]
        nodes_out: Option<PathBuf>,
        #[command(flatten)]
        metrics: MetricArgs,
    },
    /// Compute metrics for a language directory written by `build` and add
    /// the node tables, network records and component sizes.
    Export {
        /// Language directory, e.g. out/rust.
        #[arg(long)]
        dir: PathBuf,
        #[command(flatten)]
        metrics: MetricArgs,
    },
    /// All stages for every configured language.
    Pipeline {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        slicing: SlicingArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        metrics: MetricArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// key=value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    commits: Option<PathBuf>,
    #[arg(long)]
    aliases: Option<PathBuf>,
    #[arg(long)]
    forks: Option<PathBuf>,
    /// Language config file; repeat for several languages.
    #[arg(long = "lang-config")]
    lang_config: Vec<PathBuf>,
    /// Upper timestamp bound (ISO 8601).
    #[arg(long)]
    collection_date: Option<String>,
    /// Lower timestamp bound (ISO 8601).
    #[arg(long)]
    epoch_min: Option<String>,
    #[arg(long)]
    tmpdir: Option<PathBuf>,
    /// Sort buffer size before spilling to disk.
    #[arg(long)]
    memory_budget: Option<usize>,
}

#[derive(Args)]
struct SlicingArgs {
    /// Target slice count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    min_span_days: Option<i64>,
}

#[derive(Args)]
struct GraphArgs {
    /// Files above this author-count percentile yield no collaboration edges.
    #[arg(long)]
    percentile_q: Option<Quantile>,
    /// windowed or cumulative.
    #[arg(long)]
    mode: Option<GraphMode>,
}

#[derive(Args)]
struct MetricArgs {
    /// Betweenness pivots: `auto` or a count.
    #[arg(long)]
    pivots: Option<PivotCount>,
    #[arg(long)]
    seed: Option<u64>,
    /// union or collaboration.
    #[arg(long)]
    betweenness_edges: Option<EdgeSelection>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    commits: usize,
    #[arg(long, default_value_t = 2_000)]
    authors: usize,
    #[arg(long, default_value_t = 500)]
    projects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "2008-01-01")]
    start: String,
    #[arg(long, default_value = "2021-01-01")]
    end: String,
    /// Exponential growth rate of commit intensity; 0 is uniform.
    #[arg(long, default_value_t = 0.0)]
    growth: f64,
    /// Popularity skew exponent.
    #[arg(long, default_value_t = 1.1)]
    skew: f64,
    #[arg(long, default_value = "rs")]
    extension: String,
    #[arg(long, default_value_t = 0.0)]
    foreign_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    bogus_fraction: f64,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => Failure::Config(e.into()),
            other => Failure::Run(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure::Config(anyhow::anyhow!("{e}"))
}

fn settings(input: &InputArgs, slicing: &SlicingArgs) -> Result<ConfigSettings, Failure> {
    let mut settings = ConfigSettings::default();
    if let Some(path) = &input.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        settings.apply_text(&text, base, &path.display().to_string())?;
    }
    let date = |v: &Option<String>| v.as_deref().map(parse_iso8601).transpose();
    let flags = ConfigSettings {
        commits: input.commits.clone(),
        aliases: input.aliases.clone(),
        forks: input.forks.clone(),
        lang_configs: input.lang_config.clone(),
        n_target: slicing.n,
        min_span_days: slicing.min_span_days,
        collection_date: date(&input.collection_date)?,
        epoch_min: date(&input.epoch_min)?,
        memory_budget: input.memory_budget,
        tmpdir: input.tmpdir.clone(),
        ..Default::default()
    };
    settings.merge(flags);
    Ok(settings)
}

fn with_graph(mut s: ConfigSettings, graph: &GraphArgs) -> ConfigSettings {
    s.merge(ConfigSettings {
        percentile_q: graph.percentile_q,
        mode: graph.mode,
        ..Default::default()
    });
    s
}

fn with_metrics(mut s: ConfigSettings, m: &MetricArgs) -> ConfigSettings {
    s.merge(ConfigSettings {
        pivots: m.pivots,
        seed: m.seed,
        betweenness_edges: m.betweenness_edges,
        ..Default::default()
    });
    s
}

fn metric_options(m: &MetricArgs) -> MetricOptions {
    MetricOptions {
        pivots: m.pivots.unwrap_or_default(),
        seed: m.seed.unwrap_or(0),
        betweenness_edges: m.betweenness_edges.unwrap_or_default(),
    }
}

fn with_output(mut s: ConfigSettings, out: &Option<PathBuf>) -> ConfigSettings {
    if out.is_some() {
        s.output_root = out.clone();
    }
    s
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn finish_run(report: &RunReport) -> Result<bool, Failure> {
    for lang in &report.languages {
        for t in &lang.timings {
            info!("{}: {} took {:.3} s", lang.language, t.stage, t.seconds);
        }
    }
    write_output(None, &report.to_json()?)?;
    Ok(!report.any_aborted())
}

/// Timestamps of every in-window, parsable commit, sorted.
fn all_timestamps(path: &Path, bounds: TimeBounds) -> anyhow::Result<Vec<i64>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut ts = Vec::new();
    let mut failures = 0u64;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_commit_line(&line, i + 1) {
            Ok(r) if bounds.contains(r.timestamp) => ts.push(r.timestamp),
            Ok(_) => {}
            Err(_) => failures += 1,
        }
    }
    if failures > 0 {
        warn!("{failures} unparsable lines skipped");
    }
    ts.sort_unstable();
    Ok(ts)
}

fn plan_command(input: &InputArgs, slicing: &SlicingArgs, out: Option<&Path>) -> Result<bool, Failure> {
    let s = settings(input, slicing)?;
    let commits = s.commits.clone().ok_or_else(|| config_error("`commits` is required"))?;
    let n = s.n_target.unwrap_or(DEFAULT_SLICE_COUNT);
    let min_span = s
        .min_span_days
        .map_or(DEFAULT_MIN_SPAN, |d| d.saturating_mul(SECONDS_PER_DAY));
    let bounds = TimeBounds::new(
        s.epoch_min.unwrap_or(DEFAULT_EPOCH_MIN),
        s.collection_date.unwrap_or(DEFAULT_COLLECTION_DATE),
    )
    .map_err(config_error)?;

    let timestamps = match s.lang_configs.len() {
        0 => all_timestamps(&commits, bounds)?,
        1 => {
            let config: PipelineConfig = with_output(s, &Some(PathBuf::new())).build()?;
            config.validate()?;
            let maps = load_maps(&config).map_err(config_error)?;
            let (records, _) = ingest_language(&config, &config.languages[0], &maps.0, &maps.1)?;
            records.iter().map(|r| r.timestamp).collect()
        }
        _ => return Err(config_error("plan-slices takes at most one language config")),
    };
    let plan = plan_slices(&timestamps, n, min_span)?;
    write_output(out, &format!("{}\n", plan.to_json()?))?;
    Ok(true)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Generate(g) => {
            let spec = SynthSpec {
                authors: g.authors,
                projects: g.projects,
                commits: g.commits,
                start: parse_iso8601(&g.start)?,
                end: parse_iso8601(&g.end)?,
                popularity_skew: g.skew,
                growth: g.growth,
                extension: g.extension,
                foreign_fraction: g.foreign_fraction,
                bogus_timestamp_fraction: g.bogus_fraction,
                seed: g.seed,
                ..Default::default()
            };
            spec.validate()?;
            let file = File::create(&g.out).with_context(|| format!("cannot create {}", g.out.display()))?;
            let summary = generate_synthetic(&spec, std::io::BufWriter::new(file))?;
            write_output(None, &format!("{}\n", serde_json::to_string_pretty(&summary).map_err(Error::from)?))?;
            Ok(true)
        }
        Command::PlanSlices { input, slicing, out } => plan_command(&input, &slicing, out.as_deref()),
        Command::Build {
            input,
            slicing,
            graph,
            out,
        } => {
            let config = with_output(with_graph(settings(&input, &slicing)?, &graph), &out).build()?;
            finish_run(&run_scoped(&config, RunScope::Graphs)?)
        }
        Command::Pipeline {
            input,
            slicing,
            graph,
            metrics,
            out,
        } => {
            let s = with_metrics(with_graph(settings(&input, &slicing)?, &graph), &metrics);
            let config = with_output(s, &out).build()?;
            finish_run(&run_scoped(&config, RunScope::All)?)
        }
        Command::Metrics {
            graph,
            slice_index,
            nodes_out,
            metrics,
        } => {
            let g = read_graph_csv(&graph, slice_index, GraphMode::Windowed)?;
            let index = GraphIndex::new(&g);
            if let Some(path) = nodes_out {
                export_nodes_tsv(&index.node_metrics(&metric_options(&metrics))?, &path)?;
            }
            let text = serde_json::to_string_pretty(&index.network_metrics()).map_err(Error::from)?;
            write_output(None, &format!("{text}\n"))?;
            Ok(true)
        }
        Command::Export { dir, metrics } => {
            let language = dir
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| config_error(format!("{} is not a language directory", dir.display())))?;
            let root = dir.parent().unwrap_or(Path::new("."));
            export_built(&DatasetLayout::new(root, language), &metric_options(&metrics))
                .map_err(|e| Failure::Run(e.into()))?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e:#}");
            ExitCode::from(2)
        }
    }
}
