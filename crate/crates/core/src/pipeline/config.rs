use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};
use crate::graph::{GraphMode, Quantile};
use crate::ingest::{LanguageConfig, TimeBounds, Timestamp, DEFAULT_EPOCH_MIN, DEFAULT_MEMORY_BUDGET};
use crate::metrics::{EdgeSelection, MetricOptions, PivotCount};
use crate::slicing::{DEFAULT_MIN_SPAN, DEFAULT_SLICE_COUNT, SECONDS_PER_DAY};

/// 2021-02-12T00:00:00Z.
pub const DEFAULT_COLLECTION_DATE: Timestamp = 1_613_088_000;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub commits: PathBuf,
    pub aliases: Option<PathBuf>,
    pub forks: Option<PathBuf>,
    pub languages: Vec<LanguageConfig>,
    pub n_target: usize,
    pub min_span_seconds: i64,
    pub collection_date: Timestamp,
    pub epoch_min: Timestamp,
    pub percentile_q: Quantile,
    pub pivots: PivotCount,
    pub seed: u64,
    pub betweenness_edges: EdgeSelection,
    pub mode: GraphMode,
    pub memory_budget: usize,
    pub tmpdir: Option<PathBuf>,
    pub output_root: PathBuf,
}

impl PipelineConfig {
    pub fn new(commits: impl Into<PathBuf>, output_root: impl Into<PathBuf>, languages: Vec<LanguageConfig>) -> Self {
        PipelineConfig {
            commits: commits.into(),
            aliases: None,
            forks: None,
            languages,
            n_target: DEFAULT_SLICE_COUNT,
            min_span_seconds: DEFAULT_MIN_SPAN,
            collection_date: DEFAULT_COLLECTION_DATE,
            epoch_min: DEFAULT_EPOCH_MIN,
            percentile_q: Quantile::DEFAULT,
            pivots: PivotCount::Auto,
            seed: 0,
            betweenness_edges: EdgeSelection::Union,
            mode: GraphMode::Windowed,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            tmpdir: None,
            output_root: output_root.into(),
        }
    }

    pub fn time_bounds(&self) -> Result<TimeBounds> {
        TimeBounds::new(self.epoch_min, self.collection_date)
    }

    pub fn metric_options(&self) -> MetricOptions {
        MetricOptions {
            pivots: self.pivots,
            seed: self.seed,
            betweenness_edges: self.betweenness_edges,
        }
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::Config("no language configured".into()));
        }
        let mut names: Vec<&str> = self.languages.iter().map(|l| l.language_name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("language {:?} configured twice", w[0])));
        }
        if self.n_target == 0 {
            return Err(Error::Config("slice count must be at least 1".into()));
        }
        if self.min_span_seconds < 0 {
            return Err(Error::Config("minimum span must be non-negative".into()));
        }
        self.time_bounds().map_err(|e| Error::Config(e.to_string()))?;
        let inputs = std::iter::once(&self.commits)
            .chain(self.aliases.iter())
            .chain(self.forks.iter());
        for path in inputs {
            if !path.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", path.display())));
            }
        }
        if let Some(dir) = &self.tmpdir {
            if !dir.is_dir() {
                return Err(Error::Config(format!("tmpdir {} is not a directory", dir.display())));
            }
        }
        Ok(())
    }

    /// Reads a `key=value` config file. Relative paths resolve against the
    /// file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut settings = ConfigSettings::default();
        settings.apply_text(&text, base, &path.display().to_string())?;
        settings.build()
    }
}

/// Partially specified configuration; file values first, then CLI overrides.
#[derive(Clone, Debug, Default)]
pub struct ConfigSettings {
    pub commits: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub forks: Option<PathBuf>,
    pub lang_configs: Vec<PathBuf>,
    pub n_target: Option<usize>,
    pub min_span_days: Option<i64>,
    pub collection_date: Option<Timestamp>,
    pub epoch_min: Option<Timestamp>,
    pub percentile_q: Option<Quantile>,
    pub pivots: Option<PivotCount>,
    pub seed: Option<u64>,
    pub betweenness_edges: Option<EdgeSelection>,
    pub mode: Option<GraphMode>,
    pub memory_budget: Option<usize>,
    pub tmpdir: Option<PathBuf>,
    pub output_root: Option<PathBuf>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl ConfigSettings {
    pub fn apply_text(&mut self, text: &str, base: &Path, source: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{source}:{}: expected key=value", i + 1)))?;
            self.set(key.trim(), value.trim(), base)
                .map_err(|e| Error::Config(format!("{source}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| base.join(v);
        match key {
            "commits" => self.commits = Some(path(value)),
            "aliases" => self.aliases = Some(path(value)),
            "forks" => self.forks = Some(path(value)),
            "lang_config" | "lang-config" => self
                .lang_configs
                .extend(value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(path)),
            "n" => self.n_target = Some(parse_value(key, value)?),
            "min_span_days" | "min-span-days" => self.min_span_days = Some(parse_value(key, value)?),
            "collection_date" | "collection-date" => self.collection_date = Some(parse_iso8601(value)?),
            "epoch_min" | "epoch-min" => self.epoch_min = Some(parse_iso8601(value)?),
            "percentile_q" | "percentile-q" => self.percentile_q = Some(value.parse()?),
            "pivots" => self.pivots = Some(value.parse()?),
            "seed" => self.seed = Some(parse_value(key, value)?),
            "betweenness_edges" | "betweenness-edges" => self.betweenness_edges = Some(value.parse()?),
            "mode" => self.mode = Some(value.parse()?),
            "memory_budget" | "memory-budget" => self.memory_budget = Some(parse_value(key, value)?),
            "tmpdir" => self.tmpdir = Some(path(value)),
            "output" => self.output_root = Some(path(value)),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Overlays every value that `other` sets.
    pub fn merge(&mut self, other: ConfigSettings) {
        macro_rules! take {
            ($($field:ident),*) => {$(if other.$field.is_some() { self.$field = other.$field; })*};
        }
        take!(
            commits,
            aliases,
            forks,
            n_target,
            min_span_days,
            collection_date,
            epoch_min,
            percentile_q,
            pivots,
            seed,
            betweenness_edges,
            mode,
            memory_budget,
            tmpdir,
            output_root
        );
        if !other.lang_configs.is_empty() {
            self.lang_configs = other.lang_configs;
        }
    }

    pub fn build(self) -> Result<PipelineConfig> {
        let commits = self.commits.ok_or_else(|| Error::Config("`commits` is required".into()))?;
        let output = self.output_root.ok_or_else(|| Error::Config("`output` is required".into()))?;
        if self.lang_configs.is_empty() {
            return Err(Error::Config("at least one `lang_config` is required".into()));
        }
        let languages = self
            .lang_configs
            .iter()
            .map(|p| LanguageConfig::from_path(p))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        let mut config = PipelineConfig::new(commits, output, languages);
        config.aliases = self.aliases;
        config.forks = self.forks;
        if let Some(n) = self.n_target {
            config.n_target = n;
        }
        if let Some(days) = self.min_span_days {
            config.min_span_seconds = days
                .checked_mul(SECONDS_PER_DAY)
                .ok_or_else(|| Error::Config("minimum span overflows".into()))?;
        }
        if let Some(t) = self.collection_date {
            config.collection_date = t;
        }
        if let Some(t) = self.epoch_min {
            config.epoch_min = t;
        }
        if let Some(q) = self.percentile_q {
            config.percentile_q = q;
        }
        if let Some(p) = self.pivots {
            config.pivots = p;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(e) = self.betweenness_edges {
            config.betweenness_edges = e;
        }
        if let Some(m) = self.mode {
            config.mode = m;
        }
        if let Some(b) = self.memory_budget {
            config.memory_budget = b;
        }
        config.tmpdir = self.tmpdir;
        Ok(config)
    }
}

/// Accepts RFC 3339 timestamps, `YYYY-MM-DDTHH:MM:SS` (UTC) and bare dates.
pub fn parse_iso8601(value: &str) -> Result<Timestamp> {
    if let Ok(t) = DateTime::parse_from_rfc3339(value) {
        return Ok(t.timestamp());
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(value, "%Y-%m-%dT%H:%M:%S") {
        return Ok(t.and_utc().timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(value, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp());
    }
    Err(Error::Config(format!("{value:?} is not an ISO 8601 date or datetime")))
}
