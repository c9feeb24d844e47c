//! Commit log ingestion.
//!
//! Raw lines are parsed, checked against the collection window, restricted to
//! one language's files, canonicalized through the alias and fork maps, and
//! finally sorted by `(timestamp, commit_id)`. Sorting spills to temporary
//! files once the buffered records exceed the configured memory budget.

mod node_id;
mod sort;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, ParseErrorKind, Result};

pub use node_id::{node_id, NodeId};
pub use sort::{ExternalSorter, SortedCommits};

/// Seconds since the Unix epoch.
pub type Timestamp = i64;

/// 1971-01-01T00:00:00Z.
pub const DEFAULT_EPOCH_MIN: Timestamp = 31_536_000;

/// Default memory budget for the sort buffer (512 MiB).
pub const DEFAULT_MEMORY_BUDGET: usize = 512 << 20;

const CHUNK_LINES: usize = 1 << 14;
const MAX_REPORTED_PARSE_ERRORS: usize = 16;

/// One normalized commit event.
///
/// Field order matters: the derived `Ord` is the stream order, timestamp
/// first and commit id as the tie-break.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CommitRecord {
    pub timestamp: Timestamp,
    pub commit_id: String,
    pub author_key: String,
    pub project_key: String,
    pub files: Vec<String>,
}

impl CommitRecord {
    /// Renders the record in commit log format, without the trailing newline.
    pub fn to_line(&self) -> String {
        let mut line = String::with_capacity(self.approx_bytes());
        let _ = write!(
            line,
            "{}\t{}\t{}\t{}\t",
            self.commit_id, self.author_key, self.project_key, self.timestamp
        );
        for (i, file) in self.files.iter().enumerate() {
            if i > 0 {
                line.push(';');
            }
            line.push_str(file);
        }
        line
    }

    pub(crate) fn approx_bytes(&self) -> usize {
        std::mem::size_of::<Self>()
            + self.commit_id.len()
            + self.author_key.len()
            + self.project_key.len()
            + self
                .files
                .iter()
                .map(|f| f.len() + std::mem::size_of::<String>())
                .sum::<usize>()
    }
}

/// Parses one commit log line: `commit_id<TAB>author<TAB>project<TAB>unix_seconds<TAB>path1;path2;...`.
///
/// `line_no` is 1-based and only used for diagnostics.
pub fn parse_commit_line(line: &str, line_no: usize) -> Result<CommitRecord, ParseError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let err = |kind| ParseError { line: line_no, kind };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(err(ParseErrorKind::FieldCount(fields.len())));
    }
    let [commit_id, author, project, timestamp, files] = [fields[0], fields[1], fields[2], fields[3], fields[4]];
    for (name, value) in [("commit_id", commit_id), ("author", author), ("project", project)] {
        if value.is_empty() {
            return Err(err(ParseErrorKind::EmptyField(name)));
        }
    }
    let timestamp: Timestamp = timestamp
        .parse()
        .map_err(|_| err(ParseErrorKind::Timestamp(timestamp.to_string())))?;
    let files: Vec<String> = files.split(';').map(str::to_string).collect();
    if files.iter().any(String::is_empty) {
        return Err(err(ParseErrorKind::EmptyField("file")));
    }
    Ok(CommitRecord {
        timestamp,
        commit_id: commit_id.to_string(),
        author_key: author.to_string(),
        project_key: project.to_string(),
        files,
    })
}

/// Raw identity to canonical identity. Used both for author dealiasing and
/// for fork normalization.
///
/// Loading rejects chains (`a -> b`, `b -> c`), so resolving is idempotent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CanonicalMap {
    entries: HashMap<String, String>,
}

pub type AliasMap = CanonicalMap;
pub type ForkMap = CanonicalMap;

impl CanonicalMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut map = Self::new();
        for (i, (raw, canonical)) in pairs.into_iter().enumerate() {
            map.insert(raw.into(), canonical.into(), i + 1)?;
        }
        map.check_idempotent()?;
        Ok(map)
    }

    /// Reads `raw<TAB>canonical` lines. Blank lines are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut map = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(raw), Some(canonical), None) if !raw.is_empty() && !canonical.is_empty() => {
                    map.insert(raw.to_string(), canonical.to_string(), i + 1)?;
                }
                _ => return Err(Error::malformed("identity map", i + 1, "expected `raw<TAB>canonical`")),
            }
        }
        map.check_idempotent()?;
        Ok(map)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
        Self::from_reader(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Malformed { line, reason, .. } => Error::Malformed {
                what: path.display().to_string(),
                line,
                reason,
            },
            other => other,
        })
    }

    fn insert(&mut self, raw: String, canonical: String, line: usize) -> Result<()> {
        if let Some(previous) = self.entries.get(&raw) {
            if *previous != canonical {
                return Err(Error::malformed(
                    "identity map",
                    line,
                    format!("{raw:?} mapped to both {previous:?} and {canonical:?}"),
                ));
            }
        }
        self.entries.insert(raw, canonical);
        Ok(())
    }

    fn check_idempotent(&self) -> Result<()> {
        let mut offending: Vec<&String> = self
            .entries
            .values()
            .filter(|target| matches!(self.entries.get(*target), Some(next) if next != *target))
            .collect();
        offending.sort();
        match offending.first() {
            None => Ok(()),
            Some(target) => Err(Error::malformed(
                "identity map",
                0,
                format!("canonical value {target:?} is itself remapped"),
            )),
        }
    }

    pub fn resolve<'a>(&'a self, key: &'a str) -> &'a str {
        self.entries.get(key).map_or(key, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Replaces the author by its alias target and the project by its fork root.
pub fn canonicalize(mut record: CommitRecord, aliases: &AliasMap, forks: &ForkMap) -> CommitRecord {
    if let Some(author) = aliases.entries.get(&record.author_key) {
        record.author_key = author.clone();
    }
    if let Some(project) = forks.entries.get(&record.project_key) {
        record.project_key = project.clone();
    }
    record
}

/// Which files belong to one language ecosystem.
///
/// Membership is by file extension, compared case-insensitively. C and C++
/// share extensions and cannot be told apart this way.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageConfig {
    pub language_name: String,
    pub extensions: BTreeSet<String>,
    pub min_ecosystem_commits: u64,
}

impl LanguageConfig {
    pub const DEFAULT_MIN_ECOSYSTEM_COMMITS: u64 = 1_000_000;

    pub fn new<I, S>(language_name: impl Into<String>, extensions: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let language_name = language_name.into();
        let mut set = BTreeSet::new();
        for ext in extensions {
            let ext = ext.as_ref().trim().trim_start_matches('.').to_ascii_lowercase();
            if ext.is_empty() {
                return Err(Error::Config(format!("{language_name}: empty extension")));
            }
            if !set.insert(ext.clone()) {
                return Err(Error::Config(format!("{language_name}: duplicate extension {ext:?}")));
            }
        }
        let config = LanguageConfig {
            language_name,
            extensions: set,
            min_ecosystem_commits: Self::DEFAULT_MIN_ECOSYSTEM_COMMITS,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_min_commits(mut self, min_ecosystem_commits: u64) -> Self {
        self.min_ecosystem_commits = min_ecosystem_commits;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.language_name.is_empty() {
            return Err(Error::Config("language name is empty".into()));
        }
        if self.language_name.contains(['/', '\\']) || self.language_name.starts_with('.') {
            return Err(Error::Config(format!(
                "language name {:?} cannot be used as a directory name",
                self.language_name
            )));
        }
        if self.extensions.is_empty() {
            return Err(Error::Config(format!("{}: no extensions", self.language_name)));
        }
        Ok(())
    }

    /// Parses the `key=value` form (`language=`, `extensions=`, `min_ecosystem_commits=`).
    pub fn parse(text: &str) -> Result<Self> {
        let mut name = None;
        let mut extensions = None;
        let mut min_commits = Self::DEFAULT_MIN_ECOSYSTEM_COMMITS;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::malformed("language config", i + 1, "expected key=value"))?;
            let value = value.trim();
            match key.trim() {
                "language" => name = Some(value.to_string()),
                "extensions" => extensions = Some(value.split(',').map(str::to_string).collect::<Vec<_>>()),
                "min_ecosystem_commits" => {
                    min_commits = value.parse().map_err(|_| {
                        Error::malformed("language config", i + 1, format!("bad commit count {value:?}"))
                    })?
                }
                other => {
                    return Err(Error::malformed("language config", i + 1, format!("unknown key {other:?}")))
                }
            }
        }
        let name = name.ok_or_else(|| Error::Config("language config lacks `language=`".into()))?;
        let extensions = extensions.ok_or_else(|| Error::Config(format!("{name}: lacks `extensions=`")))?;
        Ok(Self::new(name, extensions)?.with_min_commits(min_commits))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse(&text)
    }

    pub fn matches(&self, path: &str) -> bool {
        Path::new(path)
            .extension()
            .and_then(|ext| ext.to_str())
            .is_some_and(|ext| {
                if ext.bytes().any(|b| b.is_ascii_uppercase()) {
                    self.extensions.contains(&ext.to_ascii_lowercase())
                } else {
                    self.extensions.contains(ext)
                }
            })
    }
}

/// Keeps only the files of `config`'s language; `None` when nothing is left.
pub fn filter_language(mut record: CommitRecord, config: &LanguageConfig) -> Option<CommitRecord> {
    record.files.retain(|f| config.matches(f));
    (!record.files.is_empty()).then_some(record)
}

/// Inclusive timestamp bounds for kept commits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBounds {
    pub epoch_min: Timestamp,
    pub collection_date: Timestamp,
}

impl TimeBounds {
    pub fn new(epoch_min: Timestamp, collection_date: Timestamp) -> Result<Self> {
        if collection_date <= epoch_min {
            return Err(Error::InvalidArgument(format!(
                "collection date {collection_date} is not after epoch_min {epoch_min}"
            )));
        }
        Ok(TimeBounds {
            epoch_min,
            collection_date,
        })
    }

    pub fn until(collection_date: Timestamp) -> Result<Self> {
        Self::new(DEFAULT_EPOCH_MIN, collection_date)
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        (self.epoch_min..=self.collection_date).contains(&t)
    }
}

/// True when the commit lies inside the collection window.
pub fn sanitize_timestamp(record: &CommitRecord, bounds: &TimeBounds) -> bool {
    bounds.contains(record.timestamp)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records_read: u64,
    pub records_dropped_timestamp: u64,
    pub records_dropped_language: u64,
    pub records_emitted: u64,
    pub parse_failures: u64,
}

impl IngestStats {
    pub fn is_conserved(&self) -> bool {
        self.records_read
            == self.records_emitted
                + self.records_dropped_timestamp
                + self.records_dropped_language
                + self.parse_failures
    }
}

/// Everything `ingest_stream` needs besides the input lines.
#[derive(Clone, Debug)]
pub struct IngestContext<'a> {
    pub aliases: &'a AliasMap,
    pub forks: &'a ForkMap,
    pub language: &'a LanguageConfig,
    pub bounds: TimeBounds,
    pub memory_budget: usize,
    pub tmpdir: Option<PathBuf>,
}

pub struct IngestOutput {
    pub records: SortedCommits,
    pub stats: IngestStats,
    /// The first few parse failures, for diagnostics.
    pub parse_errors: Vec<ParseError>,
}

enum Outcome {
    Keep(CommitRecord),
    DroppedTimestamp,
    DroppedLanguage,
    Failed(ParseError),
}

fn process_line(line: &str, line_no: usize, ctx: &IngestContext<'_>) -> Outcome {
    let record = match parse_commit_line(line, line_no) {
        Ok(r) => r,
        Err(e) => return Outcome::Failed(e),
    };
    if !sanitize_timestamp(&record, &ctx.bounds) {
        return Outcome::DroppedTimestamp;
    }
    match filter_language(record, ctx.language) {
        Some(record) => Outcome::Keep(canonicalize(record, ctx.aliases, ctx.forks)),
        None => Outcome::DroppedLanguage,
    }
}

/// Parses, filters and sorts a commit log for one language.
///
/// Blank lines are ignored and not counted as read. Chunks of lines are
/// processed in parallel; results are folded back in input order, so the
/// emitted stream and the stats do not depend on scheduling.
pub fn ingest_stream<R: BufRead>(source: R, ctx: &IngestContext<'_>) -> Result<IngestOutput> {
    let mut sorter = ExternalSorter::new(ctx.memory_budget, ctx.tmpdir.clone());
    let mut stats = IngestStats::default();
    let mut parse_errors = Vec::new();

    let mut lines = source.lines().enumerate();
    let mut chunk: Vec<(usize, String)> = Vec::with_capacity(CHUNK_LINES);
    loop {
        chunk.clear();
        for (i, line) in lines.by_ref() {
            let line = line?;
            if line.trim_end_matches('\r').is_empty() {
                continue;
            }
            chunk.push((i + 1, line));
            if chunk.len() == CHUNK_LINES {
                break;
            }
        }
        if chunk.is_empty() {
            break;
        }
        let outcomes: Vec<Outcome> = chunk
            .par_iter()
            .map(|(line_no, line)| process_line(line, *line_no, ctx))
            .collect();
        for outcome in outcomes {
            stats.records_read += 1;
            match outcome {
                Outcome::Keep(record) => {
                    stats.records_emitted += 1;
                    sorter.push(record)?;
                }
                Outcome::DroppedTimestamp => stats.records_dropped_timestamp += 1,
                Outcome::DroppedLanguage => stats.records_dropped_language += 1,
                Outcome::Failed(e) => {
                    stats.parse_failures += 1;
                    if parse_errors.len() < MAX_REPORTED_PARSE_ERRORS {
                        parse_errors.push(e);
                    }
                }
            }
        }
    }
    if stats.parse_failures > 0 {
        warn!(
            "{}: {} unparseable commit lines (first: {})",
            ctx.language.language_name, stats.parse_failures, parse_errors[0]
        );
    }
    debug_assert!(stats.is_conserved());
    Ok(IngestOutput {
        records: sorter.finish()?,
        stats,
        parse_errors,
    })
}

/// Writes records in commit log format, one per line.
pub fn write_commit_log<'a, W, I>(mut out: W, records: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a CommitRecord>,
{
    for record in records {
        out.write_all(record.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
