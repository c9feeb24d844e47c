//! Seeded synthetic commit logs.
//!
//! Projects and authors are drawn with power-law popularity; most commits
//! come from a small per-project team so shared files (and hence
//! collaboration edges) are common. Timestamps can be skewed exponentially
//! toward the end of the range. A configurable fraction of lines carries
//! out-of-window timestamps or only foreign-language files so that ingest
//! filtering has something to count.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{NodeId, Timestamp, DEFAULT_EPOCH_MIN};

/// 2100-01-01T00:00:00Z; bogus future timestamps are drawn past this.
const FAR_FUTURE: Timestamp = 4_102_444_800;
const TEAM_SIZE: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub authors: usize,
    pub projects: usize,
    pub commits: usize,
    pub start: Timestamp,
    pub end: Timestamp,
    /// Zipf exponent for project, author and file popularity.
    pub popularity_skew: f64,
    /// Exponential growth rate of commit intensity across the range; 0 is uniform.
    pub growth: f64,
    pub files_per_project: usize,
    pub mean_files_per_commit: f64,
    pub extension: String,
    pub foreign_extension: String,
    /// Fraction of commits touching only foreign-extension files.
    pub foreign_fraction: f64,
    /// Fraction of commits with a timestamp before 1971 or after 2100.
    pub bogus_timestamp_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            authors: 2_000,
            projects: 500,
            commits: 10_000,
            start: 1_199_145_600, // 2008-01-01
            end: 1_609_459_200,   // 2021-01-01
            popularity_skew: 1.1,
            growth: 0.0,
            files_per_project: 40,
            mean_files_per_commit: 2.0,
            extension: "rs".into(),
            foreign_extension: "md".into(),
            foreign_fraction: 0.0,
            bogus_timestamp_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("synthetic spec: {msg}")));
        if self.authors == 0 || self.projects == 0 || self.commits == 0 || self.files_per_project == 0 {
            return bad("counts must be at least 1");
        }
        if self.start < DEFAULT_EPOCH_MIN || self.end < self.start || self.end >= FAR_FUTURE {
            return bad("time range must lie within [1971, 2100)");
        }
        if !(self.mean_files_per_commit >= 1.0) {
            return bad("mean files per commit must be at least 1");
        }
        for f in [self.foreign_fraction, self.bogus_timestamp_fraction] {
            if !(0.0..=1.0).contains(&f) {
                return bad("fractions must lie in [0, 1]");
            }
        }
        if !(self.popularity_skew >= 0.0) || !self.growth.is_finite() {
            return bad("skew and growth must be finite and skew non-negative");
        }
        if self.extension.is_empty() || self.foreign_extension.is_empty() || self.extension == self.foreign_extension {
            return bad("extensions must be non-empty and distinct");
        }
        Ok(())
    }

    pub fn author_name(i: usize) -> String {
        format!("dev{i} <dev{i}@example.org>")
    }

    pub fn project_name(i: usize) -> String {
        format!("org{}_project{i}", i % 97)
    }
}

/// What the generator wrote, for checking ingest bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub records: u64,
    pub bogus_timestamps: u64,
    /// In-window commits with no file of the primary extension.
    pub foreign_only: u64,
    /// In-window commits with at least one primary-extension file.
    pub primary_in_range: u64,
    pub first_timestamp: Timestamp,
    pub last_timestamp: Timestamp,
}

fn zipf(n: usize, skew: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| (r as f64).powf(-skew))).expect("positive weights")
}

fn draw_time(rng: &mut ChaCha8Rng, spec: &SynthSpec) -> Timestamp {
    let u: f64 = rng.gen();
    let x = if spec.growth.abs() < 1e-12 {
        u
    } else {
        (u * spec.growth.exp_m1()).ln_1p() / spec.growth
    };
    let span = (spec.end - spec.start) as f64;
    (spec.start + (x * span).floor() as i64).min(spec.end)
}

/// Writes `spec.commits` lines in commit log format, in generation order (not sorted).
pub fn generate_synthetic<W: Write>(spec: &SynthSpec, mut out: W) -> Result<SynthSummary> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let projects = zipf(spec.projects, spec.popularity_skew);
    let authors = zipf(spec.authors, spec.popularity_skew);
    let files = zipf(spec.files_per_project, spec.popularity_skew);
    let extra_file_p = 1.0 - 1.0 / spec.mean_files_per_commit;

    let mut summary = SynthSummary {
        first_timestamp: Timestamp::MAX,
        last_timestamp: Timestamp::MIN,
        ..Default::default()
    };
    let mut line = String::new();
    for i in 0..spec.commits {
        let project = projects.sample(&mut rng);
        let author = if rng.gen_bool(0.75) {
            let slot = rng.gen_range(0..TEAM_SIZE);
            (project * 7_919 + slot * 104_729) % spec.authors
        } else {
            authors.sample(&mut rng)
        };

        let bogus = rng.gen_bool(spec.bogus_timestamp_fraction);
        let timestamp = if !bogus {
            draw_time(&mut rng, spec)
        } else if rng.gen_bool(0.5) {
            rng.gen_range(0..DEFAULT_EPOCH_MIN)
        } else {
            FAR_FUTURE + rng.gen_range(0..1_000_000_000)
        };

        let foreign = rng.gen_bool(spec.foreign_fraction);
        let mut count = 1;
        while count < 16 && rng.gen_bool(extra_file_p) {
            count += 1;
        }
        let mut paths: Vec<String> = (0..count)
            .map(|_| {
                let k = files.sample(&mut rng);
                if foreign {
                    format!("docs/page{k}.{}", spec.foreign_extension)
                } else {
                    format!("src/mod{}/file{k}.{}", k % 8, spec.extension)
                }
            })
            .collect();
        if !foreign && rng.gen_bool(0.1) {
            paths.push(format!("README.{}", spec.foreign_extension));
        }
        paths.sort();
        paths.dedup();

        summary.records += 1;
        if bogus {
            summary.bogus_timestamps += 1;
        } else {
            if foreign {
                summary.foreign_only += 1;
            } else {
                summary.primary_in_range += 1;
            }
            summary.first_timestamp = summary.first_timestamp.min(timestamp);
            summary.last_timestamp = summary.last_timestamp.max(timestamp);
        }

        line.clear();
        line.push_str(&NodeId::of(&format!("commit-{}-{i}", spec.seed)).to_string());
        line.push('\t');
        line.push_str(&SynthSpec::author_name(author));
        line.push('\t');
        line.push_str(&SynthSpec::project_name(project));
        line.push('\t');
        line.push_str(&timestamp.to_string());
        line.push('\t');
        line.push_str(&paths.join(";"));
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(summary)
}
