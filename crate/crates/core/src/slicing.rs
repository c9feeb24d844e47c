//! Commit-count balanced slicing of one ecosystem's timeline.
//!
//! Slice `i` closes once the cumulative commit count reaches
//! `ceil((i + 1) * total / n_target)`, but never before it has spanned
//! `min_span` seconds. Slices are half-open `[start, end)` except the last,
//! which is closed and ends at the last commit. A cut may fall exactly on the
//! last commit, leaving a final slice `[last, last]`.

use std::ops::Range;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Timestamp;

pub const DEFAULT_SLICE_COUNT: usize = 30;
pub const SECONDS_PER_DAY: i64 = 86_400;
/// Six months, fixed at 183 days.
pub const DEFAULT_MIN_SPAN: i64 = 183 * SECONDS_PER_DAY;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub index: usize,
    pub start: Timestamp,
    pub end: Timestamp,
    pub commit_count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "PlanJson", into = "PlanJson")]
pub struct SlicePlan {
    pub n_target: usize,
    pub min_span_seconds: i64,
    pub slices: Vec<SliceSpec>,
    pub total_commits: u64,
}

#[derive(Serialize, Deserialize)]
struct PlanJson {
    n_target: usize,
    min_span_seconds: i64,
    slices: Vec<SliceSpec>,
    shortfall: bool,
}

impl From<PlanJson> for SlicePlan {
    fn from(p: PlanJson) -> Self {
        let total_commits = p.slices.iter().map(|s| s.commit_count).sum();
        SlicePlan {
            n_target: p.n_target,
            min_span_seconds: p.min_span_seconds,
            slices: p.slices,
            total_commits,
        }
    }
}

impl From<SlicePlan> for PlanJson {
    fn from(p: SlicePlan) -> Self {
        PlanJson {
            shortfall: p.shortfall(),
            n_target: p.n_target,
            min_span_seconds: p.min_span_seconds,
            slices: p.slices,
        }
    }
}

impl SlicePlan {
    /// Fewer slices than requested: the minimum span used up the timeline.
    pub fn shortfall(&self) -> bool {
        self.slices.len() < self.n_target
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn coverage(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.slices.first()?.start, self.slices.last()?.end))
    }

    /// Index ranges of each slice within `sorted_timestamps`.
    pub fn partition(&self, sorted_timestamps: &[Timestamp]) -> Vec<Range<usize>> {
        let mut ranges = Vec::with_capacity(self.slices.len());
        let mut lo = sorted_timestamps.partition_point(|&t| t < self.slices.first().map_or(0, |s| s.start));
        for (i, slice) in self.slices.iter().enumerate() {
            let hi = if i + 1 == self.slices.len() {
                sorted_timestamps.partition_point(|&t| t <= slice.end)
            } else {
                sorted_timestamps.partition_point(|&t| t < slice.end)
            };
            ranges.push(lo..hi);
            lo = hi;
        }
        ranges
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Cuts a non-decreasing timestamp sequence into at most `n_target` slices.
pub fn plan_slices(sorted_timestamps: &[Timestamp], n_target: usize, min_span: i64) -> Result<SlicePlan> {
    let ts = sorted_timestamps;
    let (Some(&first), Some(&last)) = (ts.first(), ts.last()) else {
        return Err(Error::Empty("cannot slice an empty commit stream"));
    };
    if n_target == 0 {
        return Err(Error::InvalidArgument("slice count must be at least 1".into()));
    }
    if min_span < 0 {
        return Err(Error::InvalidArgument("minimum span must be non-negative".into()));
    }
    if let Some(w) = ts.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(format!("timestamps not sorted at position {}", w + 1)));
    }

    let total = ts.len();
    let mut slices = Vec::with_capacity(n_target);
    let mut start = first;
    let mut consumed = 0usize;
    for index in 0..n_target {
        let end = if index + 1 == n_target {
            None
        } else {
            let quota = cumulative_quota(index, total, n_target).max(consumed + 1);
            quota_time(ts, quota).map(|t| t.max(start.saturating_add(min_span)))
        };
        match end {
            Some(end) if end <= last => {
                let hi = ts.partition_point(|&t| t < end);
                slices.push(SliceSpec {
                    index,
                    start,
                    end,
                    commit_count: (hi - consumed) as u64,
                });
                consumed = hi;
                start = end;
            }
            _ => {
                slices.push(SliceSpec {
                    index,
                    start,
                    end: last,
                    commit_count: (total - consumed) as u64,
                });
                break;
            }
        }
    }

    let plan = SlicePlan {
        n_target,
        min_span_seconds: min_span,
        slices,
        total_commits: total as u64,
    };
    if plan.shortfall() {
        warn!(
            "timeline exhausted after {} of {} slices (min span {} s)",
            plan.len(),
            n_target,
            min_span
        );
    }
    Ok(plan)
}

/// `ceil((index + 1) * total / n)`.
fn cumulative_quota(index: usize, total: usize, n: usize) -> usize {
    ((index as u128 + 1) * total as u128).div_ceil(n as u128) as usize
}

/// Earliest cut time at which `quota` commits lie strictly before it: the
/// first timestamp after that of commit `quota - 1`. `None` past the stream end.
fn quota_time(ts: &[Timestamp], quota: usize) -> Option<Timestamp> {
    let reached = ts[quota - 1];
    let j = quota + ts[quota..].partition_point(|&t| t <= reached);
    ts.get(j).copied()
}

/// Index of the slice containing `t`.
pub fn assign_slice(t: Timestamp, plan: &SlicePlan) -> Result<usize> {
    let (lo, hi) = plan
        .coverage()
        .ok_or_else(|| Error::InvalidArgument("plan has no slices".into()))?;
    if t < lo || t > hi {
        return Err(Error::InvalidArgument(format!("timestamp {t} outside plan coverage [{lo}, {hi}]")));
    }
    let i = plan.slices.partition_point(|s| s.end <= t);
    Ok(i.min(plan.slices.len() - 1))
}

/// Time range covered by slices `0..=i`.
pub fn cumulative_range(plan: &SlicePlan, i: usize) -> Result<(Timestamp, Timestamp)> {
    let slice = plan
        .slices
        .get(i)
        .ok_or_else(|| Error::InvalidArgument(format!("slice {i} out of range ({} slices)", plan.len())))?;
    Ok((plan.slices[0].start, slice.end))
}
