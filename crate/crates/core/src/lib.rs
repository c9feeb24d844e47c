//! Temporal collaboration and contribution networks of programming-language
//! ecosystems, built from commit logs.
//!
//! The stages are independent modules:
//!
//! * [`ingest`] parses commit logs, applies alias and fork maps, filters by
//!   language and collection window, and sorts the stream.
//! * [`slicing`] cuts the sorted stream into commit-balanced time slices.
//! * [`graph`] builds the author/project graph of a slice.
//! * [`metrics`] computes network and per-node metrics.
//! * [`export`] writes the dataset files.
//! * [`pipeline`] runs everything and generates synthetic logs.

pub mod error;
pub mod export;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod slicing;
mod union_find;

pub use error::{Error, ParseError, ParseErrorKind, Result};
pub use graph::{EcosystemGraph, FileFilterReport, GraphMode, Quantile};
pub use ingest::{CommitRecord, LanguageConfig, NodeId};
pub use metrics::{NetworkMetrics, NodeKey, NodeKind, NodeMetrics};
pub use slicing::{SlicePlan, SliceSpec};
