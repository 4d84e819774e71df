//! File exports and pipeline orchestration: choropleth and cluster-map
//! GeoJSON, trend tables, and the end-to-end `run` command that turns a
//! config file into a directory of reproducible artifacts plus a manifest.

pub mod choropleth;
pub mod cluster_map;
pub mod harness;
pub mod pipeline;

pub use choropleth::export_choropleth;
pub use cluster_map::export_cluster_map;
pub use harness::{run_calgary_harness, HarnessReport, CALGARY_ENV};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError, RunManifest};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown metric `{metric}`; available: {available}")]
    UnknownMetric { metric: String, available: String },
    #[error("need at least 2 bins, got {bins}")]
    TooFewBins { bins: usize },
    #[error("labels ({labels}) do not match point count ({points})")]
    LabelMismatch { labels: usize, points: usize },
}
