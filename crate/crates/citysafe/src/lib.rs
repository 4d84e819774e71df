//! Community safety analytics for municipal open data.
//!
//! The crate turns raw city CSV extracts (crime counts, street lights,
//! trees, traffic incidents, pet licences, community disorder calls) into
//! community-level features, then runs the analysis stages on top of them:
//! correlation and regression modelling, spatial clustering, and map-ready
//! exports. Each stage is usable on its own; [`report::run_pipeline`] wires
//! them together end to end.

pub mod cluster;
pub mod features;
pub mod geocode;
pub mod ingest;
pub mod model;
pub mod report;

pub use ingest::{CleaningPolicy, Dataset, Value};
