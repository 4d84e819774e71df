//! Optional reproduction harness against a user-supplied Calgary open-data
//! snapshot.
//!
//! The snapshot is not bundled, so nothing here asserts exact published
//! numbers. Given a directory containing a `citysafe_calgary.json` pipeline
//! config (pointing at the locally downloaded CSV/GeoJSON files), the
//! harness runs the full pipeline there and then checks format and internal
//! consistency of the outputs: the top-10 table is well-formed and sorted,
//! the per-category crime columns sum to `crime_total`, score grids carry a
//! row per cell, and every importance table is normalized.

use crate::report::pipeline::{run_pipeline, PipelineError, RunManifest};
use serde_json::Value as Json;
use std::fs;
use std::path::Path;

pub const CALGARY_ENV: &str = "CITYSAFE_CALGARY_DIR";
pub const CALGARY_CONFIG: &str = "citysafe_calgary.json";

#[derive(Debug)]
pub struct HarnessReport {
    pub manifest: RunManifest,
    /// Human-readable `name: detail` lines for each passed check.
    pub checks: Vec<String>,
}

fn fail(stage: &'static str, message: impl Into<String>) -> PipelineError {
    PipelineError::Stage {
        stage,
        message: message.into(),
    }
}

/// Runs the pipeline on the snapshot directory and verifies internal
/// consistency of the artifacts it produced.
pub fn run_calgary_harness(dir: &Path) -> Result<HarnessReport, PipelineError> {
    let config = dir.join(CALGARY_CONFIG);
    if !config.is_file() {
        return Err(PipelineError::Config(format!(
            "no {CALGARY_CONFIG} in {}; see the README for the expected layout",
            dir.display()
        )));
    }
    let out_dir = dir.join("citysafe_out");
    let manifest = run_pipeline(&config, Some(&out_dir), None)?;
    let mut checks = Vec::new();
    let stage = "harness";

    let read_json = |name: &str| -> Result<Json, PipelineError> {
        let bytes = fs::read(out_dir.join(name))
            .map_err(|e| fail(stage, format!("reading {name}: {e}")))?;
        serde_json::from_slice(&bytes).map_err(|e| fail(stage, format!("parsing {name}: {e}")))
    };

    // Per-category crime columns must reconstruct the total wherever both
    // sides are present.
    let features = read_json("features.json")?;
    let rows = features
        .as_array()
        .ok_or_else(|| fail(stage, "features.json is not a row array"))?;
    let mut category_columns = 0;
    for row in rows {
        let obj = row
            .as_object()
            .ok_or_else(|| fail(stage, "features.json row is not an object"))?;
        let Some(total) = obj.get("crime_total").and_then(Json::as_f64) else {
            continue;
        };
        let cats: Vec<f64> = obj
            .iter()
            .filter(|(k, _)| k.starts_with("crime_") && *k != "crime_total")
            .filter_map(|(_, v)| v.as_f64())
            .collect();
        if cats.is_empty() {
            continue;
        }
        category_columns = category_columns.max(cats.len());
        let sum: f64 = cats.iter().sum();
        if (sum - total).abs() > 1e-6 {
            return Err(fail(
                stage,
                format!(
                    "crime categories sum to {sum} but crime_total is {total} for {:?}",
                    obj.get("community_name")
                ),
            ));
        }
    }
    if category_columns > 0 {
        checks.push(format!(
            "crime_total equals the sum of {category_columns} category columns on every community"
        ));
    }

    // Top-10 tables: sorted descending, at most 10 rows, parseable values.
    let mut top_tables = 0;
    for name in manifest.artifacts.keys() {
        if !(name.starts_with("top") && name.ends_with(".csv")) {
            continue;
        }
        let text = fs::read_to_string(out_dir.join(name))
            .map_err(|e| fail(stage, format!("reading {name}: {e}")))?;
        let mut last = f64::INFINITY;
        let mut rows = 0;
        for line in text.lines().skip(1) {
            let (_, value) = line
                .rsplit_once(',')
                .ok_or_else(|| fail(stage, format!("{name}: malformed line {line:?}")))?;
            let v: f64 = value
                .parse()
                .map_err(|_| fail(stage, format!("{name}: non-numeric value {value:?}")))?;
            if v > last {
                return Err(fail(stage, format!("{name} is not sorted descending")));
            }
            last = v;
            rows += 1;
        }
        if rows == 0 {
            return Err(fail(stage, format!("{name} has no data rows")));
        }
        top_tables += 1;
    }
    if top_tables > 0 {
        checks.push(format!("{top_tables} ranked table(s) sorted and well-formed"));
    }

    // Score grid: one row per configured cell, winner consistent.
    if manifest.artifacts.contains_key("cluster_grid.json") {
        let grid = read_json("cluster_grid.json")?;
        let rows = grid["rows"]
            .as_array()
            .ok_or_else(|| fail(stage, "cluster_grid.json has no rows"))?;
        let best_index = grid["best_index"]
            .as_u64()
            .ok_or_else(|| fail(stage, "cluster_grid.json has no best_index"))? as usize;
        if best_index >= rows.len() {
            return Err(fail(stage, "best_index out of range"));
        }
        let best_sil = grid["best"]["silhouette"].as_f64();
        if rows[best_index]["silhouette"].as_f64() != best_sil {
            return Err(fail(stage, "winning row disagrees with best silhouette"));
        }
        checks.push(format!("score grid has {} cells; winner consistent", rows.len()));
    }

    // Importance tables normalized (or all-zero for degenerate fits).
    if manifest.artifacts.contains_key("importance.json") {
        let tables = read_json("importance.json")?;
        let tables = tables
            .as_array()
            .ok_or_else(|| fail(stage, "importance.json is not an array"))?;
        for t in tables {
            let entries = t["entries"]
                .as_array()
                .ok_or_else(|| fail(stage, "importance table has no entries"))?;
            let sum: f64 = entries
                .iter()
                .filter_map(|e| e["importance"].as_f64())
                .sum();
            if !(sum.abs() < 1e-9 || (sum - 1.0).abs() < 1e-9) {
                return Err(fail(
                    stage,
                    format!("importance table for {} sums to {sum}", t["target"]),
                ));
            }
        }
        checks.push(format!("{} importance table(s) normalized", tables.len()));
    }

    Ok(HarnessReport { manifest, checks })
}
