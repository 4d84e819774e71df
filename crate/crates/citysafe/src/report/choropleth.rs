//! Choropleth export: community polygons with a metric value and its
//! quantile bin attached, ready for any GeoJSON viewer to color.

use crate::features::CommunityFeatureTable;
use crate::geocode::{BoundarySet, GeoPoint};
use crate::report::ReportError;
use serde_json::{json, Value as Json};

/// Internal quantile edges (linear interpolation between order statistics),
/// deduplicated so tied data cannot produce empty bins.
fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut edges = Vec::with_capacity(bins - 1);
    for b in 1..bins {
        let h = (n - 1) as f64 * b as f64 / bins as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let q = if lo + 1 < n {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        };
        if edges.last().map(|&e: &f64| q > e).unwrap_or(true) {
            edges.push(q);
        }
    }
    edges
}

fn ring_coordinates(ring: &[GeoPoint]) -> Json {
    Json::Array(
        ring.iter()
            .map(|p| json!([p.lon, p.lat]))
            .collect(),
    )
}

/// Every community in the boundary set becomes exactly one MultiPolygon
/// feature. Communities absent from the feature table (and null metric
/// cells) carry `value: null, quantile_bin: null`; the bins partition the
/// non-null values into `bins` quantile groups.
pub fn export_choropleth(
    features: &CommunityFeatureTable,
    metric: &str,
    boundaries: &BoundarySet,
    bins: usize,
) -> Result<Json, ReportError> {
    if bins < 2 {
        return Err(ReportError::TooFewBins { bins });
    }
    let column = features
        .column(metric)
        .ok_or_else(|| ReportError::UnknownMetric {
            metric: metric.to_string(),
            available: features.columns.join(", "),
        })?;
    let value_of = |community: &str| -> Option<f64> {
        let row = features
            .communities
            .iter()
            .position(|c| c.eq_ignore_ascii_case(community))?;
        column[row]
    };
    let non_null: Vec<f64> = boundaries
        .communities
        .iter()
        .filter_map(|c| value_of(&c.name))
        .collect();
    let edges = if non_null.is_empty() {
        Vec::new()
    } else {
        quantile_edges(&non_null, bins)
    };
    let mut out_features = Vec::with_capacity(boundaries.communities.len());
    for community in &boundaries.communities {
        let value = value_of(&community.name);
        let bin = value.map(|v| edges.iter().take_while(|&&e| v > e).count());
        let polygons: Vec<Json> = community
            .rings
            .iter()
            .map(|r| Json::Array(vec![ring_coordinates(r)]))
            .collect();
        out_features.push(json!({
            "type": "Feature",
            "geometry": { "type": "MultiPolygon", "coordinates": polygons },
            "properties": {
                "community_name": community.name,
                "sector": community.sector,
                "metric_name": metric,
                "value": value,
                "quantile_bin": bin,
            }
        }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": out_features }))
}
