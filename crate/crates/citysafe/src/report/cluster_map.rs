//! Point-level cluster map export: one GeoJSON Point feature per record
//! with its cluster assignment, ready for any web map to style.

use crate::cluster::{Clustering, Label, PointSet};
use crate::report::ReportError;
use serde_json::{json, Value as Json};

/// Points are emitted in point-set order; coordinates are `[lon, lat]`
/// per GeoJSON convention (the point set stores `[lat, lon]`).
pub fn export_cluster_map(ps: &PointSet, clustering: &Clustering) -> Result<Json, ReportError> {
    if clustering.labels.len() != ps.len() {
        return Err(ReportError::LabelMismatch {
            labels: clustering.labels.len(),
            points: ps.len(),
        });
    }
    let features: Vec<Json> = ps
        .points()
        .iter()
        .zip(ps.ids())
        .zip(&clustering.labels)
        .map(|(([lat, lon], id), label)| {
            let cluster: Json = match label {
                Label::Cluster(c) => json!(c),
                Label::Noise => json!("noise"),
            };
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [lon, lat] },
                "properties": { "id": id, "cluster": cluster }
            })
        })
        .collect();
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}
