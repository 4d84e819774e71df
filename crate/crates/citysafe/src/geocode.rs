//! Community assignment for point records.
//!
//! Communities arrive as a GeoJSON FeatureCollection of named polygons.
//! Records are matched to them with a three-way strategy: rows that already
//! carry coordinates and a community name pass through, rows with only a
//! name get that community's centroid, and rows with only coordinates get
//! the first community whose polygon contains the point.
//!
//! All geometry is planar over raw latitude/longitude degrees. The
//! clustering radii downstream are expressed in degrees, so the pipeline
//! stays in degree space throughout; distortion at city scale is accepted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::ingest::{ColumnKind, Dataset, Value};

#[derive(Debug, Error)]
pub enum GeocodeError {
    #[error("latitude {lat} or longitude {lon} out of range")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("boundaries input is not a GeoJSON FeatureCollection")]
    NotFeatureCollection,
    #[error("feature {feature}: missing {property:?} property")]
    MissingName { feature: usize, property: String },
    #[error("feature {feature}: {detail}")]
    BadGeometry { feature: usize, detail: String },
    #[error("feature {feature}: ring is not closed (first vertex != last)")]
    UnclosedRing { feature: usize },
    #[error("feature {feature}: ring has fewer than 4 vertices")]
    TooFewVertices { feature: usize },
    #[error("duplicate community name {name:?}")]
    DuplicateCommunity { name: String },
    #[error("boundaries json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dataset {dataset:?} has neither coordinate columns nor a community column")]
    NoGeocodeColumns { dataset: String },
}

/// A WGS84 position, latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeocodeError> {
        if lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon)
        {
            Ok(Self { lat, lon })
        } else {
            Err(GeocodeError::InvalidCoordinate { lat, lon })
        }
    }
}

/// One named community: outer ring(s) plus the derived centroid.
///
/// Rings are stored closed (first vertex repeated at the end). A
/// MultiPolygon contributes one ring per part; interior rings are not
/// modeled.
#[derive(Debug, Clone)]
pub struct CommunityBoundary {
    pub name: String,
    pub sector: Option<String>,
    pub rings: Vec<Vec<GeoPoint>>,
    pub centroid: GeoPoint,
}

impl CommunityBoundary {
    fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut min_lat = f64::INFINITY;
        let mut max_lat = f64::NEG_INFINITY;
        let mut min_lon = f64::INFINITY;
        let mut max_lon = f64::NEG_INFINITY;
        for ring in &self.rings {
            for p in ring {
                min_lat = min_lat.min(p.lat);
                max_lat = max_lat.max(p.lat);
                min_lon = min_lon.min(p.lon);
                max_lon = max_lon.max(p.lon);
            }
        }
        (min_lat, max_lat, min_lon, max_lon)
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        self.rings.iter().any(|ring| point_in_ring(p, ring))
    }
}

/// All community polygons for one city, in file order.
#[derive(Debug, Clone, Default)]
pub struct BoundarySet {
    pub communities: Vec<CommunityBoundary>,
    by_lower_name: HashMap<String, usize>,
}

impl BoundarySet {
    pub fn new(communities: Vec<CommunityBoundary>) -> Result<Self, GeocodeError> {
        let mut by_lower_name = HashMap::with_capacity(communities.len());
        for (i, c) in communities.iter().enumerate() {
            if by_lower_name.insert(c.name.to_lowercase(), i).is_some() {
                return Err(GeocodeError::DuplicateCommunity {
                    name: c.name.clone(),
                });
            }
        }
        Ok(Self {
            communities,
            by_lower_name,
        })
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    /// Case-insensitive lookup by community name.
    pub fn find(&self, name: &str) -> Option<&CommunityBoundary> {
        self.by_lower_name
            .get(&name.trim().to_lowercase())
            .map(|&i| &self.communities[i])
    }

    /// First community (in stored order) whose polygon contains `p`.
    pub fn community_at(&self, p: GeoPoint) -> Option<&CommunityBoundary> {
        self.communities.iter().find(|c| c.contains(p))
    }
}

fn ring_area_centroid(ring: &[GeoPoint]) -> (f64, GeoPoint) {
    // Shoelace formula over (lon, lat) as (x, y); the closing vertex is
    // already present so each consecutive pair is one edge.
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for w in ring.windows(2) {
        let (x0, y0) = (w[0].lon, w[0].lat);
        let (x1, y1) = (w[1].lon, w[1].lat);
        let cross = x0 * y1 - x1 * y0;
        area2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    let area = area2 / 2.0;
    if area.abs() < 1e-12 {
        return (0.0, vertex_mean(ring));
    }
    (
        area,
        GeoPoint {
            lon: cx / (6.0 * area),
            lat: cy / (6.0 * area),
        },
    )
}

fn vertex_mean(ring: &[GeoPoint]) -> GeoPoint {
    // Skip the closing vertex so it does not count twice.
    let pts = &ring[..ring.len() - 1];
    let n = pts.len() as f64;
    GeoPoint {
        lat: pts.iter().map(|p| p.lat).sum::<f64>() / n,
        lon: pts.iter().map(|p| p.lon).sum::<f64>() / n,
    }
}

/// Area centroid of a community polygon.
///
/// Multi-part polygons combine per-ring shoelace centroids weighted by
/// absolute ring area. Degenerate (zero-area) geometry falls back to the
/// mean of the vertices.
pub fn community_centroid(rings: &[Vec<GeoPoint>]) -> GeoPoint {
    let mut total_area = 0.0;
    let mut lat = 0.0;
    let mut lon = 0.0;
    for ring in rings {
        let (area, c) = ring_area_centroid(ring);
        let w = area.abs();
        total_area += w;
        lat += c.lat * w;
        lon += c.lon * w;
    }
    if total_area < 1e-12 {
        let all: Vec<GeoPoint> = rings.iter().flat_map(|r| r.iter().copied()).collect();
        return vertex_mean(&all);
    }
    GeoPoint {
        lat: lat / total_area,
        lon: lon / total_area,
    }
}

fn on_segment(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool {
    let cross = (b.lon - a.lon) * (p.lat - a.lat) - (b.lat - a.lat) * (p.lon - a.lon);
    if cross != 0.0 {
        return false;
    }
    let dot = (p.lon - a.lon) * (b.lon - a.lon) + (p.lat - a.lat) * (b.lat - a.lat);
    let len2 = (b.lon - a.lon).powi(2) + (b.lat - a.lat).powi(2);
    (0.0..=len2).contains(&dot)
}

/// Even-odd ray-casting containment over one closed ring. Points exactly on
/// the boundary count as inside.
pub fn point_in_ring(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    for w in ring.windows(2) {
        if on_segment(p, w[0], w[1]) {
            return true;
        }
    }
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let t = (p.lat - a.lat) / (b.lat - a.lat);
            let lon_at = a.lon + t * (b.lon - a.lon);
            if p.lon < lon_at {
                inside = !inside;
            }
        }
    }
    inside
}

/// Name of the first community containing `p`, if any.
pub fn point_in_community(p: GeoPoint, b: &BoundarySet) -> Option<&str> {
    b.community_at(p).map(|c| c.name.as_str())
}

fn json_lonlat(coord: &Json, feature: usize) -> Result<GeoPoint, GeocodeError> {
    let arr = coord
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| GeocodeError::BadGeometry {
            feature,
            detail: "coordinate is not a [lon, lat] array".into(),
        })?;
    let lon = arr[0].as_f64().ok_or_else(|| GeocodeError::BadGeometry {
        feature,
        detail: "non-numeric longitude".into(),
    })?;
    let lat = arr[1].as_f64().ok_or_else(|| GeocodeError::BadGeometry {
        feature,
        detail: "non-numeric latitude".into(),
    })?;
    GeoPoint::new(lat, lon)
}

fn json_ring(ring: &Json, feature: usize) -> Result<Vec<GeoPoint>, GeocodeError> {
    let arr = ring.as_array().ok_or_else(|| GeocodeError::BadGeometry {
        feature,
        detail: "ring is not an array".into(),
    })?;
    if arr.len() < 4 {
        return Err(GeocodeError::TooFewVertices { feature });
    }
    let pts: Vec<GeoPoint> = arr
        .iter()
        .map(|c| json_lonlat(c, feature))
        .collect::<Result<_, _>>()?;
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    if first.lat != last.lat || first.lon != last.lon {
        return Err(GeocodeError::UnclosedRing { feature });
    }
    Ok(pts)
}

fn polygon_outer_rings(
    geom_type: &str,
    coords: &Json,
    feature: usize,
) -> Result<Vec<Vec<GeoPoint>>, GeocodeError> {
    let rings_of = |poly: &Json| -> Result<Vec<Vec<GeoPoint>>, GeocodeError> {
        let rings = poly.as_array().ok_or_else(|| GeocodeError::BadGeometry {
            feature,
            detail: "polygon coordinates are not an array".into(),
        })?;
        if rings.is_empty() {
            return Err(GeocodeError::BadGeometry {
                feature,
                detail: "polygon has no rings".into(),
            });
        }
        if rings.len() > 1 {
            log::warn!(
                "feature {feature}: ignoring {} interior ring(s); holes are not modeled",
                rings.len() - 1
            );
        }
        Ok(vec![json_ring(&rings[0], feature)?])
    };
    match geom_type {
        "Polygon" => rings_of(coords),
        "MultiPolygon" => {
            let parts = coords.as_array().ok_or_else(|| GeocodeError::BadGeometry {
                feature,
                detail: "multipolygon coordinates are not an array".into(),
            })?;
            let mut out = Vec::with_capacity(parts.len());
            for part in parts {
                out.extend(rings_of(part)?);
            }
            Ok(out)
        }
        other => Err(GeocodeError::BadGeometry {
            feature,
            detail: format!("unsupported geometry type {other:?}"),
        }),
    }
}

fn bbox_intersects(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1 && a.2 <= b.3 && b.2 <= a.3
}

fn warn_on_overlaps(communities: &[CommunityBoundary]) {
    // Bounding-box prefilter, then a sampled containment test with the
    // probe vertices pulled slightly inward so shared borders between
    // adjacent communities do not read as overlap.
    let boxes: Vec<_> = communities.iter().map(|c| c.bbox()).collect();
    for i in 0..communities.len() {
        for j in (i + 1)..communities.len() {
            if !bbox_intersects(boxes[i], boxes[j]) {
                continue;
            }
            let overlap = |a: &CommunityBoundary, b: &CommunityBoundary| {
                a.rings.iter().any(|ring| {
                    let c = community_centroid(std::slice::from_ref(ring));
                    ring.iter().any(|v| {
                        let probe = GeoPoint {
                            lat: v.lat + (c.lat - v.lat) * 1e-3,
                            lon: v.lon + (c.lon - v.lon) * 1e-3,
                        };
                        a.contains(probe) && b.contains(probe)
                    })
                })
            };
            if overlap(&communities[i], &communities[j])
                || overlap(&communities[j], &communities[i])
            {
                log::warn!(
                    "communities {:?} and {:?} overlap; first match in file order wins",
                    communities[i].name,
                    communities[j].name
                );
            }
        }
    }
}

/// Parse a GeoJSON FeatureCollection of community polygons.
///
/// `name_property` selects which feature property carries the community
/// name (usually "name"); a "sector" property is picked up when present.
pub fn load_boundaries(geojson: &[u8], name_property: &str) -> Result<BoundarySet, GeocodeError> {
    let root: Json = serde_json::from_slice(geojson)?;
    if root.get("type").and_then(Json::as_str) != Some("FeatureCollection") {
        return Err(GeocodeError::NotFeatureCollection);
    }
    let features = root
        .get("features")
        .and_then(Json::as_array)
        .ok_or(GeocodeError::NotFeatureCollection)?;

    let mut communities = Vec::with_capacity(features.len());
    for (i, feature) in features.iter().enumerate() {
        let props = feature.get("properties").unwrap_or(&Json::Null);
        let name = props
            .get(name_property)
            .and_then(Json::as_str)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| GeocodeError::MissingName {
                feature: i,
                property: name_property.to_string(),
            })?
            .to_string();
        let sector = props
            .get("sector")
            .and_then(Json::as_str)
            .map(|s| s.trim().to_string());
        let geom = feature.get("geometry").ok_or_else(|| GeocodeError::BadGeometry {
            feature: i,
            detail: "missing geometry".into(),
        })?;
        let geom_type = geom
            .get("type")
            .and_then(Json::as_str)
            .ok_or_else(|| GeocodeError::BadGeometry {
                feature: i,
                detail: "missing geometry type".into(),
            })?;
        let coords = geom
            .get("coordinates")
            .ok_or_else(|| GeocodeError::BadGeometry {
                feature: i,
                detail: "missing coordinates".into(),
            })?;
        let rings = polygon_outer_rings(geom_type, coords, i)?;
        let centroid = community_centroid(&rings);
        communities.push(CommunityBoundary {
            name,
            sector,
            rings,
            centroid,
        });
    }

    warn_on_overlaps(&communities);
    BoundarySet::new(communities)
}

/// Column names the geocoder reads and writes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeocodeColumns {
    pub latitude: String,
    pub longitude: String,
    /// Optional latlon-pair source column; when present its coordinates
    /// are copied into the latitude/longitude columns.
    pub point: Option<String>,
    pub community: String,
}

impl Default for GeocodeColumns {
    fn default() -> Self {
        Self {
            latitude: "latitude".into(),
            longitude: "longitude".into(),
            point: None,
            community: "community_name".into(),
        }
    }
}

/// Geocoded dataset plus the indices of rows that could not be resolved.
#[derive(Debug, Clone)]
pub struct GeocodeOutcome {
    pub dataset: Dataset,
    /// Rows left with a null community (or null coordinates): points in no
    /// community polygon, unknown community names, or rows missing both.
    pub flagged: Vec<usize>,
}

/// Resolve coordinates and community name for every row.
///
/// Per-row contract: rows carrying both pass through unchanged; name-only
/// rows receive the community centroid; coordinate-only rows receive the
/// containing community's name. Rows resolving to no community keep a null
/// community and are flagged. Output always contains latitude, longitude,
/// and community columns. Idempotent: geocoding a geocoded dataset is a
/// no-op.
pub fn geocode_dataset(
    d: &Dataset,
    b: &BoundarySet,
    cols: &GeocodeColumns,
) -> Result<GeocodeOutcome, GeocodeError> {
    let point_idx = cols
        .point
        .as_deref()
        .and_then(|name| d.column_index(name));
    let lat_idx = d.column_index(&cols.latitude);
    let lon_idx = d.column_index(&cols.longitude);
    let name_idx = d.column_index(&cols.community);

    let has_coord_source = point_idx.is_some() || (lat_idx.is_some() && lon_idx.is_some());
    if !has_coord_source && name_idx.is_none() {
        return Err(GeocodeError::NoGeocodeColumns {
            dataset: d.name.clone(),
        });
    }

    let mut out = d.clone();
    let n = out.rows.len();
    let lat_idx = lat_idx.unwrap_or_else(|| {
        out.push_column(cols.latitude.clone(), ColumnKind::Real, vec![Value::Null; n]);
        out.columns.len() - 1
    });
    let lon_idx = lon_idx.unwrap_or_else(|| {
        out.push_column(cols.longitude.clone(), ColumnKind::Real, vec![Value::Null; n]);
        out.columns.len() - 1
    });
    let name_idx = name_idx.unwrap_or_else(|| {
        out.push_column(cols.community.clone(), ColumnKind::Text, vec![Value::Null; n]);
        out.columns.len() - 1
    });

    let mut flagged = Vec::new();
    for (row_idx, row) in out.rows.iter_mut().enumerate() {
        let coords = match point_idx.map(|i| &row[i]) {
            Some(Value::LatLon(lat, lon)) => GeoPoint::new(*lat, *lon).ok(),
            _ => match (row[lat_idx].as_f64(), row[lon_idx].as_f64()) {
                (Some(lat), Some(lon)) => GeoPoint::new(lat, lon).ok(),
                _ => None,
            },
        };
        let name = row[name_idx]
            .as_text()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string);

        match (coords, name) {
            (Some(p), Some(_)) => {
                // Both already present; keep as-is, but materialize the
                // lat/lon columns when the source was a point column.
                row[lat_idx] = Value::Real(p.lat);
                row[lon_idx] = Value::Real(p.lon);
            }
            (Some(p), None) => {
                row[lat_idx] = Value::Real(p.lat);
                row[lon_idx] = Value::Real(p.lon);
                match point_in_community(p, b) {
                    Some(community) => row[name_idx] = Value::Text(community.to_string()),
                    None => {
                        row[name_idx] = Value::Null;
                        flagged.push(row_idx);
                    }
                }
            }
            (None, Some(name)) => match b.find(&name) {
                Some(c) => {
                    row[lat_idx] = Value::Real(c.centroid.lat);
                    row[lon_idx] = Value::Real(c.centroid.lon);
                    row[name_idx] = Value::Text(c.name.clone());
                }
                None => {
                    // Unknown community name and nothing to locate it by;
                    // the name is kept for auditing but the row is flagged.
                    flagged.push(row_idx);
                }
            },
            (None, None) => {
                row[name_idx] = Value::Null;
                flagged.push(row_idx);
            }
        }
    }

    if !flagged.is_empty() {
        log::warn!(
            "dataset {:?}: {} of {} rows could not be resolved to a community",
            out.name,
            flagged.len(),
            out.rows.len()
        );
    }

    Ok(GeocodeOutcome {
        dataset: out,
        flagged,
    })
}
