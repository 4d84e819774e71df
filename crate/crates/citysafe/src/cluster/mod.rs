//! Spatial clustering over 2-D point sets.
//!
//! Six algorithms share one small vocabulary: a [`PointSet`] of
//! (latitude, longitude) records, a tagged [`ClusterParams`] union, and a
//! [`Clustering`] result holding per-point labels. Silhouette scoring and
//! a deterministic seeded grid search sit on top.
//!
//! Distances default to plain Euclidean over raw degree coordinates; the
//! density radii this pipeline uses are expressed in degrees, so no
//! projection is applied. Haversine is available behind [`Metric`] for
//! callers who want kilometers.

pub mod agglomerative;
pub mod clarans;
pub mod clique;
pub mod dbscan;
pub mod grid;
pub mod kmeans;
pub mod optics;
pub mod silhouette;

pub use agglomerative::{agglomerative, AggloOutcome, Linkage, MergeStep};
pub use clarans::{clarans, exhaustive_medoid_cost, ClaransOutcome};
pub use clique::clique;
pub use dbscan::{dbscan, DbscanOutcome};
pub use grid::{grid_search, GridOutcome, GridRow};
pub use kmeans::{kmeans, KmeansOutcome};
pub use optics::{optics, optics_extract, OpticsEntry};
pub use silhouette::silhouette;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("point set invalid: {0}")]
    InvalidPointSet(String),
    #[error("k = {k} exceeds the {available} available points")]
    TooManyClusters { k: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("silhouette undefined: {0}")]
    UndefinedScore(String),
    #[error("no grid cell produced a valid clustering")]
    NoValidClustering,
}

/// Distance function used by every algorithm in this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Straight-line distance in degree space.
    #[default]
    Euclidean,
    /// Great-circle distance in kilometers (mean earth radius).
    Haversine,
}

impl Metric {
    pub fn distance(self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self {
            Metric::Euclidean => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
            Metric::Haversine => haversine_km(a, b),
        }
    }
}

fn haversine_km(a: [f64; 2], b: [f64; 2]) -> f64 {
    const EARTH_RADIUS_KM: f64 = 6371.0088;
    let (lat1, lon1) = (a[0].to_radians(), a[1].to_radians());
    let (lat2, lon2) = (b[0].to_radians(), b[1].to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().asin()
}

/// Immutable set of 2-D points with stable record identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    ids: Vec<String>,
    points: Vec<[f64; 2]>,
}

impl PointSet {
    pub fn new(ids: Vec<String>, points: Vec<[f64; 2]>) -> Result<Self, ClusterError> {
        if ids.len() != points.len() {
            return Err(ClusterError::InvalidPointSet(format!(
                "{} ids for {} points",
                ids.len(),
                points.len()
            )));
        }
        for p in &points {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(ClusterError::InvalidPointSet(format!(
                    "non-finite coordinate ({}, {})",
                    p[0], p[1]
                )));
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(ClusterError::InvalidPointSet(format!(
                    "duplicate id {id:?}"
                )));
            }
        }
        Ok(Self { ids, points })
    }

    /// Points only; ids become their indices.
    pub fn from_points(points: Vec<[f64; 2]>) -> Result<Self, ClusterError> {
        let ids = (0..points.len()).map(|i| i.to_string()).collect();
        Self::new(ids, points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Number of distinct coordinate values (seeding limit for centroid
    /// style algorithms).
    pub fn n_distinct(&self) -> usize {
        let mut seen = std::collections::HashSet::with_capacity(self.points.len());
        for p in &self.points {
            seen.insert((p[0].to_bits(), p[1].to_bits()));
        }
        seen.len()
    }
}

/// Per-point assignment: a cluster id or noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Cluster(usize),
    Noise,
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Cluster(c) => Some(c),
            Label::Noise => None,
        }
    }

    pub fn is_noise(self) -> bool {
        matches!(self, Label::Noise)
    }
}

/// Hierarchy linkage criteria. Lives here so [`ClusterParams`] stays
/// self-contained for serde.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkageKind {
    Ward,
    Complete,
    Average,
}

/// Algorithm selection plus hyperparameters, one variant per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum ClusterParams {
    Kmeans {
        k: usize,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default)]
        seed: u64,
    },
    Clarans {
        k: usize,
        numlocal: usize,
        maxneighbor: usize,
        #[serde(default)]
        seed: u64,
    },
    Dbscan {
        eps: f64,
        min_pts: usize,
    },
    Optics {
        eps: f64,
        min_pts: usize,
        extraction_eps: f64,
    },
    Agglomerative {
        n_clusters: usize,
        linkage: LinkageKind,
    },
    Clique {
        intervals: usize,
        threshold: usize,
    },
}

fn default_max_iter() -> usize {
    100
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        let fail = |msg: String| Err(ClusterError::InvalidParameter(msg));
        match *self {
            ClusterParams::Kmeans { k, max_iter, .. } => {
                if k < 1 {
                    return fail("kmeans k must be >= 1".into());
                }
                if max_iter < 1 {
                    return fail("kmeans max_iter must be >= 1".into());
                }
            }
            ClusterParams::Clarans { k, numlocal, .. } => {
                if k < 1 {
                    return fail("clarans k must be >= 1".into());
                }
                if numlocal < 1 {
                    return fail("clarans numlocal must be >= 1".into());
                }
            }
            ClusterParams::Dbscan { eps, min_pts } => {
                if !eps.is_finite() || eps <= 0.0 {
                    return fail(format!("dbscan eps must be positive, got {eps}"));
                }
                if min_pts < 1 {
                    return fail("dbscan min_pts must be >= 1".into());
                }
            }
            ClusterParams::Optics {
                eps,
                min_pts,
                extraction_eps,
            } => {
                if !eps.is_finite() || eps < 0.0 {
                    return fail(format!("optics eps must be >= 0, got {eps}"));
                }
                if min_pts < 1 {
                    return fail("optics min_pts must be >= 1".into());
                }
                if !extraction_eps.is_finite() || extraction_eps <= 0.0 {
                    return fail(format!(
                        "optics extraction_eps must be positive, got {extraction_eps}"
                    ));
                }
            }
            ClusterParams::Agglomerative { n_clusters, .. } => {
                if n_clusters < 1 {
                    return fail("agglomerative n_clusters must be >= 1".into());
                }
            }
            ClusterParams::Clique { intervals, .. } => {
                if intervals < 1 {
                    return fail("clique intervals must be >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Copy with the RNG seed replaced, for grid-search seed derivation.
    /// Seedless algorithms are returned unchanged.
    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut p = self.clone();
        match &mut p {
            ClusterParams::Kmeans { seed, .. } | ClusterParams::Clarans { seed, .. } => {
                *seed = new_seed
            }
            _ => {}
        }
        p
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ClusterParams::Kmeans { seed, .. } | ClusterParams::Clarans { seed, .. } => {
                Some(*seed)
            }
            _ => None,
        }
    }
}

/// Labels plus the parameters and score that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: Vec<Label>,
    pub params: ClusterParams,
    pub silhouette: Option<f64>,
    pub n_clusters_found: usize,
}

impl Clustering {
    /// Wrap raw labels; cluster ids must already be contiguous from 0.
    pub fn from_labels(labels: Vec<Label>, params: ClusterParams) -> Self {
        let n_clusters_found = labels
            .iter()
            .filter_map(|l| l.cluster())
            .max()
            .map_or(0, |m| m + 1);
        debug_assert!(
            {
                let mut present = vec![false; n_clusters_found];
                for l in &labels {
                    if let Label::Cluster(c) = l {
                        present[*c] = true;
                    }
                }
                present.iter().all(|&p| p)
            },
            "cluster ids must be contiguous"
        );
        Self {
            labels,
            params,
            silhouette: None,
            n_clusters_found,
        }
    }
}

/// Renumber cluster ids to be contiguous from 0, preserving the relative
/// order of the original ids. Used by algorithms that can end with empty
/// clusters (duplicate-coordinate medoids, for instance).
pub(crate) fn compact_labels(labels: &mut [Label]) {
    use std::collections::BTreeSet;
    let present: BTreeSet<usize> = labels.iter().filter_map(|l| l.cluster()).collect();
    let remap: std::collections::HashMap<usize, usize> = present
        .into_iter()
        .enumerate()
        .map(|(new, old)| (old, new))
        .collect();
    for l in labels.iter_mut() {
        if let Label::Cluster(c) = l {
            *l = Label::Cluster(remap[c]);
        }
    }
}

/// Run any algorithm through the common params union. Grid search and the
/// CLI go through here.
pub fn run(
    ps: &PointSet,
    params: &ClusterParams,
    metric: Metric,
) -> Result<Clustering, ClusterError> {
    params.validate()?;
    match params {
        ClusterParams::Kmeans { k, max_iter, seed } => {
            kmeans(ps, *k, *max_iter, *seed, metric).map(|o| o.clustering)
        }
        ClusterParams::Clarans {
            k,
            numlocal,
            maxneighbor,
            seed,
        } => clarans(ps, *k, *numlocal, *maxneighbor, *seed, metric).map(|o| o.clustering),
        ClusterParams::Dbscan { eps, min_pts } => {
            Ok(dbscan(ps, *eps, *min_pts, metric).clustering)
        }
        ClusterParams::Optics {
            eps,
            min_pts,
            extraction_eps,
        } => {
            let ordering = optics(ps, *eps, *min_pts, metric);
            optics_extract(&ordering, *extraction_eps).map(|labels| {
                Clustering::from_labels(labels, params.clone())
            })
        }
        ClusterParams::Agglomerative {
            n_clusters,
            linkage,
        } => {
            let linkage = match linkage {
                LinkageKind::Ward => Linkage::Ward,
                LinkageKind::Complete => Linkage::Complete,
                LinkageKind::Average => Linkage::Average,
            };
            agglomerative(ps, *n_clusters, linkage, metric).map(|o| o.clustering)
        }
        ClusterParams::Clique {
            intervals,
            threshold,
        } => clique(ps, *intervals, *threshold),
    }
}
