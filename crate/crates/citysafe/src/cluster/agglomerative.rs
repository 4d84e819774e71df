//! Bottom-up hierarchical clustering via Lance–Williams updates.
//!
//! Every point starts as its own cluster; the closest pair merges until
//! the requested count remains. Ward distances are initialized to half the
//! squared point distance, which makes the recurrence track the exact
//! variance increase of each merge. Complete and average linkage keep
//! plain distances.

use super::{Clustering, ClusterError, ClusterParams, Label, LinkageKind, Metric, PointSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    /// Merge cost = increase in total within-cluster variance.
    Ward,
    /// Maximum pairwise distance.
    Complete,
    /// Size-weighted mean pairwise distance.
    Average,
}

/// One merge event: the two cluster ids joined (each id is the smallest
/// point index of its cluster) and the linkage distance at which they met.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub merged_size: usize,
}

#[derive(Debug, Clone)]
pub struct AggloOutcome {
    pub clustering: Clustering,
    pub merges: Vec<MergeStep>,
}

pub fn agglomerative(
    ps: &PointSet,
    n_clusters: usize,
    linkage: Linkage,
    metric: Metric,
) -> Result<AggloOutcome, ClusterError> {
    if n_clusters < 1 {
        return Err(ClusterError::InvalidParameter(
            "agglomerative n_clusters must be >= 1".into(),
        ));
    }
    let n = ps.len();
    if n_clusters > n {
        return Err(ClusterError::TooManyClusters {
            k: n_clusters,
            available: n,
        });
    }
    let points = ps.points();

    // Full distance matrix; slot i holds the cluster whose smallest member
    // is point i, so slot order doubles as the documented tie-break order.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.distance(points[i], points[j]);
            let d = match linkage {
                Linkage::Ward => d * d / 2.0,
                Linkage::Complete | Linkage::Average => d,
            };
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active: Vec<bool> = vec![true; n];
    let mut size: Vec<usize> = vec![1; n];
    let mut slot_of_point: Vec<usize> = (0..n).collect();
    let mut remaining = n;
    let mut merges = Vec::with_capacity(n.saturating_sub(n_clusters));

    while remaining > n_clusters {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !active[j] {
                    continue;
                }
                let d = dist[i * n + j];
                // Strict < keeps the lexicographically smallest (i, j) on
                // ties because of the scan order.
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (d, i, j) = best.expect("at least two active clusters");

        // Lance-Williams update of distances to the merged cluster i∪j.
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for h in 0..n {
            if !active[h] || h == i || h == j {
                continue;
            }
            let dih = dist[i * n + h];
            let djh = dist[j * n + h];
            let new = match linkage {
                Linkage::Ward => {
                    let nh = size[h] as f64;
                    ((ni + nh) * dih + (nj + nh) * djh - nh * d) / (ni + nj + nh)
                }
                Linkage::Complete => dih.max(djh),
                Linkage::Average => (ni * dih + nj * djh) / (ni + nj),
            };
            dist[i * n + h] = new;
            dist[h * n + i] = new;
        }

        size[i] += size[j];
        active[j] = false;
        for slot in slot_of_point.iter_mut() {
            if *slot == j {
                *slot = i;
            }
        }
        remaining -= 1;
        merges.push(MergeStep {
            left: i,
            right: j,
            distance: d,
            merged_size: size[i],
        });
    }

    // Contiguous cluster ids in ascending slot order.
    let mut slot_to_cluster = std::collections::HashMap::new();
    for (slot, _) in active.iter().enumerate().filter(|(_, live)| **live) {
        let next = slot_to_cluster.len();
        slot_to_cluster.insert(slot, next);
    }
    let labels: Vec<Label> = slot_of_point
        .iter()
        .map(|slot| Label::Cluster(slot_to_cluster[slot]))
        .collect();
    let params = ClusterParams::Agglomerative {
        n_clusters,
        linkage: match linkage {
            Linkage::Ward => LinkageKind::Ward,
            Linkage::Complete => LinkageKind::Complete,
            Linkage::Average => LinkageKind::Average,
        },
    };
    Ok(AggloOutcome {
        clustering: Clustering::from_labels(labels, params),
        merges,
    })
}
