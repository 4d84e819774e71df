//! Silhouette scoring for label quality.

use super::{ClusterError, Label, Metric, PointSet};

/// Mean silhouette over the non-noise points.
///
/// For each point i, a(i) is the mean distance to the rest of its cluster
/// and b(i) the smallest mean distance to any other cluster; the score is
/// the mean of (b − a) / max(a, b). Points in singleton clusters score 0
/// by convention, noise points are excluded entirely.
///
/// Errors unless at least two clusters and two scored points exist.
pub fn silhouette(ps: &PointSet, labels: &[Label], metric: Metric) -> Result<f64, ClusterError> {
    assert_eq!(ps.len(), labels.len(), "labels must cover every point");
    let points = ps.points();

    let n_slots = labels
        .iter()
        .filter_map(|l| l.cluster())
        .max()
        .map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_slots];
    for (i, l) in labels.iter().enumerate() {
        if let Label::Cluster(c) = l {
            members[*c].push(i);
        }
    }
    // Count occupied clusters, not label ids: a labeling whose points all
    // share one id leaves b(i) with no other cluster to measure against.
    let n_clusters = members.iter().filter(|m| !m.is_empty()).count();
    if n_clusters < 2 {
        return Err(ClusterError::UndefinedScore(format!(
            "need at least 2 clusters, found {n_clusters}"
        )));
    }
    let scored: usize = members.iter().map(Vec::len).sum();
    if scored < 2 {
        return Err(ClusterError::UndefinedScore(format!(
            "need at least 2 non-noise points, found {scored}"
        )));
    }

    let mut total = 0.0;
    for (own, cluster) in members.iter().enumerate() {
        for &i in cluster {
            if cluster.len() == 1 {
                // total += 0.0 for singletons
                continue;
            }
            let a = cluster
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| metric.distance(points[i], points[j]))
                .sum::<f64>()
                / (cluster.len() - 1) as f64;
            let b = members
                .iter()
                .enumerate()
                .filter(|(other, m)| *other != own && !m.is_empty())
                .map(|(_, m)| {
                    m.iter()
                        .map(|&j| metric.distance(points[i], points[j]))
                        .sum::<f64>()
                        / m.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                total += (b - a) / denom;
            }
        }
    }
    Ok(total / scored as f64)
}
