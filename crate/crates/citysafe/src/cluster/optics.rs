//! OPTICS ordering (Ankerst et al.) plus DBSCAN-style cluster extraction.

use super::{ClusterError, Label, Metric, PointSet};

/// One slot of the OPTICS output ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsEntry {
    /// Point index in the input set.
    pub index: usize,
    /// Reachability from the already-ordered structure; `None` for walk
    /// starts.
    pub reachability: Option<f64>,
    /// Distance to the min_pts-th nearest neighbor (self included) when
    /// the eps-neighborhood is dense enough, else `None`.
    pub core_distance: Option<f64>,
}

/// Compute the OPTICS ordering.
///
/// Each unprocessed point starts a walk that repeatedly expands the
/// unprocessed point with the smallest reachability (smallest index on
/// ties). Reachability of a neighbor is max(core distance, actual
/// distance), kept as the minimum over all expansions that touch it.
///
/// Walks start at core points, in input order; non-core points start walks
/// only once every core point is processed. The ordering constraint is the
/// same either way, but core-first starts mean a border point can never be
/// emitted with undefined reachability before its cluster is reached — so
/// extraction at the clustering radius reproduces density roles exactly
/// instead of missing the occasional border point.
pub fn optics(ps: &PointSet, eps: f64, min_pts: usize, metric: Metric) -> Vec<OpticsEntry> {
    assert!(eps.is_finite() && eps >= 0.0, "eps must be finite and >= 0");
    assert!(min_pts >= 1, "min_pts must be >= 1");
    let points = ps.points();
    let n = points.len();

    let neighborhood = |i: usize| -> Vec<(usize, f64)> {
        (0..n)
            .filter_map(|j| {
                let d = metric.distance(points[i], points[j]);
                (d <= eps).then_some((j, d))
            })
            .collect()
    };
    let core_distance = |neighbors: &[(usize, f64)]| -> Option<f64> {
        if neighbors.len() < min_pts {
            return None;
        }
        let mut dists: Vec<f64> = neighbors.iter().map(|&(_, d)| d).collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(dists[min_pts - 1])
    };

    let mut processed = vec![false; n];
    let mut reach: Vec<Option<f64>> = vec![None; n];
    let mut in_seeds = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let expand = |i: usize,
                      emitted_reach: Option<f64>,
                      processed: &mut Vec<bool>,
                      reach: &mut Vec<Option<f64>>,
                      in_seeds: &mut Vec<bool>,
                      order: &mut Vec<OpticsEntry>| {
        processed[i] = true;
        in_seeds[i] = false;
        let neighbors = neighborhood(i);
        let cd = core_distance(&neighbors);
        order.push(OpticsEntry {
            index: i,
            reachability: emitted_reach,
            core_distance: cd,
        });
        if let Some(cd) = cd {
            for &(q, d) in &neighbors {
                if processed[q] {
                    continue;
                }
                let new_reach = cd.max(d);
                if reach[q].is_none_or(|old| new_reach < old) {
                    reach[q] = Some(new_reach);
                }
                in_seeds[q] = true;
            }
        }
    };

    let is_core: Vec<bool> = (0..n).map(|i| neighborhood(i).len() >= min_pts).collect();
    let starts = (0..n).filter(|&i| is_core[i]).chain((0..n).filter(|&i| !is_core[i]));
    for start in starts {
        if processed[start] {
            continue;
        }
        expand(
            start,
            None,
            &mut processed,
            &mut reach,
            &mut in_seeds,
            &mut order,
        );
        loop {
            // Smallest reachability among pending seeds, smallest index
            // breaking ties. Linear scan keeps the walk deterministic.
            let mut next: Option<(f64, usize)> = None;
            for q in 0..n {
                if !in_seeds[q] || processed[q] {
                    continue;
                }
                let r = reach[q].expect("seeded points carry a reachability");
                if next.is_none_or(|(best, _)| r < best) {
                    next = Some((r, q));
                }
            }
            let Some((r, q)) = next else { break };
            expand(
                q,
                Some(r),
                &mut processed,
                &mut reach,
                &mut in_seeds,
                &mut order,
            );
        }
    }
    order
}

/// Cut the ordering into clusters the way DBSCAN would at radius
/// `extraction_eps`: a reachability jump above the radius starts a new
/// cluster when the point itself is dense enough there, and is noise
/// otherwise.
pub fn optics_extract(
    ordering: &[OpticsEntry],
    extraction_eps: f64,
) -> Result<Vec<Label>, ClusterError> {
    if !extraction_eps.is_finite() || extraction_eps <= 0.0 {
        return Err(ClusterError::InvalidParameter(format!(
            "extraction_eps must be positive, got {extraction_eps}"
        )));
    }
    let mut labels = vec![Label::Noise; ordering.len()];
    let mut current: Option<usize> = None;
    let mut next_cluster = 0usize;
    for entry in ordering {
        let reachable = entry.reachability.is_some_and(|r| r <= extraction_eps);
        if reachable {
            // Reachability = max(predecessor core distance, distance), so
            // a small reachability implies the predecessor already opened
            // a cluster.
            let cid = current.expect("reachable point follows a cluster start");
            labels[entry.index] = Label::Cluster(cid);
        } else if entry.core_distance.is_some_and(|cd| cd <= extraction_eps) {
            let cid = next_cluster;
            next_cluster += 1;
            current = Some(cid);
            labels[entry.index] = Label::Cluster(cid);
        } else {
            labels[entry.index] = Label::Noise;
        }
    }
    Ok(labels)
}
