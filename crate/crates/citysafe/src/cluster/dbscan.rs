//! DBSCAN density clustering (Ester et al.'s formulation).

use super::{Clustering, ClusterParams, Label, Metric, PointSet};

#[derive(Debug, Clone)]
pub struct DbscanOutcome {
    pub clustering: Clustering,
    /// True for points whose eps-neighborhood (self included) reaches
    /// min_pts. Border points sit in a cluster with this flag false.
    pub is_core: Vec<bool>,
}

/// DBSCAN over the point set. Total for all inputs: points end up in a
/// cluster or labeled noise, never an error.
///
/// A point is core iff its eps-neighborhood, itself included, holds at
/// least `min_pts` points. Clusters grow breadth-first from each core
/// point in scan order, so a border point in reach of two clusters joins
/// whichever core point's expansion touches it first.
pub fn dbscan(ps: &PointSet, eps: f64, min_pts: usize, metric: Metric) -> DbscanOutcome {
    assert!(eps.is_finite() && eps >= 0.0, "eps must be finite and >= 0");
    assert!(min_pts >= 1, "min_pts must be >= 1");
    let points = ps.points();
    let n = points.len();

    let neighbors_of = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| metric.distance(points[i], points[j]) <= eps)
            .collect()
    };

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Unvisited,
        Noise,
        Cluster(usize),
    }
    let mut state = vec![State::Unvisited; n];
    let mut is_core = vec![false; n];
    let mut next_cluster = 0usize;

    for i in 0..n {
        if state[i] != State::Unvisited {
            continue;
        }
        let neighborhood = neighbors_of(i);
        if neighborhood.len() < min_pts {
            state[i] = State::Noise;
            continue;
        }
        // i seeds a new cluster; expand over density-reachable points.
        let cid = next_cluster;
        next_cluster += 1;
        is_core[i] = true;
        state[i] = State::Cluster(cid);
        let mut queue: std::collections::VecDeque<usize> = neighborhood.into();
        while let Some(q) = queue.pop_front() {
            match state[q] {
                State::Noise => {
                    // Reached from a core point: border, not noise.
                    state[q] = State::Cluster(cid);
                }
                State::Unvisited => {
                    state[q] = State::Cluster(cid);
                    let q_neighbors = neighbors_of(q);
                    if q_neighbors.len() >= min_pts {
                        is_core[q] = true;
                        queue.extend(q_neighbors);
                    }
                }
                State::Cluster(_) => {}
            }
        }
    }

    let labels: Vec<Label> = state
        .into_iter()
        .map(|s| match s {
            State::Cluster(c) => Label::Cluster(c),
            State::Noise => Label::Noise,
            State::Unvisited => unreachable!("every point is visited"),
        })
        .collect();
    let params = ClusterParams::Dbscan { eps, min_pts };
    DbscanOutcome {
        clustering: Clustering::from_labels(labels, params),
        is_core,
    }
}
