//! CLIQUE-style grid density clustering.
//!
//! The bounding box of the point set is split into intervals × intervals
//! equal cells. Cells holding strictly more points than the threshold are
//! dense; clusters are the edge-adjacent connected components of dense
//! cells, and points outside any dense cell are noise.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Clustering, ClusterError, ClusterParams, Label, PointSet};

fn cell_index(v: f64, min: f64, max: f64, intervals: usize) -> usize {
    if max <= min {
        return 0;
    }
    let idx = ((v - min) / (max - min) * intervals as f64).floor() as usize;
    // Points on the global max edge close the last cell instead of
    // opening a new one.
    idx.min(intervals - 1)
}

pub fn clique(ps: &PointSet, intervals: usize, threshold: usize) -> Result<Clustering, ClusterError> {
    if intervals < 1 {
        return Err(ClusterError::InvalidParameter(
            "clique intervals must be >= 1".into(),
        ));
    }
    let params = ClusterParams::Clique {
        intervals,
        threshold,
    };
    let points = ps.points();
    if points.is_empty() {
        return Ok(Clustering::from_labels(Vec::new(), params));
    }

    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in points {
        for d in 0..2 {
            min[d] = min[d].min(p[d]);
            max[d] = max[d].max(p[d]);
        }
    }

    let mut cells: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let cx = cell_index(p[0], min[0], max[0], intervals);
        let cy = cell_index(p[1], min[1], max[1], intervals);
        cells.entry((cx, cy)).or_default().push(i);
    }

    let dense: BTreeSet<(usize, usize)> = cells
        .iter()
        .filter(|(_, members)| members.len() > threshold)
        .map(|(&cell, _)| cell)
        .collect();

    // Connected components over 4-neighbor adjacency, visited in cell
    // order so component numbering never depends on point order.
    let mut component: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut next_component = 0usize;
    for &start in &dense {
        if component.contains_key(&start) {
            continue;
        }
        let cid = next_component;
        next_component += 1;
        let mut queue = VecDeque::from([start]);
        component.insert(start, cid);
        while let Some((cx, cy)) = queue.pop_front() {
            let mut neighbors = Vec::with_capacity(4);
            if cx > 0 {
                neighbors.push((cx - 1, cy));
            }
            if cy > 0 {
                neighbors.push((cx, cy - 1));
            }
            neighbors.push((cx + 1, cy));
            neighbors.push((cx, cy + 1));
            for nb in neighbors {
                if dense.contains(&nb) && !component.contains_key(&nb) {
                    component.insert(nb, cid);
                    queue.push_back(nb);
                }
            }
        }
    }

    let mut labels = vec![Label::Noise; points.len()];
    for (cell, members) in &cells {
        if let Some(&cid) = component.get(cell) {
            for &i in members {
                labels[i] = Label::Cluster(cid);
            }
        }
    }
    Ok(Clustering::from_labels(labels, params))
}
