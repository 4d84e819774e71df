//! Lloyd-style K-Means with seeded initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    compact_labels, Clustering, ClusterError, ClusterParams, Label, Metric, PointSet,
};

/// Result of one K-Means run, with the per-iteration SSE trace.
#[derive(Debug, Clone)]
pub struct KmeansOutcome {
    pub clustering: Clustering,
    pub centroids: Vec<[f64; 2]>,
    /// Sum of squared point-to-centroid distances measured after each
    /// assignment step. Non-increasing by construction.
    pub sse_history: Vec<f64>,
}

/// K-Means: seeded sample of k distinct points as initial centroids, then
/// Lloyd iteration until assignments stop changing or `max_iter` passes.
///
/// A cluster emptied by an update step is re-seeded with the point
/// currently farthest from its assigned centroid.
pub fn kmeans(
    ps: &PointSet,
    k: usize,
    max_iter: usize,
    seed: u64,
    metric: Metric,
) -> Result<KmeansOutcome, ClusterError> {
    if k < 1 || max_iter < 1 {
        return Err(ClusterError::InvalidParameter(
            "kmeans needs k >= 1 and max_iter >= 1".into(),
        ));
    }
    let distinct = ps.n_distinct();
    if k > distinct {
        return Err(ClusterError::TooManyClusters {
            k,
            available: distinct,
        });
    }
    let points = ps.points();
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Initial centroids: k points with pairwise-distinct coordinates,
    // chosen uniformly among the first occurrence of each distinct value.
    let mut seen = std::collections::HashSet::new();
    let unique: Vec<usize> = (0..n)
        .filter(|&i| seen.insert((points[i][0].to_bits(), points[i][1].to_bits())))
        .collect();
    let mut centroids: Vec<[f64; 2]> = rand::seq::index::sample(&mut rng, unique.len(), k)
        .into_iter()
        .map(|u| points[unique[u]])
        .collect();

    let mut assign: Vec<usize> = vec![usize::MAX; n];
    let mut sse_history = Vec::new();

    for _ in 0..max_iter {
        // Assignment step (ties go to the lowest centroid index).
        let mut changed = false;
        let mut sse = 0.0;
        let mut new_assign = Vec::with_capacity(n);
        for (i, p) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = metric.distance(*p, *centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            sse += best_d * best_d;
            changed |= assign[i] != best;
            new_assign.push(best);
        }
        assign = new_assign;
        sse_history.push(sse);
        if !changed {
            break;
        }

        // Update step.
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            sums[c][0] += p[0];
            sums[c][1] += p[1];
            counts[c] += 1;
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            } else {
                // Re-seed the empty cluster with the point farthest from
                // its own centroid (lowest index on ties).
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&i, &j| {
                        let di = metric.distance(points[i], centroids[assign[i]]);
                        let dj = metric.distance(points[j], centroids[assign[j]]);
                        di.partial_cmp(&dj)
                            .unwrap()
                            .then_with(|| j.cmp(&i))
                    })
                    .expect("non-empty point set");
                taken[far] = true;
                centroids[c] = points[far];
            }
        }
    }

    let mut labels: Vec<Label> = assign.into_iter().map(Label::Cluster).collect();
    let present: std::collections::BTreeSet<usize> =
        labels.iter().filter_map(|l| l.cluster()).collect();
    if present.len() < k {
        centroids = present.iter().map(|&c| centroids[c]).collect();
        compact_labels(&mut labels);
    }
    let params = ClusterParams::Kmeans { k, max_iter, seed };
    Ok(KmeansOutcome {
        clustering: Clustering::from_labels(labels, params),
        centroids,
        sse_history,
    })
}
