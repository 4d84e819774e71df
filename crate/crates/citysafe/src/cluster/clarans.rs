//! CLARANS k-medoid search (Ng & Han's randomized node walk).
//!
//! A node is a set of k medoids; its neighbors differ by one medoid. Each
//! of `numlocal` restarts walks from a random node, accepting any random
//! neighbor that strictly lowers the cost and giving up after
//! `maxneighbor` consecutive non-improving draws. The cheapest local
//! minimum over all restarts wins.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    compact_labels, Clustering, ClusterError, ClusterParams, Label, Metric, PointSet,
};

#[derive(Debug, Clone)]
pub struct ClaransOutcome {
    pub clustering: Clustering,
    /// Winning medoids as point indices, ascending.
    pub medoids: Vec<usize>,
    /// Sum of distances from each point to its nearest medoid.
    pub cost: f64,
}

fn node_cost(points: &[[f64; 2]], medoids: &[usize], metric: Metric) -> f64 {
    points
        .iter()
        .map(|p| {
            medoids
                .iter()
                .map(|&m| metric.distance(*p, points[m]))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

pub fn clarans(
    ps: &PointSet,
    k: usize,
    numlocal: usize,
    maxneighbor: usize,
    seed: u64,
    metric: Metric,
) -> Result<ClaransOutcome, ClusterError> {
    if k < 1 || numlocal < 1 {
        return Err(ClusterError::InvalidParameter(
            "clarans needs k >= 1 and numlocal >= 1".into(),
        ));
    }
    let n = ps.len();
    if k > n {
        return Err(ClusterError::TooManyClusters { k, available: n });
    }
    let points = ps.points();

    let (best, best_cost) = if k == n {
        // Every point is its own medoid; there are no neighbors to draw.
        ((0..n).collect::<Vec<usize>>(), 0.0)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(Vec<usize>, f64)> = None;
        for _ in 0..numlocal {
            let mut current: Vec<usize> =
                rand::seq::index::sample(&mut rng, n, k).into_iter().collect();
            let mut is_medoid = vec![false; n];
            for &m in &current {
                is_medoid[m] = true;
            }
            let mut cost = node_cost(points, &current, metric);

            let mut j = 1usize;
            while j <= maxneighbor {
                let pos = rng.gen_range(0..k);
                let replacement = loop {
                    let cand = rng.gen_range(0..n);
                    if !is_medoid[cand] {
                        break cand;
                    }
                };
                let old = current[pos];
                current[pos] = replacement;
                let cand_cost = node_cost(points, &current, metric);
                if cand_cost < cost {
                    is_medoid[old] = false;
                    is_medoid[replacement] = true;
                    cost = cand_cost;
                    j = 1;
                } else {
                    current[pos] = old;
                    j += 1;
                }
            }

            if best.as_ref().is_none_or(|(_, c)| cost < *c) {
                best = Some((current, cost));
            }
        }
        best.expect("numlocal >= 1")
    };

    let mut medoids = best;
    medoids.sort_unstable();
    let mut labels: Vec<Label> = points
        .iter()
        .map(|p| {
            let nearest = medoids
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| {
                    metric
                        .distance(*p, points[a])
                        .partial_cmp(&metric.distance(*p, points[b]))
                        .unwrap()
                })
                .map(|(c, _)| c)
                .expect("k >= 1");
            Label::Cluster(nearest)
        })
        .collect();
    // Coincident medoids can leave a medoid with no assigned points.
    compact_labels(&mut labels);

    let params = ClusterParams::Clarans {
        k,
        numlocal,
        maxneighbor,
        seed,
    };
    Ok(ClaransOutcome {
        clustering: Clustering::from_labels(labels, params),
        medoids,
        cost: best_cost,
    })
}

/// Exhaustive k-medoid optimum, usable only at toy scale. Kept public for
/// the test suites that certify CLARANS against it.
pub fn exhaustive_medoid_cost(ps: &PointSet, k: usize, metric: Metric) -> f64 {
    fn combos(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        rec(0, n, k, &mut cur, &mut out);
        out
    }
    combos(ps.len(), k)
        .into_iter()
        .map(|medoids| node_cost(ps.points(), &medoids, metric))
        .fold(f64::INFINITY, f64::min)
}
