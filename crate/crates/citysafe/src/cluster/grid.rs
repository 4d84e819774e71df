//! Silhouette-driven hyperparameter search.
//!
//! Every grid cell is an independent job over the shared point set, so
//! cells run in parallel. Determinism is preserved two ways: seeded
//! algorithms get their seed replaced by `seed ^ cell_index`, and results
//! are reduced in grid order, so parallel and serial execution pick the
//! same winner bit for bit.

use rayon::prelude::*;

use super::{run, Clustering, ClusterError, ClusterParams, Metric, PointSet};
use crate::cluster::silhouette;

/// Score-table row for one evaluated grid cell.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GridRow {
    /// Parameters as evaluated (seed already derived).
    pub params: ClusterParams,
    /// Silhouette, or `None` when the clustering got fewer than two
    /// clusters or the cell failed outright.
    pub silhouette: Option<f64>,
    pub n_clusters: usize,
    /// Why the cell produced no score, when it did not.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub best: Clustering,
    pub best_index: usize,
    pub rows: Vec<GridRow>,
}

fn evaluate_cell(
    ps: &PointSet,
    params: ClusterParams,
    metric: Metric,
) -> (GridRow, Option<Clustering>) {
    match run(ps, &params, metric) {
        Ok(mut clustering) => match silhouette(ps, &clustering.labels, metric) {
            Ok(score) => {
                clustering.silhouette = Some(score);
                let row = GridRow {
                    params,
                    silhouette: Some(score),
                    n_clusters: clustering.n_clusters_found,
                    error: None,
                };
                (row, Some(clustering))
            }
            Err(e) => (
                GridRow {
                    params,
                    silhouette: None,
                    n_clusters: clustering.n_clusters_found,
                    error: Some(e.to_string()),
                },
                None,
            ),
        },
        Err(e) => (
            GridRow {
                params,
                silhouette: None,
                n_clusters: 0,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

/// Evaluate every cell and return the clustering with the highest
/// silhouette plus the full score table. Ties go to the earliest cell in
/// grid order; cells without a defined score are never selected.
pub fn grid_search(
    ps: &PointSet,
    grid: &[ClusterParams],
    seed: u64,
    metric: Metric,
) -> Result<GridOutcome, ClusterError> {
    if grid.is_empty() {
        return Err(ClusterError::InvalidParameter("empty parameter grid".into()));
    }
    let cells: Vec<(GridRow, Option<Clustering>)> = grid
        .par_iter()
        .enumerate()
        .map(|(index, params)| {
            let derived = params.with_seed(seed ^ index as u64);
            evaluate_cell(ps, derived, metric)
        })
        .collect();

    let mut rows = Vec::with_capacity(cells.len());
    let mut best: Option<(usize, f64, Clustering)> = None;
    for (index, (row, clustering)) in cells.into_iter().enumerate() {
        if let (Some(score), Some(clustering)) = (row.silhouette, clustering) {
            let better = best.as_ref().is_none_or(|(_, b, _)| score > *b);
            if better {
                best = Some((index, score, clustering));
            }
        }
        rows.push(row);
    }
    match best {
        Some((best_index, _, best)) => Ok(GridOutcome {
            best,
            best_index,
            rows,
        }),
        None => Err(ClusterError::NoValidClustering),
    }
}
