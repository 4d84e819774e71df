//! Random forest regression built from scratch: bootstrap-sampled
//! variance-reduction trees over random feature subsets.
//!
//! Determinism contract: every tree draws from its own RNG stream derived
//! from `(seed, tree_index)`, and trees are reduced in index order, so a
//! fixed seed gives bit-identical models whether training runs serially or
//! across threads.

use crate::model::{Design, ModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// None = grow until pure or `min_leaf` stops the split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
    /// Features considered per split; None = ⌈p/3⌉, floor 1.
    pub n_split_features: Option<usize>,
    pub parallel: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            bootstrap: true,
            n_split_features: None,
            parallel: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn split_features(&self, p: usize) -> usize {
        match self.n_split_features {
            Some(m) => m.min(p).max(1),
            None => (p.div_ceil(3)).max(1),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.n_trees < 1 {
            return Err(ModelError::InvalidParameter(
                "n_trees must be at least 1".to_string(),
            ));
        }
        if self.max_depth == Some(0) {
            return Err(ModelError::InvalidParameter(
                "max_depth must be at least 1".to_string(),
            ));
        }
        if self.min_leaf < 1 {
            return Err(ModelError::InvalidParameter(
                "min_leaf must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub feature_names: Vec<String>,
    /// Normalized total variance reduction per feature; all zero when no
    /// tree ever split (constant target), otherwise sums to 1.
    pub importances: Vec<f64>,
    pub y_min: f64,
    pub y_max: f64,
    pub config: ForestConfig,
    trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean of the per-tree predictions, accumulated in tree order.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}

/// Decorrelates the per-tree streams: trees with adjacent indices get
/// unrelated seeds, and the mapping depends only on (seed, index).
fn stream_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sum of squared deviations from the mean over `idx`, plus the mean.
fn node_stats(y: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let sse = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    (mean, sse)
}

struct Grower<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a ForestConfig,
    n_features: usize,
    nodes: Vec<Node>,
    raw_importance: Vec<f64>,
    n_total: f64,
}

impl Grower<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let (mean, sse) = node_stats(self.y, &idx);
        let at_depth_limit = self.cfg.max_depth.is_some_and(|d| depth >= d);
        if at_depth_limit || idx.len() < 2 * self.cfg.min_leaf || sse <= 0.0 {
            self.nodes.push(Node::Leaf { value: mean });
            return self.nodes.len() - 1;
        }
        let m = self.cfg.split_features(self.n_features);
        let candidates = rand::seq::index::sample(rng, self.n_features, m);
        let mut best: Option<(f64, usize, f64)> = None; // (reduction, feature, threshold)
        for f in candidates {
            let mut order = idx.clone();
            order.sort_by(|&a, &b| self.rows[a][f].partial_cmp(&self.rows[b][f]).unwrap());
            // Prefix sums over the sorted order let each candidate split be
            // scored in O(1): SSE = Σy² − (Σy)²/n on each side.
            let n = order.len();
            let mut pre_s = vec![0.0; n + 1];
            let mut pre_q = vec![0.0; n + 1];
            for (i, &row) in order.iter().enumerate() {
                pre_s[i + 1] = pre_s[i] + self.y[row];
                pre_q[i + 1] = pre_q[i] + self.y[row] * self.y[row];
            }
            for cut in self.cfg.min_leaf..=(n - self.cfg.min_leaf) {
                if cut == n {
                    break;
                }
                let lo = self.rows[order[cut - 1]][f];
                let hi = self.rows[order[cut]][f];
                if lo == hi {
                    continue;
                }
                let nl = cut as f64;
                let nr = (n - cut) as f64;
                let sse_l = pre_q[cut] - pre_s[cut] * pre_s[cut] / nl;
                let sse_r =
                    (pre_q[n] - pre_q[cut]) - (pre_s[n] - pre_s[cut]).powi(2) / nr;
                let reduction = sse - (sse_l + sse_r);
                if best.map(|(r, _, _)| reduction > r).unwrap_or(reduction > 0.0) {
                    best = Some((reduction, f, (lo + hi) / 2.0));
                }
            }
        }
        let Some((reduction, feature, threshold)) = best else {
            self.nodes.push(Node::Leaf { value: mean });
            return self.nodes.len() - 1;
        };
        self.raw_importance[feature] += reduction / self.n_total;
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.rows[i][feature] <= threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean }); // placeholder
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }
}

fn build_tree(design: &Design, cfg: &ForestConfig, tree_index: usize) -> (Tree, Vec<f64>) {
    let n = design.len();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, tree_index as u64));
    let idx: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.gen_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut grower = Grower {
        rows: &design.rows,
        y: &design.y,
        cfg,
        n_features: design.n_features(),
        nodes: Vec::new(),
        raw_importance: vec![0.0; design.n_features()],
        n_total: idx.len() as f64,
    };
    let root = grower.grow(idx, 0, &mut rng);
    debug_assert_eq!(root, 0);
    (
        Tree { nodes: grower.nodes },
        grower.raw_importance,
    )
}

pub fn fit_forest(design: &Design, config: &ForestConfig) -> Result<ForestModel, ModelError> {
    config.validate()?;
    if design.is_empty() {
        return Err(ModelError::EmptyDesign);
    }
    let built: Vec<(Tree, Vec<f64>)> = if config.parallel && config.n_trees > 1 {
        (0..config.n_trees)
            .into_par_iter()
            .map(|t| build_tree(design, config, t))
            .collect()
    } else {
        (0..config.n_trees)
            .map(|t| build_tree(design, config, t))
            .collect()
    };
    let mut trees = Vec::with_capacity(built.len());
    let mut raw = vec![0.0; design.n_features()];
    for (tree, imp) in built {
        for (acc, v) in raw.iter_mut().zip(&imp) {
            *acc += v;
        }
        trees.push(tree);
    }
    let total: f64 = raw.iter().sum();
    let importances = if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        raw
    };
    let y_min = design.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = design.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ForestModel {
        feature_names: design.feature_names.clone(),
        importances,
        y_min,
        y_max,
        config: config.clone(),
        trees,
    })
}
