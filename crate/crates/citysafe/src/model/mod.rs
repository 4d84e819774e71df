//! Statistical modeling over the community feature table: correlation
//! screening, chi-square feature selection, and two regressors (ordinary
//! least squares and a random forest) evaluated on a held-out split.
//!
//! Everything here is deterministic given a seed. The forest derives one
//! RNG stream per tree from `(seed, tree_index)` and reduces in tree order,
//! so parallel and serial training produce bit-identical models.

pub mod chi_square;
pub mod correlation;
pub mod forest;
pub mod importance;
pub mod linear;
pub mod metrics;
pub mod split;

pub use chi_square::{chi_square_of_table, chi_square_select, FeatureSelection, PredictorTest};
pub use correlation::{pearson, pearson_matrix, CorrelationMatrix};
pub use forest::{fit_forest, ForestConfig, ForestModel};
pub use importance::{feature_importance_report, ols_importances, ImportanceTable};
pub use linear::{fit_ols, OlsModel};
pub use metrics::evaluate;
pub use split::train_test_split;

use crate::features::CommunityFeatureTable;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown column `{column}`")]
    UnknownColumn { column: String },
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty design matrix")]
    EmptyDesign,
}

/// A complete-case design matrix: one row per observation that has a
/// non-null value for the target and every predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// Row-major predictor values, `rows.len() == y.len()`.
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Identifier (community name) per kept row, parallel to `rows`.
    pub row_ids: Vec<String>,
}

impl Design {
    /// Extracts target and predictors from the feature table, dropping any
    /// row with a null in the target or any predictor (complete cases).
    pub fn from_table(
        table: &CommunityFeatureTable,
        target: &str,
        predictors: &[String],
    ) -> Result<Self, ModelError> {
        let y_col = table.column(target).ok_or_else(|| ModelError::UnknownColumn {
            column: target.to_string(),
        })?;
        let mut cols = Vec::with_capacity(predictors.len());
        for p in predictors {
            let c = table.column(p).ok_or_else(|| ModelError::UnknownColumn {
                column: p.clone(),
            })?;
            cols.push(c);
        }
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut row_ids = Vec::new();
        for i in 0..table.n_rows() {
            let Some(t) = y_col[i] else { continue };
            let mut row = Vec::with_capacity(cols.len());
            let mut complete = true;
            for c in &cols {
                match c[i] {
                    Some(v) => row.push(v),
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete {
                rows.push(row);
                y.push(t);
                row_ids.push(table.communities[i].clone());
            }
        }
        Ok(Design {
            feature_names: predictors.to_vec(),
            target_name: target.to_string(),
            rows,
            y,
            row_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Per-feature (mean, population standard deviation).
    pub fn feature_moments(&self) -> Vec<(f64, f64)> {
        let n = self.len() as f64;
        (0..self.n_features())
            .map(|j| {
                let mean = self.rows.iter().map(|r| r[j]).sum::<f64>() / n;
                let var = self.rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    RandomForest,
}

/// Evaluation summary for one fitted model on one target.
#[derive(Debug, Clone, Serialize)]
pub struct ModelReport {
    pub kind: ModelKind,
    pub target: String,
    pub feature_names: Vec<String>,
    /// OLS only: fitted coefficients, parallel to `feature_names`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    /// Non-negative, sums to 1 whenever the model found any structure.
    pub importances: Vec<f64>,
    pub test_mse: f64,
    pub test_r2: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub hyperparameters: serde_json::Value,
    pub warnings: Vec<String>,
}

/// Splits, fits OLS on the training part, and evaluates on the test part.
pub fn ols_report(
    design: &Design,
    test_fraction: f64,
    seed: u64,
) -> Result<(ModelReport, OlsModel), ModelError> {
    let (train, test) = train_test_split(design, test_fraction, seed)?;
    let model = fit_ols(&train)?;
    let preds: Vec<f64> = test.rows.iter().map(|r| model.predict(r)).collect();
    let (mse, r2) = evaluate(&test.y, &preds)?;
    let importances = ols_importances(&model, &train);
    let mut warnings = Vec::new();
    if model.rank_deficient {
        warnings.push("design matrix is rank-deficient; minimum-norm solution".to_string());
    }
    let report = ModelReport {
        kind: ModelKind::Ols,
        target: design.target_name.clone(),
        feature_names: design.feature_names.clone(),
        coefficients: Some(model.coefficients.clone()),
        intercept: Some(model.intercept),
        importances,
        test_mse: mse,
        test_r2: r2,
        n_train: train.len(),
        n_test: test.len(),
        seed,
        hyperparameters: serde_json::json!({ "test_fraction": test_fraction }),
        warnings,
    };
    Ok((report, model))
}

/// Splits, trains a forest on the training part, and evaluates on the test
/// part. The split and the forest share `seed`; tree streams are derived
/// from it and never collide with the shuffle.
pub fn forest_report(
    design: &Design,
    config: &ForestConfig,
    test_fraction: f64,
    seed: u64,
) -> Result<(ModelReport, ForestModel), ModelError> {
    let (train, test) = train_test_split(design, test_fraction, seed)?;
    let mut cfg = config.clone();
    cfg.seed = seed;
    let model = fit_forest(&train, &cfg)?;
    let preds = model.predict_batch(&test.rows);
    let (mse, r2) = evaluate(&test.y, &preds)?;
    let report = ModelReport {
        kind: ModelKind::RandomForest,
        target: design.target_name.clone(),
        feature_names: design.feature_names.clone(),
        coefficients: None,
        intercept: None,
        importances: model.importances.clone(),
        test_mse: mse,
        test_r2: r2,
        n_train: train.len(),
        n_test: test.len(),
        seed,
        hyperparameters: serde_json::json!({
            "n_trees": cfg.n_trees,
            "max_depth": cfg.max_depth,
            "min_leaf": cfg.min_leaf,
            "bootstrap": cfg.bootstrap,
            "n_split_features": cfg.split_features(design.n_features()),
            "test_fraction": test_fraction,
        }),
        warnings: Vec::new(),
    };
    Ok((report, model))
}
