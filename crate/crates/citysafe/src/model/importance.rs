//! Feature-importance reporting across model kinds.
//!
//! Forests carry their own importances (normalized variance reduction).
//! OLS has no canonical importance, so the report uses absolute
//! standardized coefficients — |beta| scaled by the feature's training
//! standard deviation — normalized to sum 1 and labeled as such.

use crate::model::{Design, ModelKind, ModelReport, OlsModel};
use serde::Serialize;

/// Absolute standardized coefficients, normalized to sum 1. Scale-free:
/// rescaling a feature rescales its coefficient inversely, so the product
/// with the standard deviation is unchanged.
pub fn ols_importances(model: &OlsModel, train: &Design) -> Vec<f64> {
    let moments = train.feature_moments();
    let raw: Vec<f64> = model
        .coefficients
        .iter()
        .zip(&moments)
        .map(|(beta, (_, sd))| (beta * sd).abs())
        .collect();
    let n = train.len() as f64;
    let y_mean = train.y.iter().sum::<f64>() / n;
    let y_sd = (train.y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
    let total: f64 = raw.iter().sum();
    // A target with no variance leaves nothing to attribute; normalizing
    // the coefficients' rounding noise would fabricate an importance of 1.
    if y_sd > 0.0 && total > 1e-12 * y_sd {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceEntry {
    pub feature: String,
    pub importance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceTable {
    pub target: String,
    pub kind: ModelKind,
    /// Descending by importance; exact ties fall back to feature name.
    pub entries: Vec<ImportanceEntry>,
}

/// One ranked table per fitted model, in the order the reports were given
/// (one target may appear under both model kinds; both are labeled).
pub fn feature_importance_report(reports: &[ModelReport]) -> Vec<ImportanceTable> {
    reports
        .iter()
        .map(|r| {
            let mut entries: Vec<ImportanceEntry> = r
                .feature_names
                .iter()
                .zip(&r.importances)
                .map(|(f, &v)| ImportanceEntry {
                    feature: f.clone(),
                    importance: v,
                })
                .collect();
            entries.sort_by(|a, b| {
                b.importance
                    .partial_cmp(&a.importance)
                    .unwrap()
                    .then_with(|| a.feature.cmp(&b.feature))
            });
            ImportanceTable {
                target: r.target.clone(),
                kind: r.kind,
                entries,
            }
        })
        .collect()
}
