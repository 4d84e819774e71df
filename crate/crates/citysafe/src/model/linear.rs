//! Ordinary least squares with an intercept, solved by singular value
//! decomposition so near-singular designs stay numerically stable and
//! rank-deficient ones get the minimum-norm solution.

use crate::model::{Design, ModelError};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct OlsModel {
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// True when the design (with intercept column) had numerical rank
    /// below its column count; the returned solution is minimum-norm.
    pub rank_deficient: bool,
}

impl OlsModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }
}

pub fn fit_ols(design: &Design) -> Result<OlsModel, ModelError> {
    let n = design.len();
    if n == 0 {
        return Err(ModelError::EmptyDesign);
    }
    let p = design.n_features();
    let mut x = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 0..p {
            x[(i, j + 1)] = design.rows[i][j];
        }
    }
    let y = DVector::from_column_slice(&design.y);
    let svd = x.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = f64::EPSILON * max_sv * (n.max(p + 1)) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let rank_deficient = rank < p + 1;
    if rank_deficient {
        log::warn!(
            "ols: design for `{}` is rank-deficient ({} of {} columns); using the minimum-norm solution",
            design.target_name,
            rank,
            p + 1
        );
    }
    let beta = svd
        .solve(&y, tol)
        .map_err(|e| ModelError::InvalidParameter(format!("svd solve failed: {e}")))?;
    Ok(OlsModel {
        feature_names: design.feature_names.clone(),
        intercept: beta[0],
        coefficients: beta.as_slice()[1..].to_vec(),
        rank_deficient,
    })
}
