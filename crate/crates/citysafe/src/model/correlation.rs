//! Pearson correlation matrices with pairwise-complete null handling.

use crate::features::CommunityFeatureTable;
use crate::model::ModelError;
use serde::Serialize;

/// Symmetric matrix of Pearson r. Entries involving a constant column (or a
/// pair with fewer than two complete observations) are `None`, not zero —
/// the correlation is undefined there, and 0 would claim independence.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| c == a)?;
        let j = self.columns.iter().position(|c| c == b)?;
        self.values[i][j]
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("column");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, c) in self.columns.iter().enumerate() {
            out.push_str(c);
            for v in &self.values[i] {
                out.push(',');
                if let Some(x) = v {
                    out.push_str(&format!("{x}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Pearson r over the pairs where both values are present. Returns `None`
/// when fewer than two pairs survive or either side is constant on them.
pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in &pairs {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Correlation matrix over the named columns of the feature table. Each
/// pair is computed over the rows complete for *that pair*, so sparsity in
/// one column does not starve the others.
pub fn pearson_matrix(
    table: &CommunityFeatureTable,
    columns: &[String],
) -> Result<CorrelationMatrix, ModelError> {
    if table.n_rows() < 2 {
        return Err(ModelError::TooFewRows {
            need: 2,
            got: table.n_rows(),
        });
    }
    let mut cols = Vec::with_capacity(columns.len());
    for name in columns {
        let c = table.column(name).ok_or_else(|| ModelError::UnknownColumn {
            column: name.clone(),
        })?;
        cols.push(c);
    }
    let k = cols.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        // The diagonal is 1 by definition for any non-constant column;
        // pearson() returns None exactly when that definition fails.
        values[i][i] = pearson(cols[i], cols[i]).map(|_| 1.0);
        for j in i + 1..k {
            let r = pearson(cols[i], cols[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        columns: columns.to_vec(),
        values,
    })
}
