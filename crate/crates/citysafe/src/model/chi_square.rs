//! Chi-square feature screening over quantile-binned indicators.
//!
//! The community indicators are continuous, so each variable is first
//! discretized into quantile bins (default 4). The test then asks whether
//! the binned predictor is independent of the binned target; predictors
//! with p below alpha are kept for the regression stage.

use crate::features::CommunityFeatureTable;
use crate::model::ModelError;
use serde::Serialize;
use statrs::function::gamma::gamma_ur;

#[derive(Debug, Clone, Serialize)]
pub struct PredictorTest {
    pub name: String,
    /// Null when binning degenerated (constant variable or too few rows).
    pub chi2: Option<f64>,
    pub df: Option<usize>,
    pub p_value: Option<f64>,
    pub selected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureSelection {
    pub target: String,
    pub alpha: f64,
    pub bins: usize,
    pub tests: Vec<PredictorTest>,
}

impl FeatureSelection {
    pub fn selected_names(&self) -> Vec<String> {
        self.tests
            .iter()
            .filter(|t| t.selected)
            .map(|t| t.name.clone())
            .collect()
    }
}

/// Internal quantile edges (linear interpolation between order statistics),
/// deduplicated. `bins` intervals need `bins - 1` edges; ties in the data
/// can collapse some away.
fn quantile_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut edges = Vec::with_capacity(bins - 1);
    for b in 1..bins {
        let p = b as f64 / bins as f64;
        let h = (n - 1) as f64 * p;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let q = if lo + 1 < n {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        };
        if edges.last().map(|&e: &f64| q > e).unwrap_or(true) {
            edges.push(q);
        }
    }
    edges
}

/// Bin index = number of edges strictly below the value, so a value equal
/// to an edge falls in the lower bin.
fn bin_value(v: f64, edges: &[f64]) -> usize {
    edges.iter().take_while(|&&e| v > e).count()
}

/// Pearson chi-square statistic and degrees of freedom for an observed
/// contingency table. Cells with zero expected count contribute nothing
/// (they only arise from empty rows/columns, which callers should drop).
pub fn chi_square_of_table(observed: &[Vec<f64>]) -> Result<(f64, usize), ModelError> {
    let r = observed.len();
    if r == 0 || observed[0].is_empty() {
        return Err(ModelError::InvalidParameter(
            "contingency table must be non-empty".to_string(),
        ));
    }
    let c = observed[0].len();
    if observed.iter().any(|row| row.len() != c) {
        return Err(ModelError::InvalidParameter(
            "contingency table rows must have equal length".to_string(),
        ));
    }
    let row_tot: Vec<f64> = observed.iter().map(|row| row.iter().sum()).collect();
    let col_tot: Vec<f64> = (0..c).map(|j| observed.iter().map(|row| row[j]).sum()).collect();
    let grand: f64 = row_tot.iter().sum();
    if grand <= 0.0 {
        return Err(ModelError::InvalidParameter(
            "contingency table has zero total count".to_string(),
        ));
    }
    let mut chi2 = 0.0;
    for i in 0..r {
        for j in 0..c {
            let e = row_tot[i] * col_tot[j] / grand;
            if e > 0.0 {
                let d = observed[i][j] - e;
                chi2 += d * d / e;
            }
        }
    }
    Ok((chi2, (r - 1) * (c - 1)))
}

/// Survival function of the chi-square distribution: the regularized upper
/// incomplete gamma function Q(df/2, x/2).
pub fn chi_square_p_value(chi2: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, chi2 / 2.0)
}

fn contingency(target_bins: &[usize], pred_bins: &[usize]) -> Vec<Vec<f64>> {
    let r = target_bins.iter().max().map(|m| m + 1).unwrap_or(0);
    let c = pred_bins.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut table = vec![vec![0.0; c]; r];
    for (&t, &p) in target_bins.iter().zip(pred_bins) {
        table[t][p] += 1.0;
    }
    // Quantile edges can leave a bin empty on pathological tie patterns;
    // empty rows/columns carry no information and would distort df.
    table.retain(|row| row.iter().sum::<f64>() > 0.0);
    if !table.is_empty() {
        let keep: Vec<usize> = (0..table[0].len())
            .filter(|&j| table.iter().map(|row| row[j]).sum::<f64>() > 0.0)
            .collect();
        for row in &mut table {
            *row = keep.iter().map(|&j| row[j]).collect();
        }
    }
    table
}

/// Tests each predictor for independence from the target after quantile
/// binning both sides. A predictor whose binning degenerates (all values in
/// one bin) is reported unselected with null statistics rather than failing
/// the whole screen.
pub fn chi_square_select(
    table: &CommunityFeatureTable,
    target: &str,
    predictors: &[String],
    alpha: f64,
    bins: usize,
) -> Result<FeatureSelection, ModelError> {
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(ModelError::InvalidParameter(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if bins < 2 {
        return Err(ModelError::InvalidParameter(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    let y_col = table.column(target).ok_or_else(|| ModelError::UnknownColumn {
        column: target.to_string(),
    })?;
    let mut tests = Vec::with_capacity(predictors.len());
    for name in predictors {
        let x_col = table.column(name).ok_or_else(|| ModelError::UnknownColumn {
            column: name.clone(),
        })?;
        let pairs: Vec<(f64, f64)> = y_col
            .iter()
            .zip(x_col)
            .filter_map(|(t, p)| Some(((*t)?, (*p)?)))
            .collect();
        let degenerate = |name: &str| PredictorTest {
            name: name.to_string(),
            chi2: None,
            df: None,
            p_value: None,
            selected: false,
        };
        if pairs.len() < 2 {
            tests.push(degenerate(name));
            continue;
        }
        let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let xs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let y_edges = quantile_edges(&ys, bins);
        let x_edges = quantile_edges(&xs, bins);
        if y_edges.is_empty() || x_edges.is_empty() {
            tests.push(degenerate(name));
            continue;
        }
        let y_bins: Vec<usize> = ys.iter().map(|&v| bin_value(v, &y_edges)).collect();
        let x_bins: Vec<usize> = xs.iter().map(|&v| bin_value(v, &x_edges)).collect();
        let obs = contingency(&y_bins, &x_bins);
        if obs.len() < 2 || obs[0].len() < 2 {
            tests.push(degenerate(name));
            continue;
        }
        let (chi2, df) = chi_square_of_table(&obs)?;
        let p = chi_square_p_value(chi2, df);
        tests.push(PredictorTest {
            name: name.clone(),
            chi2: Some(chi2),
            df: Some(df),
            p_value: Some(p),
            selected: p < alpha,
        });
    }
    Ok(FeatureSelection {
        target: target.to_string(),
        alpha,
        bins,
        tests,
    })
}
