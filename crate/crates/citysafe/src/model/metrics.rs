//! Regression evaluation: mean squared error and coefficient of
//! determination.

use crate::model::ModelError;

/// Returns `(mse, r2)`. A zero-variance target has no meaningful R²; the
/// convention here is 0 with a warning rather than NaN or ±inf.
pub fn evaluate(y_true: &[f64], y_pred: &[f64]) -> Result<(f64, f64), ModelError> {
    if y_true.len() != y_pred.len() {
        return Err(ModelError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(ModelError::TooFewRows { need: 1, got: 0 });
    }
    let n = y_true.len() as f64;
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    let mse = ss_res / n;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = if ss_tot == 0.0 {
        log::warn!("evaluate: zero-variance target, reporting r2 = 0");
        0.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok((mse, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_predictions() {
        let y = [1.0, 2.0, 3.0];
        let (mse, r2) = evaluate(&y, &y).unwrap();
        assert_eq!(mse, 0.0);
        assert_eq!(r2, 1.0);
    }

    #[test]
    fn mean_predictor_scores_zero_r2() {
        let y = [1.0, 2.0, 3.0];
        let preds = [2.0, 2.0, 2.0];
        let (_, r2) = evaluate(&y, &preds).unwrap();
        assert_relative_eq!(r2, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hand_computed_negative_r2() {
        let (mse, r2) = evaluate(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
        assert_relative_eq!(mse, 4.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(r2, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_variance_target_reports_zero() {
        let (mse, r2) = evaluate(&[5.0, 5.0], &[5.0, 5.0]).unwrap();
        assert_eq!(mse, 0.0);
        assert_eq!(r2, 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            evaluate(&[1.0], &[1.0, 2.0]),
            Err(ModelError::LengthMismatch { left: 1, right: 2 })
        ));
        assert!(matches!(evaluate(&[], &[]), Err(ModelError::TooFewRows { .. })));
    }
}
