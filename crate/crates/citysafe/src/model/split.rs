//! Seeded train/test splitting.

use crate::model::{Design, ModelError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shuffles the rows with a seeded RNG and sends the first
/// `ceil(n * test_fraction)` of the shuffled order to the test set, the
/// rest to training. The two parts are disjoint and cover every row.
pub fn train_test_split(
    design: &Design,
    test_fraction: f64,
    seed: u64,
) -> Result<(Design, Design), ModelError> {
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(ModelError::InvalidParameter(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = design.len();
    if n < 2 {
        return Err(ModelError::TooFewRows { need: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_test = (n as f64 * test_fraction).ceil() as usize;
    let take = |indices: &[usize]| Design {
        feature_names: design.feature_names.clone(),
        target_name: design.target_name.clone(),
        rows: indices.iter().map(|&i| design.rows[i].clone()).collect(),
        y: indices.iter().map(|&i| design.y[i]).collect(),
        row_ids: indices.iter().map(|&i| design.row_ids[i].clone()).collect(),
    };
    Ok((take(&order[n_test..]), take(&order[..n_test])))
}
