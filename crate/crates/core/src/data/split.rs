use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Partitions identities (not samples) into train and test sets. The train
/// side receives `round(fraction · identities)` identities, clamped so both
/// sides are non-empty.
pub fn split_identity_disjoint<T: Real>(
    dataset: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut ids = dataset.identities();
    if ids.len() < 2 {
        return Err(Error::InsufficientIdentities {
            needed: 2,
            available: ids.len(),
        });
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let train: BTreeSet<usize> = ids[..n_train].iter().copied().collect();
    let test: BTreeSet<usize> = ids[n_train..].iter().copied().collect();
    Ok((dataset.restrict(&train)?, dataset.restrict(&test)?))
}
