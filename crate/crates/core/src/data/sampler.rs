use rand::seq::IndexedRandom;
use rand::Rng;

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::losses::LabeledBatch;
use crate::modality::Modality;
use crate::scalar::Real;

/// Row layout of a PK batch before features are gathered: the visible block
/// (identity-major) followed by the thermal block in the same identity order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PkDraw {
    pub positions: Vec<usize>,
    pub identity: Vec<usize>,
    pub modality: Vec<Modality>,
    pub p: usize,
    pub k: usize,
}

/// Draws `P` eligible identities without replacement, then `K` samples per
/// (identity, modality): without replacement when the pool holds at least
/// `K`, with replacement otherwise.
pub fn sample_pk_indices<T: Real, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    p: usize,
    k: usize,
    rng: &mut R,
) -> Result<PkDraw> {
    if p == 0 || k == 0 {
        return Err(Error::InvalidConfig("P and K must be at least 1".into()));
    }
    let eligible = dataset.eligible_identities();
    if eligible.len() < p {
        return Err(Error::InsufficientIdentities {
            needed: p,
            available: eligible.len(),
        });
    }
    let chosen: Vec<usize> = eligible.choose_multiple(rng, p).copied().collect();
    let index = dataset.identity_index();
    let mut draw = PkDraw {
        positions: Vec::with_capacity(2 * p * k),
        identity: Vec::with_capacity(2 * p * k),
        modality: Vec::with_capacity(2 * p * k),
        p,
        k,
    };
    for m in Modality::BOTH {
        for &id in &chosen {
            let pool = index[&id].of(m);
            if pool.len() >= k {
                draw.positions.extend(pool.choose_multiple(rng, k));
            } else {
                draw.positions.extend((0..k).map(|_| *pool.choose(rng).unwrap()));
            }
            draw.identity.extend(std::iter::repeat_n(id, k));
            draw.modality.extend(std::iter::repeat_n(m, k));
        }
    }
    Ok(draw)
}

/// A PK batch of raw input features.
pub fn sample_pk_batch<T: Real, R: Rng + ?Sized>(
    dataset: &Dataset<T>,
    p: usize,
    k: usize,
    rng: &mut R,
) -> Result<LabeledBatch<T>> {
    let draw = sample_pk_indices(dataset, p, k, rng)?;
    LabeledBatch::new(dataset.features(&draw.positions)?, draw.identity, draw.modality, p, k)
}

/// `⌈samples / (2PK)⌉`.
pub fn batches_per_epoch(samples: usize, p: usize, k: usize) -> usize {
    samples.div_ceil(2 * p * k).max(1)
}
