use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numerics::Tensor2;
use crate::scalar::Real;

/// A PK batch: `P` identities, `K` rows per (identity, modality), `2·P·K` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch<T> {
    features: Tensor2<T>,
    identity: Vec<usize>,
    modality: Vec<Modality>,
    p: usize,
    k: usize,
}

impl<T: Real> LabeledBatch<T> {
    pub fn new(
        features: Tensor2<T>,
        identity: Vec<usize>,
        modality: Vec<Modality>,
        p: usize,
        k: usize,
    ) -> Result<Self> {
        check_layout(&identity, &modality, p, k)?;
        if features.rows() != identity.len() {
            return Err(Error::DimensionMismatch {
                context: "batch features",
                expected: identity.len(),
                found: features.rows(),
            });
        }
        Ok(Self {
            features,
            identity,
            modality,
            p,
            k,
        })
    }

    pub fn features(&self) -> &Tensor2<T> {
        &self.features
    }

    pub fn identity(&self) -> &[usize] {
        &self.identity
    }

    pub fn modality(&self) -> &[Modality] {
        &self.modality
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rows_of(&self, m: Modality) -> Vec<usize> {
        (0..self.modality.len()).filter(|&i| self.modality[i] == m).collect()
    }

    /// Same labels with new feature rows.
    pub fn with_features(&self, features: Tensor2<T>) -> Result<Self> {
        Self::new(features, self.identity.clone(), self.modality.clone(), self.p, self.k)
    }

    /// Every modality tag flipped.
    pub fn swap_modalities(&self) -> Self {
        Self {
            modality: self.modality.iter().map(|m| m.other()).collect(),
            ..self.clone()
        }
    }
}

/// Checks the PK invariants on label vectors alone.
pub fn check_layout(identity: &[usize], modality: &[Modality], p: usize, k: usize) -> Result<()> {
    if p == 0 || k == 0 {
        return Err(Error::InvalidBatch("P and K must be at least 1".into()));
    }
    if identity.len() != modality.len() {
        return Err(Error::InvalidBatch(format!(
            "{} identity labels but {} modality tags",
            identity.len(),
            modality.len()
        )));
    }
    if identity.len() != 2 * p * k {
        return Err(Error::InvalidBatch(format!(
            "expected 2·P·K = {} rows, found {}",
            2 * p * k,
            identity.len()
        )));
    }
    let mut counts: BTreeMap<usize, [usize; 2]> = BTreeMap::new();
    for (&id, &m) in identity.iter().zip(modality) {
        counts.entry(id).or_default()[m as usize] += 1;
    }
    if counts.len() != p {
        return Err(Error::InvalidBatch(format!(
            "expected {p} distinct identities, found {}",
            counts.len()
        )));
    }
    if let Some((id, c)) = counts.iter().find(|(_, c)| c[0] != k || c[1] != k) {
        return Err(Error::InvalidBatch(format!(
            "identity {id} has {} visible and {} thermal rows, expected {k} each",
            c[0], c[1]
        )));
    }
    Ok(())
}
