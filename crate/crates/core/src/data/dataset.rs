use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numerics::Tensor2;
use crate::scalar::{all_finite, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub sample_id: usize,
    pub identity: usize,
    pub modality: Modality,
    pub feature: Vec<T>,
}

/// Positions (into [`Dataset::samples`]) of one identity's samples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdentityEntry {
    pub visible: Vec<usize>,
    pub thermal: Vec<usize>,
}

impl IdentityEntry {
    pub fn of(&self, m: Modality) -> &[usize] {
        match m {
            Modality::Visible => &self.visible,
            Modality::Thermal => &self.thermal,
        }
    }

    fn of_mut(&mut self, m: Modality) -> &mut Vec<usize> {
        match m {
            Modality::Visible => &mut self.visible,
            Modality::Thermal => &mut self.thermal,
        }
    }
}

/// Immutable collection of samples with a per-identity index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    dim: usize,
    samples: Vec<Sample<T>>,
    identity_index: BTreeMap<usize, IdentityEntry>,
}

impl<T: Real> Dataset<T> {
    pub fn new(dim: usize, samples: Vec<Sample<T>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 {
            return Err(Error::InvalidDataset("feature dimension must be at least 1".into()));
        }
        let mut ids = BTreeSet::new();
        let mut identity_index: BTreeMap<usize, IdentityEntry> = BTreeMap::new();
        for (pos, s) in samples.iter().enumerate() {
            if s.feature.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "sample {} has {} features, expected {dim}",
                    s.sample_id,
                    s.feature.len()
                )));
            }
            if !all_finite(&s.feature) {
                return Err(Error::InvalidDataset(format!(
                    "sample {} has a non-finite feature",
                    s.sample_id
                )));
            }
            if !ids.insert(s.sample_id) {
                return Err(Error::InvalidDataset(format!("duplicate sample id {}", s.sample_id)));
            }
            identity_index
                .entry(s.identity)
                .or_default()
                .of_mut(s.modality)
                .push(pos);
        }
        Ok(Self {
            dim,
            samples,
            identity_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn identity_index(&self) -> &BTreeMap<usize, IdentityEntry> {
        &self.identity_index
    }

    /// Identities in ascending order.
    pub fn identities(&self) -> Vec<usize> {
        self.identity_index.keys().copied().collect()
    }

    /// Identities with at least one sample in each modality, ascending.
    pub fn eligible_identities(&self) -> Vec<usize> {
        self.identity_index
            .iter()
            .filter(|(_, e)| !e.visible.is_empty() && !e.thermal.is_empty())
            .map(|(&id, _)| id)
            .collect()
    }

    /// Positions of every sample of modality `m`, in file order.
    pub fn positions_of(&self, m: Modality) -> Vec<usize> {
        (0..self.samples.len())
            .filter(|&i| self.samples[i].modality == m)
            .collect()
    }

    /// Feature rows of the samples at `positions`.
    pub fn features(&self, positions: &[usize]) -> Result<Tensor2<T>> {
        if positions.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut values = Vec::with_capacity(positions.len() * self.dim);
        for &p in positions {
            values.extend_from_slice(&self.samples[p].feature);
        }
        Tensor2::new(positions.len(), self.dim, values)
    }

    /// Samples whose identity is in `keep`, in their original order.
    pub fn restrict(&self, keep: &BTreeSet<usize>) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .filter(|s| keep.contains(&s.identity))
            .cloned()
            .collect();
        Self::new(self.dim, samples)
    }
}
