use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::rank_queries;
use crate::data::Dataset;
use crate::encoder::{encode_eval, test_features, EncoderParams};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numerics::Tensor2;
use crate::scalar::Real;

/// Maps raw inputs of one modality to retrieval features.
pub trait Embedder<T: Real> {
    fn embed(&self, x: &Tensor2<T>, modality: Modality) -> Result<Tensor2<T>>;
}

impl<T: Real> Embedder<T> for EncoderParams<T> {
    fn embed(&self, x: &Tensor2<T>, modality: Modality) -> Result<Tensor2<T>> {
        test_features(&encode_eval(self, x, modality)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalProtocol {
    pub query_modality: Modality,
    pub gallery_modality: Modality,
    pub trials: usize,
    /// Gallery holds one random sample per identity in each trial.
    pub single_shot: bool,
    pub ranks_reported: Vec<usize>,
    pub seed: u64,
}

impl EvalProtocol {
    /// One trial over the full gallery of the other modality, CMC at 1, 10, 20.
    pub fn new(query_modality: Modality) -> Self {
        Self {
            query_modality,
            gallery_modality: query_modality.other(),
            trials: 1,
            single_shot: false,
            ranks_reported: vec![1, 10, 20],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.query_modality == self.gallery_modality {
            return Err(Error::InvalidConfig("query and gallery modalities must differ".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.ranks_reported.is_empty() || self.ranks_reported.contains(&0) {
            return Err(Error::InvalidConfig(
                "ranks must be a non-empty list of positive values".into(),
            ));
        }
        Ok(())
    }

    /// `"visible->thermal"` style label.
    pub fn direction(&self) -> String {
        format!("{}->{}", self.query_modality.name(), self.gallery_modality.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub cmc: BTreeMap<usize, f64>,
    pub map_score: f64,
    pub gallery_size: usize,
    pub excluded_queries: usize,
}

/// Metrics averaged over trials, plus each trial's own metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub protocol: EvalProtocol,
    pub cmc: BTreeMap<usize, f64>,
    pub map_score: f64,
    pub queries: usize,
    pub per_trial: Vec<TrialMetrics>,
}

impl ProtocolResult {
    pub fn rank1(&self) -> f64 {
        self.cmc.get(&1).copied().unwrap_or(f64::NAN)
    }
}

/// Queries are every test sample of the query modality; the gallery is the
/// test samples of the gallery modality, cut to one random sample per identity
/// in single-shot mode. Metrics are averaged over trials.
pub fn run_protocol<T: Real, E: Embedder<T> + ?Sized>(
    test: &Dataset<T>,
    embedder: &E,
    protocol: &EvalProtocol,
) -> Result<ProtocolResult> {
    protocol.validate()?;
    let query_pos = test.positions_of(protocol.query_modality);
    let gallery_pos = test.positions_of(protocol.gallery_modality);
    if query_pos.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "test set has no {} samples to query with",
            protocol.query_modality.name()
        )));
    }
    if gallery_pos.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let index = test.identity_index();
    if let Some((&id, _)) = index.iter().find(|(_, e)| e.of(protocol.gallery_modality).is_empty()) {
        return Err(Error::MissingGalleryIdentity(id));
    }

    let label = |positions: &[usize]| -> Vec<usize> { positions.iter().map(|&p| test.samples()[p].identity).collect() };
    let queries = embedder.embed(&test.features(&query_pos)?, protocol.query_modality)?;
    let gallery_all = embedder.embed(&test.features(&gallery_pos)?, protocol.gallery_modality)?;
    let query_ids = label(&query_pos);
    let gallery_ids_all = label(&gallery_pos);
    let row_of: BTreeMap<usize, usize> = gallery_pos.iter().enumerate().map(|(row, &p)| (p, row)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    let mut per_trial = Vec::with_capacity(protocol.trials);
    for _ in 0..protocol.trials {
        let rows: Vec<usize> = if protocol.single_shot {
            index
                .values()
                .map(|e| row_of[e.of(protocol.gallery_modality).choose(&mut rng).unwrap()])
                .collect()
        } else {
            (0..gallery_pos.len()).collect()
        };
        let gallery = gallery_all.select_rows(&rows)?;
        let gallery_ids: Vec<usize> = rows.iter().map(|&r| gallery_ids_all[r]).collect();
        let result = rank_queries(&queries, &query_ids, &gallery, &gallery_ids, &protocol.ranks_reported)?;
        per_trial.push(TrialMetrics {
            cmc: result.cmc,
            map_score: result.map_score,
            gallery_size: rows.len(),
            excluded_queries: result.excluded_queries,
        });
    }

    let n = per_trial.len() as f64;
    let cmc = protocol
        .ranks_reported
        .iter()
        .map(|&r| (r, per_trial.iter().map(|t| t.cmc[&r]).sum::<f64>() / n))
        .collect();
    let map_score = per_trial.iter().map(|t| t.map_score).sum::<f64>() / n;
    Ok(ProtocolResult {
        protocol: protocol.clone(),
        cmc,
        map_score,
        queries: query_pos.len(),
        per_trial,
    })
}
