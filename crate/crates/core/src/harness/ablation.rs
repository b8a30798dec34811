use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::TrainConfig;
use super::train::{evaluate, train};
use crate::data::{generate_synthetic, split_identity_disjoint, Dataset, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::EvalProtocol;
use crate::modality::Modality;

/// The four configurations compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// Identity softmax only.
    Baseline,
    /// Softmax plus the dual-modality triplet loss.
    Dmtl,
    /// Mid-level branch, softmax only.
    Mfi,
    /// Mid-level branch plus the dual-modality triplet loss.
    Edfl,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Baseline, Arm::Dmtl, Arm::Mfi, Arm::Edfl];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Baseline => "baseline",
            Arm::Dmtl => "DMTL",
            Arm::Mfi => "MFI",
            Arm::Edfl => "EDFL",
        }
    }

    /// `base` with only the branch and metric-loss flags changed.
    pub fn configure(self, base: &TrainConfig) -> TrainConfig {
        let mut config = base.clone();
        let (mfi, metric) = match self {
            Arm::Baseline => (false, false),
            Arm::Dmtl => (false, true),
            Arm::Mfi => (true, false),
            Arm::Edfl => (true, true),
        };
        config.set_mfi(mfi);
        if !metric {
            config.loss.lambda2 = 0.0;
        }
        config
    }
}

fn default_fraction() -> f64 {
    0.5
}
fn default_query() -> Modality {
    Modality::Visible
}
fn default_trials() -> usize {
    1
}
fn default_ranks() -> Vec<usize> {
    vec![1, 10, 20]
}

/// Evaluation settings of an ablation; the protocol seed follows the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationProtocol {
    #[serde(default = "default_query")]
    pub query_modality: Modality,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub single_shot: bool,
    #[serde(default = "default_ranks")]
    pub ranks_reported: Vec<usize>,
}

impl Default for AblationProtocol {
    fn default() -> Self {
        Self {
            query_modality: default_query(),
            trials: default_trials(),
            single_shot: false,
            ranks_reported: default_ranks(),
        }
    }
}

impl AblationProtocol {
    pub fn for_seed(&self, seed: u64) -> EvalProtocol {
        EvalProtocol {
            query_modality: self.query_modality,
            gallery_modality: self.query_modality.other(),
            trials: self.trials,
            single_shot: self.single_shot,
            ranks_reported: self.ranks_reported.clone(),
            seed,
        }
    }
}

/// Data side of an ablation. For run seed `s` the corpus is generated with
/// `synth.seed + s` and split with seed `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationDataConfig {
    pub synth: SynthConfig,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub protocol: AblationProtocol,
}

impl AblationDataConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.synth.validate()?;
        config.protocol.for_seed(0).validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// `(train, test)` for one run seed.
    pub fn materialize(&self, seed: u64) -> Result<(Dataset<f64>, Dataset<f64>)> {
        let synth = SynthConfig {
            seed: self.synth.seed.wrapping_add(seed),
            ..self.synth.clone()
        };
        let dataset = generate_synthetic(&synth)?;
        split_identity_disjoint(&dataset, self.train_fraction, seed)
    }
}

/// SHA-256 over the sorted train and test identity lists.
pub fn split_hash<T: crate::Real>(train: &Dataset<T>, test: &Dataset<T>) -> String {
    let mut hasher = Sha256::new();
    for (tag, ds) in [("train", train), ("test", test)] {
        hasher.update(tag.as_bytes());
        for id in ds.identities() {
            hasher.update(id.to_le_bytes());
        }
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRun {
    pub arm: Arm,
    pub seed: u64,
    pub split_hash: String,
    pub rank1: f64,
    pub map_score: f64,
    pub cmc: BTreeMap<usize, f64>,
    pub first_epoch_loss: f64,
    pub final_epoch_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub mean_rank1: f64,
    pub mean_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub data: AblationDataConfig,
    pub base: TrainConfig,
    pub seeds: Vec<u64>,
    /// Ordered by arm, then by seed.
    pub runs: Vec<ArmRun>,
    pub summary: Vec<ArmSummary>,
}

impl AblationReport {
    pub fn mean_rank1(&self, arm: Arm) -> f64 {
        self.summary
            .iter()
            .find(|s| s.arm == arm)
            .map_or(f64::NAN, |s| s.mean_rank1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ablation report serializes") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<9}", "arm");
        for s in &self.seeds {
            write!(out, " {:>8}", format!("seed {s}")).unwrap();
        }
        out.push_str("  mean r=1  mean mAP\n");
        for summary in &self.summary {
            write!(out, "{:<9}", summary.arm.name()).unwrap();
            for run in self.runs.iter().filter(|r| r.arm == summary.arm) {
                write!(out, " {:>7.2}%", 100.0 * run.rank1).unwrap();
            }
            writeln!(
                out,
                "  {:>7.2}%  {:>7.2}%",
                100.0 * summary.mean_rank1,
                100.0 * summary.mean_map
            )
            .unwrap();
        }
        out
    }
}

/// Trains and evaluates every arm for every seed. Runs execute in parallel
/// and are collected in (arm, seed) order, so the report does not depend on
/// scheduling.
pub fn run_ablation(data: &AblationDataConfig, base: &TrainConfig, seeds: &[u64]) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("ablation needs at least one seed".into()));
    }
    base.validate()?;
    let splits: Vec<(Dataset<f64>, Dataset<f64>, String)> = seeds
        .par_iter()
        .map(|&s| {
            let (train_set, test_set) = data.materialize(s)?;
            let hash = split_hash(&train_set, &test_set);
            Ok((train_set, test_set, hash))
        })
        .collect::<Result<_>>()?;

    let tasks: Vec<(Arm, usize)> = Arm::ALL
        .iter()
        .flat_map(|&arm| (0..seeds.len()).map(move |i| (arm, i)))
        .collect();
    let runs: Vec<ArmRun> = tasks
        .par_iter()
        .map(|&(arm, i)| {
            let seed = seeds[i];
            let (train_set, test_set, hash) = &splits[i];
            let config = TrainConfig {
                seed,
                ..arm.configure(base)
            };
            let (params, report) =
                train(train_set, &config).map_err(|e| e.context(format!("{} seed {seed}", arm.name())))?;
            let result = evaluate(&params, test_set, &data.protocol.for_seed(seed))?;
            log::info!(
                "{} seed {seed}: rank-1 {:.4}, mAP {:.4}",
                arm.name(),
                result.rank1(),
                result.map_score
            );
            Ok(ArmRun {
                arm,
                seed,
                split_hash: hash.clone(),
                rank1: result.rank1(),
                map_score: result.map_score,
                cmc: result.cmc,
                first_epoch_loss: report.history.first().map_or(f64::NAN, |e| e.total),
                final_epoch_loss: report.history.last().map_or(f64::NAN, |e| e.total),
            })
        })
        .collect::<Result<_>>()?;

    let n = seeds.len() as f64;
    let summary = Arm::ALL
        .iter()
        .map(|&arm| {
            let of_arm = runs.iter().filter(|r| r.arm == arm);
            ArmSummary {
                arm,
                mean_rank1: of_arm.clone().map(|r| r.rank1).sum::<f64>() / n,
                mean_map: of_arm.map(|r| r.map_score).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(AblationReport {
        data: data.clone(),
        base: base.clone(),
        seeds: seeds.to_vec(),
        runs,
        summary,
    })
}
