use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::eval::ProtocolResult;

/// Mean loss components over one epoch's batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub learning_rate: f64,
    pub stages_frozen: bool,
    pub batches: usize,
    pub softmax: f64,
    pub backbone: f64,
    pub cross: f64,
    pub intra: f64,
    pub dual: f64,
    pub total: f64,
    pub degenerate_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Present for training runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
    pub encoder: EncoderConfig,
    pub seed: u64,
    pub history: Vec<EpochRecord>,
    pub metrics: Vec<ProtocolResult>,
    /// Left out unless requested so that reports of identical runs are
    /// byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidDataset(format!("{}: {e}", path.display())))
    }

    /// Aligned plain-text rendering of the history and metrics.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if !self.history.is_empty() {
            out.push_str(&history_table(&self.history));
        }
        if !self.metrics.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&metrics_table(&self.metrics));
        }
        out
    }
}

pub fn history_table(history: &[EpochRecord]) -> String {
    let mut out = format!(
        "{:>5} {:>10} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "epoch", "lr", "frozen", "L_softmax", "L_backbone", "L_c_tri", "L_i_tri", "L_d_tri", "L_all"
    );
    for e in history {
        writeln!(
            out,
            "{:>5} {:>10.3e} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            e.epoch,
            e.learning_rate,
            if e.stages_frozen { "yes" } else { "no" },
            e.softmax,
            e.backbone,
            e.cross,
            e.intra,
            e.dual,
            e.total
        )
        .unwrap();
    }
    out
}

pub fn metrics_table(metrics: &[ProtocolResult]) -> String {
    let ranks: Vec<usize> = metrics[0].protocol.ranks_reported.clone();
    let mut out = format!("{:<18} {:>6} {:>6}", "direction", "trials", "single");
    for r in &ranks {
        write!(out, " {:>7}", format!("r={r}")).unwrap();
    }
    out.push_str("     mAP\n");
    for m in metrics {
        write!(
            out,
            "{:<18} {:>6} {:>6}",
            m.protocol.direction(),
            m.protocol.trials,
            if m.protocol.single_shot { "yes" } else { "no" }
        )
        .unwrap();
        for r in &ranks {
            match m.cmc.get(r) {
                Some(v) => write!(out, " {:>6.2}%", 100.0 * v).unwrap(),
                None => write!(out, " {:>7}", "-").unwrap(),
            }
        }
        writeln!(out, " {:>6.2}%", 100.0 * m.map_score).unwrap();
    }
    out
}
