use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::losses::LossConfig;

/// Everything that determines a training run. Read from TOML; unknown keys
/// are rejected and missing keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub loss: LossConfig,
    /// Identities per batch.
    #[serde(rename = "P", default = "default_p")]
    pub p: usize,
    /// Samples per (identity, modality) per batch.
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Epochs during which modality-specific stages receive no updates.
    #[serde(default = "default_freeze")]
    pub freeze_stage_epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_decay_factor")]
    pub lr_decay_factor: f64,
    /// First (0-based) epoch trained at the decayed rate.
    #[serde(default = "default_decay_epoch")]
    pub lr_decay_epoch: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_p() -> usize {
    8
}
fn default_k() -> usize {
    4
}
fn default_epochs() -> usize {
    30
}
fn default_freeze() -> usize {
    5
}
fn default_lr() -> f64 {
    1e-4
}
fn default_decay_factor() -> f64 {
    0.1
}
fn default_decay_epoch() -> usize {
    15
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            loss: LossConfig::default(),
            p: default_p(),
            k: default_k(),
            epochs: default_epochs(),
            freeze_stage_epochs: default_freeze(),
            learning_rate: default_lr(),
            lr_decay_factor: default_decay_factor(),
            lr_decay_epoch: default_decay_epoch(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults with the bottleneck and learning rate sized for the reference
    /// synthetic task: `d = 128`, `learning_rate = 1e-2`.
    pub fn reference() -> Self {
        let mut config = Self {
            learning_rate: 1e-2,
            ..Self::default()
        };
        config.encoder.d = 128;
        config
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }

    /// Checks every field; `encoder.num_classes = 0` is accepted as "derive from data".
    pub fn validate(&self) -> Result<()> {
        let mut encoder = self.encoder.clone();
        if encoder.num_classes == 0 {
            encoder.num_classes = 2;
        }
        encoder.validate()?;
        self.loss.validate()?;
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.encoder.mfi_enabled != self.loss.mfi_enabled {
            return fail("encoder.mfi_enabled and loss.mfi_enabled must agree".into());
        }
        if self.encoder.backbone_loss_enabled != self.loss.backbone_loss_enabled {
            return fail("encoder.backbone_loss_enabled and loss.backbone_loss_enabled must agree".into());
        }
        if self.p < 2 || self.k == 0 {
            return fail(format!("need P >= 2 and K >= 1, got P = {}, K = {}", self.p, self.k));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return fail(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            ));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return fail(format!(
                "lr_decay_factor must lie in (0, 1], got {}",
                self.lr_decay_factor
            ));
        }
        if self.freeze_stage_epochs >= self.epochs {
            return fail(format!(
                "freeze_stage_epochs ({}) must be below epochs ({})",
                self.freeze_stage_epochs, self.epochs
            ));
        }
        Ok(())
    }

    /// Learning rate used during the given 0-based epoch.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if epoch >= self.lr_decay_epoch {
            self.learning_rate * self.lr_decay_factor
        } else {
            self.learning_rate
        }
    }

    /// Sets the branch flags consistently on both sub-configs.
    pub fn set_mfi(&mut self, enabled: bool) {
        self.encoder.mfi_enabled = enabled;
        self.loss.mfi_enabled = enabled;
    }
}
