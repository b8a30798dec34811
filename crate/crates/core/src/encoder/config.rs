use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the mid-level feature is merged with the backbone feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    Sum,
    Cat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    /// Output widths of the modality-specific Dense+ReLU stages.
    #[serde(default = "default_stage_dims")]
    pub stage_dims: Vec<usize>,
    /// 1-based stage whose post-ReLU activation feeds the mid-level branch.
    #[serde(default = "default_tap_stage")]
    pub tap_stage: usize,
    /// Shared bottleneck width, also the mid-branch output width.
    #[serde(default = "default_d")]
    pub d: usize,
    /// Number of identity classes; 0 means "derive from the training data".
    #[serde(default)]
    pub num_classes: usize,
    #[serde(default = "default_fusion")]
    pub fusion: Fusion,
    #[serde(default = "default_true")]
    pub mfi_enabled: bool,
    #[serde(default = "default_true")]
    pub backbone_loss_enabled: bool,
}

fn default_input_dim() -> usize {
    32
}
fn default_stage_dims() -> Vec<usize> {
    vec![64, 64, 64]
}
fn default_tap_stage() -> usize {
    3
}
fn default_d() -> usize {
    1024
}
fn default_fusion() -> Fusion {
    Fusion::Cat
}
fn default_true() -> bool {
    true
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            input_dim: default_input_dim(),
            stage_dims: default_stage_dims(),
            tap_stage: default_tap_stage(),
            d: default_d(),
            num_classes: 0,
            fusion: default_fusion(),
            mfi_enabled: true,
            backbone_loss_enabled: true,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(format!("encoder: {msg}")));
        if self.input_dim == 0 {
            return fail("input_dim must be at least 1");
        }
        if self.stage_dims.is_empty() || self.stage_dims.contains(&0) {
            return fail("stage_dims must be a non-empty list of positive widths");
        }
        if self.tap_stage == 0 || self.tap_stage > self.stage_dims.len() {
            return fail("tap_stage must lie in 1..=len(stage_dims)");
        }
        if self.d == 0 {
            return fail("d must be at least 1");
        }
        if self.num_classes < 2 {
            return fail("num_classes must be at least 2");
        }
        Ok(())
    }

    /// Width of the fused vector: `d` for sum, `2d` for cat.
    pub fn fused_dim(&self) -> usize {
        match self.fusion {
            Fusion::Sum => self.d,
            Fusion::Cat => 2 * self.d,
        }
    }

    /// Width of the tapped stage activation.
    pub fn tap_dim(&self) -> usize {
        self.stage_dims[self.tap_stage - 1]
    }

    /// Width of the vector used for retrieval and metric learning.
    pub fn feature_dim(&self) -> usize {
        if self.mfi_enabled {
            self.fused_dim()
        } else {
            self.d
        }
    }
}
