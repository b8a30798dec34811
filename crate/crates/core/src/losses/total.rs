use serde::{Deserialize, Serialize};

use super::batch::LabeledBatch;
use super::triplet::{dual_modality_triplet, DualOutput};
use crate::encoder::{FeatureBatch, FeatureGrads};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numerics::{l2_normalize_backward, l2_normalize_forward, softmax_cross_entropy};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    /// Triplet margin.
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Weight of the intra-modality term inside the dual-modality loss.
    #[serde(default = "default_lambda1")]
    pub lambda1: f64,
    /// Weight of the dual-modality loss in the final objective.
    #[serde(default = "default_lambda2")]
    pub lambda2: f64,
    #[serde(default = "default_true")]
    pub mfi_enabled: bool,
    #[serde(default = "default_true")]
    pub backbone_loss_enabled: bool,
}

fn default_rho() -> f64 {
    0.5
}
fn default_lambda1() -> f64 {
    0.1
}
fn default_lambda2() -> f64 {
    2.0
}
fn default_true() -> bool {
    true
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            rho: default_rho(),
            lambda1: default_lambda1(),
            lambda2: default_lambda2(),
            mfi_enabled: true,
            backbone_loss_enabled: true,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.rho) {
            return Err(Error::InvalidConfig("loss: rho must be finite and non-negative".into()));
        }
        if !ok(self.lambda1) || !ok(self.lambda2) {
            return Err(Error::InvalidConfig(
                "loss: lambda1 and lambda2 must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Every term of the final objective plus gradients for the encoder outputs.
#[derive(Debug, Clone)]
pub struct TotalLoss<T> {
    /// Identity cross-entropy on the retrieval branch's logits.
    pub softmax: T,
    /// Cross-entropy on the backbone logits when the skip branch is active and
    /// the backbone loss is enabled; zero otherwise.
    pub backbone: T,
    pub cross: T,
    pub intra: T,
    pub dual: T,
    pub total: T,
    pub grads: FeatureGrads<T>,
    pub kink_margin: T,
    /// Rows whose metric feature was too small to normalize.
    pub degenerate_rows: usize,
}

/// `L_all = L_softmax + λ2·L_d (+ L_backbone)`. Triplet terms see the
/// L2-normalized retrieval feature; normalization is differentiated through.
pub fn total_loss<T: Real>(
    features: &FeatureBatch<T>,
    identity: &[usize],
    modality: &[Modality],
    p: usize,
    k: usize,
    config: &LossConfig,
) -> Result<TotalLoss<T>> {
    config.validate()?;
    if config.mfi_enabled != features.mid.is_some() {
        return Err(Error::InvalidConfig(format!(
            "loss mfi_enabled = {} but encoder outputs {} a mid-level branch",
            config.mfi_enabled,
            if features.mid.is_some() { "include" } else { "lack" }
        )));
    }
    let (normed, l2_cache) = l2_normalize_forward(features.metric_source())?;
    let batch = LabeledBatch::new(normed, identity.to_vec(), modality.to_vec(), p, k)?;
    let lambda1 = T::lit(config.lambda1);
    let lambda2 = T::lit(config.lambda2);
    let DualOutput {
        cross,
        intra,
        loss: dual,
        grad: dual_grad,
        kink_margin,
    } = dual_modality_triplet(&batch, T::lit(config.rho), lambda1)?;
    let metric_grad = l2_normalize_backward(&l2_cache, &dual_grad.scale(lambda2))?;

    let mut grads = FeatureGrads::default();
    let (softmax, backbone) = match &features.mid {
        Some(mid) => {
            let (softmax, g_skip) = softmax_cross_entropy(&mid.logits_skip, identity)?;
            grads.logits_skip = Some(g_skip);
            grads.v_fused_post = Some(metric_grad);
            let backbone = if config.backbone_loss_enabled {
                let (l, g) = softmax_cross_entropy(&features.logits_backbone, identity)?;
                grads.logits_backbone = Some(g);
                l
            } else {
                T::zero()
            };
            (softmax, backbone)
        }
        None => {
            let (softmax, g) = softmax_cross_entropy(&features.logits_backbone, identity)?;
            grads.logits_backbone = Some(g);
            grads.v_post = Some(metric_grad);
            (softmax, T::zero())
        }
    };
    Ok(TotalLoss {
        softmax,
        backbone,
        cross: cross.total.loss,
        intra: intra.total.loss,
        dual,
        total: softmax + backbone + lambda2 * dual,
        grads,
        kink_margin,
        degenerate_rows: l2_cache.degenerate_rows(),
    })
}
