use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::EncoderConfig;
use crate::error::{Error, Result};
use crate::numerics::{BatchNorm, Dense};
use crate::scalar::Real;

/// Bottleneck Dense, its BatchNorm, and an identity classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Head<T> {
    pub fc: Dense<T>,
    pub bn: BatchNorm<T>,
    pub classifier: Dense<T>,
}

/// All encoder weights. The shared head and the mid branch are single
/// parameter sets used by both streams.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub config: EncoderConfig,
    pub visible_stages: Vec<Dense<T>>,
    pub thermal_stages: Vec<Dense<T>>,
    pub shared_head: Head<T>,
    /// Mid-level branch; the BatchNorm and classifier act on the fused vector.
    pub mid_branch: Option<Head<T>>,
}

/// Whether a named array is optimized or a running-statistics buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    /// Weight of a modality-specific stage (frozen during warm-up).
    Stage,
    Trainable,
    Buffer,
}

/// Gradients with the same layout as [`EncoderParams`]. Buffers stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads<T>(pub EncoderParams<T>);

impl<T: Real> EncoderParams<T> {
    /// Scaled-uniform Dense weights, zero biases, BN scale 1 and shift 0.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stages = || {
            let mut in_dim = config.input_dim;
            let mut out = Vec::with_capacity(config.stage_dims.len());
            for &w in &config.stage_dims {
                out.push(Dense::init(in_dim, w, &mut rng));
                in_dim = w;
            }
            out
        };
        let visible_stages = stages();
        let thermal_stages = stages();
        let last = *config.stage_dims.last().unwrap();
        let shared_head = Head {
            fc: Dense::init(last, config.d, &mut rng),
            bn: BatchNorm::new(config.d),
            classifier: Dense::init(config.d, config.num_classes, &mut rng),
        };
        let mid_branch = config.mfi_enabled.then(|| Head {
            fc: Dense::init(config.tap_dim(), config.d, &mut rng),
            bn: BatchNorm::new(config.fused_dim()),
            classifier: Dense::init(config.fused_dim(), config.num_classes, &mut rng),
        });
        Ok(Self {
            config: config.clone(),
            visible_stages,
            thermal_stages,
            shared_head,
            mid_branch,
        })
    }

    /// Same layout with every array set to zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.for_each_mut(|_, _, values, _| values.iter_mut().for_each(|v| *v = T::zero()));
        out
    }

    /// Visits every named array in a fixed order.
    pub fn for_each<F>(&self, mut f: F)
    where
        F: FnMut(String, (usize, usize), &[T], ParamRole),
    {
        let dense = |f: &mut F, prefix: String, d: &Dense<T>, role: ParamRole| {
            f(format!("{prefix}.weight"), d.weight.shape(), d.weight.values(), role);
            f(format!("{prefix}.bias"), (1, d.bias.len()), &d.bias, role);
        };
        for (i, d) in self.visible_stages.iter().enumerate() {
            dense(&mut f, format!("visible.stage{}", i + 1), d, ParamRole::Stage);
        }
        for (i, d) in self.thermal_stages.iter().enumerate() {
            dense(&mut f, format!("thermal.stage{}", i + 1), d, ParamRole::Stage);
        }
        let head = |f: &mut F, prefix: &str, h: &Head<T>| {
            dense(f, format!("{prefix}.fc"), &h.fc, ParamRole::Trainable);
            let n = h.bn.dim();
            f(format!("{prefix}.bn.gamma"), (1, n), &h.bn.gamma, ParamRole::Trainable);
            f(format!("{prefix}.bn.beta"), (1, n), &h.bn.beta, ParamRole::Trainable);
            f(
                format!("{prefix}.bn.running_mean"),
                (1, n),
                &h.bn.running_mean,
                ParamRole::Buffer,
            );
            f(
                format!("{prefix}.bn.running_var"),
                (1, n),
                &h.bn.running_var,
                ParamRole::Buffer,
            );
            dense(f, format!("{prefix}.classifier"), &h.classifier, ParamRole::Trainable);
        };
        head(&mut f, "head", &self.shared_head);
        if let Some(mid) = &self.mid_branch {
            head(&mut f, "mid", mid);
        }
    }

    /// Visits every named array mutably in the same order as [`Self::for_each`].
    pub fn for_each_mut<F>(&mut self, mut f: F)
    where
        F: FnMut(String, (usize, usize), &mut [T], ParamRole),
    {
        let dense = |f: &mut F, prefix: String, d: &mut Dense<T>, role: ParamRole| {
            let shape = d.weight.shape();
            f(format!("{prefix}.weight"), shape, d.weight.values_mut(), role);
            let n = d.bias.len();
            f(format!("{prefix}.bias"), (1, n), &mut d.bias, role);
        };
        for (i, d) in self.visible_stages.iter_mut().enumerate() {
            dense(&mut f, format!("visible.stage{}", i + 1), d, ParamRole::Stage);
        }
        for (i, d) in self.thermal_stages.iter_mut().enumerate() {
            dense(&mut f, format!("thermal.stage{}", i + 1), d, ParamRole::Stage);
        }
        let head = |f: &mut F, prefix: &str, h: &mut Head<T>| {
            dense(f, format!("{prefix}.fc"), &mut h.fc, ParamRole::Trainable);
            let n = h.bn.dim();
            f(
                format!("{prefix}.bn.gamma"),
                (1, n),
                &mut h.bn.gamma,
                ParamRole::Trainable,
            );
            f(
                format!("{prefix}.bn.beta"),
                (1, n),
                &mut h.bn.beta,
                ParamRole::Trainable,
            );
            f(
                format!("{prefix}.bn.running_mean"),
                (1, n),
                &mut h.bn.running_mean,
                ParamRole::Buffer,
            );
            f(
                format!("{prefix}.bn.running_var"),
                (1, n),
                &mut h.bn.running_var,
                ParamRole::Buffer,
            );
            dense(
                f,
                format!("{prefix}.classifier"),
                &mut h.classifier,
                ParamRole::Trainable,
            );
        };
        head(&mut f, "head", &mut self.shared_head);
        if let Some(mid) = self.mid_branch.as_mut() {
            head(&mut f, "mid", mid);
        }
    }

    /// Trainable values (stage weights included) concatenated in visiting order.
    pub fn flat_trainable(&self) -> Vec<T> {
        let mut out = Vec::new();
        self.for_each(|_, _, values, role| {
            if role != ParamRole::Buffer {
                out.extend_from_slice(values);
            }
        });
        out
    }

    pub fn set_flat_trainable(&mut self, flat: &[T]) -> Result<()> {
        let expected = self.trainable_len();
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "flat encoder parameters",
                expected,
                found: flat.len(),
            });
        }
        let mut offset = 0;
        self.for_each_mut(|_, _, values, role| {
            if role != ParamRole::Buffer {
                values.copy_from_slice(&flat[offset..offset + values.len()]);
                offset += values.len();
            }
        });
        Ok(())
    }

    pub fn trainable_len(&self) -> usize {
        let mut n = 0;
        self.for_each(|_, _, values, role| {
            if role != ParamRole::Buffer {
                n += values.len();
            }
        });
        n
    }

    /// One flag per entry of [`Self::flat_trainable`]: true for stage weights.
    pub fn stage_mask(&self) -> Vec<bool> {
        let mut out = Vec::new();
        self.for_each(|_, _, values, role| match role {
            ParamRole::Stage => out.extend(std::iter::repeat_n(true, values.len())),
            ParamRole::Trainable => out.extend(std::iter::repeat_n(false, values.len())),
            ParamRole::Buffer => {}
        });
        out
    }

    /// Named arrays as `(name, shape, values)`, buffers included.
    pub fn named_arrays(&self) -> Vec<(String, (usize, usize), Vec<T>)> {
        let mut out = Vec::new();
        self.for_each(|name, shape, values, _| out.push((name, shape, values.to_vec())));
        out
    }

    /// Fills every named array from `lookup`; each must exist with the right shape.
    pub fn load_named<F>(&mut self, mut lookup: F) -> Result<()>
    where
        F: FnMut(&str, (usize, usize)) -> Result<Vec<T>>,
    {
        let mut failure = None;
        self.for_each_mut(|name, shape, values, _| {
            if failure.is_some() {
                return;
            }
            match lookup(&name, shape) {
                Ok(v) if v.len() == values.len() => values.copy_from_slice(&v),
                Ok(v) => {
                    failure = Some(Error::Checkpoint(format!(
                        "{name}: expected {} values, found {}",
                        values.len(),
                        v.len()
                    )))
                }
                Err(e) => failure = Some(e),
            }
        });
        failure.map_or(Ok(()), Err)
    }

    pub fn stages(&self, visible: bool) -> &[Dense<T>] {
        if visible {
            &self.visible_stages
        } else {
            &self.thermal_stages
        }
    }
}

impl<T: Real> EncoderGrads<T> {
    pub fn zeros_for(params: &EncoderParams<T>) -> Self {
        Self(params.zeros_like())
    }

    /// Gradient values aligned with [`EncoderParams::flat_trainable`].
    pub fn flat(&self) -> Vec<T> {
        self.0.flat_trainable()
    }

    pub fn params(&self) -> &EncoderParams<T> {
        &self.0
    }
}
