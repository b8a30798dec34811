use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{backward, encode_mixed, EncoderConfig, EncoderParams, Fusion};
use crate::error::Result;
use crate::losses::{
    batch_hard_triplet, cross_modality_triplet, dual_modality_triplet, intra_modality_triplet, total_loss,
    LabeledBatch, LossConfig,
};
use crate::modality::Modality;
use crate::numerics::{
    finite_diff_grad, l2_normalize_backward, l2_normalize_forward, max_relative_error, relu_backward, relu_forward,
    softmax_cross_entropy, BatchNorm, Dense, Mode, Tensor2,
};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Pass threshold on the maximum relative error.
pub const FD_TOLERANCE: f64 = 1e-4;
/// Instances closer than this to a nondifferentiable point are redrawn.
pub const KINK_MARGIN: f64 = 1e-3;
/// Redraws allowed per requested instance before a component is failed.
const MAX_REDRAWS_PER_INSTANCE: usize = 50;

/// Analytic and finite-difference gradients of one random instance.
#[derive(Debug, Clone)]
pub struct GradInstance {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Draws a random instance; `Ok(None)` asks for a redraw (too close to a kink).
pub type Probe = Box<dyn Fn(&mut ChaCha8Rng) -> Result<Option<GradInstance>> + Send + Sync>;

pub struct GradComponent {
    pub name: String,
    pub probe: Probe,
}

impl GradComponent {
    pub fn new<F>(name: impl Into<String>, probe: F) -> Self
    where
        F: Fn(&mut ChaCha8Rng) -> Result<Option<GradInstance>> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            probe: Box::new(probe),
        }
    }

    /// Same component with every analytic gradient multiplied by `factor`.
    pub fn corrupted(self, factor: f64) -> Self {
        let inner = self.probe;
        Self {
            name: self.name,
            probe: Box::new(move |rng| {
                Ok(inner(rng)?.map(|mut inst| {
                    inst.analytic.iter_mut().for_each(|g| *g *= factor);
                    inst
                }))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentResult {
    pub name: String,
    pub instances: usize,
    pub redrawn: usize,
    pub max_relative_error: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub trials: usize,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    pub components: Vec<ComponentResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.components.iter().all(|c| c.passed)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<24} {:>9} {:>8} {:>12}  status\n",
            "component", "instances", "redrawn", "max rel err"
        );
        for c in &self.components {
            write!(
                out,
                "{:<24} {:>9} {:>8} {:>12.3e}  {}",
                c.name,
                c.instances,
                c.redrawn,
                c.max_relative_error,
                if c.passed { "ok" } else { "FAIL" }
            )
            .unwrap();
            if let Some(f) = &c.failure {
                write!(out, " ({f})").unwrap();
            }
            out.push('\n');
        }
        writeln!(
            out,
            "h = {:e}, tolerance = {:e}: {}",
            self.step,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
        .unwrap();
        out
    }
}

fn check_component(component: &GradComponent, index: usize, trials: usize, seed: u64) -> ComponentResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut result = ComponentResult {
        name: component.name.clone(),
        instances: 0,
        redrawn: 0,
        max_relative_error: 0.0,
        passed: false,
        failure: None,
    };
    let budget = trials.saturating_mul(MAX_REDRAWS_PER_INSTANCE);
    while result.instances < trials {
        if result.redrawn > budget {
            result.failure = Some(format!("too many redraws near kinks ({})", result.redrawn));
            return result;
        }
        match (component.probe)(&mut rng) {
            Ok(Some(inst)) => {
                let err = max_relative_error(&inst.analytic, &inst.numeric);
                result.max_relative_error =
                    result
                        .max_relative_error
                        .max(if err.is_nan() { f64::INFINITY } else { err });
                result.instances += 1;
            }
            Ok(None) => result.redrawn += 1,
            Err(e) => {
                result.failure = Some(e.to_string());
                return result;
            }
        }
    }
    result.passed = result.max_relative_error < FD_TOLERANCE;
    result
}

/// Checks every component on `trials` instances each.
pub fn run_gradcheck(components: &[GradComponent], trials: usize, seed: u64) -> GradcheckReport {
    let results = components
        .par_iter()
        .enumerate()
        .map(|(i, c)| check_component(c, i, trials, seed))
        .collect();
    GradcheckReport {
        trials,
        seed,
        step: FD_STEP,
        tolerance: FD_TOLERANCE,
        components: results,
    }
}

/// The full suite over [`default_components`].
pub fn gradcheck(trials: usize, seed: u64) -> GradcheckReport {
    run_gradcheck(&default_components(), trials, seed)
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2<f64> {
    let values = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor2::new(rows, cols, values).expect("finite random values")
}

fn weighted_sum(y: &Tensor2<f64>, w: &Tensor2<f64>) -> f64 {
    y.values().iter().zip(w.values()).map(|(a, b)| a * b).sum()
}

fn numeric<F: FnMut(&[f64]) -> f64>(f: F, x: &[f64]) -> Result<Vec<f64>> {
    finite_diff_grad(f, x, FD_STEP)
}

/// Central differences at `FD_STEP`, or `None` when they disagree with the
/// estimate at twice the step: the instance is too curved (or too close to a
/// kink in parameter space) for the difference quotient to serve as an oracle.
/// Only the numeric side is consulted, so a wrong analytic gradient cannot
/// cause a redraw.
fn conditioned_numeric<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64]) -> Result<Option<Vec<f64>>> {
    let fine = finite_diff_grad(&mut f, x, FD_STEP)?;
    let coarse = finite_diff_grad(&mut f, x, 2.0 * FD_STEP)?;
    Ok((max_relative_error(&fine, &coarse) < FD_TOLERANCE).then_some(fine))
}

fn dense_probe(rng: &mut ChaCha8Rng) -> Result<Option<GradInstance>> {
    let (n, i, o) = (rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..6));
    let x = random_tensor(rng, n, i);
    let layer = Dense::new(random_tensor(rng, i, o), random_tensor(rng, 1, o).into_values())?;
    let w = random_tensor(rng, n, o);
    let (_, cache) = layer.forward(&x)?;
    let (dx, grads) = layer.backward(&cache, &w)?;
    let analytic = [dx.values(), grads.weight.values(), &grads.bias].concat();
    let point = [x.values(), layer.weight.values(), &layer.bias].concat();
    let num = numeric(
        |v| {
            let xx = Tensor2::new(n, i, v[..n * i].to_vec()).unwrap();
            let l = Dense::new(
                Tensor2::new(i, o, v[n * i..n * i + i * o].to_vec()).unwrap(),
                v[n * i + i * o..].to_vec(),
            )
            .unwrap();
            weighted_sum(&l.forward(&xx).unwrap().0, &w)
        },
        &point,
    )?;
    Ok(Some(GradInstance { analytic, numeric: num }))
}

fn relu_probe(rng: &mut ChaCha8Rng) -> Result<Option<GradInstance>> {
    let (n, d) = (rng.random_range(1..5), rng.random_range(1..6));
    let x = random_tensor(rng, n, d);
    if x.values().iter().any(|v| v.abs() < KINK_MARGIN) {
        return Ok(None);
    }
    let w = random_tensor(rng, n, d);
    let (_, cache) = relu_forward(&x)?;
    let analytic = relu_backward(&cache, &w)?.into_values();
    let num = numeric(
        |v| weighted_sum(&relu_forward(&Tensor2::new(n, d, v.to_vec()).unwrap()).unwrap().0, &w),
        x.values(),
    )?;
    Ok(Some(GradInstance { analytic, numeric: num }))
}

fn batchnorm_probe(mode: Mode) -> impl Fn(&mut ChaCha8Rng) -> Result<Option<GradInstance>> {
    move |rng| {
        let (n, d) = (rng.random_range(2..6), rng.random_range(1..5));
        let x = random_tensor(rng, n, d);
        let mut bn = BatchNorm::<f64>::new(d);
        bn.gamma = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
        bn.beta = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        bn.running_mean = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        bn.running_var = (0..d).map(|_| rng.random_range(0.5..1.5)).collect();
        let w = random_tensor(rng, n, d);
        let (_, cache) = bn.forward_stateless(&x, mode)?;
        let (dx, grads) = bn.backward(&cache, &w)?;
        let analytic = [dx.values(), &grads.gamma, &grads.beta].concat();
        let point = [x.values(), &bn.gamma, &bn.beta].concat();
        let num = numeric(
            |v| {
                let mut b = bn.clone();
                b.gamma = v[n * d..n * d + d].to_vec();
                b.beta = v[n * d + d..].to_vec();
                let xx = Tensor2::new(n, d, v[..n * d].to_vec()).unwrap();
                weighted_sum(&b.forward_stateless(&xx, mode).unwrap().0, &w)
            },
            &point,
        )?;
        Ok(Some(GradInstance { analytic, numeric: num }))
    }
}

fn l2_probe(rng: &mut ChaCha8Rng) -> Result<Option<GradInstance>> {
    let (n, d) = (rng.random_range(1..5), rng.random_range(1..6));
    let x = random_tensor(rng, n, d);
    if x.row_norms().iter().any(|&r| r < KINK_MARGIN) {
        return Ok(None);
    }
    let w = random_tensor(rng, n, d);
    let (_, cache) = l2_normalize_forward(&x)?;
    let analytic = l2_normalize_backward(&cache, &w)?.into_values();
    let num = numeric(
        |v| {
            weighted_sum(
                &l2_normalize_forward(&Tensor2::new(n, d, v.to_vec()).unwrap())
                    .unwrap()
                    .0,
                &w,
            )
        },
        x.values(),
    )?;
    Ok(Some(GradInstance { analytic, numeric: num }))
}

fn softmax_probe(rng: &mut ChaCha8Rng) -> Result<Option<GradInstance>> {
    let (n, c) = (rng.random_range(1..5), rng.random_range(2..6));
    let logits = random_tensor(rng, n, c).scale(3.0);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let (_, grad) = softmax_cross_entropy(&logits, &labels)?;
    let num = numeric(
        |v| {
            softmax_cross_entropy(&Tensor2::new(n, c, v.to_vec()).unwrap(), &labels)
                .unwrap()
                .0
        },
        logits.values(),
    )?;
    Ok(Some(GradInstance {
        analytic: grad.into_values(),
        numeric: num,
    }))
}

fn random_pk_labels(rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<Modality>, usize, usize) {
    // every PK shape with at most 8 rows
    let (p, k) = [(2, 1), (2, 2), (3, 1), (4, 1)][rng.random_range(0..4)];
    let mut ids = Vec::new();
    let mut mods = Vec::new();
    for m in Modality::BOTH {
        for id in 0..p {
            ids.extend(std::iter::repeat_n(id, k));
            mods.extend(std::iter::repeat_n(m, k));
        }
    }
    (ids, mods, p, k)
}

fn random_batch(rng: &mut ChaCha8Rng) -> Result<LabeledBatch<f64>> {
    let (ids, mods, p, k) = random_pk_labels(rng);
    let d = rng.random_range(2..5);
    LabeledBatch::new(random_tensor(rng, ids.len(), d), ids, mods, p, k)
}

const RHO: f64 = 0.5;

fn triplet_probe<F>(loss: F) -> impl Fn(&mut ChaCha8Rng) -> Result<Option<GradInstance>>
where
    F: Fn(&LabeledBatch<f64>) -> Result<(f64, Tensor2<f64>, f64)>,
{
    move |rng| {
        let batch = random_batch(rng)?;
        let (_, grad, kink) = loss(&batch)?;
        if kink < KINK_MARGIN {
            return Ok(None);
        }
        let (n, d) = batch.features().shape();
        let num = numeric(
            |v| {
                loss(&batch.with_features(Tensor2::new(n, d, v.to_vec()).unwrap()).unwrap())
                    .unwrap()
                    .0
            },
            batch.features().values(),
        )?;
        Ok(Some(GradInstance {
            analytic: grad.into_values(),
            numeric: num,
        }))
    }
}

fn full_model_probe(fusion: Fusion, mfi: bool) -> impl Fn(&mut ChaCha8Rng) -> Result<Option<GradInstance>> {
    move |rng| {
        let (ids, mods, p, k) = random_pk_labels(rng);
        let config = EncoderConfig {
            input_dim: rng.random_range(2..9),
            stage_dims: (0..rng.random_range(1..4)).map(|_| rng.random_range(2..9)).collect(),
            tap_stage: 1,
            d: rng.random_range(2..9),
            num_classes: p,
            fusion,
            mfi_enabled: mfi,
            backbone_loss_enabled: rng.random_bool(0.5),
        };
        let config = EncoderConfig {
            tap_stage: rng.random_range(1..=config.stage_dims.len()),
            ..config
        };
        let grid = [0.0, 0.1, 1.0, 2.0, 5.0];
        let loss_config = LossConfig {
            rho: RHO,
            lambda1: grid[rng.random_range(0..grid.len())],
            lambda2: grid[rng.random_range(1..grid.len())],
            mfi_enabled: mfi,
            backbone_loss_enabled: config.backbone_loss_enabled,
        };
        let params = EncoderParams::<f64>::init(&config, rng.random())?;
        let x = random_tensor(rng, ids.len(), config.input_dim);
        let (features, cache) = encode_mixed(&params, &x, &mods, Mode::Train)?;
        let source_norm = features
            .metric_source()
            .row_norms()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if cache.relu_margin() < KINK_MARGIN || source_norm < KINK_MARGIN {
            return Ok(None);
        }
        let out = total_loss(&features, &ids, &mods, p, k, &loss_config)?;
        if out.kink_margin < KINK_MARGIN {
            return Ok(None);
        }
        let (grads, _) = backward(&params, &cache, &out.grads)?;
        let num = conditioned_numeric(
            |v| {
                let mut q = params.clone();
                q.set_flat_trainable(v).unwrap();
                let (f, _) = encode_mixed(&q, &x, &mods, Mode::Train).unwrap();
                total_loss(&f, &ids, &mods, p, k, &loss_config).unwrap().total
            },
            &params.flat_trainable(),
        )?;
        Ok(num.map(|numeric| GradInstance {
            analytic: grads.flat(),
            numeric,
        }))
    }
}

/// Every layer backward, every loss, and the full two-branch model.
pub fn default_components() -> Vec<GradComponent> {
    vec![
        GradComponent::new("dense", dense_probe),
        GradComponent::new("relu", relu_probe),
        GradComponent::new("batchnorm_train", batchnorm_probe(Mode::Train)),
        GradComponent::new("batchnorm_eval", batchnorm_probe(Mode::Eval)),
        GradComponent::new("l2_normalize", l2_probe),
        GradComponent::new("softmax_cross_entropy", softmax_probe),
        GradComponent::new(
            "batch_hard_triplet",
            triplet_probe(|b| {
                let o = batch_hard_triplet(b.features(), b.identity(), RHO)?;
                Ok((o.loss, o.grad, o.kink_margin))
            }),
        ),
        GradComponent::new(
            "cross_modality_triplet",
            triplet_probe(|b| {
                let o = cross_modality_triplet(b, RHO)?.total;
                Ok((o.loss, o.grad, o.kink_margin))
            }),
        ),
        GradComponent::new(
            "intra_modality_triplet",
            triplet_probe(|b| {
                let o = intra_modality_triplet(b, RHO)?.total;
                Ok((o.loss, o.grad, o.kink_margin))
            }),
        ),
        GradComponent::new(
            "dual_modality_triplet",
            triplet_probe(|b| {
                let o = dual_modality_triplet(b, RHO, 0.1)?;
                Ok((o.loss, o.grad, o.kink_margin))
            }),
        ),
        GradComponent::new("full_model_cat", full_model_probe(Fusion::Cat, true)),
        GradComponent::new("full_model_sum", full_model_probe(Fusion::Sum, true)),
        GradComponent::new("full_model_no_mfi", full_model_probe(Fusion::Cat, false)),
    ]
}
