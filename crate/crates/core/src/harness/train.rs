use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::report::{EpochRecord, RunReport};
use crate::data::{batches_per_epoch, sample_pk_indices, Dataset};
use crate::encoder::{backward, commit_running_stats, encode_mixed, EncoderParams};
use crate::error::{Error, Result};
use crate::eval::{run_protocol, EvalProtocol, ProtocolResult};
use crate::losses::total_loss;
use crate::numerics::{adam_step, AdamState, Mode};
use crate::scalar::Real;

/// Stream of the sampler's generator; parameter initialization uses stream 0.
const SAMPLER_STREAM: u64 = 1;

/// Dense class indices for the dataset's identities, in ascending identity order.
pub fn class_map<T: Real>(dataset: &Dataset<T>) -> BTreeMap<usize, usize> {
    dataset
        .identities()
        .into_iter()
        .enumerate()
        .map(|(c, id)| (id, c))
        .collect()
}

/// Trains from scratch. See [`train_with`].
pub fn train<T: Real>(dataset: &Dataset<T>, config: &TrainConfig) -> Result<(EncoderParams<T>, RunReport)> {
    train_with(dataset, config, |_, _| {})
}

/// Adam over PK batches with stage freezing and a one-step learning-rate
/// decay. `after_epoch` sees the 0-based epoch index and the parameters at
/// the end of that epoch. Single-threaded and deterministic given the seed.
pub fn train_with<T: Real, F>(
    dataset: &Dataset<T>,
    config: &TrainConfig,
    mut after_epoch: F,
) -> Result<(EncoderParams<T>, RunReport)>
where
    F: FnMut(usize, &EncoderParams<T>),
{
    config.validate()?;
    let classes = class_map(dataset);
    let mut encoder = config.encoder.clone();
    if encoder.num_classes == 0 {
        encoder.num_classes = classes.len();
    } else if encoder.num_classes < classes.len() {
        return Err(Error::InvalidConfig(format!(
            "encoder.num_classes = {} but the training set has {} identities",
            encoder.num_classes,
            classes.len()
        )));
    }
    if dataset.dim() != encoder.input_dim {
        return Err(Error::DimensionMismatch {
            context: "dataset features vs encoder.input_dim",
            expected: encoder.input_dim,
            found: dataset.dim(),
        });
    }

    let mut params = EncoderParams::<T>::init(&encoder, config.seed)?;
    let stage_mask = params.stage_mask();
    let mut flat = params.flat_trainable();
    let mut adam = AdamState::new(flat.len(), T::lit(config.learning_rate))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SAMPLER_STREAM);
    let batches = batches_per_epoch(dataset.len(), config.p, config.k);

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let frozen = epoch < config.freeze_stage_epochs;
        let lr = config.learning_rate_at(epoch);
        adam.learning_rate = T::lit(lr);
        let mut sums = [0.0f64; 6];
        let mut degenerate_rows = 0;
        for b in 0..batches {
            let at = |e: Error| e.context(format!("epoch {} batch {}", epoch + 1, b + 1));
            let draw = sample_pk_indices(dataset, config.p, config.k, &mut rng).map_err(at)?;
            let labels: Vec<usize> = draw.identity.iter().map(|id| classes[id]).collect();
            let x = dataset.features(&draw.positions).map_err(at)?;
            let (features, cache) = encode_mixed(&params, &x, &draw.modality, Mode::Train).map_err(at)?;
            let loss = total_loss(&features, &labels, &draw.modality, config.p, config.k, &config.loss).map_err(at)?;
            let (grads, _) = backward(&params, &cache, &loss.grads).map_err(at)?;
            commit_running_stats(&mut params, &cache);

            let mut g = grads.flat();
            if frozen {
                for (gi, &is_stage) in g.iter_mut().zip(&stage_mask) {
                    if is_stage {
                        *gi = T::zero();
                    }
                }
            }
            adam_step(&mut flat, &g, &mut adam).map_err(at)?;
            params.set_flat_trainable(&flat)?;

            for (s, v) in sums.iter_mut().zip([
                loss.softmax,
                loss.backbone,
                loss.cross,
                loss.intra,
                loss.dual,
                loss.total,
            ]) {
                *s += v.as_f64();
            }
            degenerate_rows += loss.degenerate_rows;
        }
        let n = batches as f64;
        let record = EpochRecord {
            epoch: epoch + 1,
            learning_rate: lr,
            stages_frozen: frozen,
            batches,
            softmax: sums[0] / n,
            backbone: sums[1] / n,
            cross: sums[2] / n,
            intra: sums[3] / n,
            dual: sums[4] / n,
            total: sums[5] / n,
            degenerate_rows,
        };
        log::info!(
            "epoch {}/{}: L_all {:.4} (softmax {:.4}, dual {:.4})",
            record.epoch,
            config.epochs,
            record.total,
            record.softmax,
            record.dual
        );
        history.push(record);
        after_epoch(epoch, &params);
    }

    let report = RunReport {
        train_config: Some(config.clone()),
        encoder,
        seed: config.seed,
        history,
        metrics: Vec::new(),
        wall_clock_seconds: None,
    };
    Ok((params, report))
}

/// Runs a retrieval protocol with the trained encoder.
pub fn evaluate<T: Real>(
    params: &EncoderParams<T>,
    test: &Dataset<T>,
    protocol: &EvalProtocol,
) -> Result<ProtocolResult> {
    if test.dim() != params.config.input_dim {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects {}-dimensional inputs, dataset has {}",
            params.config.input_dim,
            test.dim()
        )));
    }
    run_protocol(test, params, protocol)
}
