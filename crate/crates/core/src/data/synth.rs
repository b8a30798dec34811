use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::scalar::Real;

/// How thermal samples are derived from an identity's center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModalityTransform {
    /// Thermal centers equal visible centers.
    Identity,
    /// Seeded random orthogonal matrix plus an offset of the given norm in a
    /// random direction.
    Rotation {
        offset_norm: f64,
    },
    Explicit {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_identities: usize,
    pub per_identity_per_modality: usize,
    pub input_dim: usize,
    pub cluster_std: f64,
    #[serde(default)]
    pub noise_std: f64,
    pub modality_transform: ModalityTransform,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    /// The benchmark corpus: 50 identities, 20 samples per modality, 32 dims,
    /// within-identity spread 0.5, random rotation with a unit-norm offset.
    pub fn reference(seed: u64) -> Self {
        Self {
            num_identities: 50,
            per_identity_per_modality: 20,
            input_dim: 32,
            cluster_std: 0.5,
            noise_std: 0.0,
            modality_transform: ModalityTransform::Rotation { offset_norm: 1.0 },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_identities == 0 || self.per_identity_per_modality == 0 || self.input_dim == 0 {
            return Err(Error::InvalidConfig(
                "synth: identity count, samples per modality and input_dim must be positive".into(),
            ));
        }
        let std_ok = |s: f64| s.is_finite() && s >= 0.0;
        if !std_ok(self.cluster_std) || !std_ok(self.noise_std) {
            return Err(Error::InvalidConfig(
                "synth: standard deviations must be finite and non-negative".into(),
            ));
        }
        match &self.modality_transform {
            ModalityTransform::Identity => {}
            ModalityTransform::Rotation { offset_norm } => {
                if !std_ok(*offset_norm) {
                    return Err(Error::InvalidConfig(
                        "synth: offset_norm must be finite and non-negative".into(),
                    ));
                }
            }
            ModalityTransform::Explicit { matrix, offset } => {
                let d = self.input_dim;
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) || offset.len() != d {
                    return Err(Error::InvalidConfig(format!(
                        "synth: explicit transform must be a {d}x{d} matrix with a {d}-vector offset"
                    )));
                }
                if matrix.iter().flatten().chain(offset).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "synth: explicit transform has non-finite entries".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of R's diagonal folded into Q.
fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = DMatrix::from_row_slice(d, d, &normal_vec(rng, d * d));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Resolves the configured transform to a matrix and an offset.
fn resolve_transform(config: &SynthConfig, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, Vec<f64>) {
    let d = config.input_dim;
    match &config.modality_transform {
        ModalityTransform::Identity => (DMatrix::identity(d, d), vec![0.0; d]),
        ModalityTransform::Rotation { offset_norm } => {
            let q = random_orthogonal(rng, d);
            let dir = normal_vec(rng, d);
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            (q, dir.iter().map(|v| v / norm * offset_norm).collect())
        }
        ModalityTransform::Explicit { matrix, offset } => {
            let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
            (DMatrix::from_row_slice(d, d, &flat), offset.clone())
        }
    }
}

/// Per identity, visible samples are `center + N(0, cluster_std²)` and thermal
/// samples are `M·center + offset + N(0, cluster_std²) + N(0, noise_std²)`,
/// with centers drawn from a standard normal.
pub fn generate_synthetic<T: Real>(config: &SynthConfig) -> Result<Dataset<T>> {
    config.validate()?;
    let d = config.input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (matrix, offset) = resolve_transform(config, &mut rng);
    let mut samples = Vec::with_capacity(2 * config.num_identities * config.per_identity_per_modality);
    for identity in 0..config.num_identities {
        let center = normal_vec(&mut rng, d);
        let moved = &matrix * nalgebra::DVector::from_column_slice(&center);
        for modality in Modality::BOTH {
            for _ in 0..config.per_identity_per_modality {
                let cluster = normal_vec(&mut rng, d);
                let feature: Vec<f64> = match modality {
                    Modality::Visible => (0..d).map(|j| center[j] + config.cluster_std * cluster[j]).collect(),
                    Modality::Thermal => {
                        let noise = normal_vec(&mut rng, d);
                        (0..d)
                            .map(|j| {
                                moved[j] + offset[j] + config.cluster_std * cluster[j] + config.noise_std * noise[j]
                            })
                            .collect()
                    }
                };
                samples.push(Sample {
                    sample_id: samples.len(),
                    identity,
                    modality,
                    feature: feature.into_iter().map(T::lit).collect(),
                });
            }
        }
    }
    Dataset::new(d, samples)
}

/// Centers as generated by [`generate_synthetic`] for the same config.
pub fn synthetic_centers(config: &SynthConfig) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let d = config.input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    resolve_transform(config, &mut rng);
    let mut centers = Vec::with_capacity(config.num_identities);
    for _ in 0..config.num_identities {
        centers.push(normal_vec(&mut rng, d));
        for modality in Modality::BOTH {
            for _ in 0..config.per_identity_per_modality {
                normal_vec(&mut rng, d);
                if modality == Modality::Thermal {
                    normal_vec(&mut rng, d);
                }
            }
        }
    }
    Ok(centers)
}
