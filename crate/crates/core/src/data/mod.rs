//! Samples and datasets, the text file format, synthetic two-modality
//! corpora, identity-disjoint splits and the PK batch sampler.

mod dataset;
mod io;
mod sampler;
mod split;
mod synth;

pub use dataset::{Dataset, IdentityEntry, Sample};
pub use io::{format_dataset, load_dataset, parse_dataset, save_dataset};
pub use sampler::{batches_per_epoch, sample_pk_batch, sample_pk_indices, PkDraw};
pub use split::split_identity_disjoint;
pub use synth::{generate_synthetic, synthetic_centers, ModalityTransform, SynthConfig};
