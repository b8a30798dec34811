//! Two-stream cross-modality metric learning.

pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod harness;
pub mod losses;
pub mod modality;
pub mod numerics;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use modality::Modality;
pub use scalar::Real;

/// Double-precision instantiations used by the harness and the command line.
pub type Matrix = numerics::Tensor2<f64>;
pub type Params = encoder::EncoderParams<f64>;
pub type Corpus = data::Dataset<f64>;
pub type Batch = losses::LabeledBatch<f64>;
