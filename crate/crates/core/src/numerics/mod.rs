//! Dense kernels, distances, the optimizer and the finite-difference oracle.

mod adam;
mod distance;
mod finite_diff;
mod layers;
mod softmax;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use distance::{euclidean, pairwise_distances, DISTANCE_STABILIZER};
pub use finite_diff::{finite_diff_grad, max_relative_error, relative_error, RELATIVE_ERROR_FLOOR};
pub use layers::{
    l2_normalize_backward, l2_normalize_forward, relu_backward, relu_forward, BatchNorm, BatchNormCache,
    BatchNormGrads, Dense, DenseCache, DenseGrads, L2Cache, Layer, LayerCache, LayerKind, Mode, ParamGrads, ReluCache,
    BN_EPSILON, BN_MOMENTUM, L2_NORM_FLOOR,
};
pub use softmax::softmax_cross_entropy;
pub use tensor::Tensor2;
