//! Fixed set of differentiable layers with hand-written backward passes.
//!
//! Every layer maps a batch `(rows × in)` to `(rows × out)`. `forward` returns a
//! cache holding exactly what the matching `backward` needs; `backward` returns
//! the gradient with respect to the input plus any parameter gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default batch-norm variance floor.
pub const BN_EPSILON: f64 = 1e-5;
/// Default batch-norm running-statistics momentum.
pub const BN_MOMENTUM: f64 = 0.1;
/// Rows whose norm falls below this are mapped to zero by [`l2_normalize_forward`].
pub const L2_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense { in_dim: usize, out_dim: usize },
    Relu,
    BatchNorm { dim: usize, epsilon: f64, momentum: f64 },
    L2Normalize,
}

impl LayerKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LayerKind::Dense { in_dim, out_dim } if in_dim == 0 || out_dim == 0 => {
                Err(Error::InvalidConfig("dense layer dimensions must be at least 1".into()))
            }
            LayerKind::BatchNorm { dim: 0, .. } => {
                Err(Error::InvalidConfig("batch norm dimension must be at least 1".into()))
            }
            LayerKind::BatchNorm { epsilon, .. } if epsilon.is_nan() || epsilon <= 0.0 => {
                Err(Error::InvalidConfig("batch norm epsilon must be positive".into()))
            }
            LayerKind::BatchNorm { momentum, .. } if !(momentum > 0.0 && momentum <= 1.0) => {
                Err(Error::InvalidConfig("batch norm momentum must lie in (0, 1]".into()))
            }
            _ => Ok(()),
        }
    }
}

fn check_cols<T: Real>(input: &Tensor2<T>, expected: usize, context: &'static str) -> Result<()> {
    if input.cols() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found: input.cols(),
        });
    }
    input.ensure_finite(context)
}

fn check_upstream<T: Real>(upstream: &Tensor2<T>, shape: (usize, usize), context: &'static str) -> Result<()> {
    if upstream.shape() != shape {
        let (expected, found) = if upstream.rows() != shape.0 {
            (shape.0, upstream.rows())
        } else {
            (shape.1, upstream.cols())
        };
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}

/// Fully connected layer `y = x·W + b` with `W: (in × out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Tensor2<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    input: Tensor2<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T> {
    pub weight: Tensor2<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn new(weight: Tensor2<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::DimensionMismatch {
                context: "dense bias",
                expected: weight.cols(),
                found: bias.len(),
            });
        }
        Ok(Self { weight, bias })
    }

    /// Uniform initialization in `±sqrt(6 / (fan_in + fan_out))` with zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let values = (0..in_dim * out_dim)
            .map(|_| T::lit(rng.random_range(-bound..bound)))
            .collect();
        Self {
            weight: Tensor2::from_raw(in_dim, out_dim, values),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Tensor2::zeros(in_dim, out_dim),
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, input: &Tensor2<T>) -> Result<(Tensor2<T>, DenseCache<T>)> {
        check_cols(input, self.in_dim(), "dense input")?;
        let mut out = input.matmul(&self.weight)?;
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok((out, DenseCache { input: input.clone() }))
    }

    pub fn backward(&self, cache: &DenseCache<T>, upstream: &Tensor2<T>) -> Result<(Tensor2<T>, DenseGrads<T>)> {
        check_upstream(
            upstream,
            (cache.input.rows(), self.out_dim()),
            "dense upstream gradient",
        )?;
        let input_grad = upstream.matmul(&self.weight.transpose())?;
        let weight = cache.input.transpose().matmul(upstream)?;
        let mut bias = vec![T::zero(); self.out_dim()];
        for i in 0..upstream.rows() {
            for (b, &g) in bias.iter_mut().zip(upstream.row(i)) {
                *b += g;
            }
        }
        Ok((input_grad, DenseGrads { weight, bias }))
    }
}

#[derive(Debug, Clone)]
pub struct ReluCache<T> {
    input: Tensor2<T>,
}

impl<T> ReluCache<T> {
    pub fn input(&self) -> &Tensor2<T> {
        &self.input
    }
}

pub fn relu_forward<T: Real>(input: &Tensor2<T>) -> Result<(Tensor2<T>, ReluCache<T>)> {
    input.ensure_finite("relu input")?;
    let values = input.values().iter().map(|&v| v.max(T::zero())).collect();
    Ok((
        Tensor2::from_raw(input.rows(), input.cols(), values),
        ReluCache { input: input.clone() },
    ))
}

pub fn relu_backward<T: Real>(cache: &ReluCache<T>, upstream: &Tensor2<T>) -> Result<Tensor2<T>> {
    check_upstream(upstream, cache.input.shape(), "relu upstream gradient")?;
    let values = cache
        .input
        .values()
        .iter()
        .zip(upstream.values())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Ok(Tensor2::from_raw(upstream.rows(), upstream.cols(), values))
}

/// Per-feature batch normalization with learnable scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub epsilon: T,
    pub momentum: T,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    x_hat: Tensor2<T>,
    inv_std: Vec<T>,
    mode: Mode,
    batch_stats: Option<(Vec<T>, Vec<T>, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormGrads<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

impl<T: Real> BatchNorm<T> {
    /// Scale 1, shift 0, running mean 0, running variance 1.
    pub fn new(dim: usize) -> Self {
        Self::with_params(dim, T::lit(BN_EPSILON), T::lit(BN_MOMENTUM))
    }

    pub fn with_params(dim: usize, epsilon: T, momentum: T) -> Self {
        Self {
            gamma: vec![T::one(); dim],
            beta: vec![T::zero(); dim],
            running_mean: vec![T::zero(); dim],
            running_var: vec![T::one(); dim],
            epsilon,
            momentum,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes with batch statistics in train mode and running estimates in
    /// eval mode. Does not touch the running estimates; see [`Self::update_running`].
    pub fn forward_stateless(&self, input: &Tensor2<T>, mode: Mode) -> Result<(Tensor2<T>, BatchNormCache<T>)> {
        check_cols(input, self.dim(), "batch norm input")?;
        let (n, d) = input.shape();
        let (mean, var, batch_stats) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::BatchTooSmall(n));
                }
                let (mean, var) = column_moments(input);
                (mean.clone(), var.clone(), Some((mean, var, n)))
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone(), None),
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.epsilon).sqrt()).collect();
        let mut x_hat = Tensor2::zeros(n, d);
        let mut out = Tensor2::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                let xh = (input.get(i, j) - mean[j]) * inv_std[j];
                x_hat.set(i, j, xh);
                out.set(i, j, self.gamma[j] * xh + self.beta[j]);
            }
        }
        Ok((
            out,
            BatchNormCache {
                x_hat,
                inv_std,
                mode,
                batch_stats,
            },
        ))
    }

    /// Folds the batch statistics of a train-mode cache into the running
    /// estimates (unbiased variance). Eval-mode caches are ignored.
    pub fn update_running(&mut self, cache: &BatchNormCache<T>) {
        let Some((mean, var, n)) = &cache.batch_stats else {
            return;
        };
        let nf = T::from_usize(*n).unwrap();
        let unbiased = nf / (nf - T::one());
        let m = self.momentum;
        for j in 0..self.dim() {
            self.running_mean[j] = (T::one() - m) * self.running_mean[j] + m * mean[j];
            self.running_var[j] = (T::one() - m) * self.running_var[j] + m * var[j] * unbiased;
        }
    }

    /// [`Self::forward_stateless`] followed by [`Self::update_running`].
    pub fn forward(&mut self, input: &Tensor2<T>, mode: Mode) -> Result<(Tensor2<T>, BatchNormCache<T>)> {
        let (out, cache) = self.forward_stateless(input, mode)?;
        self.update_running(&cache);
        Ok((out, cache))
    }

    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        upstream: &Tensor2<T>,
    ) -> Result<(Tensor2<T>, BatchNormGrads<T>)> {
        check_upstream(upstream, cache.x_hat.shape(), "batch norm upstream gradient")?;
        let (n, d) = upstream.shape();
        let mut gamma = vec![T::zero(); d];
        let mut beta = vec![T::zero(); d];
        for i in 0..n {
            for j in 0..d {
                let g = upstream.get(i, j);
                gamma[j] += g * cache.x_hat.get(i, j);
                beta[j] += g;
            }
        }
        let mut input_grad = Tensor2::zeros(n, d);
        match cache.mode {
            Mode::Eval => {
                for i in 0..n {
                    for j in 0..d {
                        input_grad.set(i, j, upstream.get(i, j) * self.gamma[j] * cache.inv_std[j]);
                    }
                }
            }
            Mode::Train => {
                // dx = inv_std/n · (n·dx̂ − Σdx̂ − x̂·Σ(dx̂·x̂)), with dx̂ = dy·γ
                let nf = T::from_usize(n).unwrap();
                for j in 0..d {
                    let mut sum_dxh = T::zero();
                    let mut sum_dxh_xh = T::zero();
                    for i in 0..n {
                        let dxh = upstream.get(i, j) * self.gamma[j];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * cache.x_hat.get(i, j);
                    }
                    for i in 0..n {
                        let dxh = upstream.get(i, j) * self.gamma[j];
                        let v = cache.inv_std[j] / nf * (nf * dxh - sum_dxh - cache.x_hat.get(i, j) * sum_dxh_xh);
                        input_grad.set(i, j, v);
                    }
                }
            }
        }
        Ok((input_grad, BatchNormGrads { gamma, beta }))
    }
}

/// Biased per-column mean and variance.
fn column_moments<T: Real>(input: &Tensor2<T>) -> (Vec<T>, Vec<T>) {
    let (n, d) = input.shape();
    let nf = T::from_usize(n).unwrap();
    let mut mean = vec![T::zero(); d];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(input.row(i)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let mut var = vec![T::zero(); d];
    for i in 0..n {
        for j in 0..d {
            let c = input.get(i, j) - mean[j];
            var[j] += c * c;
        }
    }
    var.iter_mut().for_each(|v| *v /= nf);
    (mean, var)
}

#[derive(Debug, Clone)]
pub struct L2Cache<T> {
    output: Tensor2<T>,
    norms: Vec<T>,
}

impl<T> L2Cache<T> {
    /// Number of rows that were below the norm floor and mapped to zero.
    pub fn degenerate_rows(&self) -> usize
    where
        T: Real,
    {
        self.norms.iter().filter(|&&n| n < T::lit(L2_NORM_FLOOR)).count()
    }
}

/// Scales every row to unit Euclidean norm. Rows with norm below
/// [`L2_NORM_FLOOR`] become zero rows and produce a warning.
pub fn l2_normalize_forward<T: Real>(input: &Tensor2<T>) -> Result<(Tensor2<T>, L2Cache<T>)> {
    input.ensure_finite("l2 normalize input")?;
    let norms = input.row_norms();
    let floor = T::lit(L2_NORM_FLOOR);
    let mut out = Tensor2::zeros(input.rows(), input.cols());
    let mut degenerate = 0usize;
    for (i, &norm) in norms.iter().enumerate() {
        if norm < floor {
            degenerate += 1;
            continue;
        }
        for (o, &x) in out.row_mut(i).iter_mut().zip(input.row(i)) {
            *o = x / norm;
        }
    }
    if degenerate > 0 {
        log::warn!("l2 normalize: {degenerate} near-zero row(s) mapped to zero");
    }
    Ok((out.clone(), L2Cache { output: out, norms }))
}

pub fn l2_normalize_backward<T: Real>(cache: &L2Cache<T>, upstream: &Tensor2<T>) -> Result<Tensor2<T>> {
    check_upstream(upstream, cache.output.shape(), "l2 normalize upstream gradient")?;
    let floor = T::lit(L2_NORM_FLOOR);
    let mut grad = Tensor2::zeros(upstream.rows(), upstream.cols());
    for (i, &norm) in cache.norms.iter().enumerate() {
        if norm < floor {
            continue;
        }
        let y = cache.output.row(i);
        let g = upstream.row(i);
        let dot: T = y.iter().zip(g).map(|(&a, &b)| a * b).sum();
        for ((o, &yi), &gi) in grad.row_mut(i).iter_mut().zip(y).zip(g) {
            *o = (gi - yi * dot) / norm;
        }
    }
    Ok(grad)
}

/// Any one of the supported layers together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Dense(Dense<T>),
    Relu,
    BatchNorm(BatchNorm<T>),
    L2Normalize,
}

#[derive(Debug, Clone)]
pub enum LayerCache<T> {
    Dense(DenseCache<T>),
    Relu(ReluCache<T>),
    BatchNorm(BatchNormCache<T>),
    L2Normalize(L2Cache<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamGrads<T> {
    None,
    Dense(DenseGrads<T>),
    BatchNorm(BatchNormGrads<T>),
}

impl<T: Real> Layer<T> {
    /// Fresh layer of the given kind; dense weights drawn from `rng`.
    pub fn init<R: Rng + ?Sized>(kind: LayerKind, rng: &mut R) -> Result<Self> {
        kind.validate()?;
        Ok(match kind {
            LayerKind::Dense { in_dim, out_dim } => Layer::Dense(Dense::init(in_dim, out_dim, rng)),
            LayerKind::Relu => Layer::Relu,
            LayerKind::BatchNorm { dim, epsilon, momentum } => {
                Layer::BatchNorm(BatchNorm::with_params(dim, T::lit(epsilon), T::lit(momentum)))
            }
            LayerKind::L2Normalize => Layer::L2Normalize,
        })
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(d) => LayerKind::Dense {
                in_dim: d.in_dim(),
                out_dim: d.out_dim(),
            },
            Layer::Relu => LayerKind::Relu,
            Layer::BatchNorm(bn) => LayerKind::BatchNorm {
                dim: bn.dim(),
                epsilon: bn.epsilon.as_f64(),
                momentum: bn.momentum.as_f64(),
            },
            Layer::L2Normalize => LayerKind::L2Normalize,
        }
    }

    pub fn forward(&mut self, input: &Tensor2<T>, mode: Mode) -> Result<(Tensor2<T>, LayerCache<T>)> {
        match self {
            Layer::Dense(d) => d.forward(input).map(|(y, c)| (y, LayerCache::Dense(c))),
            Layer::Relu => relu_forward(input).map(|(y, c)| (y, LayerCache::Relu(c))),
            Layer::BatchNorm(bn) => bn.forward(input, mode).map(|(y, c)| (y, LayerCache::BatchNorm(c))),
            Layer::L2Normalize => l2_normalize_forward(input).map(|(y, c)| (y, LayerCache::L2Normalize(c))),
        }
    }

    pub fn backward(&self, cache: &LayerCache<T>, upstream: &Tensor2<T>) -> Result<(Tensor2<T>, ParamGrads<T>)> {
        match (self, cache) {
            (Layer::Dense(d), LayerCache::Dense(c)) => d.backward(c, upstream).map(|(g, p)| (g, ParamGrads::Dense(p))),
            (Layer::Relu, LayerCache::Relu(c)) => relu_backward(c, upstream).map(|g| (g, ParamGrads::None)),
            (Layer::BatchNorm(bn), LayerCache::BatchNorm(c)) => {
                bn.backward(c, upstream).map(|(g, p)| (g, ParamGrads::BatchNorm(p)))
            }
            (Layer::L2Normalize, LayerCache::L2Normalize(c)) => {
                l2_normalize_backward(c, upstream).map(|g| (g, ParamGrads::None))
            }
            (Layer::Dense(_), _) => Err(Error::CacheMismatch("dense")),
            (Layer::Relu, _) => Err(Error::CacheMismatch("relu")),
            (Layer::BatchNorm(_), _) => Err(Error::CacheMismatch("batch norm")),
            (Layer::L2Normalize, _) => Err(Error::CacheMismatch("l2 normalize")),
        }
    }

    /// Trainable parameters flattened in a fixed order (weights then bias, or gamma then beta).
    pub fn flat_params(&self) -> Vec<T> {
        match self {
            Layer::Dense(d) => d.weight.values().iter().chain(&d.bias).copied().collect(),
            Layer::BatchNorm(bn) => bn.gamma.iter().chain(&bn.beta).copied().collect(),
            _ => Vec::new(),
        }
    }

    pub fn set_flat_params(&mut self, flat: &[T]) {
        match self {
            Layer::Dense(d) => {
                let n = d.weight.values().len();
                d.weight.values_mut().copy_from_slice(&flat[..n]);
                d.bias.copy_from_slice(&flat[n..]);
            }
            Layer::BatchNorm(bn) => {
                let n = bn.gamma.len();
                bn.gamma.copy_from_slice(&flat[..n]);
                bn.beta.copy_from_slice(&flat[n..]);
            }
            _ => assert!(flat.is_empty(), "parameter-free layer"),
        }
    }
}

impl<T: Real> ParamGrads<T> {
    pub fn flatten(&self) -> Vec<T> {
        match self {
            ParamGrads::None => Vec::new(),
            ParamGrads::Dense(g) => g.weight.values().iter().chain(&g.bias).copied().collect(),
            ParamGrads::BatchNorm(g) => g.gamma.iter().chain(&g.beta).copied().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor2<f64> {
        Tensor2::from_rows(rows).unwrap()
    }

    #[test]
    fn dense_identity_passes_input_through() {
        let dense = Dense::new(t(&[&[1.0, 0.0], &[0.0, 1.0]]), vec![0.0, 0.0]).unwrap();
        let x = t(&[&[1.0, 2.0]]);
        let (y, cache) = dense.forward(&x).unwrap();
        assert_eq!(y.values(), &[1.0, 2.0]);
        let g = t(&[&[0.3, -0.7]]);
        let (gx, _) = dense.backward(&cache, &g).unwrap();
        assert_eq!(gx.values(), g.values());
    }

    #[test]
    fn relu_forward_and_gate() {
        let (y, cache) = relu_forward(&t(&[&[-1.0, 2.0, 0.0]])).unwrap();
        assert_eq!(y.values(), &[0.0, 2.0, 0.0]);
        let (_, cache2) = relu_forward(&t(&[&[-1.0, 2.0]])).unwrap();
        let g = relu_backward(&cache2, &t(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(g.values(), &[0.0, 1.0]);
        assert!(relu_backward(&cache, &t(&[&[1.0, 1.0]])).is_err());
    }

    #[test]
    fn l2_normalize_three_four_five() {
        let (y, _) = l2_normalize_forward(&t(&[&[3.0, 4.0]])).unwrap();
        assert!((y.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((y.get(0, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn l2_normalize_zero_row_is_zero() {
        let (y, cache) = l2_normalize_forward(&t(&[&[0.0, 0.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(y.row(0), &[0.0, 0.0]);
        assert_eq!(cache.degenerate_rows(), 1);
        let g = l2_normalize_backward(&cache, &t(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        assert_eq!(g.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn batch_norm_train_needs_two_rows() {
        let mut bn = BatchNorm::<f64>::new(2);
        let err = bn.forward(&t(&[&[1.0, 2.0]]), Mode::Train).unwrap_err();
        assert!(matches!(err, Error::BatchTooSmall(1)));
        assert!(bn.forward(&t(&[&[1.0, 2.0]]), Mode::Eval).is_ok());
    }

    #[test]
    fn batch_norm_updates_running_stats_only_in_train() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = t(&[&[1.0], &[3.0]]);
        bn.forward(&x, Mode::Eval).unwrap();
        assert_eq!(bn.running_mean, vec![0.0]);
        bn.forward(&x, Mode::Train).unwrap();
        // mean 2, unbiased var 2
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn batch_norm_train_output_is_standardized() {
        let mut bn = BatchNorm::<f64>::new(2);
        let x = t(&[&[1.0, -4.0], &[2.0, 0.0], &[6.0, 1.0]]);
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        for j in 0..2 {
            let mean: f64 = (0..3).map(|i| y.get(i, j)).sum::<f64>() / 3.0;
            let var: f64 = (0..3).map(|i| (y.get(i, j) - mean).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn layer_dimension_mismatch_and_non_finite() {
        let mut layer = Layer::Dense(Dense::<f64>::zeroed(3, 2));
        assert!(matches!(
            layer.forward(&t(&[&[1.0, 2.0]]), Mode::Train),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = Tensor2::from_raw(1, 3, vec![1.0, f64::NAN, 0.0]);
        assert!(matches!(layer.forward(&bad, Mode::Eval), Err(Error::NonFinite(_))));
    }

    #[test]
    fn layer_cache_mismatch_is_reported() {
        let mut relu = Layer::<f64>::Relu;
        let (_, cache) = relu.forward(&t(&[&[1.0, 2.0]]), Mode::Eval).unwrap();
        let dense = Layer::Dense(Dense::<f64>::zeroed(2, 2));
        assert!(matches!(
            dense.backward(&cache, &t(&[&[1.0, 1.0]])),
            Err(Error::CacheMismatch("dense"))
        ));
    }

    #[test]
    fn layer_kind_validation() {
        assert!(LayerKind::Dense { in_dim: 0, out_dim: 2 }.validate().is_err());
        assert!(LayerKind::BatchNorm {
            dim: 2,
            epsilon: 0.0,
            momentum: 0.1
        }
        .validate()
        .is_err());
        assert!(LayerKind::BatchNorm {
            dim: 2,
            epsilon: 1e-5,
            momentum: 1.5
        }
        .validate()
        .is_err());
        assert!(LayerKind::BatchNorm {
            dim: 2,
            epsilon: 1e-5,
            momentum: 1.0
        }
        .validate()
        .is_ok());
    }
}
