use super::config::{EncoderConfig, Fusion};
use super::params::{EncoderGrads, EncoderParams, Head};
use crate::error::{Error, Result};
use crate::modality::Modality;
use crate::numerics::{
    l2_normalize_forward, relu_backward, relu_forward, BatchNormCache, Dense, DenseCache, DenseGrads, Mode, ReluCache,
    Tensor2,
};
use crate::scalar::Real;

/// Outputs of the skip branch for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MidFeatures<T> {
    pub v_mid: Tensor2<T>,
    pub v_fused: Tensor2<T>,
    pub v_fused_post: Tensor2<T>,
    pub logits_skip: Tensor2<T>,
}

/// Encoder outputs for a batch, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch<T> {
    /// Backbone feature before the shared BatchNorm.
    pub v_pre: Tensor2<T>,
    /// Backbone feature after the shared BatchNorm.
    pub v_post: Tensor2<T>,
    pub logits_backbone: Tensor2<T>,
    /// Present only when the mid-level branch is enabled.
    pub mid: Option<MidFeatures<T>>,
}

/// Encoder outputs for a single sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle<T> {
    pub v_pre: Vec<T>,
    pub v_post: Vec<T>,
    pub logits_backbone: Vec<T>,
    pub v_mid: Option<Vec<T>>,
    pub v_fused: Option<Vec<T>>,
    pub v_fused_post: Option<Vec<T>>,
    pub logits_skip: Option<Vec<T>>,
}

impl<T: Real> FeatureBatch<T> {
    pub fn rows(&self) -> usize {
        self.v_post.rows()
    }

    pub fn bundle(&self, i: usize) -> FeatureBundle<T> {
        let mid = self.mid.as_ref();
        FeatureBundle {
            v_pre: self.v_pre.row(i).to_vec(),
            v_post: self.v_post.row(i).to_vec(),
            logits_backbone: self.logits_backbone.row(i).to_vec(),
            v_mid: mid.map(|m| m.v_mid.row(i).to_vec()),
            v_fused: mid.map(|m| m.v_fused.row(i).to_vec()),
            v_fused_post: mid.map(|m| m.v_fused_post.row(i).to_vec()),
            logits_skip: mid.map(|m| m.logits_skip.row(i).to_vec()),
        }
    }

    /// The un-normalized retrieval feature: skip-branch output when present,
    /// backbone post-BN feature otherwise.
    pub fn metric_source(&self) -> &Tensor2<T> {
        match &self.mid {
            Some(m) => &m.v_fused_post,
            None => &self.v_post,
        }
    }
}

/// Upstream gradients for whichever encoder outputs a loss consumed.
#[derive(Debug, Clone, Default)]
pub struct FeatureGrads<T> {
    pub v_post: Option<Tensor2<T>>,
    pub logits_backbone: Option<Tensor2<T>>,
    pub v_fused_post: Option<Tensor2<T>>,
    pub logits_skip: Option<Tensor2<T>>,
}

/// `sum`: elementwise addition; `cat`: `[v_mid | v_pre]`.
pub fn fuse<T: Real>(v_mid: &[T], v_pre: &[T], mode: Fusion) -> Result<Vec<T>> {
    match mode {
        Fusion::Sum => {
            if v_mid.len() != v_pre.len() {
                return Err(Error::DimensionMismatch {
                    context: "sum fusion",
                    expected: v_mid.len(),
                    found: v_pre.len(),
                });
            }
            Ok(v_mid.iter().zip(v_pre).map(|(&a, &b)| a + b).collect())
        }
        Fusion::Cat => Ok(v_mid.iter().chain(v_pre).copied().collect()),
    }
}

fn fuse_batch<T: Real>(v_mid: &Tensor2<T>, v_pre: &Tensor2<T>, mode: Fusion) -> Result<Tensor2<T>> {
    match mode {
        Fusion::Sum => v_mid.add(v_pre),
        Fusion::Cat => Tensor2::hcat(v_mid, v_pre),
    }
}

/// L2-normalized retrieval vector of one sample: the skip-branch output when
/// the mid-level branch is enabled, the backbone post-BN feature otherwise.
pub fn test_feature<T: Real>(bundle: &FeatureBundle<T>, config: &EncoderConfig) -> Vec<T> {
    let source = match (&bundle.v_fused_post, config.mfi_enabled) {
        (Some(v), true) => v,
        _ => &bundle.v_post,
    };
    let row = Tensor2::from_raw(1, source.len(), source.clone());
    let (normed, _) = l2_normalize_forward(&row).expect("encoder outputs are finite");
    normed.into_values()
}

/// Batched [`test_feature`]: one L2-normalized row per sample.
pub fn test_features<T: Real>(batch: &FeatureBatch<T>) -> Result<Tensor2<T>> {
    l2_normalize_forward(batch.metric_source()).map(|(t, _)| t)
}

#[derive(Debug, Clone)]
struct StreamCache<T> {
    rows: Vec<usize>,
    visible: bool,
    layers: Vec<(DenseCache<T>, ReluCache<T>)>,
}

#[derive(Debug, Clone)]
struct HeadCache<T> {
    fc: DenseCache<T>,
    bn: BatchNormCache<T>,
    classifier: DenseCache<T>,
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct EncoderCache<T> {
    streams: Vec<StreamCache<T>>,
    head: HeadCache<T>,
    mid: Option<HeadCache<T>>,
    fusion: Fusion,
    rows: usize,
    d: usize,
}

impl<T: Real> EncoderCache<T> {
    /// Smallest |pre-activation| over every ReLU in the pass; distance to the
    /// nearest nondifferentiable point.
    pub fn relu_margin(&self) -> T {
        self.streams
            .iter()
            .flat_map(|s| s.layers.iter())
            .flat_map(|(_, relu)| relu.input().values().iter())
            .fold(T::infinity(), |m, &v| m.min(v.abs()))
    }
}

/// Pre-BN feature, post-BN feature, logits and the cache of one head pass.
type HeadPass<T> = (Tensor2<T>, Tensor2<T>, Tensor2<T>, HeadCache<T>);

fn forward_head<T: Real>(head: &Head<T>, input: &Tensor2<T>, mode: Mode) -> Result<HeadPass<T>> {
    let (pre, fc) = head.fc.forward(input)?;
    let (post, bn) = head.bn.forward_stateless(&pre, mode)?;
    let (logits, classifier) = head.classifier.forward(&post)?;
    Ok((pre, post, logits, HeadCache { fc, bn, classifier }))
}

/// Runs a batch whose rows may come from either modality. Each row passes
/// through its own modality's stages; the shared head and mid branch then see
/// the whole batch, so train-mode BatchNorm statistics span both modalities.
///
/// Does not modify `params`; call [`commit_running_stats`] after a train-mode pass.
pub fn encode_mixed<T: Real>(
    params: &EncoderParams<T>,
    x: &Tensor2<T>,
    modalities: &[Modality],
    mode: Mode,
) -> Result<(FeatureBatch<T>, EncoderCache<T>)> {
    let config = &params.config;
    if x.cols() != config.input_dim {
        return Err(Error::DimensionMismatch {
            context: "encoder input",
            expected: config.input_dim,
            found: x.cols(),
        });
    }
    if modalities.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            context: "encoder modality tags",
            expected: x.rows(),
            found: modalities.len(),
        });
    }
    x.ensure_finite("encoder input")?;
    if mode == Mode::Train && x.rows() < 2 {
        return Err(Error::BatchTooSmall(x.rows()));
    }

    let last_dim = *config.stage_dims.last().unwrap();
    let tap_index = config.tap_stage - 1;
    let mut stage_out = Tensor2::zeros(x.rows(), last_dim);
    let mut tap = Tensor2::zeros(x.rows(), config.tap_dim());
    let mut streams = Vec::with_capacity(2);
    for modality in Modality::BOTH {
        let rows: Vec<usize> = (0..x.rows()).filter(|&i| modalities[i] == modality).collect();
        if rows.is_empty() {
            continue;
        }
        let visible = modality == Modality::Visible;
        let mut h = x.select_rows(&rows)?;
        let mut layers = Vec::with_capacity(config.stage_dims.len());
        for (s, dense) in params.stages(visible).iter().enumerate() {
            let (z, dc) = dense.forward(&h)?;
            let (a, rc) = relu_forward(&z)?;
            if s == tap_index {
                tap.scatter_rows(&rows, &a);
            }
            layers.push((dc, rc));
            h = a;
        }
        stage_out.scatter_rows(&rows, &h);
        streams.push(StreamCache { rows, visible, layers });
    }

    let (v_pre, v_post, logits_backbone, head) = forward_head(&params.shared_head, &stage_out, mode)?;

    let (mid, mid_cache) = match &params.mid_branch {
        Some(branch) => {
            let (v_mid, fc) = branch.fc.forward(&tap)?;
            let v_fused = fuse_batch(&v_mid, &v_pre, config.fusion)?;
            let (v_fused_post, bn) = branch.bn.forward_stateless(&v_fused, mode)?;
            let (logits_skip, classifier) = branch.classifier.forward(&v_fused_post)?;
            (
                Some(MidFeatures {
                    v_mid,
                    v_fused,
                    v_fused_post,
                    logits_skip,
                }),
                Some(HeadCache { fc, bn, classifier }),
            )
        }
        None => (None, None),
    };

    Ok((
        FeatureBatch {
            v_pre,
            v_post,
            logits_backbone,
            mid,
        },
        EncoderCache {
            streams,
            head,
            mid: mid_cache,
            fusion: config.fusion,
            rows: x.rows(),
            d: config.d,
        },
    ))
}

/// Single-modality encode. Train mode also updates BatchNorm running statistics.
pub fn encode<T: Real>(
    params: &mut EncoderParams<T>,
    x: &Tensor2<T>,
    modality: Modality,
    mode: Mode,
) -> Result<(FeatureBatch<T>, EncoderCache<T>)> {
    let tags = vec![modality; x.rows()];
    let (features, cache) = encode_mixed(params, x, &tags, mode)?;
    commit_running_stats(params, &cache);
    Ok((features, cache))
}

/// Eval-mode encode against read-only parameters.
pub fn encode_eval<T: Real>(params: &EncoderParams<T>, x: &Tensor2<T>, modality: Modality) -> Result<FeatureBatch<T>> {
    let tags = vec![modality; x.rows()];
    encode_mixed(params, x, &tags, Mode::Eval).map(|(f, _)| f)
}

/// Folds the batch statistics recorded in a train-mode cache into the running estimates.
pub fn commit_running_stats<T: Real>(params: &mut EncoderParams<T>, cache: &EncoderCache<T>) {
    params.shared_head.bn.update_running(&cache.head.bn);
    if let (Some(branch), Some(mc)) = (params.mid_branch.as_mut(), cache.mid.as_ref()) {
        branch.bn.update_running(&mc.bn);
    }
}

fn store_dense<T: Real>(target: &mut Dense<T>, grads: DenseGrads<T>) {
    target.weight.add_assign(&grads.weight);
    for (b, g) in target.bias.iter_mut().zip(grads.bias) {
        *b += g;
    }
}

fn check_grad<T: Real>(g: &Tensor2<T>, rows: usize, cols: usize, what: &'static str) -> Result<()> {
    if g.rows() != rows {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: rows,
            found: g.rows(),
        });
    }
    if g.cols() != cols {
        return Err(Error::DimensionMismatch {
            context: what,
            expected: cols,
            found: g.cols(),
        });
    }
    Ok(())
}

/// Backpropagates the given output gradients to every trainable parameter
/// and to the input. Returns `(parameter gradients, input gradient)`.
pub fn backward<T: Real>(
    params: &EncoderParams<T>,
    cache: &EncoderCache<T>,
    upstream: &FeatureGrads<T>,
) -> Result<(EncoderGrads<T>, Tensor2<T>)> {
    let config = &params.config;
    let n = cache.rows;
    let mut grads = EncoderGrads::zeros_for(params);
    let g = &mut grads.0;

    // shared head
    let head = &params.shared_head;
    let mut g_post = match &upstream.v_post {
        Some(t) => {
            check_grad(t, n, config.d, "v_post gradient")?;
            t.clone()
        }
        None => Tensor2::zeros(n, config.d),
    };
    if let Some(gl) = &upstream.logits_backbone {
        check_grad(gl, n, config.num_classes, "backbone logits gradient")?;
        let (gx, gc) = head.classifier.backward(&cache.head.classifier, gl)?;
        g_post.add_assign(&gx);
        store_dense(&mut g.shared_head.classifier, gc);
    }
    let (mut g_pre, gbn) = head.bn.backward(&cache.head.bn, &g_post)?;
    g.shared_head.bn.gamma = gbn.gamma;
    g.shared_head.bn.beta = gbn.beta;

    // mid-level branch
    let mut g_tap = None;
    if let (Some(branch), Some(mc)) = (&params.mid_branch, &cache.mid) {
        let fused_dim = config.fused_dim();
        let mut g_fused_post = match &upstream.v_fused_post {
            Some(t) => {
                check_grad(t, n, fused_dim, "v_fused_post gradient")?;
                t.clone()
            }
            None => Tensor2::zeros(n, fused_dim),
        };
        let gb = g.mid_branch.as_mut().expect("grads mirror params");
        if let Some(gl) = &upstream.logits_skip {
            check_grad(gl, n, config.num_classes, "skip logits gradient")?;
            let (gx, gc) = branch.classifier.backward(&mc.classifier, gl)?;
            g_fused_post.add_assign(&gx);
            store_dense(&mut gb.classifier, gc);
        }
        let (g_fused, gbn) = branch.bn.backward(&mc.bn, &g_fused_post)?;
        gb.bn.gamma = gbn.gamma;
        gb.bn.beta = gbn.beta;
        let g_mid = match cache.fusion {
            Fusion::Sum => {
                g_pre.add_assign(&g_fused);
                g_fused
            }
            Fusion::Cat => {
                let (g_mid, g_pre_part) = g_fused.hsplit(cache.d);
                g_pre.add_assign(&g_pre_part);
                g_mid
            }
        };
        let (gt, gfc) = branch.fc.backward(&mc.fc, &g_mid)?;
        store_dense(&mut gb.fc, gfc);
        g_tap = Some(gt);
    } else if upstream.v_fused_post.is_some() || upstream.logits_skip.is_some() {
        return Err(Error::CacheMismatch("mid-level branch"));
    }

    let (g_stage_out, gfc) = head.fc.backward(&cache.head.fc, &g_pre)?;
    store_dense(&mut g.shared_head.fc, gfc);

    // modality-specific stages
    let tap_index = config.tap_stage - 1;
    let mut g_input = Tensor2::zeros(n, config.input_dim);
    for stream in &cache.streams {
        let stages = params.stages(stream.visible);
        let mut gh = g_stage_out.select_rows(&stream.rows)?;
        let stage_grads = if stream.visible {
            &mut g.visible_stages
        } else {
            &mut g.thermal_stages
        };
        for s in (0..stages.len()).rev() {
            if s == tap_index {
                if let Some(gt) = &g_tap {
                    gh.add_assign(&gt.select_rows(&stream.rows)?);
                }
            }
            let (dc, rc) = &stream.layers[s];
            let gz = relu_backward(rc, &gh)?;
            let (gx, gd) = stages[s].backward(dc, &gz)?;
            store_dense(&mut stage_grads[s], gd);
            gh = gx;
        }
        g_input.scatter_rows(&stream.rows, &gh);
    }
    Ok((grads, g_input))
}
