//! Two-stream encoder: modality-specific Dense+ReLU stages, a shared
//! bottleneck head, and an optional mid-level skip branch fused with the
//! pre-BatchNorm backbone feature.

mod config;
mod forward;
mod params;

pub use config::{EncoderConfig, Fusion};
pub use forward::{
    backward, commit_running_stats, encode, encode_eval, encode_mixed, fuse, test_feature, test_features, EncoderCache,
    FeatureBatch, FeatureBundle, FeatureGrads, MidFeatures,
};
pub use params::{EncoderGrads, EncoderParams, Head, ParamRole};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modality::Modality;
    use crate::numerics::{finite_diff_grad, max_relative_error, softmax_cross_entropy, Mode, Tensor2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_config(fusion: Fusion, mfi: bool) -> EncoderConfig {
        EncoderConfig {
            input_dim: 5,
            stage_dims: vec![6, 7, 6],
            tap_stage: 2,
            d: 4,
            num_classes: 3,
            fusion,
            mfi_enabled: mfi,
            backbone_loss_enabled: true,
        }
    }

    fn random_input(rows: usize, cols: usize, seed: u64) -> Tensor2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor2::new(rows, cols, values).unwrap()
    }

    #[test]
    fn fuse_examples() {
        assert_eq!(fuse(&[1.0, 2.0], &[3.0, 4.0], Fusion::Sum).unwrap(), vec![4.0, 6.0]);
        assert_eq!(
            fuse(&[1.0, 2.0], &[3.0, 4.0], Fusion::Cat).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        assert_eq!(fuse(&[0.5, -1.5], &[0.0, 0.0], Fusion::Sum).unwrap(), vec![0.5, -1.5]);
        assert!(fuse(&[1.0], &[1.0, 2.0], Fusion::Sum).is_err());
    }

    #[test]
    fn init_is_deterministic_and_streams_differ() {
        let cfg = small_config(Fusion::Cat, true);
        let a = EncoderParams::<f64>::init(&cfg, 7).unwrap();
        let b = EncoderParams::<f64>::init(&cfg, 7).unwrap();
        let bits = |p: &EncoderParams<f64>| p.flat_trainable().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(a.visible_stages, a.thermal_stages);
        assert!(a.shared_head.bn.gamma.iter().all(|&g| g == 1.0));
        assert!(a.mid_branch.as_ref().unwrap().bn.gamma.iter().all(|&g| g == 1.0));
        assert!(a.shared_head.fc.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = small_config(Fusion::Sum, true);
        cfg.tap_stage = 4;
        assert!(EncoderParams::<f64>::init(&cfg, 0).is_err());
        cfg.tap_stage = 0;
        assert!(EncoderParams::<f64>::init(&cfg, 0).is_err());
        let mut cfg = small_config(Fusion::Sum, true);
        cfg.num_classes = 1;
        assert!(EncoderParams::<f64>::init(&cfg, 0).is_err());
    }

    #[test]
    fn identical_streams_give_identical_bundles() {
        let cfg = small_config(Fusion::Cat, true);
        let mut p = EncoderParams::<f64>::init(&cfg, 3).unwrap();
        p.thermal_stages = p.visible_stages.clone();
        let x = random_input(4, 5, 1);
        let v = encode_eval(&p, &x, Modality::Visible).unwrap();
        let t = encode_eval(&p, &x, Modality::Thermal).unwrap();
        assert_eq!(v, t);
    }

    #[test]
    fn zero_weights_give_uniform_softmax() {
        let cfg = small_config(Fusion::Cat, true);
        let mut p = EncoderParams::<f64>::init(&cfg, 3).unwrap();
        p.for_each_mut(|name, _, values, role| {
            if role != ParamRole::Buffer && !name.contains(".bn.") {
                values.iter_mut().for_each(|v| *v = 0.0);
            }
        });
        let f = encode_eval(&p, &random_input(3, 5, 2), Modality::Thermal).unwrap();
        assert!(f.logits_backbone.values().iter().all(|&z| z == 0.0));
        let skip = &f.mid.as_ref().unwrap().logits_skip;
        assert!(skip.values().iter().all(|&z| z == 0.0));
        let (loss, _) = softmax_cross_entropy(skip, &[0, 1, 2]).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fused_dims_follow_fusion_mode() {
        for (fusion, dim) in [(Fusion::Sum, 4), (Fusion::Cat, 8)] {
            let cfg = small_config(fusion, true);
            assert_eq!(cfg.fused_dim(), dim);
            let p = EncoderParams::<f64>::init(&cfg, 0).unwrap();
            assert_eq!(p.mid_branch.as_ref().unwrap().bn.dim(), dim);
            let f = encode_eval(&p, &random_input(2, 5, 0), Modality::Visible).unwrap();
            let mid = f.mid.unwrap();
            assert_eq!(mid.v_fused.cols(), dim);
            assert_eq!(mid.v_fused_post.cols(), dim);
            assert_eq!(mid.v_mid.cols(), 4);
        }
        let p = EncoderParams::<f64>::init(&small_config(Fusion::Cat, false), 0).unwrap();
        let f = encode_eval(&p, &random_input(2, 5, 0), Modality::Visible).unwrap();
        assert!(f.mid.is_none());
        assert!(f.bundle(0).v_mid.is_none());
    }

    #[test]
    fn fusion_uses_pre_bn_feature() {
        let cfg = small_config(Fusion::Cat, true);
        let p = EncoderParams::<f64>::init(&cfg, 5).unwrap();
        let f = encode_eval(&p, &random_input(3, 5, 9), Modality::Visible).unwrap();
        let mid = f.mid.as_ref().unwrap();
        for i in 0..3 {
            assert_eq!(&mid.v_fused.row(i)[..4], mid.v_mid.row(i));
            assert_eq!(&mid.v_fused.row(i)[4..], f.v_pre.row(i));
        }
    }

    #[test]
    fn test_feature_selects_branch_and_normalizes() {
        let mut bundle = FeatureBundle {
            v_pre: vec![9.0, 9.0],
            v_post: vec![3.0, 4.0],
            logits_backbone: vec![0.0, 0.0],
            v_mid: None,
            v_fused: None,
            v_fused_post: None,
            logits_skip: None,
        };
        let mut cfg = small_config(Fusion::Sum, false);
        assert_eq!(test_feature(&bundle, &cfg), vec![0.6, 0.8]);
        bundle.v_fused_post = Some(vec![0.0, -2.0]);
        cfg.mfi_enabled = true;
        assert_eq!(test_feature(&bundle, &cfg), vec![0.0, -1.0]);
    }

    #[test]
    fn test_feature_has_unit_norm() {
        let cfg = small_config(Fusion::Cat, true);
        let p = EncoderParams::<f64>::init(&cfg, 1).unwrap();
        let f = encode_eval(&p, &random_input(16, 5, 4), Modality::Thermal).unwrap();
        for i in 0..16 {
            let v = test_feature(&f.bundle(i), &cfg);
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let source_norm = f.metric_source().row_norms()[i];
            if source_norm >= 1e-6 {
                assert!((norm - 1.0).abs() < 1e-9, "row {i}: norm {norm}");
            } else {
                assert_eq!(norm, 0.0);
            }
        }
        let batched = test_features(&f).unwrap();
        assert_eq!(batched.row(2), test_feature(&f.bundle(2), &cfg).as_slice());
    }

    #[test]
    fn eval_encoding_is_pure() {
        let cfg = small_config(Fusion::Sum, true);
        let p = EncoderParams::<f64>::init(&cfg, 1).unwrap();
        let x = random_input(5, 5, 3);
        let a = encode_eval(&p, &x, Modality::Visible).unwrap();
        let b = encode_eval(&p, &x, Modality::Visible).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn train_mode_updates_running_stats() {
        let cfg = small_config(Fusion::Sum, true);
        let mut p = EncoderParams::<f64>::init(&cfg, 1).unwrap();
        let before = p.clone();
        encode(&mut p, &random_input(4, 5, 3), Modality::Visible, Mode::Train).unwrap();
        assert_ne!(before.shared_head.bn.running_mean, p.shared_head.bn.running_mean);
        assert_eq!(before.flat_trainable(), p.flat_trainable());
        assert!(matches!(
            encode(&mut p, &random_input(1, 5, 3), Modality::Visible, Mode::Train),
            Err(crate::Error::BatchTooSmall(1))
        ));
        assert!(encode(&mut p, &random_input(2, 4, 3), Modality::Visible, Mode::Eval).is_err());
    }

    /// Sum of all logits and BN outputs weighted by fixed coefficients.
    fn scalar_head_loss(f: &FeatureBatch<f64>, w: &FeatureBatch<f64>) -> f64 {
        let dot =
            |a: &Tensor2<f64>, b: &Tensor2<f64>| -> f64 { a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum() };
        let mut s = dot(&f.v_post, &w.v_post) + dot(&f.logits_backbone, &w.logits_backbone);
        if let (Some(m), Some(wm)) = (&f.mid, &w.mid) {
            s += dot(&m.v_fused_post, &wm.v_fused_post) + dot(&m.logits_skip, &wm.logits_skip);
        }
        s
    }

    fn upstream_of(w: &FeatureBatch<f64>) -> FeatureGrads<f64> {
        FeatureGrads {
            v_post: Some(w.v_post.clone()),
            logits_backbone: Some(w.logits_backbone.clone()),
            v_fused_post: w.mid.as_ref().map(|m| m.v_fused_post.clone()),
            logits_skip: w.mid.as_ref().map(|m| m.logits_skip.clone()),
        }
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        for (fusion, mode) in [(Fusion::Cat, Mode::Train), (Fusion::Sum, Mode::Eval)] {
            let cfg = small_config(fusion, true);
            let p = EncoderParams::<f64>::init(&cfg, 21).unwrap();
            let x = random_input(6, 5, 22);
            let tags = [
                Modality::Visible,
                Modality::Thermal,
                Modality::Visible,
                Modality::Thermal,
                Modality::Thermal,
                Modality::Visible,
            ];
            let (f, cache) = encode_mixed(&p, &x, &tags, mode).unwrap();
            assert!(cache.relu_margin() > 1e-4);
            // random fixed weights define the scalar objective
            let w_src = EncoderParams::<f64>::init(&cfg, 99).unwrap();
            let (w, _) = encode_mixed(&w_src, &random_input(6, 5, 23), &tags, Mode::Eval).unwrap();
            let (grads, _) = backward(&p, &cache, &upstream_of(&w)).unwrap();
            let flat = p.flat_trainable();
            let numeric = finite_diff_grad(
                |theta: &[f64]| {
                    let mut q = p.clone();
                    q.set_flat_trainable(theta).unwrap();
                    let (f, _) = encode_mixed(&q, &x, &tags, mode).unwrap();
                    scalar_head_loss(&f, &w)
                },
                &flat,
                1e-5,
            )
            .unwrap();
            let err = max_relative_error(&grads.flat(), &numeric);
            assert!(err < 1e-4, "{fusion:?}/{mode:?}: max relative error {err}");
            let _ = f;
        }
    }

    #[test]
    fn shared_head_gradient_is_sum_over_modalities() {
        let cfg = small_config(Fusion::Cat, true);
        let p = EncoderParams::<f64>::init(&cfg, 4).unwrap();
        let x = random_input(6, 5, 5);
        let tags = [
            Modality::Visible,
            Modality::Thermal,
            Modality::Thermal,
            Modality::Visible,
            Modality::Visible,
            Modality::Thermal,
        ];
        let w_src = EncoderParams::<f64>::init(&cfg, 77).unwrap();
        let (w, _) = encode_mixed(&w_src, &random_input(6, 5, 6), &tags, Mode::Eval).unwrap();
        let (_, cache) = encode_mixed(&p, &x, &tags, Mode::Eval).unwrap();
        let (joint, _) = backward(&p, &cache, &upstream_of(&w)).unwrap();

        let mut summed = EncoderGrads::zeros_for(&p).flat();
        for m in Modality::BOTH {
            let rows: Vec<usize> = (0..6).filter(|&i| tags[i] == m).collect();
            let sub = |t: &Tensor2<f64>| t.select_rows(&rows).unwrap();
            let (_, c) = encode_mixed(&p, &sub(&x), &vec![m; rows.len()], Mode::Eval).unwrap();
            let wm = w.mid.as_ref().unwrap();
            let up = FeatureGrads {
                v_post: Some(sub(&w.v_post)),
                logits_backbone: Some(sub(&w.logits_backbone)),
                v_fused_post: Some(sub(&wm.v_fused_post)),
                logits_skip: Some(sub(&wm.logits_skip)),
            };
            let (g, _) = backward(&p, &c, &up).unwrap();
            for (s, v) in summed.iter_mut().zip(g.flat()) {
                *s += v;
            }
        }
        for (a, b) in joint.flat().iter().zip(&summed) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn f32_encoder_runs() {
        let cfg = small_config(Fusion::Cat, true);
        let p = EncoderParams::<f32>::init(&cfg, 2).unwrap();
        let x = Tensor2::<f32>::from_f64_rows(&[[0.1, 0.2, 0.3, 0.4, 0.5], [0.5, 0.4, 0.3, 0.2, 0.1]]).unwrap();
        let f = encode_eval(&p, &x, Modality::Visible).unwrap();
        assert_eq!(f.metric_source().cols(), 8);
    }
}
