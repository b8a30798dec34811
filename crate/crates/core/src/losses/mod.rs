//! Batch-hard, cross-modality, intra-modality and dual-modality triplet
//! losses, and the final training objective.

mod batch;
mod total;
mod triplet;

pub use batch::{check_layout, LabeledBatch};
pub use total::{total_loss, LossConfig, TotalLoss};
pub use triplet::{
    batch_hard_triplet, cross_modality_triplet, dual_modality_triplet, intra_modality_triplet, DirectionalOutput,
    DualOutput, TripletOutput,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modality::Modality::{self, Thermal as T, Visible as V};
    use crate::numerics::{finite_diff_grad, max_relative_error, Tensor2};
    use crate::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn four_point() -> LabeledBatch<f64> {
        let x = Tensor2::from_rows(&[[0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [3.0, 0.0]]).unwrap();
        LabeledBatch::new(x, vec![1, 2, 1, 2], vec![V, V, T, T], 2, 1).unwrap()
    }

    fn random_batch(p: usize, k: usize, dim: usize, seed: u64) -> LabeledBatch<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids = Vec::new();
        let mut mods = Vec::new();
        for m in Modality::BOTH {
            for id in 0..p {
                for _ in 0..k {
                    ids.push(id * 3 + 1);
                    mods.push(m);
                }
            }
        }
        let values = (0..ids.len() * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        LabeledBatch::new(Tensor2::new(ids.len(), dim, values).unwrap(), ids, mods, p, k).unwrap()
    }

    #[test]
    fn four_point_cross_modality() {
        let out = cross_modality_triplet(&four_point(), 0.5).unwrap();
        assert!((out.visible - 0.5).abs() < 1e-12);
        assert!((out.thermal - 0.5).abs() < 1e-12);
        assert!((out.total.loss - 1.0).abs() < 1e-12);
        assert_eq!(out.total.active_anchors, 2);
    }

    #[test]
    fn four_point_intra_and_dual() {
        let batch = four_point();
        let intra = intra_modality_triplet(&batch, 0.5).unwrap();
        assert_eq!(intra.total.loss, 0.0);
        let dual = dual_modality_triplet(&batch, 0.5, 0.1).unwrap();
        assert!((dual.loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separated_identities_have_zero_loss() {
        let x = Tensor2::from_rows(&[[0.0], [0.0], [10.0], [10.0]]).unwrap();
        let out = batch_hard_triplet(&x, &[0, 0, 1, 1], 0.5).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn collapsed_features_cost_rho_per_anchor() {
        let x = Tensor2::from_rows(&[[0.3, 0.3]; 4]).unwrap();
        let out = batch_hard_triplet(&x, &[0, 1, 0, 1], 0.5).unwrap();
        assert!((out.loss - 2.0f64).abs() < 1e-12);

        let (p, k) = (3, 2);
        let batch = random_batch(p, k, 3, 0);
        let same = batch
            .with_features(Tensor2::from_rows(&vec![[0.1, 0.2, 0.3]; 2 * p * k]).unwrap())
            .unwrap();
        let intra = intra_modality_triplet(&same, 0.5).unwrap();
        assert!((intra.total.loss - 2.0 * (p * k) as f64 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn aligned_separated_modalities_have_zero_cross_loss() {
        let x = Tensor2::from_rows(&[[0.0, 0.0], [5.0, 0.0], [0.0, 0.0], [5.0, 0.0]]).unwrap();
        let batch = LabeledBatch::new(x, vec![0, 1, 0, 1], vec![V, V, T, T], 2, 1).unwrap();
        assert_eq!(cross_modality_triplet(&batch, 0.5).unwrap().total.loss, 0.0);
    }

    #[test]
    fn error_paths() {
        let x = Tensor2::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(
            batch_hard_triplet(&x, &[3, 3], 0.5),
            Err(Error::SingleIdentity(_))
        ));
        let x = Tensor2::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(LabeledBatch::new(x.clone(), vec![0, 1], vec![V, V], 2, 1).is_err());
        assert!(LabeledBatch::new(x, vec![0, 0], vec![V, T], 1, 1).is_ok());
        let one_id = LabeledBatch::new(
            Tensor2::from_rows(&[[0.0], [1.0]]).unwrap(),
            vec![0, 0],
            vec![V, T],
            1,
            1,
        )
        .unwrap();
        assert!(matches!(
            intra_modality_triplet(&one_id, 0.5),
            Err(Error::SingleIdentity(_))
        ));
    }

    #[test]
    fn modality_swap_and_translation_invariance() {
        for seed in 0..20 {
            let batch = random_batch(3, 2, 4, seed);
            let c = cross_modality_triplet(&batch, 0.5).unwrap().total.loss;
            let i = intra_modality_triplet(&batch, 0.5).unwrap().total.loss;
            let swapped = batch.swap_modalities();
            assert!((cross_modality_triplet(&swapped, 0.5).unwrap().total.loss - c).abs() < 1e-12);
            assert!((intra_modality_triplet(&swapped, 0.5).unwrap().total.loss - i).abs() < 1e-12);

            let shifted: Vec<f64> = (0..batch.features().rows())
                .flat_map(|r| {
                    batch
                        .features()
                        .row(r)
                        .iter()
                        .zip([3.0, -1.0, 0.5, 2.0])
                        .map(|(a, b)| a + b)
                        .collect::<Vec<_>>()
                })
                .collect();
            let moved = batch
                .with_features(Tensor2::new(batch.features().rows(), 4, shifted).unwrap())
                .unwrap();
            assert!((cross_modality_triplet(&moved, 0.5).unwrap().total.loss - c).abs() < 1e-9);
            assert!((intra_modality_triplet(&moved, 0.5).unwrap().total.loss - i).abs() < 1e-9);
        }
    }

    #[test]
    fn lambda1_zero_is_cross_only() {
        let batch = random_batch(3, 2, 4, 5);
        let dual = dual_modality_triplet(&batch, 0.5, 0.0).unwrap();
        let cross = cross_modality_triplet(&batch, 0.5).unwrap();
        assert_eq!(dual.loss, cross.total.loss);
        assert_eq!(dual.grad, cross.total.grad);
    }

    #[test]
    fn tie_breaks_toward_lowest_row() {
        // anchor 0 sees negatives 1 and 2 at equal distance; row 1 must be picked.
        // Hand-derived gradient with that choice: [1, 0, -1]; picking row 2 would give [1, 1, 0].
        let x = Tensor2::from_rows(&[[0.0], [1.0], [-1.0]]).unwrap();
        let out = batch_hard_triplet(&x, &[0, 1, 1], 2.0).unwrap();
        let expected = [1.0f64, 0.0, -1.0];
        for (g, e) in out.grad.values().iter().zip(expected) {
            assert!((g - e).abs() < 1e-9, "{:?}", out.grad.values());
        }
        assert_eq!(out.kink_margin, 0.0);
    }

    #[test]
    fn gradient_sparsity_for_unselected_rows() {
        // far-away row 4 is never a hardest positive or negative for anyone else
        let x = Tensor2::from_rows(&[[0.0], [0.1], [1.0], [1.1], [50.0], [50.2]]).unwrap();
        let out = batch_hard_triplet(&x, &[0, 0, 1, 1, 2, 2], 0.5).unwrap();
        assert_eq!(out.grad.get(4, 0), 0.0);
        assert_eq!(out.grad.get(5, 0), 0.0);
    }

    #[test]
    fn dual_gradient_matches_finite_differences() {
        let mut checked = 0;
        for seed in 0..40 {
            let batch = random_batch(3, 2, 3, 100 + seed);
            let out = dual_modality_triplet(&batch, 0.5, 0.1).unwrap();
            if out.kink_margin < 1e-3 {
                continue;
            }
            let x = batch.features().clone();
            let numeric = finite_diff_grad(
                |v: &[f64]| {
                    let b = batch
                        .with_features(Tensor2::new(x.rows(), x.cols(), v.to_vec()).unwrap())
                        .unwrap();
                    dual_modality_triplet(&b, 0.5, 0.1).unwrap().loss
                },
                x.values(),
                1e-5,
            )
            .unwrap();
            let err = max_relative_error(out.grad.values(), &numeric);
            assert!(err < 1e-4, "seed {seed}: {err}");
            checked += 1;
        }
        assert!(checked >= 20);
    }
}
