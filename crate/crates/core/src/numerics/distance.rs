use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Added under the square root so distances stay differentiable at zero.
pub const DISTANCE_STABILIZER: f64 = 1e-12;

/// Stabilized Euclidean distance `sqrt(max(‖a − b‖², 0) + 1e-12)`.
pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    let sq: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    (sq.max(T::zero()) + T::lit(DISTANCE_STABILIZER)).sqrt()
}

/// All pairwise distances between rows of `a` and rows of `b`.
pub fn pairwise_distances<T: Real>(a: &Tensor2<T>, b: &Tensor2<T>) -> Result<Tensor2<T>> {
    if a.cols() != b.cols() {
        return Err(Error::DimensionMismatch {
            context: "pairwise distances",
            expected: a.cols(),
            found: b.cols(),
        });
    }
    let mut out = Tensor2::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            out.set(i, j, euclidean(a.row(i), b.row(j)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        let a = Tensor2::from_rows(&[[0.0, 0.0]]).unwrap();
        let b = Tensor2::from_rows(&[[3.0, 4.0]]).unwrap();
        let d = pairwise_distances(&a, &b).unwrap();
        assert!((d.get(0, 0) - 5.0_f64).abs() < 1e-6);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Tensor2::<f64>::zeros(2, 3);
        let b = Tensor2::<f64>::zeros(2, 4);
        assert!(pairwise_distances(&a, &b).is_err());
    }

    #[test]
    fn matches_naive_double_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect()
        };
        let (ra, rb) = (draw(4), draw(5));
        let d = pairwise_distances(&Tensor2::from_rows(&ra).unwrap(), &Tensor2::from_rows(&rb).unwrap()).unwrap();
        for (i, x) in ra.iter().enumerate() {
            for (j, y) in rb.iter().enumerate() {
                let mut sq = 0.0;
                for k in 0..3 {
                    sq += (x[k] - y[k]) * (x[k] - y[k]);
                }
                let naive = (sq + 1e-12_f64).sqrt();
                assert_eq!(d.get(i, j), naive);
            }
        }
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-5.0f64..5.0, cols), rows)
    }

    proptest! {
        #[test]
        fn self_distances_symmetric_with_small_diagonal(rows in matrix(5, 4)) {
            let a = Tensor2::from_rows(&rows).unwrap();
            let d = pairwise_distances(&a, &a).unwrap();
            for i in 0..5 {
                prop_assert!(d.get(i, i) <= 1e-5);
                for j in 0..5 {
                    prop_assert!((d.get(i, j) - d.get(j, i)).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn triangle_inequality(rows in matrix(3, 6)) {
            let (a, b, c) = (&rows[0], &rows[1], &rows[2]);
            let ab = euclidean(a, b);
            let bc = euclidean(b, c);
            let ac = euclidean(a, c);
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }
}
