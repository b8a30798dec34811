use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mean softmax cross-entropy over rows and its gradient `(softmax − onehot) / rows`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor2<T>, labels: &[usize]) -> Result<(T, Tensor2<T>)> {
    if labels.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if labels.len() != logits.rows() {
        return Err(Error::DimensionMismatch {
            context: "cross entropy labels",
            expected: logits.rows(),
            found: labels.len(),
        });
    }
    let classes = logits.cols();
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    logits.ensure_finite("logits")?;
    let n = T::from_usize(logits.rows()).unwrap();
    let mut loss = T::zero();
    let mut grad = Tensor2::zeros(logits.rows(), classes);
    for (i, &label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum_exp: T = row.iter().map(|&z| (z - max).exp()).sum();
        let log_sum = sum_exp.ln();
        loss += log_sum - (row[label] - max);
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            let p = (row[j] - max).exp() / sum_exp;
            let onehot = if j == label { T::one() } else { T::zero() };
            *g = (p - onehot) / n;
        }
    }
    Ok((loss / n, grad))
}
