use crate::error::{Error, Result};
use crate::scalar::{all_finite, Real};

/// Adam moments and hyperparameters for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub learning_rate: T,
}

impl<T: Real> AdamState<T> {
    /// `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
    pub fn new(len: usize, learning_rate: T) -> Result<Self> {
        Self::with_hyperparams(len, learning_rate, T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }

    pub fn with_hyperparams(len: usize, learning_rate: T, beta1: T, beta2: T, epsilon: T) -> Result<Self> {
        let unit = |b: T| b > T::zero() && b < T::one();
        if !unit(beta1) || !unit(beta2) {
            return Err(Error::InvalidConfig("adam betas must lie in (0, 1)".into()));
        }
        if epsilon.is_nan() || epsilon <= T::zero() {
            return Err(Error::InvalidConfig("adam epsilon must be positive".into()));
        }
        // zero is accepted: a null update leaves parameters bit-identical
        if !learning_rate.is_finite() || learning_rate < T::zero() {
            return Err(Error::InvalidConfig(
                "learning rate must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step_count: 0,
            beta1,
            beta2,
            epsilon,
            learning_rate,
        })
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::DimensionMismatch {
            context: "adam step",
            expected: state.first_moment.len(),
            found: if params.len() != state.first_moment.len() {
                params.len()
            } else {
                grads.len()
            },
        });
    }
    if !all_finite(grads) {
        return Err(Error::NonFinite("gradient"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = T::one() - b1.powi(t);
    let correction2 = T::one() - b2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        let m = b1 * state.first_moment[i] + (T::one() - b1) * g;
        let v = b2 * state.second_moment[i] + (T::one() - b2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / correction1;
        let v_hat = v / correction2;
        params[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}
