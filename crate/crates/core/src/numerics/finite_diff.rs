use crate::error::{Error, Result};
use crate::scalar::Real;

/// Central-difference gradient `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` per coordinate.
pub fn finite_diff_grad<T, F>(mut f: F, x: &[T], h: T) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    if h.is_nan() || h <= T::zero() {
        return Err(Error::InvalidConfig("finite difference step must be positive".into()));
    }
    let mut point = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    let two_h = h + h;
    for i in 0..x.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite("finite difference evaluation"));
        }
        grad.push((plus - minus) / two_h);
    }
    Ok(grad)
}

/// Magnitude below which gradient components are compared absolutely.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

/// `|a − n| / max(|a|, |n|, floor)` for one component.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
    (analytic - numeric).abs() / scale
}

/// Largest [`relative_error`] over paired components.
pub fn max_relative_error<T: Real>(analytic: &[T], numeric: &[T]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths agree");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a.as_f64(), n.as_f64()))
        .fold(0.0, f64::max)
}
