use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Compares an analytic gradient against central differences.
///
/// Returns `max_k |fd_k - g_k| / max(1, |g_k|)`.
pub fn finite_diff_check<F>(mut f: F, x: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if x.len() != analytic.len() {
        return Err(Error::shape("finite_diff_check", x.len(), analytic.len()));
    }
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for k in 0..x.len() {
        let orig = probe[k];
        probe[k] = orig + eps;
        let plus = f(&probe);
        probe[k] = orig - eps;
        let minus = f(&probe);
        probe[k] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!("non-finite objective at coordinate {k}")));
        }
        let fd = (plus - minus) / (2.0 * eps);
        let rel = (fd - analytic[k]).abs() / analytic[k].abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}
