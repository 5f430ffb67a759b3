//! Pairwise fidelity loss for the consistency score, MSE for the regression
//! heads, and their unweighted sum.
//!
//! The fidelity loss compares every ordered pair `(i, j)`, `i != j`, of a
//! mini-batch:
//!
//! ```text
//! L = 1/N^2 * sum_{i != j} 1 - sqrt(P_ij * Q_ij) - sqrt((1 - P_ij)(1 - Q_ij))
//! ```
//!
//! where `P_ij = [gt_i >= gt_j]` and `Q_ij = Phi((s_i - s_j) / sqrt 2)` is
//! the Thurstone Case V preference probability. Diagonal terms are the
//! constant `1 - sqrt(0.5)` with zero gradient; they are left out of the sum
//! but the `1/N^2` normalisation is kept. Tied ground truths give
//! `P_ij = P_ji = 1`.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `sqrt 2`, the comparative standard deviation of two unit-variance scores.
pub const THURSTONE_SCALE: f64 = SQRT_2;

/// `Phi((s_i - s_j) / sqrt 2)`.
pub fn thurstone_prob(s_i: f64, s_j: f64) -> f64 {
    0.5 * libm::erfc(-(s_i - s_j) * 0.5)
}

/// `P_ij = 1` iff `gt_i >= gt_j`.
pub fn preference_matrix(gts: &[f64]) -> Result<Matrix> {
    let n = gts.len();
    let data = (0..n * n)
        .map(|k| if gts[k / n] >= gts[k % n] { 1.0 } else { 0.0 })
        .collect();
    Matrix::new(n, n, data)
}

/// Predictions and ground truths of one task over a mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchScores {
    pub preds: Vec<f64>,
    pub gts: Vec<f64>,
}

impl BatchScores {
    pub fn new(preds: Vec<f64>, gts: Vec<f64>) -> Result<Self> {
        if preds.len() != gts.len() {
            return Err(Error::shape("BatchScores", preds.len(), gts.len()));
        }
        if preds.is_empty() {
            return Err(Error::TooSmall("empty batch".into()));
        }
        if preds.iter().chain(&gts).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("batch contains non-finite scores".into()));
        }
        Ok(Self { preds, gts })
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }
}

pub fn fidelity_loss(batch: &BatchScores) -> Result<(f64, Vec<f64>)> {
    let n = batch.len();
    if n < 2 {
        return Err(Error::TooSmall(format!("fidelity loss needs N >= 2, got {n}")));
    }
    let norm = 1.0 / (n * n) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let diff = batch.preds[i] - batch.preds[j];
            let x = diff * FRAC_1_SQRT_2;
            // dQ/ds_i = phi(x) / sqrt 2
            let dq = INV_SQRT_2PI * (-0.5 * x * x).exp() * FRAC_1_SQRT_2;
            let g = if batch.gts[i] >= batch.gts[j] {
                let q = thurstone_prob(batch.preds[i], batch.preds[j]);
                loss += 1.0 - q.sqrt();
                if q > 0.0 {
                    -0.5 * dq / q.sqrt()
                } else {
                    0.0
                }
            } else {
                // 1 - Q computed directly to keep precision in the tail
                let q_bar = thurstone_prob(batch.preds[j], batch.preds[i]);
                loss += 1.0 - q_bar.sqrt();
                if q_bar > 0.0 {
                    0.5 * dq / q_bar.sqrt()
                } else {
                    0.0
                }
            };
            grad[i] += g * norm;
            grad[j] -= g * norm;
        }
    }
    Ok((loss * norm, grad))
}

/// `1/N * sum (gt - pred)^2`.
pub fn mse_loss(batch: &BatchScores) -> Result<(f64, Vec<f64>)> {
    let n = batch.len() as f64;
    let mut loss = 0.0;
    let grad = batch
        .preds
        .iter()
        .zip(&batch.gts)
        .map(|(p, g)| {
            let r = p - g;
            loss += r * r;
            2.0 * r / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Loss components and per-prediction gradients. Absent tasks contribute
/// zero loss and carry no gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBundle {
    pub l_c: f64,
    pub l_v: f64,
    pub l_a: f64,
    pub total: f64,
    pub d_c: Option<Vec<f64>>,
    pub d_v: Option<Vec<f64>>,
    pub d_a: Option<Vec<f64>>,
}

/// `L = L_C + L_V + L_A` over the tasks that are present (`Some`).
pub fn total_loss(
    consistency: Option<&BatchScores>,
    quality: Option<&BatchScores>,
    authenticity: Option<&BatchScores>,
) -> Result<LossBundle> {
    let sizes: Vec<usize> = [consistency, quality, authenticity]
        .iter()
        .flatten()
        .map(|b| b.len())
        .collect();
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("all loss components are masked".into()));
    }
    if sizes.iter().any(|&s| s != sizes[0]) {
        return Err(Error::shape("total_loss batch sizes", sizes[0], format!("{sizes:?}")));
    }
    let (l_c, d_c) = split(consistency.map(fidelity_loss).transpose()?);
    let (l_v, d_v) = split(quality.map(mse_loss).transpose()?);
    let (l_a, d_a) = split(authenticity.map(mse_loss).transpose()?);
    Ok(LossBundle {
        l_c,
        l_v,
        l_a,
        total: l_c + l_v + l_a,
        d_c,
        d_v,
        d_a,
    })
}

fn split(part: Option<(f64, Vec<f64>)>) -> (f64, Option<Vec<f64>>) {
    match part {
        Some((l, g)) => (l, Some(g)),
        None => (0.0, None),
    }
}
