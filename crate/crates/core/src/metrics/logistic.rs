//! Four-parameter logistic mapping fitted before PLCC:
//!
//! ```text
//! s~ = (k1 - k2) / (1 + exp(k4 (s - k3))) + k2
//! ```
//!
//! fitted to the ground truths by Levenberg-Marquardt with an analytic
//! Jacobian and Marquardt diagonal scaling.

use serde::{Deserialize, Serialize};

use super::correlation::pearson;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const REL_TOLERANCE: f64 = 1e-10;
const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
}

/// `1 / (1 + exp(z))` without overflow.
fn inv_one_plus_exp(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

impl LogisticParams {
    pub fn apply(&self, s: f64) -> f64 {
        (self.k1 - self.k2) * inv_one_plus_exp(self.k4 * (s - self.k3)) + self.k2
    }

    fn as_array(&self) -> [f64; 4] {
        [self.k1, self.k2, self.k3, self.k4]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            k1: a[0],
            k2: a[1],
            k3: a[2],
            k4: a[3],
        }
    }

    /// Partial derivatives of `apply(s)` with respect to (k1, k2, k3, k4).
    fn jacobian_row(&self, s: f64) -> [f64; 4] {
        let u = inv_one_plus_exp(self.k4 * (s - self.k3));
        // exp(z) / (1 + exp(z))^2 == u (1 - u)
        let e_over_d2 = u * (1.0 - u);
        let amp = self.k1 - self.k2;
        [u, 1.0 - u, amp * self.k4 * e_over_d2, -amp * (s - self.k3) * e_over_d2]
    }
}

/// Result of [`logistic_fit`]. When the fit does not converge the mapping
/// falls back to the identity and `fallback` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub params: LogisticParams,
    pub converged: bool,
    pub fallback: bool,
    pub iterations: usize,
    /// Sum of squared residuals: the initial value, then one entry per
    /// accepted step.
    pub cost_trace: Vec<f64>,
}

impl LogisticFit {
    pub fn map(&self, s: f64) -> f64 {
        if self.fallback {
            s
        } else {
            self.params.apply(s)
        }
    }
}

fn cost(p: &LogisticParams, preds: &[f64], gts: &[f64]) -> f64 {
    preds
        .iter()
        .zip(gts)
        .map(|(&s, &g)| {
            let r = g - p.apply(s);
            r * r
        })
        .sum()
}

/// Solves the 4x4 system `a x = b` by Gaussian elimination with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut s = b[row];
        for k in row + 1..4 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn logistic_fit(preds: &[f64], gts: &[f64]) -> Result<LogisticFit> {
    if preds.len() != gts.len() {
        return Err(Error::shape("logistic_fit", preds.len(), gts.len()));
    }
    let n = preds.len();
    if n < 5 {
        return Err(Error::TooSmall(format!("logistic fit needs n >= 5, got {n}")));
    }
    let (pmin, pmax) = preds
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(pmax > pmin) {
        return Err(Error::InvalidArgument("predictions are constant".into()));
    }
    let (gmin, gmax) = gts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let sign = pearson(preds, gts).map(|r| if r >= 0.0 { 1.0 } else { -1.0 }).unwrap_or(1.0);

    let mut p = LogisticParams {
        k1: gmax,
        k2: gmin,
        k3: preds.iter().sum::<f64>() / n as f64,
        k4: -sign * 4.0 / (pmax - pmin),
    };
    let mut c = cost(&p, preds, gts);
    let mut trace = vec![c];
    let mut lambda = LAMBDA_INIT;
    let mut converged = c == 0.0;
    let mut iterations = 0;

    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&s, &g) in preds.iter().zip(gts) {
            let row = p.jacobian_row(s);
            let r = g - p.apply(s);
            for a in 0..4 {
                jtr[a] += row[a] * r;
                for b in 0..4 {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let diag_floor = 1e-12 * (0..4).map(|k| jtj[k][k]).fold(0.0, f64::max).max(1e-300);
        let mut damped = jtj;
        for k in 0..4 {
            damped[k][k] += lambda * jtj[k][k].max(diag_floor);
        }
        let step = solve4(damped, jtr);
        let candidate = step.map(|d| {
            let cur = p.as_array();
            LogisticParams::from_array([cur[0] + d[0], cur[1] + d[1], cur[2] + d[2], cur[3] + d[3]])
        });
        let new_cost = candidate.map(|q| cost(&q, preds, gts)).unwrap_or(f64::INFINITY);

        if new_cost.is_finite() && new_cost < c {
            let rel = (c - new_cost) / c;
            p = candidate.expect("finite cost implies a candidate");
            c = new_cost;
            trace.push(c);
            lambda = (lambda / 10.0).max(1e-300);
            if rel < REL_TOLERANCE || c == 0.0 {
                converged = true;
            }
        } else {
            lambda *= 10.0;
            // no damping level finds a descent step: stationary to precision
            if lambda > LAMBDA_MAX {
                converged = true;
            }
        }
    }

    let finite = p.as_array().iter().all(|v| v.is_finite()) && preds.iter().all(|&s| p.apply(s).is_finite());
    Ok(LogisticFit {
        params: p,
        converged: converged && finite,
        fallback: !(converged && finite),
        iterations,
        cost_trace: trace,
    })
}

/// Pearson correlation between logistic-mapped predictions and ground truth.
pub fn plcc(preds: &[f64], gts: &[f64]) -> Result<(f64, LogisticFit)> {
    let fit = logistic_fit(preds, gts)?;
    let mapped: Vec<f64> = preds.iter().map(|&s| fit.map(s)).collect();
    let r = match pearson(&mapped, gts) {
        Ok(r) => r,
        // fitted curve flat over the data: fall back to the raw scores
        Err(Error::UndefinedCorrelation(_)) => {
            return Ok((
                pearson(preds, gts)?,
                LogisticFit {
                    fallback: true,
                    ..fit
                },
            ))
        }
        Err(e) => return Err(e),
    };
    Ok((r, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::SeededRng;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn recovers_known_curve() {
        let truth = LogisticParams { k1: 5.0, k2: 1.0, k3: 0.0, k4: -2.0 };
        let preds = grid(61, -3.0, 3.0);
        let gts: Vec<f64> = preds.iter().map(|&s| truth.apply(s)).collect();
        let fit = logistic_fit(&preds, &gts).unwrap();
        assert!(fit.converged);
        let rmse = (preds.iter().zip(&gts).map(|(&s, g)| (fit.map(s) - g).powi(2)).sum::<f64>() / 61.0).sqrt();
        assert!(rmse < 1e-6, "rmse {rmse}");
        assert!(fit.cost_trace.windows(2).all(|w| w[1] <= w[0]));
        let (r, _) = plcc(&preds, &gts).unwrap();
        assert!((r - 1.0).abs() < 1e-6);
    }

    #[test]
    fn midpoint_symmetry() {
        let p = LogisticParams { k1: 4.0, k2: -2.0, k3: 0.7, k4: 3.0 };
        assert_eq!(p.apply(0.7), 1.0);
    }

    #[test]
    fn jacobian_matches_differences() {
        let p = LogisticParams { k1: 3.0, k2: 0.5, k3: 0.2, k4: -1.7 };
        let row = p.jacobian_row(0.9);
        let base = p.as_array();
        for k in 0..4 {
            let mut hi = base;
            let mut lo = base;
            hi[k] += 1e-6;
            lo[k] -= 1e-6;
            let fd = (LogisticParams::from_array(hi).apply(0.9) - LogisticParams::from_array(lo).apply(0.9)) / 2e-6;
            assert!((fd - row[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn handles_negative_correlation_and_tanh() {
        let preds = grid(40, -3.0, 3.0);
        let neg: Vec<f64> = preds.iter().map(|s| 10.0 - 2.0 * (s * 1.3).tanh()).collect();
        let (r, fit) = plcc(&preds, &neg).unwrap();
        assert!(!fit.fallback);
        assert!(r > 0.999999);

        let tanh: Vec<f64> = preds.iter().map(|s| s.tanh()).collect();
        let raw = pearson(&preds, &tanh).unwrap();
        let (mapped, _) = plcc(&preds, &tanh).unwrap();
        assert!(mapped > raw);
    }

    #[test]
    fn linear_data_is_not_degraded() {
        // the least-squares optimum sits in the linear limit, so the fit runs
        // out of iterations and the identity fallback keeps raw Pearson
        let mut rng = SeededRng::new(3);
        let preds: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let gts: Vec<f64> = preds.iter().map(|p| 2.0 * p + 1.0 + 0.3 * rng.normal()).collect();
        let raw = pearson(&preds, &gts).unwrap();
        let (mapped, fit) = plcc(&preds, &gts).unwrap();
        assert!(fit.converged != fit.fallback);
        assert!(mapped >= raw - 1e-9, "{mapped} < {raw}");
    }

    #[test]
    fn converged_fit_beats_raw_pearson() {
        let mut rng = SeededRng::new(8);
        for _ in 0..5 {
            let preds: Vec<f64> = (0..80).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let gts: Vec<f64> = preds.iter().map(|&p| 1.0 / (1.0 + (-2.0 * p).exp()) + 0.05 * rng.normal()).collect();
            let raw = pearson(&preds, &gts).unwrap();
            let (mapped, fit) = plcc(&preds, &gts).unwrap();
            assert!(fit.converged);
            assert!(mapped >= raw - 1e-9);
        }
    }

    #[test]
    fn independent_noise_is_uncorrelated() {
        let mut rng = SeededRng::new(21);
        let preds: Vec<f64> = (0..1000).map(|_| rng.normal()).collect();
        let gts: Vec<f64> = (0..1000).map(|_| rng.normal()).collect();
        let (r, _) = plcc(&preds, &gts).unwrap();
        assert!(r.abs() < 0.15);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(logistic_fit(&[1.0; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).is_err());
        assert!(logistic_fit(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).is_err());
    }
}
