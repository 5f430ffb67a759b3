//! Adaptive feature fusion.
//!
//! The three scale features are stacked into a `3 x D` tensor (rows ordered
//! 0.5x, 1.0x, 1.5x). Every row goes through the same `D -> h -> D` stack
//! (linear, ReLU, linear). A softmax over the three rows of each channel
//! turns the logits into per-channel scale weights, and the fused feature is
//! `F[c] = sum_r A_r[c] * x_r[c]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{affine_forward, Matrix, ParamBlocks, SeededRng};

pub const SCALES: usize = 3;
pub const DEFAULT_HIDDEN: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl AffParams {
    /// Xavier-uniform weights, zero biases: initial logits are small, so the
    /// block starts close to an equal-weight average.
    pub fn init(dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        Self {
            w1: Matrix::xavier_uniform(hidden, dim, rng),
            b1: vec![0.0; hidden],
            w2: Matrix::xavier_uniform(dim, hidden, rng),
            b2: vec![0.0; dim],
        }
    }

    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden, dim),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(dim, hidden),
            b2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (h, d) = (self.w1.rows(), self.w1.cols());
        if self.b1.len() != h || self.w2.rows() != d || self.w2.cols() != h || self.b2.len() != d {
            return Err(Error::shape(
                "AffParams",
                format!("W1 {h}x{d}, b1 {h}, W2 {d}x{h}, b2 {d}"),
                format!(
                    "b1 {}, W2 {}x{}, b2 {}",
                    self.b1.len(),
                    self.w2.rows(),
                    self.w2.cols(),
                    self.b2.len()
                ),
            ));
        }
        Ok(())
    }
}

impl ParamBlocks for AffParams {
    fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("aff.w1", self.w1.data()),
            ("aff.b1", &self.b1),
            ("aff.w2", self.w2.data()),
            ("aff.b2", &self.b2),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("aff.w1", self.w1.data_mut()),
            ("aff.b1", &mut self.b1),
            ("aff.w2", self.w2.data_mut()),
            ("aff.b2", &mut self.b2),
        ]
    }
}

/// Intermediate values of one forward pass, indexed by scale row.
#[derive(Debug, Clone)]
pub struct AffCache {
    pub inputs: [Vec<f64>; SCALES],
    pub pre_hidden: [Vec<f64>; SCALES],
    pub hidden: [Vec<f64>; SCALES],
    pub logits: [Vec<f64>; SCALES],
    /// `A^{0.5}`, `A^{1.0}`, `A^{1.5}`.
    pub weights: [Vec<f64>; SCALES],
}

#[derive(Debug, Clone)]
pub struct AffGrads {
    pub params: AffParams,
    pub d_05: Vec<f64>,
    pub d_10: Vec<f64>,
    pub d_15: Vec<f64>,
}

pub fn aff_forward(f_05: &[f64], f_10: &[f64], f_15: &[f64], p: &AffParams) -> Result<(Vec<f64>, AffCache)> {
    let d = f_10.len();
    if f_05.len() != d || f_15.len() != d {
        return Err(Error::shape("aff_forward inputs", d, format!("{} / {}", f_05.len(), f_15.len())));
    }
    if p.dim() != d {
        return Err(Error::DimMismatch {
            expected: p.dim(),
            actual: d,
        });
    }
    p.validate()?;

    let inputs = [f_05.to_vec(), f_10.to_vec(), f_15.to_vec()];
    let mut pre_hidden: [Vec<f64>; SCALES] = Default::default();
    let mut hidden: [Vec<f64>; SCALES] = Default::default();
    let mut logits: [Vec<f64>; SCALES] = Default::default();
    for r in 0..SCALES {
        pre_hidden[r] = affine_forward(&p.w1, &p.b1, &inputs[r])?;
        hidden[r] = pre_hidden[r].iter().map(|&v| v.max(0.0)).collect();
        logits[r] = affine_forward(&p.w2, &p.b2, &hidden[r])?;
    }

    let mut weights: [Vec<f64>; SCALES] = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    let mut fused = vec![0.0; d];
    for c in 0..d {
        let m = logits[0][c].max(logits[1][c]).max(logits[2][c]);
        let e = [
            (logits[0][c] - m).exp(),
            (logits[1][c] - m).exp(),
            (logits[2][c] - m).exp(),
        ];
        let z = e[0] + e[1] + e[2];
        let mut acc = 0.0;
        for r in 0..SCALES {
            let a = e[r] / z;
            weights[r][c] = a;
            acc += a * inputs[r][c];
        }
        fused[c] = acc;
        let total = weights[0][c] + weights[1][c] + weights[2][c];
        if !((total - 1.0).abs() <= 1e-12) {
            return Err(Error::Numeric(format!("scale weights of channel {c} sum to {total}")));
        }
    }

    Ok((
        fused,
        AffCache {
            inputs,
            pre_hidden,
            hidden,
            logits,
            weights,
        },
    ))
}

/// Gradients of a downstream scalar given `dF` = d loss / d fused.
pub fn aff_backward(cache: &AffCache, p: &AffParams, d_fused: &[f64]) -> Result<AffGrads> {
    let d = p.dim();
    let h = p.hidden();
    if d_fused.len() != d || cache.inputs[0].len() != d || cache.hidden[0].len() != h {
        return Err(Error::shape("aff_backward", d, d_fused.len()));
    }
    let mut grads = AffParams::zeros(d, h);
    let mut d_inputs: [Vec<f64>; SCALES] = Default::default();

    // fused = sum_r a_r * x_r, then softmax Jacobian per channel
    let mut d_logits: [Vec<f64>; SCALES] = [vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    for c in 0..d {
        let g = d_fused[c];
        let da = [
            g * cache.inputs[0][c],
            g * cache.inputs[1][c],
            g * cache.inputs[2][c],
        ];
        let a = [cache.weights[0][c], cache.weights[1][c], cache.weights[2][c]];
        let mean = a[0] * da[0] + a[1] * da[1] + a[2] * da[2];
        for r in 0..SCALES {
            d_logits[r][c] = a[r] * (da[r] - mean);
        }
    }

    for r in 0..SCALES {
        // logits = W2 hidden + b2, shared across rows
        grads.w2.add_outer(&d_logits[r], &cache.hidden[r], 1.0);
        for (gb, dl) in grads.b2.iter_mut().zip(&d_logits[r]) {
            *gb += dl;
        }
        let mut d_pre = p.w2.matvec_t(&d_logits[r])?;
        for (dp, &pre) in d_pre.iter_mut().zip(&cache.pre_hidden[r]) {
            if pre <= 0.0 {
                *dp = 0.0;
            }
        }
        grads.w1.add_outer(&d_pre, &cache.inputs[r], 1.0);
        for (gb, dp) in grads.b1.iter_mut().zip(&d_pre) {
            *gb += dp;
        }
        let mut dx = p.w1.matvec_t(&d_pre)?;
        for c in 0..d {
            dx[c] += cache.weights[r][c] * d_fused[c];
        }
        d_inputs[r] = dx;
    }

    let [d_05, d_10, d_15] = d_inputs;
    Ok(AffGrads {
        params: grads,
        d_05,
        d_10,
        d_15,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{dot, finite_diff_check, softmax, DEFAULT_EPS};

    fn random_vec(rng: &mut SeededRng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.normal()).collect()
    }

    /// Larger-than-default weights so the softmax is far from uniform.
    fn random_params(rng: &mut SeededRng, d: usize, h: usize) -> AffParams {
        let mut p = AffParams::init(d, h, rng);
        p.w1.data_mut().iter_mut().for_each(|w| *w *= 2.0);
        p.w2.data_mut().iter_mut().for_each(|w| *w *= 3.0);
        p.b1.iter_mut().for_each(|b| *b = 0.1 * rng.normal());
        p.b2.iter_mut().for_each(|b| *b = 0.1 * rng.normal());
        p
    }

    /// Straightforward second implementation, loop by loop.
    fn naive_forward(x: [&[f64]; 3], p: &AffParams) -> (Vec<f64>, Vec<[f64; 3]>) {
        let (d, h) = (p.dim(), p.hidden());
        let mut logits = vec![[0.0; 3]; d];
        for r in 0..3 {
            let mut hid = vec![0.0; h];
            for j in 0..h {
                let mut s = p.b1[j];
                for c in 0..d {
                    s += p.w1.get(j, c) * x[r][c];
                }
                hid[j] = if s > 0.0 { s } else { 0.0 };
            }
            for c in 0..d {
                let mut s = p.b2[c];
                for j in 0..h {
                    s += p.w2.get(c, j) * hid[j];
                }
                logits[c][r] = s;
            }
        }
        let mut fused = vec![0.0; d];
        let mut weights = vec![[0.0; 3]; d];
        for c in 0..d {
            let a = softmax(&logits[c]);
            for r in 0..3 {
                weights[c][r] = a[r];
                fused[c] += a[r] * x[r][c];
            }
        }
        (fused, weights)
    }

    #[test]
    fn equal_inputs_reproduce_input() {
        let mut rng = SeededRng::new(1);
        let p = random_params(&mut rng, 10, 6);
        let f = random_vec(&mut rng, 10);
        let (fused, cache) = aff_forward(&f, &f, &f, &p).unwrap();
        for c in 0..10 {
            assert!((fused[c] - f[c]).abs() <= 1e-12);
            for r in 0..3 {
                assert_eq!(cache.weights[r][c], 1.0 / 3.0);
            }
        }
    }

    #[test]
    fn matches_naive_implementation() {
        let mut rng = SeededRng::new(2);
        let p = random_params(&mut rng, 9, 7);
        let x: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 9)).collect();
        let (fused, cache) = aff_forward(&x[0], &x[1], &x[2], &p).unwrap();
        let (expect, weights) = naive_forward([&x[0], &x[1], &x[2]], &p);
        for c in 0..9 {
            assert!((fused[c] - expect[c]).abs() < 1e-12);
            for r in 0..3 {
                assert!((cache.weights[r][c] - weights[c][r]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rows_permute_with_inputs() {
        let mut rng = SeededRng::new(3);
        let p = random_params(&mut rng, 8, 5);
        let x: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 8)).collect();
        let (f1, c1) = aff_forward(&x[0], &x[1], &x[2], &p).unwrap();
        let (f2, c2) = aff_forward(&x[2], &x[0], &x[1], &p).unwrap();
        for c in 0..8 {
            assert!((f1[c] - f2[c]).abs() < 1e-12);
            assert_eq!(c1.weights[0][c], c2.weights[1][c]);
            assert_eq!(c1.weights[1][c], c2.weights[2][c]);
            assert_eq!(c1.weights[2][c], c2.weights[0][c]);
        }
    }

    #[test]
    fn dimension_errors() {
        let p = AffParams::zeros(4, 3);
        assert!(aff_forward(&[0.0; 4], &[0.0; 4], &[0.0; 3], &p).is_err());
        assert!(matches!(
            aff_forward(&[0.0; 5], &[0.0; 5], &[0.0; 5], &p),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = SeededRng::new(4);
        let p = random_params(&mut rng, 6, 4);
        let x: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 6)).collect();
        let (_, cache) = aff_forward(&x[0], &x[1], &x[2], &p).unwrap();
        let g = aff_backward(&cache, &p, &[0.0; 6]).unwrap();
        for (_, b) in g.params.blocks() {
            assert!(b.iter().all(|&v| v == 0.0));
        }
        assert!(g.d_05.iter().chain(&g.d_10).chain(&g.d_15).all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..3 {
            let mut rng = SeededRng::new(100 + seed);
            let (d, h) = (7, 5);
            let p = random_params(&mut rng, d, h);
            let x: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, d)).collect();
            let up = random_vec(&mut rng, d);
            let (_, cache) = aff_forward(&x[0], &x[1], &x[2], &p).unwrap();
            let g = aff_backward(&cache, &p, &up).unwrap();

            let loss = |p: &AffParams, x: &[Vec<f64>]| {
                let (f, _) = aff_forward(&x[0], &x[1], &x[2], p).unwrap();
                dot(&f, &up)
            };
            let analytic = g.params.blocks();
            for (k, (name, grad)) in analytic.iter().enumerate() {
                let base = p.blocks()[k].1.to_vec();
                let err = finite_diff_check(
                    |v| {
                        let mut q = p.clone();
                        q.blocks_mut()[k].1.copy_from_slice(v);
                        loss(&q, &x)
                    },
                    &base,
                    grad,
                    DEFAULT_EPS,
                )
                .unwrap();
                assert!(err < 1e-6, "{name}: {err}");
            }
            for (r, grad) in [&g.d_05, &g.d_10, &g.d_15].into_iter().enumerate() {
                let err = finite_diff_check(
                    |v| {
                        let mut xs = x.clone();
                        xs[r] = v.to_vec();
                        loss(&p, &xs)
                    },
                    &x[r],
                    grad,
                    DEFAULT_EPS,
                )
                .unwrap();
                assert!(err < 1e-6, "input {r}: {err}");
            }
        }
    }

    #[test]
    fn identical_inputs_gradient_split() {
        // Equal rows: direct mixing term is dF/3 per input, plus weight-path terms.
        let mut rng = SeededRng::new(9);
        let p = random_params(&mut rng, 5, 4);
        let f = random_vec(&mut rng, 5);
        let up = random_vec(&mut rng, 5);
        let (_, cache) = aff_forward(&f, &f, &f, &p).unwrap();
        let g = aff_backward(&cache, &p, &up).unwrap();
        // Weight-path: da_r = up * f identical for every row, so the softmax
        // Jacobian annihilates it and only the direct term remains.
        for c in 0..5 {
            for d in [&g.d_05, &g.d_10, &g.d_15] {
                assert!((d[c] - up[c] / 3.0).abs() < 1e-12);
            }
        }
        let sum: Vec<f64> = (0..5).map(|c| g.d_05[c] + g.d_10[c] + g.d_15[c]).collect();
        let err = finite_diff_check(
            |v| {
                let (fused, _) = aff_forward(v, v, v, &p).unwrap();
                dot(&fused, &up)
            },
            &f,
            &sum,
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(err < 1e-6);
    }
}
