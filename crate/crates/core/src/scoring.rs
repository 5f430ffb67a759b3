//! Regression heads, consistency similarity and the full model mapping
//! `(text, 0.5x, 1.0x, 1.5x) -> (S_C, S_V, S_A)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aff::{aff_backward, aff_forward, AffCache, AffParams};
use crate::dataio::FeatureBundle;
use crate::error::{Error, Result};
use crate::tensor::{affine_forward, dot, norm2, Matrix, ParamBlocks, SeededRng};

pub const HEAD_HIDDEN: usize = 256;

/// Two fully connected layers with a ReLU between them: `D -> 256 -> 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl MlpParams {
    pub fn init(dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        Self {
            w1: Matrix::xavier_uniform(hidden, dim, rng),
            b1: vec![0.0; hidden],
            w2: Matrix::xavier_uniform(1, hidden, rng),
            b2: vec![0.0],
        }
    }

    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden, dim),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(1, hidden),
            b2: vec![0.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }

    fn blocks_named(&self, names: [&'static str; 4]) -> Vec<(&'static str, &[f64])> {
        vec![
            (names[0], self.w1.data()),
            (names[1], &self.b1[..]),
            (names[2], self.w2.data()),
            (names[3], &self.b2[..]),
        ]
    }

    fn blocks_named_mut(&mut self, names: [&'static str; 4]) -> Vec<(&'static str, &mut [f64])> {
        vec![
            (names[0], self.w1.data_mut()),
            (names[1], &mut self.b1[..]),
            (names[2], self.w2.data_mut()),
            (names[3], &mut self.b2[..]),
        ]
    }
}

impl ParamBlocks for MlpParams {
    fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        self.blocks_named(["mlp.w1", "mlp.b1", "mlp.w2", "mlp.b2"])
    }

    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        self.blocks_named_mut(["mlp.w1", "mlp.b1", "mlp.w2", "mlp.b2"])
    }
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub pre_hidden: Vec<f64>,
    pub hidden: Vec<f64>,
}

pub fn mlp_forward(p: &MlpParams, x: &[f64]) -> Result<(f64, MlpCache)> {
    if x.len() != p.dim() {
        return Err(Error::DimMismatch {
            expected: p.dim(),
            actual: x.len(),
        });
    }
    let pre_hidden = affine_forward(&p.w1, &p.b1, x)?;
    let hidden: Vec<f64> = pre_hidden.iter().map(|&v| v.max(0.0)).collect();
    let y = affine_forward(&p.w2, &p.b2, &hidden)?[0];
    Ok((
        y,
        MlpCache {
            input: x.to_vec(),
            pre_hidden,
            hidden,
        },
    ))
}

pub fn mlp_backward(cache: &MlpCache, p: &MlpParams, dy: f64) -> Result<(MlpParams, Vec<f64>)> {
    if cache.input.len() != p.dim() || cache.hidden.len() != p.hidden() {
        return Err(Error::shape(
            "mlp_backward cache",
            format!("{}/{}", p.dim(), p.hidden()),
            format!("{}/{}", cache.input.len(), cache.hidden.len()),
        ));
    }
    let mut g = MlpParams::zeros(p.dim(), p.hidden());
    g.w2.add_outer(&[dy], &cache.hidden, 1.0);
    g.b2[0] = dy;
    let d_pre: Vec<f64> = p
        .w2
        .row(0)
        .iter()
        .zip(&cache.pre_hidden)
        .map(|(&w, &pre)| if pre > 0.0 { w * dy } else { 0.0 })
        .collect();
    g.w1.add_outer(&d_pre, &cache.input, 1.0);
    g.b1.copy_from_slice(&d_pre);
    let dx = p.w1.matvec_t(&d_pre)?;
    Ok((g, dx))
}

/// How the consistency score compares fused image and text features.
/// Distances are negated so that higher always means more consistent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Cosine,
    Euclidean,
    Manhattan,
}

impl Similarity {
    pub const ALL: [Similarity; 3] = [Similarity::Cosine, Similarity::Euclidean, Similarity::Manhattan];

    pub fn name(self) -> &'static str {
        match self {
            Similarity::Cosine => "cosine",
            Similarity::Euclidean => "euclidean",
            Similarity::Manhattan => "manhattan",
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Similarity::Cosine),
            "euclidean" => Ok(Similarity::Euclidean),
            "manhattan" => Ok(Similarity::Manhattan),
            other => Err(Error::InvalidArgument(format!("unknown similarity {other:?}"))),
        }
    }
}

/// Score and its gradient with respect to `f_img`.
pub fn similarity_score(f_img: &[f64], f_text: &[f64], kind: Similarity) -> Result<(f64, Vec<f64>)> {
    if f_img.len() != f_text.len() {
        return Err(Error::shape("similarity_score", f_text.len(), f_img.len()));
    }
    match kind {
        Similarity::Cosine => {
            let (na, nt) = (norm2(f_img), norm2(f_text));
            if !(na > 0.0 && nt > 0.0) {
                return Err(Error::Numeric("cosine similarity of a zero-norm vector".into()));
            }
            let s = dot(f_img, f_text) / (na * nt);
            let grad = f_img
                .iter()
                .zip(f_text)
                .map(|(a, t)| t / (na * nt) - s * a / (na * na))
                .collect();
            Ok((s, grad))
        }
        Similarity::Euclidean => {
            let diff: Vec<f64> = f_img.iter().zip(f_text).map(|(a, t)| a - t).collect();
            let dist = norm2(&diff);
            let grad = if dist > 0.0 {
                diff.iter().map(|d| -d / dist).collect()
            } else {
                vec![0.0; diff.len()]
            };
            Ok((-dist, grad))
        }
        Similarity::Manhattan => {
            let mut s = 0.0;
            let grad = f_img
                .iter()
                .zip(f_text)
                .map(|(a, t)| {
                    let d = a - t;
                    s -= d.abs();
                    if d > 0.0 {
                        -1.0
                    } else if d < 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok((s, grad))
        }
    }
}

/// All trainable state plus the (fixed) similarity kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub aff: AffParams,
    pub head_v: MlpParams,
    pub head_a: MlpParams,
    pub similarity: Similarity,
}

impl ModelParams {
    pub fn init(dim: usize, aff_hidden: usize, similarity: Similarity, rng: &mut SeededRng) -> Self {
        Self {
            aff: AffParams::init(dim, aff_hidden, rng),
            head_v: MlpParams::init(dim, HEAD_HIDDEN, rng),
            head_a: MlpParams::init(dim, HEAD_HIDDEN, rng),
            similarity,
        }
    }

    /// Zero tensors with the same shapes; used for gradients and moments.
    pub fn zeros_like(&self) -> Self {
        Self {
            aff: AffParams::zeros(self.aff.dim(), self.aff.hidden()),
            head_v: MlpParams::zeros(self.head_v.dim(), self.head_v.hidden()),
            head_a: MlpParams::zeros(self.head_a.dim(), self.head_a.hidden()),
            similarity: self.similarity,
        }
    }

    pub fn dim(&self) -> usize {
        self.aff.dim()
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        let a = self.blocks();
        let b = other.blocks();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0 && x.1.len() == y.1.len())
    }

    pub fn validate(&self) -> Result<()> {
        self.aff.validate()?;
        for head in [&self.head_v, &self.head_a] {
            if head.dim() != self.dim()
                || head.b1.len() != head.hidden()
                || head.w2.rows() != 1
                || head.w2.cols() != head.hidden()
                || head.b2.len() != 1
            {
                return Err(Error::shape("ModelParams head", format!("{}->h->1", self.dim()), head.dim()));
            }
        }
        Ok(())
    }
}

impl ParamBlocks for ModelParams {
    fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        let mut v = self.aff.blocks();
        v.extend(self.head_v.blocks_named(["head_v.w1", "head_v.b1", "head_v.w2", "head_v.b2"]));
        v.extend(self.head_a.blocks_named(["head_a.w1", "head_a.b1", "head_a.w2", "head_a.b2"]));
        v
    }

    fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut v = self.aff.blocks_mut();
        v.extend(self.head_v.blocks_named_mut(["head_v.w1", "head_v.b1", "head_v.w2", "head_v.b2"]));
        v.extend(self.head_a.blocks_named_mut(["head_a.w1", "head_a.b1", "head_a.w2", "head_a.b2"]));
        v
    }
}

/// Structural ablations of the fusion path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    /// false: all three fusion inputs are the original-scale feature.
    pub use_msi: bool,
    /// false: the fused feature is the average of the scale features
    /// (or their plain sum when `plain_sum` is set) instead of AFF.
    pub use_aff: bool,
    pub plain_sum: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self {
            use_msi: true,
            use_aff: true,
            plain_sum: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub s_c: f64,
    pub s_v: f64,
    pub s_a: f64,
}

#[derive(Debug, Clone)]
pub enum FusionCache {
    Adaptive(AffCache),
    Fixed,
}

#[derive(Debug, Clone)]
pub struct ModelCache {
    pub fused: Vec<f64>,
    pub fusion: FusionCache,
    pub head_v: MlpCache,
    pub head_a: MlpCache,
    /// d S_C / d fused.
    pub sim_grad: Vec<f64>,
}

/// Upstream gradients of the three scores.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScoreGrads {
    pub d_c: f64,
    pub d_v: f64,
    pub d_a: f64,
}

pub fn model_forward(features: &FeatureBundle, p: &ModelParams) -> Result<(ScoreTriple, ModelCache)> {
    forward_with(features, p, AblationFlags::default())
}

pub fn forward_with(features: &FeatureBundle, p: &ModelParams, flags: AblationFlags) -> Result<(ScoreTriple, ModelCache)> {
    if features.dim() != p.dim() {
        return Err(Error::DimMismatch {
            expected: p.dim(),
            actual: features.dim(),
        });
    }
    let (f_05, f_15) = if flags.use_msi {
        (&features.f_05, &features.f_15)
    } else {
        (&features.f_10, &features.f_10)
    };
    let (fused, fusion) = if flags.use_aff {
        let (fused, cache) = aff_forward(f_05, &features.f_10, f_15, &p.aff)?;
        (fused, FusionCache::Adaptive(cache))
    } else {
        let scale = if flags.plain_sum { 1.0 } else { 1.0 / 3.0 };
        let fused = f_05
            .iter()
            .zip(&features.f_10)
            .zip(f_15)
            .map(|((a, b), c)| (a + b + c) * scale)
            .collect();
        (fused, FusionCache::Fixed)
    };
    let (s_v, head_v) = mlp_forward(&p.head_v, &fused)?;
    let (s_a, head_a) = mlp_forward(&p.head_a, &fused)?;
    let (s_c, sim_grad) = similarity_score(&fused, &features.f_text, p.similarity)?;
    Ok((
        ScoreTriple { s_c, s_v, s_a },
        ModelCache {
            fused,
            fusion,
            head_v,
            head_a,
            sim_grad,
        },
    ))
}

/// Parameter gradients for one sample.
pub fn model_backward(cache: &ModelCache, p: &ModelParams, d: ScoreGrads) -> Result<ModelParams> {
    let mut grads = p.zeros_like();
    let mut d_fused: Vec<f64> = cache.sim_grad.iter().map(|g| g * d.d_c).collect();
    if d.d_v != 0.0 {
        let (g, dx) = mlp_backward(&cache.head_v, &p.head_v, d.d_v)?;
        grads.head_v = g;
        d_fused.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
    }
    if d.d_a != 0.0 {
        let (g, dx) = mlp_backward(&cache.head_a, &p.head_a, d.d_a)?;
        grads.head_a = g;
        d_fused.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
    }
    if let FusionCache::Adaptive(aff_cache) = &cache.fusion {
        grads.aff = aff_backward(aff_cache, &p.aff, &d_fused)?.params;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{finite_diff_check, DEFAULT_EPS};

    fn rand_vec(rng: &mut SeededRng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.normal()).collect()
    }

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = norm2(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn mlp_zero_params_and_sum() {
        let p = MlpParams::zeros(4, 6);
        assert_eq!(mlp_forward(&p, &[1.0, -2.0, 3.0, 0.5]).unwrap().0, 0.0);

        let mut p = MlpParams::zeros(4, 6);
        for i in 0..4 {
            p.w1.set(i, i, 1.0);
        }
        p.w2.data_mut().iter_mut().for_each(|w| *w = 1.0);
        let y = mlp_forward(&p, &[1.0, 2.0, 0.0, 4.5]).unwrap().0;
        assert_eq!(y, 7.5);
    }

    #[test]
    fn mlp_matches_loops() {
        let mut rng = SeededRng::new(3);
        let p = MlpParams::init(6, 5, &mut rng);
        let x = rand_vec(&mut rng, 6);
        let mut y = p.b2[0];
        for j in 0..5 {
            let mut s = p.b1[j];
            for i in 0..6 {
                s += p.w1.get(j, i) * x[i];
            }
            y += p.w2.get(0, j) * s.max(0.0);
        }
        assert!((mlp_forward(&p, &x).unwrap().0 - y).abs() < 1e-14);
        assert!(matches!(mlp_forward(&p, &x[..5]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn mlp_gradients() {
        let mut rng = SeededRng::new(5);
        let mut p = MlpParams::init(6, 8, &mut rng);
        p.b1.iter_mut().for_each(|b| *b = 0.2 * rng.normal());
        let x = rand_vec(&mut rng, 6);
        let (_, cache) = mlp_forward(&p, &x).unwrap();
        let (g, dx) = mlp_backward(&cache, &p, 1.3).unwrap();
        let grads = g.blocks();
        for k in 0..4 {
            let err = finite_diff_check(
                |v| {
                    let mut q = p.clone();
                    q.blocks_mut()[k].1.copy_from_slice(v);
                    1.3 * mlp_forward(&q, &x).unwrap().0
                },
                p.blocks()[k].1,
                grads[k].1,
                DEFAULT_EPS,
            )
            .unwrap();
            assert!(err < 1e-6, "{}: {err}", grads[k].0);
        }
        let err = finite_diff_check(|v| 1.3 * mlp_forward(&p, v).unwrap().0, &x, &dx, DEFAULT_EPS).unwrap();
        assert!(err < 1e-6);

        let (g0, dx0) = mlp_backward(&cache, &p, 0.0).unwrap();
        assert!(g0.blocks().iter().all(|(_, b)| b.iter().all(|&v| v == 0.0)));
        assert!(dx0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_relu_blocks_gradient() {
        let mut rng = SeededRng::new(6);
        let mut p = MlpParams::init(4, 5, &mut rng);
        p.b1.iter_mut().for_each(|b| *b = -100.0);
        let (_, cache) = mlp_forward(&p, &[0.3, -0.2, 0.1, 0.4]).unwrap();
        let (g, dx) = mlp_backward(&cache, &p, 2.0).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        assert!(g.w1.data().iter().all(|&v| v == 0.0));
        assert!(g.b1.iter().all(|&v| v == 0.0));
        assert!(g.w2.data().iter().all(|&v| v == 0.0));
        assert_eq!(g.b2[0], 2.0);
    }

    #[test]
    fn similarity_cases() {
        let a = [0.6, 0.8, 0.0];
        assert!((similarity_score(&a, &a, Similarity::Cosine).unwrap().0 - 1.0).abs() < 1e-15);
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        assert!(similarity_score(&e1, &e2, Similarity::Cosine).unwrap().0.abs() < 1e-15);
        let (s, _) = similarity_score(&e1, &e2, Similarity::Euclidean).unwrap();
        assert!((s + 2f64.sqrt()).abs() < 1e-15);
        let t = [1.0, -2.0, 0.5];
        let neg: Vec<f64> = t.iter().map(|x| -x).collect();
        assert!((similarity_score(&neg, &t, Similarity::Cosine).unwrap().0 + 1.0).abs() < 1e-15);
        assert_eq!(similarity_score(&neg, &t, Similarity::Manhattan).unwrap().0, -7.0);
        assert!(similarity_score(&[0.0, 0.0], &e1, Similarity::Cosine).is_err());
    }

    #[test]
    fn similarity_gradients() {
        let mut rng = SeededRng::new(12);
        let a = rand_vec(&mut rng, 7);
        let t = rand_vec(&mut rng, 7);
        for kind in Similarity::ALL {
            let (_, g) = similarity_score(&a, &t, kind).unwrap();
            let err = finite_diff_check(|v| similarity_score(v, &t, kind).unwrap().0, &a, &g, DEFAULT_EPS).unwrap();
            assert!(err < 1e-6, "{kind}: {err}");
        }
    }

    #[test]
    fn cosine_scale_invariance() {
        let mut rng = SeededRng::new(13);
        let a = rand_vec(&mut rng, 9);
        let t = rand_vec(&mut rng, 9);
        let s = similarity_score(&a, &t, Similarity::Cosine).unwrap().0;
        let a2: Vec<f64> = a.iter().map(|x| x * 3.7).collect();
        let t2: Vec<f64> = t.iter().map(|x| x * 3.7).collect();
        assert!((similarity_score(&a2, &t, Similarity::Cosine).unwrap().0 - s).abs() < 1e-12);
        assert!((similarity_score(&a, &t2, Similarity::Cosine).unwrap().0 - s).abs() < 1e-12);
    }

    #[test]
    fn model_forward_special_cases() {
        let mut rng = SeededRng::new(14);
        let d = 8;
        let p = ModelParams::init(d, 6, Similarity::Cosine, &mut rng);
        let f = unit(rand_vec(&mut rng, d));
        let bundle = FeatureBundle::new(f.clone(), f.clone(), f.clone(), f.clone()).unwrap();
        let (s, _) = model_forward(&bundle, &p).unwrap();
        assert!((s.s_c - 1.0).abs() < 1e-12);

        let mut z = p.clone();
        z.head_v = MlpParams::zeros(d, HEAD_HIDDEN);
        z.head_a = MlpParams::zeros(d, HEAD_HIDDEN);
        let other = FeatureBundle::new(rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d)).unwrap();
        let (s, _) = model_forward(&other, &z).unwrap();
        assert_eq!((s.s_v, s.s_a), (0.0, 0.0));

        let wrong = FeatureBundle::new(vec![1.0; 4], vec![1.0; 4], vec![1.0; 4], vec![1.0; 4]).unwrap();
        assert!(matches!(model_forward(&wrong, &p), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn model_forward_composes_components() {
        let mut rng = SeededRng::new(15);
        let d = 6;
        let p = ModelParams::init(d, 5, Similarity::Cosine, &mut rng);
        let b = FeatureBundle::new(rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d)).unwrap();
        let (s, _) = model_forward(&b, &p).unwrap();
        let (fused, _) = aff_forward(&b.f_05, &b.f_10, &b.f_15, &p.aff).unwrap();
        assert_eq!(s.s_v, mlp_forward(&p.head_v, &fused).unwrap().0);
        assert_eq!(s.s_a, mlp_forward(&p.head_a, &fused).unwrap().0);
        assert_eq!(s.s_c, similarity_score(&fused, &b.f_text, Similarity::Cosine).unwrap().0);

        // zeroing the 0.5x feature changes the outputs (its weight is positive)
        let mut b0 = b.clone();
        b0.f_05 = vec![0.0; d];
        let (s0, _) = model_forward(&b0, &p).unwrap();
        assert_ne!(s0, s);
    }

    #[test]
    fn ablation_paths() {
        let mut rng = SeededRng::new(16);
        let d = 6;
        let p = ModelParams::init(d, 5, Similarity::Cosine, &mut rng);
        let f = rand_vec(&mut rng, d);
        let b = FeatureBundle::new(rand_vec(&mut rng, d), f.clone(), f.clone(), f.clone()).unwrap();
        let no_aff = AblationFlags {
            use_aff: false,
            ..Default::default()
        };
        let (_, cache) = forward_with(&b, &p, no_aff).unwrap();
        for c in 0..d {
            assert!((cache.fused[c] - f[c]).abs() < 1e-15);
        }

        let b = FeatureBundle::new(rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d)).unwrap();
        let no_msi = AblationFlags {
            use_msi: false,
            ..Default::default()
        };
        let (_, cache) = forward_with(&b, &p, no_msi).unwrap();
        let FusionCache::Adaptive(aff) = cache.fusion else {
            panic!("expected adaptive fusion")
        };
        for r in 0..3 {
            assert!(aff.weights[r].iter().all(|&w| w == 1.0 / 3.0));
        }
    }

    #[test]
    fn model_backward_matches_finite_differences() {
        let mut rng = SeededRng::new(17);
        let d = 5;
        for sim in Similarity::ALL {
            let mut p = ModelParams::init(d, 4, sim, &mut rng);
            p.head_v.b1.iter_mut().for_each(|b| *b = 0.1);
            p.head_a.b1.iter_mut().for_each(|b| *b = 0.1);
            let b = FeatureBundle::new(rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d), rand_vec(&mut rng, d)).unwrap();
            let up = ScoreGrads {
                d_c: 0.7,
                d_v: -1.1,
                d_a: 0.4,
            };
            let objective = |q: &ModelParams| {
                let (s, _) = model_forward(&b, q).unwrap();
                up.d_c * s.s_c + up.d_v * s.s_v + up.d_a * s.s_a
            };
            let (_, cache) = model_forward(&b, &p).unwrap();
            let g = model_backward(&cache, &p, up).unwrap();
            let grads = g.blocks();
            for k in 0..grads.len() {
                let err = finite_diff_check(
                    |v| {
                        let mut q = p.clone();
                        q.blocks_mut()[k].1.copy_from_slice(v);
                        objective(&q)
                    },
                    p.blocks()[k].1,
                    grads[k].1,
                    DEFAULT_EPS,
                )
                .unwrap();
                assert!(err < 1e-5, "{sim} {}: {err}", grads[k].0);
            }
        }
    }
}
