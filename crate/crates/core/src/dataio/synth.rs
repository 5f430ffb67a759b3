//! Planted synthetic dataset.
//!
//! Each sample has a latent `z ~ N(0, I_8)`. The original-scale feature is
//! `f_10 = A z + sigma * eps` with `A` scaled so that `f_10` has roughly unit
//! norm, the 0.5x feature a circular three-tap blur of
//! it and the 1.5x feature the matching unsharp mask (`2 f - blur f`), each
//! with its own noise. The blur and the unsharp mask average back to `f_10`,
//! so an equal-weight fusion sees the original scale.
//!
//! Quality and authenticity are `1 + 4 * sigmoid(w . z)` for two fixed
//! directions. The text feature is a unit vector at a random angle `theta` in
//! `[0, pi/2]` from `f_10`, and `q_c = cos(theta)`.
//!
//! All stored values are rounded to f32 so the binary codec round-trips.

use super::{Dataset, FeatureBundle, Labels, Sample};
use crate::error::{Error, Result};
use crate::tensor::{dot, norm2, SeededRng};

pub const LATENT_DIM: usize = 8;

/// Standard deviation of `w . z`, small enough that the sigmoid stays
/// close to linear.
const SCORE_SCALE: f64 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub generators: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 512,
            dim: 64,
            noise_sigma: 0.01,
            generators: 4,
        }
    }
}

pub fn synth_generate(cfg: &SynthConfig, rng: &mut SeededRng) -> Result<Dataset> {
    synth_generate_with_latents(cfg, rng).map(|(ds, _)| ds)
}

/// Like [`synth_generate`], also returning each sample's latent vector.
pub fn synth_generate_with_latents(cfg: &SynthConfig, rng: &mut SeededRng) -> Result<(Dataset, Vec<[f64; LATENT_DIM]>)> {
    if cfg.n < 4 {
        return Err(Error::InvalidArgument(format!("n must be >= 4, got {}", cfg.n)));
    }
    if cfg.dim < 8 {
        return Err(Error::InvalidArgument(format!("dim must be >= 8, got {}", cfg.dim)));
    }
    if !(cfg.noise_sigma >= 0.0 && cfg.noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {}", cfg.noise_sigma)));
    }
    if cfg.generators == 0 {
        return Err(Error::InvalidArgument("need at least one generator".into()));
    }
    let d = cfg.dim;
    // E|A z|^2 = 1: unit-scale features, like normalized encoder embeddings
    let a_scale = 1.0 / ((LATENT_DIM * d) as f64).sqrt();
    let mixing: Vec<f64> = (0..d * LATENT_DIM).map(|_| rng.normal() * a_scale).collect();
    let mut direction = || {
        let w: Vec<f64> = (0..LATENT_DIM).map(|_| rng.normal()).collect();
        let n = norm2(&w);
        w.into_iter().map(|x| x * SCORE_SCALE / n).collect::<Vec<_>>()
    };
    let w_v = direction();
    let w_a = direction();

    let mut samples = Vec::with_capacity(cfg.n);
    let mut latents = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let mut z = [0.0; LATENT_DIM];
        z.iter_mut().for_each(|v| *v = rng.normal());

        let mut f_10: Vec<f64> = mixing
            .chunks_exact(LATENT_DIM)
            .map(|row| dot(row, &z) + cfg.noise_sigma * rng.normal())
            .collect();
        quantize(&mut f_10);
        let blurred = blur(&f_10);
        let mut f_05: Vec<f64> = blurred.iter().map(|b| b + cfg.noise_sigma * rng.normal()).collect();
        let mut f_15: Vec<f64> = f_10
            .iter()
            .zip(&blurred)
            .map(|(f, b)| 2.0 * f - b + cfg.noise_sigma * rng.normal())
            .collect();
        quantize(&mut f_05);
        quantize(&mut f_15);

        let theta = rng.uniform(0.0, std::f64::consts::FRAC_PI_2);
        let u: Vec<f64> = {
            let n = norm2(&f_10);
            f_10.iter().map(|x| x / n).collect()
        };
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let proj = dot(&v, &u);
        v.iter_mut().zip(&u).for_each(|(vi, ui)| *vi -= proj * ui);
        let vn = norm2(&v);
        let mut f_text: Vec<f64> = u
            .iter()
            .zip(&v)
            .map(|(ui, vi)| theta.cos() * ui + theta.sin() * vi / vn)
            .collect();
        quantize(&mut f_text);

        let score = |w: &[f64]| q32(1.0 + 4.0 / (1.0 + (-dot(w, &z)).exp()));
        samples.push(Sample {
            id: format!("s{i:05}"),
            prompt: format!("planted prompt {i}"),
            generator_id: format!("gen{}", i % cfg.generators),
            features: FeatureBundle {
                f_text,
                f_05,
                f_10,
                f_15,
            },
            labels: Labels {
                q_v: Some(score(&w_v)),
                q_a: Some(score(&w_a)),
                q_c: Some(q32(theta.cos())),
            },
        });
        latents.push(z);
    }
    Ok((Dataset::new(samples)?, latents))
}

/// Circular `[1/4, 1/2, 1/4]` smoothing along the channel axis.
fn blur(f: &[f64]) -> Vec<f64> {
    let d = f.len();
    (0..d)
        .map(|i| 0.25 * f[(i + d - 1) % d] + 0.5 * f[i] + 0.25 * f[(i + 1) % d])
        .collect()
}

fn q32(x: f64) -> f64 {
    x as f32 as f64
}

fn quantize(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = q32(*x));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::records;

    fn cfg(n: usize, dim: usize, noise: f64) -> SynthConfig {
        SynthConfig {
            n,
            dim,
            noise_sigma: noise,
            generators: 4,
        }
    }

    #[test]
    fn consistency_label_is_planted_cosine() {
        let ds = synth_generate(&cfg(64, 32, 0.0), &mut SeededRng::new(1)).unwrap();
        for s in ds.samples() {
            let f = &s.features;
            let cos = dot(&f.f_text, &f.f_10) / (norm2(&f.f_text) * norm2(&f.f_10));
            assert!((cos - s.labels.q_c.unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = synth_generate(&cfg(20, 16, 0.1), &mut SeededRng::new(7)).unwrap();
        let b = synth_generate(&cfg(20, 16, 0.1), &mut SeededRng::new(7)).unwrap();
        assert_eq!(records::encode(&a).unwrap(), records::encode(&b).unwrap());
        assert_eq!(records::decode(&records::encode(&a).unwrap()).unwrap(), a);
    }

    #[test]
    fn noiseless_scales_are_deterministic_functions_of_f10() {
        let ds = synth_generate(&cfg(10, 12, 0.0), &mut SeededRng::new(2)).unwrap();
        for s in ds.samples() {
            let f = &s.features;
            let b = blur(&f.f_10);
            for i in 0..12 {
                assert!((f.f_05[i] - b[i]).abs() < 1e-6);
                assert!((f.f_15[i] - (2.0 * f.f_10[i] - b[i])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        let mut rng = SeededRng::new(0);
        assert!(synth_generate(&cfg(3, 16, 0.0), &mut rng).is_err());
        assert!(synth_generate(&cfg(8, 4, 0.0), &mut rng).is_err());
        assert!(synth_generate(&cfg(8, 16, -1.0), &mut rng).is_err());
    }
}
