//! Deterministic stand-ins for the frozen image and text encoders.
//!
//! Images are summarised by the mean and standard deviation of each cell in
//! a `GRID x GRID` partition (the means block first, then the stds), projected
//! by a fixed Gaussian matrix and L2-normalised. Prompts become a signed
//! hashed bag of character trigrams.

use super::{Image, MultiScaleImage};
use crate::error::{Error, Result};
use crate::tensor::{norm2, Matrix, SeededRng};

pub const GRID: usize = 16;
const STATS: usize = 2 * GRID * GRID;
const PROJECTION_SEED: u64 = 0x414d_4646;

/// Image features at the three scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFeatures {
    pub f_05: Vec<f64>,
    pub f_10: Vec<f64>,
    pub f_15: Vec<f64>,
}

/// Per-cell (mean, std) statistics, pooled over channels. Cells use the
/// exact tiling `[floor(r*H/G), floor((r+1)*H/G))`.
pub fn cell_statistics(img: &Image) -> Result<Vec<f64>> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    if h < GRID || w < GRID {
        return Err(Error::InvalidArgument(format!(
            "image {h}x{w} is smaller than the {GRID}x{GRID} grid"
        )));
    }
    let mut stats = vec![0.0; STATS];
    let (means, stds) = stats.split_at_mut(GRID * GRID);
    for r in 0..GRID {
        let (y0, y1) = (r * h / GRID, (r + 1) * h / GRID);
        for q in 0..GRID {
            let (x0, x1) = (q * w / GRID, (q + 1) * w / GRID);
            let count = ((y1 - y0) * (x1 - x0) * c) as f64;
            let mut sum = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    for ch in 0..c {
                        sum += img.get(y, x, ch);
                    }
                }
            }
            let mean = sum / count;
            let mut var = 0.0;
            for y in y0..y1 {
                for x in x0..x1 {
                    for ch in 0..c {
                        let d = img.get(y, x, ch) - mean;
                        var += d * d;
                    }
                }
            }
            means[r * GRID + q] = mean;
            stds[r * GRID + q] = (var / count).sqrt();
        }
    }
    Ok(stats)
}

fn projection(dim: usize) -> Matrix {
    let mut rng = SeededRng::new(PROJECTION_SEED);
    let s = 1.0 / (STATS as f64).sqrt();
    let data = (0..dim * STATS).map(|_| rng.normal() * s).collect();
    Matrix::new(dim, STATS, data).expect("projection shape")
}

fn normalized(v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    let n = norm2(&v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Numeric(format!("{what} has zero norm")));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

fn encode_one(img: &Image, proj: &Matrix) -> Result<Vec<f64>> {
    let stats = cell_statistics(img)?;
    normalized(proj.matvec(&stats)?, "image embedding")
}

pub fn toy_encode(msi: &MultiScaleImage, dim: usize) -> Result<ScaleFeatures> {
    if dim == 0 || !dim.is_multiple_of(4) {
        return Err(Error::InvalidArgument(format!("dim must be a positive multiple of 4, got {dim}")));
    }
    let proj = projection(dim);
    Ok(ScaleFeatures {
        f_05: encode_one(&msi.i_05, &proj)?,
        f_10: encode_one(&msi.i_10, &proj)?,
        f_15: encode_one(&msi.i_15, &proj)?,
    })
}

/// FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn toy_encode_text(prompt: &str, dim: usize) -> Result<Vec<f64>> {
    if prompt.is_empty() {
        return Err(Error::InvalidArgument("prompt is empty".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dim must be positive".into()));
    }
    let chars: Vec<char> = std::iter::once(' ')
        .chain(prompt.to_lowercase().chars())
        .chain(std::iter::once(' '))
        .collect();
    let mut v = vec![0.0; dim];
    let mut buf = String::new();
    for tri in chars.windows(3) {
        buf.clear();
        buf.extend(tri);
        let h = fnv1a(buf.as_bytes());
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    normalized(v, "text embedding")
}
