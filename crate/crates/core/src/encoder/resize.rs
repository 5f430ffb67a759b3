use super::{FeatureMap, Image};
use crate::dataio::round_half_up;
use crate::error::{Error, Result};

/// `round_half_up(factor * dim)`.
pub fn scaled_dim(dim: usize, factor: f64) -> usize {
    round_half_up(factor, dim)
}

/// Source coordinate and interpolation weight along one axis, half-pixel
/// centred (align-corners false) and clamped to the border.
fn taps(in_len: usize, out_len: usize) -> Vec<(usize, usize, f64)> {
    let ratio = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|i| {
            let src = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (in_len - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// Bilinear resampling of an interleaved `h x w x stride` buffer.
fn bilinear(src: &[f64], h: usize, w: usize, stride: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let ys = taps(h, out_h);
    let xs = taps(w, out_w);
    let mut out = Vec::with_capacity(out_h * out_w * stride);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for c in 0..stride {
                let at = |y: usize, x: usize| src[(y * w + x) * stride + c];
                let top = (1.0 - tx) * at(y0, x0) + tx * at(y0, x1);
                let bottom = (1.0 - tx) * at(y1, x0) + tx * at(y1, x1);
                out.push((1.0 - ty) * top + ty * bottom);
            }
        }
    }
    out
}

pub fn rescale_bilinear(img: &Image, factor: f64) -> Result<Image> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale factor must be positive, got {factor}")));
    }
    let out_h = scaled_dim(img.height(), factor);
    let out_w = scaled_dim(img.width(), factor);
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument(format!(
            "rescaling {}x{} by {factor} gives an empty image",
            img.height(),
            img.width()
        )));
    }
    let mut pixels = bilinear(img.pixels(), img.height(), img.width(), img.channels(), out_h, out_w);
    // Convex weights keep values in range up to rounding.
    pixels.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
    Image::new(out_h, out_w, img.channels(), pixels)
}

/// Max over window `[floor(i*H/oh), ceil((i+1)*H/oh))` (and likewise in width).
pub fn adaptive_max_pool(fm: &FeatureMap, out_h: usize, out_w: usize) -> Result<FeatureMap> {
    let (h, w) = (fm.height(), fm.width());
    if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
        return Err(Error::InvalidArgument(format!(
            "cannot pool {h}x{w} down to {out_h}x{out_w}"
        )));
    }
    let window = |i: usize, len: usize, out: usize| (i * len / out, ((i + 1) * len).div_ceil(out));
    let mut data = Vec::with_capacity(fm.channels() * out_h * out_w);
    for c in 0..fm.channels() {
        let plane = fm.plane(c);
        for i in 0..out_h {
            let (y0, y1) = window(i, h, out_h);
            for j in 0..out_w {
                let (x0, x1) = window(j, w, out_w);
                let mut m = f64::NEG_INFINITY;
                for y in y0..y1 {
                    for x in x0..x1 {
                        m = m.max(plane[y * w + x]);
                    }
                }
                data.push(m);
            }
        }
    }
    FeatureMap::new(fm.channels(), out_h, out_w, data)
}

/// Per-channel bilinear interpolation to a larger spatial size.
pub fn bilinear_upsample(fm: &FeatureMap, out_h: usize, out_w: usize) -> Result<FeatureMap> {
    if out_h < fm.height() || out_w < fm.width() {
        return Err(Error::InvalidArgument(format!(
            "cannot upsample {}x{} to smaller {out_h}x{out_w}",
            fm.height(),
            fm.width()
        )));
    }
    let mut data = Vec::with_capacity(fm.channels() * out_h * out_w);
    for c in 0..fm.channels() {
        data.extend(bilinear(fm.plane(c), fm.height(), fm.width(), 1, out_h, out_w));
    }
    FeatureMap::new(fm.channels(), out_h, out_w, data)
}
