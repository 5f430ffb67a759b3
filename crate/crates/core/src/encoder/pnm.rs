//! PGM (P2/P5) and PPM (P3/P6) decoding, plus a binary writer.

use std::fs;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

pub fn read_pnm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Writes P5 (gray) or P6 (color). `maxval` selects 8- or 16-bit samples.
pub fn write_pnm(img: &Image, path: &Path, maxval: u16) -> Result<()> {
    if maxval == 0 {
        return Err(Error::InvalidArgument("maxval must be positive".into()));
    }
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    for &p in img.pixels() {
        let v = (p * maxval as f64).round() as u16;
        if maxval < 256 {
            out.push(v as u8);
        } else {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Header(format!("pnm: {}", msg.into()))
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("expected a number at byte {start}")))
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(bad("missing P magic"));
    }
    let (channels, plain) = match bytes[1] {
        b'2' => (1, true),
        b'5' => (1, false),
        b'3' => (3, true),
        b'6' => (3, false),
        other => return Err(bad(format!("unsupported variant P{}", other as char))),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()? as usize;
    let height = h.number()? as usize;
    let maxval = h.number()?;
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} out of range")));
    }
    let count = width * height * channels;
    let scale = maxval as f64;
    let mut pixels = Vec::with_capacity(count);
    if plain {
        for _ in 0..count {
            let v = h.number()?;
            if v > maxval {
                return Err(bad(format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 / scale);
        }
    } else {
        // exactly one whitespace byte separates the header from raster data
        if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
            return Err(bad("missing raster separator"));
        }
        let raster = &bytes[h.pos + 1..];
        let width_bytes = if maxval < 256 { 1 } else { 2 };
        if raster.len() < count * width_bytes {
            return Err(bad("truncated raster"));
        }
        for k in 0..count {
            let v = if width_bytes == 1 {
                raster[k] as u32
            } else {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as u32
            };
            if v > maxval {
                return Err(bad(format!("sample {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64 / scale);
        }
    }
    Image::new(height, width, channels, pixels)
}
