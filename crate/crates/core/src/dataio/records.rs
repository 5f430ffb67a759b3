//! Binary feature-record codec.
//!
//! ```text
//! "AMFF" | version u32 | D u32 | n u64
//! per record:
//!   id_len u16 | id utf-8
//!   gen_len u16 | generator utf-8
//!   prompt_len u32 | prompt utf-8
//!   mask u8 (bit0 q_v, bit1 q_a, bit2 q_c) | present labels as f32, in that order
//!   4*D f32: f_text, f_05, f_10, f_15
//! ```
//! All integers and floats little-endian.

use std::fs;
use std::path::Path;

use super::{Dataset, FeatureBundle, Labels, Sample};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AMFF";
pub const VERSION: u32 = 1;

const MASK_V: u8 = 1;
const MASK_A: u8 = 2;
const MASK_C: u8 = 4;

pub fn write_feature_records(dataset: &Dataset, path: &Path) -> Result<()> {
    let bytes = encode(dataset)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_feature_records(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn encode(dataset: &Dataset) -> Result<Vec<u8>> {
    if dataset.is_empty() {
        return Err(Error::TooSmall("refusing to write an empty dataset".into()));
    }
    let dim = dataset.dim();
    let mut out = Vec::with_capacity(24 + dataset.len() * (64 + 16 * dim));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32_len(dim, "feature dimension")?.to_le_bytes());
    out.extend_from_slice(&(dataset.len() as u64).to_le_bytes());

    for s in dataset.samples() {
        put_str16(&mut out, &s.id, "id")?;
        put_str16(&mut out, &s.generator_id, "generator id")?;
        let prompt = s.prompt.as_bytes();
        out.extend_from_slice(&u32_len(prompt.len(), "prompt")?.to_le_bytes());
        out.extend_from_slice(prompt);

        let l = &s.labels;
        let mask = ((l.q_v.is_some() as u8) * MASK_V)
            | ((l.q_a.is_some() as u8) * MASK_A)
            | ((l.q_c.is_some() as u8) * MASK_C);
        out.push(mask);
        for v in [l.q_v, l.q_a, l.q_c].into_iter().flatten() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let f = &s.features;
        for v in [&f.f_text, &f.f_05, &f.f_10, &f.f_15] {
            for x in v.iter() {
                out.extend_from_slice(&(*x as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn u32_len(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{what} too long: {n}")))
}

fn put_str16(out: &mut Vec<u8>, s: &str, what: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::InvalidArgument(format!("{what} longer than 65535 bytes")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    record: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                index: self.record,
                reason: "truncated record".into(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64> {
        let v = f32::from_le_bytes(self.take(4)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format {
                index: self.record,
                reason: "non-finite value".into(),
            });
        }
        Ok(v as f64)
    }

    fn string(&mut self, len: usize) -> Result<String> {
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::Format {
            index: self.record,
            reason: "invalid utf-8".into(),
        })
    }

    fn vector(&mut self, dim: usize) -> Result<Vec<f64>> {
        (0..dim).map(|_| self.f32()).collect()
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 20 {
        return Err(Error::Header("file shorter than header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Header("bad magic".into()));
    }
    let mut cur = Cursor {
        buf: bytes,
        pos: 4,
        record: 0,
    };
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Header(format!("unsupported version {version}")));
    }
    let dim = cur.u32()? as usize;
    if dim == 0 {
        return Err(Error::Header("feature dimension is zero".into()));
    }
    let n = cur.u64()?;
    let mut samples = Vec::new();
    for i in 0..n {
        cur.record = i as usize;
        let id_len = cur.u16()? as usize;
        let id = cur.string(id_len)?;
        let gen_len = cur.u16()? as usize;
        let generator_id = cur.string(gen_len)?;
        let prompt_len = cur.u32()? as usize;
        let prompt = cur.string(prompt_len)?;
        let mask = cur.u8()?;
        if mask & !(MASK_V | MASK_A | MASK_C) != 0 {
            return Err(Error::Format {
                index: cur.record,
                reason: format!("reserved label mask bits set: {mask:#04x}"),
            });
        }
        let mut label = |bit: u8| -> Result<Option<f64>> {
            if mask & bit != 0 {
                cur.f32().map(Some)
            } else {
                Ok(None)
            }
        };
        let labels = Labels {
            q_v: label(MASK_V)?,
            q_a: label(MASK_A)?,
            q_c: label(MASK_C)?,
        };
        let features = FeatureBundle {
            f_text: cur.vector(dim)?,
            f_05: cur.vector(dim)?,
            f_10: cur.vector(dim)?,
            f_15: cur.vector(dim)?,
        };
        samples.push(Sample {
            id,
            prompt,
            generator_id,
            features,
            labels,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format {
            index: n as usize,
            reason: format!("{} trailing bytes after last record", bytes.len() - cur.pos),
        });
    }
    Dataset::new(samples)
}
