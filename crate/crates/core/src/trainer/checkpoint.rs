//! Checkpoint layout (little-endian):
//!
//! ```text
//! magic     8 bytes  "AMFFCKPT"
//! version   u32
//! header    u64 length + UTF-8 JSON (config echo, counters, history, RNG state)
//! tensors   4 parameter sets (current, best, Adam m, Adam v), each as the
//!           model's blocks in order: u64 count + count x f64
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EpochRecord, LabelNorm, OptimizerState, StopReason, TrainConfig, TrainReport, TrainedModel, Trainer};
use crate::dataio::{Dataset, Task};
use crate::error::{Error, Result};
use crate::scoring::{ModelParams, HEAD_HIDDEN};
use crate::tensor::{ParamBlocks, RngState, SeededRng};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"AMFFCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    meta: BTreeMap<String, String>,
    dim: usize,
    aff_hidden: usize,
    head_hidden: usize,
    active_tasks: Vec<Task>,
    norm: LabelNorm,
    epoch: usize,
    best_epoch: usize,
    best_score: Option<f64>,
    stale: usize,
    stop: Option<StopReason>,
    history: Vec<EpochRecord>,
    step: u64,
    rng: RngState,
    dataset_fingerprint: String,
    n_train: usize,
    n_val: usize,
}

/// A checkpoint opened for inference.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub meta: BTreeMap<String, String>,
    pub model: TrainedModel,
    pub report: TrainReport,
    pub dataset_fingerprint: String,
}

fn put_params(out: &mut Vec<u8>, p: &ModelParams) {
    for (_, block) in p.blocks() {
        out.extend_from_slice(&(block.len() as u64).to_le_bytes());
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Header(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn fill(&mut self, p: &mut ModelParams) -> Result<()> {
        for (name, block) in p.blocks_mut() {
            let n = self.u64()? as usize;
            if n != block.len() {
                return Err(Error::Header(format!("tensor {name}: expected {} values, found {n}", block.len())));
            }
            for (v, chunk) in block.iter_mut().zip(self.take(n * 8)?.chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
                if !v.is_finite() {
                    return Err(Error::Header(format!("tensor {name} holds a non-finite value")));
                }
            }
        }
        Ok(())
    }
}

impl Trainer {
    /// Writes the full training state. `meta` is stored verbatim.
    pub fn save_checkpoint(&self, path: &Path, meta: &BTreeMap<String, String>) -> Result<()> {
        let header = Header {
            config: self.cfg.clone(),
            meta: meta.clone(),
            dim: self.params.dim(),
            aff_hidden: self.params.aff.hidden(),
            head_hidden: self.params.head_v.hidden(),
            active_tasks: self.active.clone(),
            norm: self.norm,
            epoch: self.epoch,
            best_epoch: self.best_epoch,
            best_score: self.best_score.is_finite().then_some(self.best_score),
            stale: self.stale,
            stop: self.stop,
            history: self.history.clone(),
            step: self.opt.step,
            rng: self.shuffle_rng.state(),
            dataset_fingerprint: self.fingerprint.clone(),
            n_train: self.fit.len(),
            n_val: self.val.len(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(json.len() + 4 * 8 * self.params.num_params() + 64);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in [&self.params, &self.best, &self.opt.m, &self.opt.v] {
            put_params(&mut out, p);
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Restores a trainer from a checkpoint. `dataset` must be the same
    /// training portion the checkpoint was written from.
    pub fn resume(path: &Path, dataset: &Dataset) -> Result<(Self, BTreeMap<String, String>)> {
        let (header, tensors) = read(path)?;
        if dataset.fingerprint()? != header.dataset_fingerprint {
            return Err(Error::InvalidArgument(
                "checkpoint was written for a different training dataset".into(),
            ));
        }
        let mut t = Trainer::new(dataset, header.config.clone())?;
        let [params, best, m, v] = tensors;
        t.params = params;
        t.best = best;
        t.opt = OptimizerState { m, v, step: header.step, ..OptimizerState::new(&t.params) };
        t.shuffle_rng = SeededRng::from_state(header.rng);
        t.epoch = header.epoch;
        t.best_epoch = header.best_epoch;
        t.best_score = header.best_score.unwrap_or(f64::NEG_INFINITY);
        t.stale = header.stale;
        t.stop = header.stop;
        t.history = header.history;
        Ok((t, header.meta))
    }
}

fn read(path: &Path) -> Result<(Header, [ModelParams; 4])> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Header("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Header(format!("unsupported checkpoint version {version}")));
    }
    let len = r.u64()? as usize;
    let header: Header = serde_json::from_slice(r.take(len)?)?;
    if header.head_hidden != HEAD_HIDDEN {
        return Err(Error::Header(format!("unsupported head width {}", header.head_hidden)));
    }
    let template = ModelParams {
        aff: crate::aff::AffParams::zeros(header.dim, header.aff_hidden),
        head_v: crate::scoring::MlpParams::zeros(header.dim, header.head_hidden),
        head_a: crate::scoring::MlpParams::zeros(header.dim, header.head_hidden),
        similarity: header.config.similarity,
    };
    let mut sets = [template.clone(), template.clone(), template.clone(), template];
    for p in &mut sets {
        r.fill(p)?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Header(format!("{} trailing bytes after checkpoint", bytes.len() - r.pos)));
    }
    Ok((header, sets))
}

/// Opens a checkpoint for evaluation or prediction (best parameters).
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let (header, [_, best, _, _]) = read(path)?;
    let report = TrainReport {
        active_tasks: header.active_tasks.clone(),
        n_train: header.n_train,
        n_val: header.n_val,
        epochs: header.history,
        best_epoch: header.best_epoch,
        best_val_srcc: header.best_score.unwrap_or(-1.0),
        stop_reason: header.stop,
        params_checksum: super::params_checksum(&best),
    };
    Ok(Checkpoint {
        model: TrainedModel {
            params: best,
            norm: header.norm,
            flags: header.config.flags,
            active_tasks: header.active_tasks,
        },
        config: header.config,
        meta: header.meta,
        report,
        dataset_fingerprint: header.dataset_fingerprint,
    })
}
