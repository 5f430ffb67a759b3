//! Samples, datasets, their on-disk encodings, split procedures and the
//! planted synthetic generator.

mod csv_io;
mod records;
mod split;
mod synth;

pub use csv_io::{read_csv, write_csv};
pub use records::{read_feature_records, write_feature_records, MAGIC, VERSION};
pub use split::{round_half_up, split_per_generator, split_random};
pub use synth::{synth_generate, synth_generate_with_latents, SynthConfig, LATENT_DIM};

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::all_finite;

/// The three rated dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Quality,
    Authenticity,
    Consistency,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Quality, Task::Authenticity, Task::Consistency];

    pub fn name(self) -> &'static str {
        match self {
            Task::Quality => "quality",
            Task::Authenticity => "authenticity",
            Task::Consistency => "consistency",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Text feature plus the image feature at 0.5x, 1.0x and 1.5x scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub f_text: Vec<f64>,
    pub f_05: Vec<f64>,
    pub f_10: Vec<f64>,
    pub f_15: Vec<f64>,
}

impl FeatureBundle {
    pub fn new(f_text: Vec<f64>, f_05: Vec<f64>, f_10: Vec<f64>, f_15: Vec<f64>) -> Result<Self> {
        let b = Self {
            f_text,
            f_05,
            f_10,
            f_15,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.f_10.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        for (name, v) in [("f_text", &self.f_text), ("f_05", &self.f_05), ("f_15", &self.f_15)] {
            if v.len() != d {
                return Err(Error::Shape {
                    context: "FeatureBundle",
                    expected: format!("{name} of length {d}"),
                    actual: v.len().to_string(),
                });
            }
        }
        if ![&self.f_text, &self.f_05, &self.f_10, &self.f_15]
            .iter()
            .all(|v| all_finite(v))
        {
            return Err(Error::Numeric("feature bundle has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Ground-truth ratings; any of them may be absent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub q_v: Option<f64>,
    pub q_a: Option<f64>,
    pub q_c: Option<f64>,
}

impl Labels {
    pub fn get(&self, task: Task) -> Option<f64> {
        match task {
            Task::Quality => self.q_v,
            Task::Authenticity => self.q_a,
            Task::Consistency => self.q_c,
        }
    }

    pub fn any(&self) -> bool {
        self.q_v.is_some() || self.q_a.is_some() || self.q_c.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub prompt: String,
    pub generator_id: String,
    pub features: FeatureBundle,
    pub labels: Labels,
}

/// Observed (min, max) of each label over a dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelRanges {
    pub quality: Option<(f64, f64)>,
    pub authenticity: Option<(f64, f64)>,
    pub consistency: Option<(f64, f64)>,
}

impl LabelRanges {
    pub fn get(&self, task: Task) -> Option<(f64, f64)> {
        match task {
            Task::Quality => self.quality,
            Task::Authenticity => self.authenticity,
            Task::Consistency => self.consistency,
        }
    }

    fn compute(samples: &[Sample]) -> Self {
        let range = |task: Task| {
            samples
                .iter()
                .filter_map(|s| s.labels.get(task))
                .fold(None, |acc: Option<(f64, f64)>, v| match acc {
                    None => Some((v, v)),
                    Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
                })
        };
        Self {
            quality: range(Task::Quality),
            authenticity: range(Task::Authenticity),
            consistency: range(Task::Consistency),
        }
    }
}

/// Non-empty ordered collection of samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    label_ranges: LabelRanges,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::TooSmall("dataset has no samples".into()));
        };
        let dim = first.features.dim();
        let mut ids = HashSet::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            s.features.validate().map_err(|e| Error::Format {
                index: i,
                reason: e.to_string(),
            })?;
            if s.features.dim() != dim {
                return Err(Error::Format {
                    index: i,
                    reason: format!("feature dimension {} differs from {dim}", s.features.dim()),
                });
            }
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Format {
                    index: i,
                    reason: format!("duplicate id {:?}", s.id),
                });
            }
            for task in Task::ALL {
                if let Some(v) = s.labels.get(task) {
                    if !v.is_finite() {
                        return Err(Error::Format {
                            index: i,
                            reason: format!("non-finite {task} label"),
                        });
                    }
                }
            }
        }
        let label_ranges = LabelRanges::compute(&samples);
        Ok(Self {
            samples,
            label_ranges,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].features.dim()
    }

    pub fn label_ranges(&self) -> &LabelRanges {
        &self.label_ranges
    }

    /// True iff every sample carries a label for `task`.
    pub fn fully_labelled(&self, task: Task) -> bool {
        self.samples.iter().all(|s| s.labels.get(task).is_some())
    }

    /// Samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    /// SHA-256 of the binary record encoding, as lowercase hex.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(sha256_hex(&records::encode(self)?))
    }

    /// Reads either encoding, chosen by extension (`.csv` or anything else for binary).
    pub fn load(path: &Path) -> Result<Self> {
        if is_csv(path) {
            read_csv(path)
        } else {
            read_feature_records(path)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if is_csv(path) {
            write_csv(self, path)
        } else {
            write_feature_records(self, path)
        }
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[cfg(test)]
pub(crate) fn test_sample(id: &str, generator: &str, dim: usize, seed: f64) -> Sample {
    let v = |k: f64| (0..dim).map(|i| (seed + k + i as f64 * 0.25).sin()).collect::<Vec<_>>();
    Sample {
        id: id.to_string(),
        prompt: format!("prompt for {id}"),
        generator_id: generator.to_string(),
        features: FeatureBundle::new(v(0.0), v(1.0), v(2.0), v(3.0)).unwrap(),
        labels: Labels {
            q_v: Some(seed),
            q_a: None,
            q_c: Some(-seed),
        },
    }
}
