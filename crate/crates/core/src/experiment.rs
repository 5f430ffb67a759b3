//! Train/test protocol: split, train, evaluate on the held-out portion,
//! repeat over seeds, and compare ablation variants on identical splits.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{split_per_generator, split_random, Dataset, Task};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_task, median_of_trials, EvalResult};
use crate::scoring::{ScoreTriple, Similarity};
use crate::tensor::SeededRng;
use crate::trainer::{score_for, train, TrainConfig, TrainReport, TrainedModel};

const STREAM_SPLIT: u64 = 0x5350_4c54;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SplitSpec {
    /// Train fraction drawn uniformly.
    Random(f64),
    /// Train fraction drawn within each generator.
    PerGenerator(f64),
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Random(0.8)
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitSpec::Random(x) => write!(f, "random:{x}"),
            SplitSpec::PerGenerator(x) => write!(f, "per-generator:{x}"),
        }
    }
}

impl FromStr for SplitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, frac) = match s.split_once(':') {
            Some((k, v)) => {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad split fraction in {s:?}")))?;
                (k.trim(), Some(x))
            }
            None => (s.trim(), None),
        };
        let spec = match kind {
            "random" => SplitSpec::Random(frac.unwrap_or(0.8)),
            "per-generator" => SplitSpec::PerGenerator(frac.unwrap_or(0.75)),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown split {s:?}; expected random:F or per-generator:F"
                )))
            }
        };
        let x = spec.fraction();
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::InvalidArgument(format!("split fraction must be in (0, 1), got {x}")));
        }
        Ok(spec)
    }
}

impl From<SplitSpec> for String {
    fn from(s: SplitSpec) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SplitSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl SplitSpec {
    pub fn fraction(&self) -> f64 {
        match *self {
            SplitSpec::Random(x) | SplitSpec::PerGenerator(x) => x,
        }
    }
}

/// Train/test partition for `seed`. The same (dataset, spec, seed) always
/// yields the same partition.
pub fn split_dataset(dataset: &Dataset, spec: SplitSpec, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = SeededRng::new(seed).fork(STREAM_SPLIT);
    match spec {
        SplitSpec::Random(f) => split_random(dataset, f, &mut rng),
        SplitSpec::PerGenerator(f) => split_per_generator(dataset, f, &mut rng),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSeries {
    pub task: Task,
    pub preds: Vec<f64>,
    pub gts: Vec<f64>,
    pub mapped: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub result: EvalResult,
    pub scatter: Vec<ScatterSeries>,
    pub predictions: Vec<ScoreTriple>,
}

/// Metrics on `dataset` for every task the model was trained on and the
/// dataset fully labels.
pub fn evaluate(model: &TrainedModel, dataset: &Dataset) -> Result<Evaluation> {
    let predictions = model.predict_dataset(dataset)?;
    let mut result = EvalResult::default();
    let mut scatter = Vec::new();
    for task in Task::ALL {
        if !model.active_tasks.contains(&task) || !dataset.fully_labelled(task) {
            continue;
        }
        let preds: Vec<f64> = predictions.iter().map(|t| score_for(task, t)).collect();
        let gts: Vec<f64> = dataset.samples().iter().filter_map(|s| s.labels.get(task)).collect();
        let (metrics, mapped) = evaluate_task(task, &preds, &gts)?;
        result.tasks.push(metrics);
        scatter.push(ScatterSeries {
            task,
            preds,
            gts,
            mapped,
        });
    }
    if result.tasks.is_empty() {
        return Err(Error::InvalidArgument("no evaluable task: test labels and trained tasks do not overlap".into()));
    }
    Ok(Evaluation {
        result,
        scatter,
        predictions,
    })
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub seed: u64,
    pub model: TrainedModel,
    pub report: TrainReport,
    pub evaluation: Evaluation,
}

pub fn run_trial(dataset: &Dataset, split: SplitSpec, cfg: &TrainConfig) -> Result<TrialOutcome> {
    let (train_set, test_set) = split_dataset(dataset, split, cfg.seed)?;
    let (model, report) = train(&train_set, cfg)?;
    let evaluation = evaluate(&model, &test_set)?;
    Ok(TrialOutcome {
        seed: cfg.seed,
        model,
        report,
        evaluation,
    })
}

/// Trials with seeds `cfg.seed .. cfg.seed + trials`, plus per-metric medians.
pub fn run_trials(dataset: &Dataset, split: SplitSpec, cfg: &TrainConfig, trials: usize) -> Result<(Vec<TrialOutcome>, EvalResult)> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = TrainConfig {
                seed: cfg.seed + k,
                ..cfg.clone()
            };
            run_trial(dataset, split, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let median = median_of_trials(&outcomes.iter().map(|o| o.evaluation.result.clone()).collect::<Vec<_>>())?;
    Ok((outcomes, median))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoMsi,
    NoAff,
    Euclidean,
    Manhattan,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Full, Variant::NoMsi, Variant::NoAff, Variant::Euclidean, Variant::Manhattan];
    pub const STRUCTURE: [Variant; 3] = [Variant::Full, Variant::NoMsi, Variant::NoAff];
    pub const SIMILARITY: [Variant; 3] = [Variant::Full, Variant::Euclidean, Variant::Manhattan];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoMsi => "no-msi",
            Variant::NoAff => "no-aff",
            Variant::Euclidean => "euclidean",
            Variant::Manhattan => "manhattan",
        }
    }

    /// Display label; in the similarity comparison the full model is the cosine row.
    fn label(self, similarity_table: bool) -> &'static str {
        match self {
            Variant::Full if similarity_table => "cosine",
            Variant::Full => "full",
            Variant::NoMsi => "w/o MSI",
            Variant::NoAff => "w/o AFF",
            Variant::Euclidean => "euclidean",
            Variant::Manhattan => "manhattan",
        }
    }

    /// `base` with this variant's change applied.
    pub fn apply(self, base: &TrainConfig) -> TrainConfig {
        let mut cfg = base.clone();
        match self {
            Variant::Full => {}
            Variant::NoMsi => cfg.flags.use_msi = false,
            Variant::NoAff => cfg.flags.use_aff = false,
            Variant::Euclidean => cfg.similarity = Similarity::Euclidean,
            Variant::Manhattan => cfg.similarity = Similarity::Manhattan,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub result: EvalResult,
    pub mean_srcc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub split: SplitSpec,
    pub trials: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == v)
    }

    /// Structure comparison followed by the similarity comparison.
    pub fn format_tables(&self) -> String {
        let mut out = String::new();
        let tasks: Vec<Task> = self.rows.first().map(|r| r.result.tasks.iter().map(|t| t.task).collect()).unwrap_or_default();
        for (title, group, sim) in [
            ("structure", &Variant::STRUCTURE, false),
            ("similarity", &Variant::SIMILARITY, true),
        ] {
            let _ = writeln!(out, "{title} ({}, {} trial(s), medians)", self.split, self.trials);
            let mut header = format!("{:<10}", "variant");
            for t in &tasks {
                let _ = write!(header, " {:>18}", format!("{} SRCC/PLCC", t.name()));
            }
            let _ = writeln!(out, "{header} {:>10}", "mean SRCC");
            for v in group {
                let Some(row) = self.row(*v) else { continue };
                let mut line = format!("{:<10}", v.label(sim));
                for m in &row.result.tasks {
                    let _ = write!(line, " {:>18}", format!("{:.4}/{:.4}", m.srcc, m.plcc));
                }
                let _ = writeln!(out, "{line} {:>10.4}", row.mean_srcc);
            }
            out.push('\n');
        }
        out
    }

    /// One JSON object per (variant, task).
    pub fn format_jsonl(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            variant: &'a str,
            task: &'a str,
            srcc: f64,
            plcc: f64,
            krcc: f64,
            n: usize,
        }
        let mut out = String::new();
        for row in &self.rows {
            for m in &row.result.tasks {
                out.push_str(&serde_json::to_string(&Line {
                    variant: row.variant.name(),
                    task: m.task.name(),
                    srcc: m.srcc,
                    plcc: m.plcc,
                    krcc: m.krcc,
                    n: m.n,
                })?);
                out.push('\n');
            }
        }
        Ok(out)
    }
}

/// Trains every variant on the same splits (same seeds) and reports medians.
pub fn run_ablation(dataset: &Dataset, split: SplitSpec, cfg: &TrainConfig, trials: usize, variants: &[Variant]) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(variants.len());
    for &v in variants {
        let (_, median) = run_trials(dataset, split, &v.apply(cfg), trials)?;
        let mean_srcc = median.mean_srcc().expect("evaluate yields at least one task");
        rows.push(AblationRow {
            variant: v,
            result: median,
            mean_srcc,
        });
    }
    Ok(AblationReport { split, trials, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synth_generate, SynthConfig};

    #[test]
    fn split_spec_parsing() {
        assert_eq!("random:0.8".parse::<SplitSpec>().unwrap(), SplitSpec::Random(0.8));
        assert_eq!("per-generator:0.75".parse::<SplitSpec>().unwrap(), SplitSpec::PerGenerator(0.75));
        assert_eq!("per-generator".parse::<SplitSpec>().unwrap(), SplitSpec::PerGenerator(0.75));
        for bad in ["random:1.5", "random:x", "kfold:0.2", "random:0"] {
            assert!(bad.parse::<SplitSpec>().is_err(), "{bad}");
        }
        let s = SplitSpec::PerGenerator(0.75);
        assert_eq!(s.to_string().parse::<SplitSpec>().unwrap(), s);
        assert_eq!(serde_json::to_string(&s).unwrap(), "\"per-generator:0.75\"");
    }

    #[test]
    fn split_is_seeded() {
        let ds = synth_generate(
            &SynthConfig {
                n: 40,
                dim: 8,
                noise_sigma: 0.0,
                generators: 4,
            },
            &mut SeededRng::new(1),
        )
        .unwrap();
        let ids = |d: &Dataset| d.samples().iter().map(|s| s.id.clone()).collect::<Vec<_>>();
        let (a, _) = split_dataset(&ds, SplitSpec::Random(0.8), 3).unwrap();
        let (b, _) = split_dataset(&ds, SplitSpec::Random(0.8), 3).unwrap();
        let (c, _) = split_dataset(&ds, SplitSpec::Random(0.8), 4).unwrap();
        assert_eq!(ids(&a), ids(&b));
        assert_ne!(ids(&a), ids(&c));
        let (tr, te) = split_dataset(&ds, SplitSpec::PerGenerator(0.75), 3).unwrap();
        assert_eq!((tr.len(), te.len()), (32, 8));
    }

    #[test]
    fn variants_change_one_thing() {
        let base = TrainConfig::default();
        assert_eq!(Variant::Full.apply(&base), base);
        assert!(!Variant::NoMsi.apply(&base).flags.use_msi);
        assert!(!Variant::NoAff.apply(&base).flags.use_aff);
        assert_eq!(Variant::Manhattan.apply(&base).similarity, Similarity::Manhattan);
    }
}
