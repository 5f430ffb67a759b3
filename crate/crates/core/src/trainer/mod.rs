//! Stage-one training: seeded mini-batches, AdamW with decoupled decay, a
//! single learning-rate drop, and early stopping on validation SRCC.

mod checkpoint;
mod optim;

pub use checkpoint::{load_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use optim::{adamw_step, OptimizerState, ADAM_EPS, BETA1, BETA2};

use std::collections::BTreeMap;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aff::DEFAULT_HIDDEN;
use crate::dataio::{sha256_hex, split_random, Dataset, FeatureBundle, LabelRanges, Sample, Task};
use crate::error::{Error, Result};
use crate::losses::{total_loss, BatchScores, LossBundle};
use crate::metrics::srcc;
use crate::scoring::{forward_with, model_backward, AblationFlags, ModelParams, ScoreGrads, ScoreTriple, Similarity};
use crate::tensor::{axpy, ParamBlocks, SeededRng};

const STREAM_INIT: u64 = 1;
const STREAM_VALIDATION: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;

/// Score used for a task whose validation SRCC is undefined.
const UNDEFINED_SRCC: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub lr: f64,
    /// 1-based epoch from which `lr_after_drop` applies.
    pub lr_drop_epoch: usize,
    /// Defaults to `lr / 10`.
    pub lr_after_drop: Option<f64>,
    pub weight_decay: f64,
    pub patience: usize,
    pub seed: u64,
    pub similarity: Similarity,
    pub flags: AblationFlags,
    pub aff_hidden: usize,
    /// Share of the training portion held out for early stopping.
    pub val_fraction: f64,
    /// Label whose order defines the pairwise preferences of the
    /// consistency score.
    pub preference_label: Task,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_epochs: 120,
            lr: 5e-4,
            lr_drop_epoch: 80,
            lr_after_drop: None,
            weight_decay: 1e-2,
            patience: 20,
            seed: 0,
            similarity: Similarity::Cosine,
            flags: AblationFlags::default(),
            aff_hidden: DEFAULT_HIDDEN,
            val_fraction: 0.1,
            preference_label: Task::Consistency,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 || self.aff_hidden == 0 {
            return bad("batch_size, max_epochs, patience and aff_hidden must be positive".into());
        }
        if self.lr_drop_epoch == 0 {
            return bad("lr_drop_epoch is 1-based and must be positive".into());
        }
        let rate_ok = |v: f64| v >= 0.0 && v.is_finite();
        if !rate_ok(self.lr) || !self.lr_after_drop.is_none_or(rate_ok) || !rate_ok(self.weight_decay) {
            return bad(format!(
                "learning rates and weight decay must be finite and >= 0 (lr {}, after drop {:?}, wd {})",
                self.lr, self.lr_after_drop, self.weight_decay
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must be in (0, 1), got {}", self.val_fraction));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= self.lr_drop_epoch {
            self.lr_after_drop.unwrap_or(self.lr / 10.0)
        } else {
            self.lr
        }
    }
}

/// Min/max scaling of the regression targets, fitted on the training portion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelNorm {
    pub quality: Option<(f64, f64)>,
    pub authenticity: Option<(f64, f64)>,
}

impl LabelNorm {
    fn from_ranges(r: &LabelRanges, active: &[Task]) -> Self {
        let pick = |t: Task| if active.contains(&t) { r.get(t) } else { None };
        Self {
            quality: pick(Task::Quality),
            authenticity: pick(Task::Authenticity),
        }
    }

    fn range(&self, task: Task) -> Option<(f64, f64)> {
        match task {
            Task::Quality => self.quality,
            Task::Authenticity => self.authenticity,
            Task::Consistency => None,
        }
    }

    fn lo_span(&self, task: Task) -> (f64, f64) {
        match self.range(task) {
            Some((lo, hi)) if hi > lo => (lo, hi - lo),
            Some((lo, _)) => (lo, 1.0),
            None => (0.0, 1.0),
        }
    }

    pub fn normalize(&self, task: Task, y: f64) -> f64 {
        let (lo, span) = self.lo_span(task);
        (y - lo) / span
    }

    pub fn denormalize(&self, task: Task, y: f64) -> f64 {
        let (lo, span) = self.lo_span(task);
        y * span + lo
    }
}

/// Parameters together with everything needed to score new samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub norm: LabelNorm,
    pub flags: AblationFlags,
    pub active_tasks: Vec<Task>,
}

impl TrainedModel {
    /// Scores on the label scale: regression heads are denormalized.
    pub fn predict(&self, sample: &Sample) -> Result<ScoreTriple> {
        let (t, _) = forward_with(&sample.features, &self.params, self.flags)?;
        Ok(ScoreTriple {
            s_c: t.s_c,
            s_v: self.norm.denormalize(Task::Quality, t.s_v),
            s_a: self.norm.denormalize(Task::Authenticity, t.s_a),
        })
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<ScoreTriple>> {
        if dataset.dim() != self.params.dim() {
            return Err(Error::DimMismatch {
                expected: self.params.dim(),
                actual: dataset.dim(),
            });
        }
        dataset.samples().par_iter().map(|s| self.predict(s)).collect()
    }
}

pub fn score_for(task: Task, t: &ScoreTriple) -> f64 {
    match task {
        Task::Quality => t.s_v,
        Task::Authenticity => t.s_a,
        Task::Consistency => t.s_c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub loss_c: f64,
    pub loss_v: f64,
    pub loss_a: f64,
    pub val_srcc: BTreeMap<Task, f64>,
    pub val_mean_srcc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub active_tasks: Vec<Task>,
    pub n_train: usize,
    pub n_val: usize,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_srcc: f64,
    pub stop_reason: Option<StopReason>,
    /// SHA-256 over the returned parameters (little-endian f64, block order).
    pub params_checksum: String,
}

pub fn params_checksum(p: &ModelParams) -> String {
    let mut bytes = Vec::with_capacity(p.num_params() * 8);
    for (_, block) in p.blocks() {
        for v in block {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    sha256_hex(&bytes)
}

/// Tasks trained on: those labelled on every sample of `dataset`.
pub fn active_tasks(dataset: &Dataset) -> Vec<Task> {
    active_tasks_with(dataset, Task::Consistency)
}

/// Like [`active_tasks`], with the consistency task reading `preference_label`.
pub fn active_tasks_with(dataset: &Dataset, preference_label: Task) -> Vec<Task> {
    Task::ALL
        .into_iter()
        .filter(|&t| {
            let label = target_label(t, preference_label);
            let full = dataset.fully_labelled(label);
            if !full && dataset.samples().iter().any(|s| s.labels.get(label).is_some()) {
                warn!("{label} labels are present on only part of the training set; {t} task ignored");
            }
            full
        })
        .collect()
}

fn target_label(task: Task, preference_label: Task) -> Task {
    if task == Task::Consistency {
        preference_label
    } else {
        task
    }
}

/// Per-task regression or preference targets of one mini-batch; `None`
/// masks the task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchTargets {
    pub q_c: Option<Vec<f64>>,
    pub q_v: Option<Vec<f64>>,
    pub q_a: Option<Vec<f64>>,
}

impl BatchTargets {
    pub fn is_empty(&self) -> bool {
        self.q_c.is_none() && self.q_v.is_none() && self.q_a.is_none()
    }
}

/// Total loss of a mini-batch and its gradient with respect to every
/// parameter. Per-sample work may run on several threads; gradients are
/// summed in sample order.
pub fn batch_gradient(
    params: &ModelParams,
    flags: AblationFlags,
    features: &[&FeatureBundle],
    targets: &BatchTargets,
) -> Result<(LossBundle, ModelParams)> {
    let outs = features
        .par_iter()
        .map(|f| forward_with(f, params, flags))
        .collect::<Result<Vec<_>>>()?;
    let scores = |task: Task, gts: &Option<Vec<f64>>| -> Result<Option<BatchScores>> {
        gts.as_ref()
            .map(|g| BatchScores::new(outs.iter().map(|(t, _)| score_for(task, t)).collect(), g.clone()))
            .transpose()
    };
    let c = scores(Task::Consistency, &targets.q_c)?;
    let v = scores(Task::Quality, &targets.q_v)?;
    let a = scores(Task::Authenticity, &targets.q_a)?;
    let lb = total_loss(c.as_ref(), v.as_ref(), a.as_ref())?;

    let pick = |d: &Option<Vec<f64>>, k: usize| d.as_ref().map_or(0.0, |d| d[k]);
    let per_sample = outs
        .par_iter()
        .enumerate()
        .map(|(k, (_, cache))| {
            let d = ScoreGrads {
                d_c: pick(&lb.d_c, k),
                d_v: pick(&lb.d_v, k),
                d_a: pick(&lb.d_a, k),
            };
            model_backward(cache, params, d)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grads = params.zeros_like();
    for g in &per_sample {
        for ((_, acc), (_, gb)) in grads.blocks_mut().into_iter().zip(g.blocks()) {
            axpy(acc, 1.0, gb);
        }
    }
    Ok((lb, grads))
}

/// Owns parameters, optimizer state and the early-stopping bookkeeping.
/// Epochs can be run one at a time and the whole state checkpointed.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainConfig,
    fit: Dataset,
    val: Dataset,
    active: Vec<Task>,
    norm: LabelNorm,
    params: ModelParams,
    best: ModelParams,
    opt: OptimizerState,
    shuffle_rng: SeededRng,
    epoch: usize,
    best_epoch: usize,
    best_score: f64,
    stale: usize,
    history: Vec<EpochRecord>,
    stop: Option<StopReason>,
    fingerprint: String,
}

impl Trainer {
    pub fn new(dataset: &Dataset, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let active = active_tasks_with(dataset, cfg.preference_label);
        if active.is_empty() {
            return Err(Error::InvalidArgument("no task is labelled on every training sample".into()));
        }
        let root = SeededRng::new(cfg.seed);
        let (fit, val) = split_random(dataset, 1.0 - cfg.val_fraction, &mut root.fork(STREAM_VALIDATION))?;
        let norm = LabelNorm::from_ranges(fit.label_ranges(), &active);
        let params = ModelParams::init(dataset.dim(), cfg.aff_hidden, cfg.similarity, &mut root.fork(STREAM_INIT));
        info!(
            "training on {} samples, validating on {}, tasks {:?}",
            fit.len(),
            val.len(),
            active.iter().map(|t| t.name()).collect::<Vec<_>>()
        );
        Ok(Self {
            opt: OptimizerState::new(&params),
            best: params.clone(),
            params,
            shuffle_rng: root.fork(STREAM_SHUFFLE),
            fingerprint: dataset.fingerprint()?,
            cfg,
            fit,
            val,
            active,
            norm,
            epoch: 0,
            best_epoch: 0,
            best_score: f64::NEG_INFINITY,
            stale: 0,
            history: Vec::new(),
            stop: None,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn stopped(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Runs one epoch and updates the stopping state. No-op once stopped.
    pub fn run_epoch(&mut self) -> Result<()> {
        if self.stop.is_some() {
            return Ok(());
        }
        let epoch = self.epoch + 1;
        let lr = self.cfg.lr_at(epoch);
        let mut order: Vec<usize> = (0..self.fit.len()).collect();
        self.shuffle_rng.shuffle(&mut order);

        let mut sums = [0.0; 4];
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(self.cfg.batch_size).enumerate() {
            if let Some(parts) = self.batch_step(chunk, lr, epoch, b)? {
                for (s, p) in sums.iter_mut().zip(parts) {
                    *s += p;
                }
                batches += 1;
            }
        }
        if batches == 0 {
            return Err(Error::TooSmall("no mini-batch carries a trainable loss".into()));
        }
        let [loss, loss_c, loss_v, loss_a] = sums.map(|s| s / batches as f64);

        let val_srcc = self.validation_srcc()?;
        let val_mean_srcc = val_srcc.values().sum::<f64>() / val_srcc.len() as f64;
        debug!("epoch {epoch}: loss {loss:.6}, val srcc {val_mean_srcc:.4}");

        self.epoch = epoch;
        if val_mean_srcc > self.best_score {
            self.best_score = val_mean_srcc;
            self.best_epoch = epoch;
            self.best = self.params.clone();
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.history.push(EpochRecord {
            epoch,
            lr,
            loss,
            loss_c,
            loss_v,
            loss_a,
            val_srcc,
            val_mean_srcc,
        });
        if self.stale >= self.cfg.patience {
            info!("early stop after epoch {epoch}; best epoch {}", self.best_epoch);
            self.stop = Some(StopReason::EarlyStop);
        } else if epoch >= self.cfg.max_epochs {
            self.stop = Some(StopReason::MaxEpochs);
        }
        Ok(())
    }

    /// Runs until early stopping or the epoch budget.
    pub fn run(&mut self) -> Result<()> {
        while self.stop.is_none() {
            self.run_epoch()?;
        }
        Ok(())
    }

    /// One optimizer step on the samples at `chunk`. Returns the loss
    /// components `[total, c, v, a]`, or `None` when the batch has nothing
    /// to train on.
    fn batch_step(&mut self, chunk: &[usize], lr: f64, epoch: usize, batch: usize) -> Result<Option<[f64; 4]>> {
        let abort = |reason: String| Error::TrainingAborted { epoch, batch, reason };
        let samples: Vec<&Sample> = chunk.iter().map(|&i| &self.fit.samples()[i]).collect();
        let targets = |task: Task| {
            let usable = self.active.contains(&task) && !(task == Task::Consistency && samples.len() < 2);
            usable.then(|| {
                samples
                    .iter()
                    .map(|s| self.norm.normalize(task, s.labels.get(self.label(task)).expect("active task is fully labelled")))
                    .collect()
            })
        };
        let targets = BatchTargets {
            q_c: targets(Task::Consistency),
            q_v: targets(Task::Quality),
            q_a: targets(Task::Authenticity),
        };
        if targets.is_empty() {
            return Ok(None);
        }
        let features: Vec<&FeatureBundle> = samples.iter().map(|s| &s.features).collect();
        let (lb, grads) =
            batch_gradient(&self.params, self.cfg.flags, &features, &targets).map_err(|e| abort(e.to_string()))?;
        if !lb.total.is_finite() {
            return Err(abort(format!("non-finite loss {}", lb.total)));
        }
        adamw_step(&mut self.params, &grads, &mut self.opt, lr, self.cfg.weight_decay)
            .map_err(|e| abort(e.to_string()))?;
        Ok(Some([lb.total, lb.l_c, lb.l_v, lb.l_a]))
    }

    fn label(&self, task: Task) -> Task {
        target_label(task, self.cfg.preference_label)
    }

    fn validation_srcc(&self) -> Result<BTreeMap<Task, f64>> {
        let params = &self.params;
        let flags = self.cfg.flags;
        let preds = self
            .val
            .samples()
            .par_iter()
            .map(|s| forward_with(&s.features, params, flags).map(|(t, _)| t))
            .collect::<Result<Vec<_>>>()?;
        let mut out = BTreeMap::new();
        for &task in &self.active {
            let p: Vec<f64> = preds.iter().map(|t| score_for(task, t)).collect();
            let g: Vec<f64> = self.val.samples().iter().filter_map(|s| s.labels.get(self.label(task))).collect();
            let r = match srcc(&p, &g) {
                Ok(r) => r,
                Err(Error::UndefinedCorrelation(_) | Error::TooSmall(_)) => UNDEFINED_SRCC,
                Err(e) => return Err(e),
            };
            out.insert(task, r);
        }
        Ok(out)
    }

    pub fn report(&self) -> TrainReport {
        TrainReport {
            active_tasks: self.active.clone(),
            n_train: self.fit.len(),
            n_val: self.val.len(),
            epochs: self.history.clone(),
            best_epoch: self.best_epoch,
            best_val_srcc: if self.best_score.is_finite() { self.best_score } else { UNDEFINED_SRCC },
            stop_reason: self.stop,
            params_checksum: params_checksum(&self.best),
        }
    }

    /// Best-validation parameters packaged for prediction.
    pub fn model(&self) -> TrainedModel {
        TrainedModel {
            params: self.best.clone(),
            norm: self.norm,
            flags: self.cfg.flags,
            active_tasks: self.active.clone(),
        }
    }

    pub fn finish(self) -> (TrainedModel, TrainReport) {
        (self.model(), self.report())
    }
}

/// Trains to completion and returns the best-validation model.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<(TrainedModel, TrainReport)> {
    let mut t = Trainer::new(dataset, cfg.clone())?;
    t.run()?;
    Ok(t.finish())
}

/// Forward pass under structural ablation flags.
pub fn ablation_variant_forward(sample: &Sample, p: &ModelParams, flags: AblationFlags) -> Result<ScoreTriple> {
    forward_with(&sample.features, p, flags).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{synth_generate, SynthConfig};

    fn small_data(n: usize) -> Dataset {
        let cfg = SynthConfig {
            n,
            dim: 16,
            noise_sigma: 0.01,
            generators: 2,
        };
        synth_generate(&cfg, &mut SeededRng::new(5)).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 8,
            max_epochs: 4,
            aff_hidden: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn lr_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(1), 5e-4);
        assert_eq!(cfg.lr_at(79), 5e-4);
        assert!((cfg.lr_at(80) - 5e-5).abs() < 1e-20);
        let cfg = TrainConfig {
            lr_after_drop: Some(1e-6),
            ..cfg
        };
        assert_eq!(cfg.lr_at(120), 1e-6);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { patience: 0, ..Default::default() },
            TrainConfig { lr: -1.0, ..Default::default() },
            TrainConfig { lr: f64::NAN, ..Default::default() },
            TrainConfig { val_fraction: 1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn label_norm_round_trip() {
        let n = LabelNorm {
            quality: Some((1.0, 5.0)),
            authenticity: Some((2.0, 2.0)),
        };
        assert_eq!(n.normalize(Task::Quality, 3.0), 0.5);
        assert_eq!(n.denormalize(Task::Quality, 0.5), 3.0);
        assert_eq!(n.normalize(Task::Authenticity, 3.0), 1.0);
        assert_eq!(n.normalize(Task::Consistency, 0.3), 0.3);
    }

    #[test]
    fn zero_lr_patience_one_stops_after_two_epochs() {
        let cfg = TrainConfig {
            lr: 0.0,
            lr_after_drop: Some(0.0),
            patience: 1,
            max_epochs: 50,
            ..small_cfg()
        };
        let (_, report) = train(&small_data(64), &cfg).unwrap();
        assert_eq!(report.epochs.len(), 2);
        assert_eq!(report.stop_reason, Some(StopReason::EarlyStop));
        assert_eq!(report.best_epoch, 1);
    }

    #[test]
    fn deterministic_reports() {
        let ds = small_data(64);
        let a = train(&ds, &small_cfg()).unwrap();
        let b = train(&ds, &small_cfg()).unwrap();
        assert_eq!(serde_json::to_string(&a.1).unwrap(), serde_json::to_string(&b.1).unwrap());
        assert_eq!(a.0, b.0);
        assert!(a.1.epochs.len() <= 4);
        assert!(a.1.best_epoch >= 1 && a.1.best_epoch <= a.1.epochs.len());
    }

    #[test]
    fn best_params_match_best_epoch() {
        let ds = small_data(64);
        let cfg = TrainConfig {
            max_epochs: 6,
            ..small_cfg()
        };
        let mut t = Trainer::new(&ds, cfg).unwrap();
        let mut snapshots = Vec::new();
        while t.stopped().is_none() {
            t.run_epoch().unwrap();
            snapshots.push(t.params().clone());
        }
        let (model, report) = t.finish();
        assert_eq!(model.params, snapshots[report.best_epoch - 1]);
        let best = report.epochs.iter().map(|e| e.val_mean_srcc).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.best_val_srcc, best);
    }

    #[test]
    fn small_step_lowers_batch_loss() {
        let ds = small_data(16);
        let mut rng = SeededRng::new(4);
        let mut params = ModelParams::init(16, 8, Similarity::Cosine, &mut rng);
        let features: Vec<&FeatureBundle> = ds.samples().iter().map(|s| &s.features).collect();
        let col = |t: Task| Some(ds.samples().iter().map(|s| s.labels.get(t).unwrap()).collect());
        let targets = BatchTargets {
            q_c: col(Task::Consistency),
            q_v: col(Task::Quality),
            q_a: col(Task::Authenticity),
        };
        let flags = AblationFlags::default();
        let (before, grads) = batch_gradient(&params, flags, &features, &targets).unwrap();
        let mut opt = OptimizerState::new(&params);
        adamw_step(&mut params, &grads, &mut opt, 1e-6, 0.0).unwrap();
        let (after, _) = batch_gradient(&params, flags, &features, &targets).unwrap();
        assert!(after.total < before.total + 1e-12);
        assert!(after.total < before.total);
    }

    #[test]
    fn partial_labels_drop_the_task() {
        let mut samples = small_data(40).into_samples();
        samples[3].labels.q_a = None;
        let ds = Dataset::new(samples).unwrap();
        assert_eq!(active_tasks(&ds), vec![Task::Quality, Task::Consistency]);
        let (model, report) = train(&ds, &small_cfg()).unwrap();
        assert_eq!(report.active_tasks, model.active_tasks);
        assert!(report.epochs.iter().all(|e| e.loss_a == 0.0 && !e.val_srcc.contains_key(&Task::Authenticity)));
    }

    #[test]
    fn preferences_can_follow_another_label() {
        let samples = small_data(40)
            .into_samples()
            .into_iter()
            .map(|mut s| {
                s.labels.q_c = None;
                s
            })
            .collect();
        let ds = Dataset::new(samples).unwrap();
        assert!(!active_tasks(&ds).contains(&Task::Consistency));
        let cfg = TrainConfig {
            preference_label: Task::Quality,
            ..small_cfg()
        };
        let (model, report) = train(&ds, &cfg).unwrap();
        assert!(model.active_tasks.contains(&Task::Consistency));
        assert!(report.epochs.iter().all(|e| e.val_srcc.contains_key(&Task::Consistency) && e.loss_c > 0.0));
    }

    #[test]
    fn unlabelled_data_is_rejected() {
        let samples = small_data(20)
            .into_samples()
            .into_iter()
            .map(|mut s| {
                s.labels = Default::default();
                s
            })
            .collect();
        let ds = Dataset::new(samples).unwrap();
        assert!(matches!(train(&ds, &small_cfg()), Err(Error::InvalidArgument(_))));
    }
}
