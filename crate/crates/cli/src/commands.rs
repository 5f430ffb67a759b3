use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use amff::dataio::{synth_generate, Dataset, SynthConfig};
use amff::experiment::{evaluate, run_ablation, split_dataset, SplitSpec, Variant};
use amff::gradcheck::{gradcheck_suite, DEFAULT_SEEDS, TOLERANCE};
use amff::metrics::{format_jsonl, format_scatter, format_table, median_of_trials};
use amff::tensor::SeededRng;
use amff::trainer::{load_checkpoint, TrainConfig, TrainReport, Trainer};
use clap::Args;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{resolve, Resolved, RunArgs, TrainArgs};
use crate::error::{io_err, CliError, CliResult};

const META_SEED: &str = "seed";
const META_SPLIT: &str = "split";
const META_DATA: &str = "data_fingerprint";

/// Fixed output tree under `--out`.
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn create(root: &Path) -> CliResult<Self> {
        for sub in ["checkpoints", "reports", "scatter"] {
            let dir = root.join(sub);
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn checkpoint(&self, seed: u64) -> PathBuf {
        self.root.join("checkpoints").join(format!("seed-{seed}.ckpt"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(name)
    }

    pub fn scatter(&self, name: &str) -> PathBuf {
        self.root.join("scatter").join(name)
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output file (`.csv` for the text encoding)
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 512)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Feature noise standard deviation
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 4)]
    pub generators: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        n: a.n,
        dim: a.dim,
        noise_sigma: a.noise,
        generators: a.generators,
    };
    let ds = synth_generate(&cfg, &mut SeededRng::new(a.seed))?;
    ds.save(&a.data)?;
    println!("wrote {} samples (dim {}) to {}", ds.len(), ds.dim(), a.data.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory holding the PGM/PPM images
    #[arg(long)]
    pub images: PathBuf,
    /// CSV with columns id,generator,prompt,file,q_v,q_a,q_c
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output file (`.csv` for the text encoding)
    #[arg(long)]
    pub data: PathBuf,
    /// Feature dimension, a multiple of 4
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
}

pub fn extract(a: &ExtractArgs) -> CliResult<()> {
    let ds = crate::extract::extract(&a.images, &a.manifest, a.dim)?;
    ds.save(&a.data)?;
    println!("wrote {} samples (dim {}) to {}", ds.len(), ds.dim(), a.data.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Continue from existing checkpoints in the output directory
    #[arg(long)]
    pub resume: bool,
    /// Save the training state every N epochs (and always at the end)
    #[arg(long, default_value_t = 10)]
    pub checkpoint_every: usize,
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    seed: u64,
    split: SplitSpec,
    data_fingerprint: &'a str,
    config: &'a TrainConfig,
    report: &'a TrainReport,
}

pub fn train(a: &TrainCmd) -> CliResult<()> {
    if a.checkpoint_every == 0 {
        return Err(CliError::invalid("--checkpoint-every must be at least 1"));
    }
    let r = resolve(&a.run, &a.train)?;
    let data = Dataset::load(&a.run.data)?;
    let fingerprint = data.fingerprint()?;
    let layout = Layout::create(&a.run.out)?;
    let reports = (0..r.trials as u64)
        .into_par_iter()
        .map(|k| train_trial(a, &r, r.train.seed + k, &data, &fingerprint, &layout))
        .collect::<CliResult<Vec<_>>>()?;
    for (k, report) in reports.iter().enumerate() {
        println!(
            "seed {}: {} epochs, best epoch {}, validation SRCC {:.4}",
            r.train.seed + k as u64,
            report.epochs.len(),
            report.best_epoch,
            report.best_val_srcc
        );
    }
    Ok(())
}

fn train_trial(a: &TrainCmd, r: &Resolved, seed: u64, data: &Dataset, fingerprint: &str, layout: &Layout) -> CliResult<TrainReport> {
    let cfg = TrainConfig {
        seed,
        ..r.train.clone()
    };
    let (train_set, _) = split_dataset(data, r.split, seed)?;
    let path = layout.checkpoint(seed);
    let meta = BTreeMap::from([
        (META_DATA.to_string(), fingerprint.to_string()),
        (META_SEED.to_string(), seed.to_string()),
        (META_SPLIT.to_string(), r.split.to_string()),
    ]);
    let mut trainer = if a.resume && path.exists() {
        let (t, saved) = Trainer::resume(&path, &train_set)?;
        if t.config() != &cfg || saved != meta {
            return Err(CliError::invalid(format!(
                "{} was written with a different configuration",
                path.display()
            )));
        }
        info!("seed {seed}: resuming after epoch {}", t.epochs_done());
        t
    } else {
        Trainer::new(&train_set, cfg)?
    };
    let tmp = path.with_extension("ckpt.tmp");
    while trainer.stopped().is_none() {
        trainer.run_epoch()?;
        if trainer.stopped().is_some() || trainer.epochs_done() % a.checkpoint_every == 0 {
            trainer.save_checkpoint(&tmp, &meta)?;
            std::fs::rename(&tmp, &path).map_err(io_err(&path))?;
        }
    }
    let report = trainer.report();
    let summary = TrainSummary {
        seed,
        split: r.split,
        data_fingerprint: fingerprint,
        config: trainer.config(),
        report: &report,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_file(&layout.report(&format!("train-seed-{seed}.json")), &json)?;
    Ok(report)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory; checkpoints are read from its checkpoints/ folder
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Evaluate this checkpoint instead of the ones under --out
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Evaluate on every sample of --data instead of the held-out split
    #[arg(long)]
    pub full: bool,
}

fn held_out(data: &Dataset, fingerprint: &str, meta: &BTreeMap<String, String>, path: &Path) -> CliResult<Dataset> {
    let missing = || CliError::invalid(format!("{} records no split; use --full", path.display()));
    let split: SplitSpec = meta.get(META_SPLIT).ok_or_else(missing)?.parse()?;
    let seed: u64 = meta
        .get(META_SEED)
        .ok_or_else(missing)?
        .parse()
        .map_err(|_| CliError::invalid(format!("{}: bad seed in metadata", path.display())))?;
    if meta.get(META_DATA).map(String::as_str) != Some(fingerprint) {
        warn!("{} was trained on different data; the test split is not held out", path.display());
    }
    Ok(split_dataset(data, split, seed)?.1)
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    if a.trials == 0 {
        return Err(CliError::invalid("--trials must be at least 1"));
    }
    let layout = Layout::create(&a.out)?;
    let paths: Vec<PathBuf> = match &a.checkpoint {
        Some(p) if a.trials == 1 => vec![p.clone()],
        Some(_) => return Err(CliError::invalid("--checkpoint evaluates a single model; drop --trials")),
        None => (0..a.trials as u64).map(|k| layout.checkpoint(a.seed + k)).collect(),
    };
    let data = Dataset::load(&a.data)?;
    let fingerprint = data.fingerprint()?;
    let mut results = Vec::with_capacity(paths.len());
    for path in &paths {
        let ck = load_checkpoint(path)?;
        if ck.model.params.dim() != data.dim() {
            return Err(amff::Error::DimMismatch {
                expected: ck.model.params.dim(),
                actual: data.dim(),
            }
            .into());
        }
        let test = if a.full {
            data.clone()
        } else {
            held_out(&data, &fingerprint, &ck.meta, path)?
        };
        let ev = evaluate(&ck.model, &test)?;
        let tag = format!("seed-{}", ck.config.seed);
        write_file(&layout.report(&format!("eval-{tag}.jsonl")), &format_jsonl(&ev.result)?)?;
        for s in &ev.scatter {
            write_file(
                &layout.scatter(&format!("{tag}-{}.txt", s.task.name())),
                &format_scatter(&s.preds, &s.gts, &s.mapped),
            )?;
        }
        results.push(ev.result);
    }
    let median = median_of_trials(&results)?;
    let mut table = String::new();
    let _ = writeln!(
        table,
        "# {} model(s), {}, {}",
        results.len(),
        if a.full { "all samples" } else { "held-out split" },
        if results.len() > 1 { "medians" } else { "single run" }
    );
    table.push_str(&format_table(&median));
    write_file(&layout.report("eval.txt"), &table)?;
    write_file(&layout.report("eval.jsonl"), &format_jsonl(&median)?)?;
    print!("{table}");
    Ok(())
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
}

pub fn predict(a: &PredictArgs) -> CliResult<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        s_c: f64,
        s_v: f64,
        s_a: f64,
    }
    let ck = load_checkpoint(&a.checkpoint)?;
    let data = Dataset::load(&a.data)?;
    let preds = ck.model.predict_dataset(&data)?;
    let mut out = String::new();
    for (s, t) in data.samples().iter().zip(&preds) {
        out.push_str(&serde_json::to_string(&Line {
            id: &s.id,
            s_c: t.s_c,
            s_v: t.s_v,
            s_a: t.s_a,
        })?);
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!("unknown variant {s:?}; expected one of {}", names.join(", "))
    })
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Comma-separated subset of full,no-msi,no-aff,euclidean,manhattan
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    pub variants: Vec<Variant>,
}

pub fn ablate(a: &AblateArgs) -> CliResult<()> {
    if a.train.no_msi || a.train.no_aff || a.train.similarity.is_some() {
        return Err(CliError::invalid("ablate sets the structure and similarity per variant"));
    }
    let r = resolve(&a.run, &a.train)?;
    let data = Dataset::load(&a.run.data)?;
    let layout = Layout::create(&a.run.out)?;
    let variants = if a.variants.is_empty() { Variant::ALL.to_vec() } else { a.variants.clone() };
    let report = run_ablation(&data, r.split, &r.train, r.trials, &variants)?;
    let tables = report.format_tables();
    write_file(&layout.report("ablation.txt"), &tables)?;
    write_file(&layout.report("ablation.jsonl"), &report.format_jsonl()?)?;
    print!("{tables}");
    Ok(())
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Single seed; by default seeds 0, 1 and 2
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write reports/gradcheck.jsonl under this directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn gradcheck(a: &GradcheckArgs) -> CliResult<()> {
    let seeds = a.seed.map_or(DEFAULT_SEEDS.to_vec(), |s| vec![s]);
    let entries = gradcheck_suite(&seeds)?;
    let mut jsonl = String::new();
    for e in &entries {
        println!(
            "{:<10} {:<16} seed {} size {:>5} max rel err {:.3e} {}",
            e.component,
            e.block,
            e.seed,
            e.size,
            e.max_rel_err,
            if e.passed() { "ok" } else { "FAIL" }
        );
        jsonl.push_str(&serde_json::to_string(e)?);
        jsonl.push('\n');
    }
    if let Some(out) = &a.out {
        write_file(&Layout::create(out)?.report("gradcheck.jsonl"), &jsonl)?;
    }
    let failed = entries.iter().filter(|e| !e.passed()).count();
    if failed > 0 {
        return Err(CliError::Gradcheck {
            failed,
            total: entries.len(),
        });
    }
    let worst = entries.iter().map(|e| e.max_rel_err).fold(0.0, f64::max);
    println!("all {} checks below {TOLERANCE:e} (worst {worst:.3e})", entries.len());
    Ok(())
}
