//! Run settings resolved from flags, an optional TOML file and defaults,
//! in that order of precedence.

use std::path::{Path, PathBuf};

use amff::experiment::SplitSpec;
use amff::scoring::Similarity;
use amff::trainer::TrainConfig;
use clap::Args;
use serde::Deserialize;

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub split: Option<SplitSpec>,
    pub trials: Option<usize>,
    pub train: Option<TrainConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }
}

/// Flags shared by the commands that split a dataset and train on it.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Feature-record file (`.csv` for the text encoding)
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// TOML file with `seed`, `split`, `trials` and a `[train]` table
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// random:F or per-generator:F
    #[arg(long)]
    pub split: Option<SplitSpec>,
    /// Repeat with seeds seed..seed+N-1 and report medians
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Maximum number of epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epoch from which the learning rate is divided by ten
    #[arg(long)]
    pub lr_drop_epoch: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// Hidden width of the fusion block
    #[arg(long)]
    pub aff_hidden: Option<usize>,
    #[arg(long)]
    pub similarity: Option<Similarity>,
    /// Feed the original-scale feature to all three fusion inputs
    #[arg(long)]
    pub no_msi: bool,
    /// Average the scale features instead of fusing them
    #[arg(long)]
    pub no_aff: bool,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub train: TrainConfig,
    pub split: SplitSpec,
    pub trials: usize,
}

pub fn resolve(run: &RunArgs, flags: &TrainArgs) -> CliResult<Resolved> {
    let file = FileConfig::load(run.config.as_deref())?;
    let mut cfg = file.train.unwrap_or_default();
    if let Some(seed) = run.seed.or(file.seed) {
        cfg.seed = seed;
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = flags.$flag { cfg.$field = v; })*
        };
    }
    set!(
        batch_size => batch_size,
        epochs => max_epochs,
        lr => lr,
        lr_drop_epoch => lr_drop_epoch,
        patience => patience,
        weight_decay => weight_decay,
        aff_hidden => aff_hidden,
        similarity => similarity
    );
    if flags.no_msi {
        cfg.flags.use_msi = false;
    }
    if flags.no_aff {
        cfg.flags.use_aff = false;
    }
    cfg.validate()?;
    let trials = run.trials.or(file.trials).unwrap_or(1);
    if trials == 0 {
        return Err(CliError::invalid("--trials must be at least 1"));
    }
    Ok(Resolved {
        train: cfg,
        split: run.split.or(file.split).unwrap_or_default(),
        trials,
    })
}
