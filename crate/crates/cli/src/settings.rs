use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use metaphor_core::autodiff::OptimizerKind;
use metaphor_core::harness::TrainConfig;
use metaphor_core::models::{ModelConfig, Task};
use serde::Serialize;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "task",
    "seed",
    "jobs",
    "embeddings",
    "contextual",
    "no_contextual",
    "permissive_vectors",
    "dev_fraction",
    "optimizer",
    "learning_rate",
    "max_epochs",
    "patience",
    "clip_norm",
    "word_dim",
    "contextual_dim",
    "index_dim",
    "hidden_dim",
    "ff_hidden_dim",
    "input_dropout",
    "ff_dropout",
];

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Model family: seq (label every token) or cls (label the target verb)
    #[arg(long)]
    pub task: Option<Task>,
    /// Word vectors in whitespace-separated text format
    #[arg(long, value_name = "PATH")]
    pub embeddings: Option<PathBuf>,
    /// Contextual vectors in JSONL format
    #[arg(long, value_name = "PATH")]
    pub contextual: Option<PathBuf>,
    /// Replace contextual vectors with zeros
    #[arg(long)]
    pub no_contextual: bool,
    /// Master seed; every random stream is derived from it
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key = value` settings file; flags take precedence
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Worker threads for cross-validation folds
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Skip malformed word-vector lines instead of failing
    #[arg(long)]
    pub permissive_vectors: bool,
}

/// Architecture and optimisation flags.
#[derive(Debug, Clone, Default, Args)]
pub struct Hyper {
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long = "lr", value_name = "RATE")]
    pub learning_rate: Option<f64>,
    #[arg(long = "epochs", value_name = "N")]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Global gradient-norm cap (0 disables clipping)
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub contextual_dim: Option<usize>,
    #[arg(long)]
    pub index_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub ff_hidden_dim: Option<usize>,
    #[arg(long)]
    pub input_dropout: Option<f64>,
    #[arg(long)]
    pub ff_dropout: Option<f64>,
    /// Share of the training file held out for early stopping when --dev is absent
    #[arg(long)]
    pub dev_fraction: Option<f64>,
}

/// Parsed `key = value` file. Blank lines and `#` comments are ignored.
#[derive(Debug, Default)]
pub struct ConfigFile {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = || format!("{}:{}", path.display(), i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{}: expected 'key = value'", at())))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("{}: unknown setting '{key}'", at())));
            }
            entries.insert(key, (i + 1, value.trim().to_string()));
        }
        Ok(ConfigFile {
            path: path.to_path_buf(),
            entries,
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.entries
            .get(key)
            .map(|(line, value)| {
                value.parse().map_err(|e| {
                    CliError::Usage(format!("{}:{line}: bad value for '{key}': {e}", self.path.display()))
                })
            })
            .transpose()
    }
}

/// Every effective setting after merging flags, file and defaults.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub task: Task,
    pub seed: u64,
    pub jobs: usize,
    pub embeddings: Option<String>,
    pub contextual: Option<String>,
    pub contextual_enabled: bool,
    pub permissive_vectors: bool,
    pub dev_fraction: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str, default: T) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

fn display(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref().map(|p| p.display().to_string())
}

impl Settings {
    /// Merges with precedence flags > config file > task defaults.
    pub fn resolve(common: &Common, hyper: &Hyper) -> Result<Self, CliError> {
        let file = match &common.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let task = pick(common.task, &file, "task", Task::Seq)?;
        let seed = pick(common.seed, &file, "seed", 0)?;
        let jobs = pick(common.jobs, &file, "jobs", 1)?;
        if jobs == 0 {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        let embeddings = common.embeddings.clone().or(file.get::<PathBuf>("embeddings")?);
        let contextual = common.contextual.clone().or(file.get::<PathBuf>("contextual")?);
        let no_contextual = common.no_contextual || file.get::<bool>("no_contextual")?.unwrap_or(false);
        let permissive_vectors =
            common.permissive_vectors || file.get::<bool>("permissive_vectors")?.unwrap_or(false);

        let d = ModelConfig::new(task);
        let model = ModelConfig {
            task,
            word_dim: pick(hyper.word_dim, &file, "word_dim", d.word_dim)?,
            contextual_dim: pick(hyper.contextual_dim, &file, "contextual_dim", d.contextual_dim)?,
            index_dim: pick(hyper.index_dim, &file, "index_dim", d.index_dim)?,
            hidden_dim: pick(hyper.hidden_dim, &file, "hidden_dim", d.hidden_dim)?,
            ff_hidden_dim: pick(hyper.ff_hidden_dim, &file, "ff_hidden_dim", d.ff_hidden_dim)?,
            input_dropout: pick(hyper.input_dropout, &file, "input_dropout", d.input_dropout)?,
            ff_dropout: pick(hyper.ff_dropout, &file, "ff_dropout", d.ff_dropout)?,
        };
        model.validate().map_err(|e| CliError::Usage(e.to_string()))?;

        let t = TrainConfig::for_task(task);
        let clip = pick(hyper.clip_norm, &file, "clip_norm", t.clip_norm.unwrap_or(0.0))?;
        let contextual_enabled = contextual.is_some() && !no_contextual;
        let train = TrainConfig {
            optimizer: pick(hyper.optimizer, &file, "optimizer", t.optimizer)?,
            learning_rate: pick(hyper.learning_rate, &file, "learning_rate", t.learning_rate)?,
            max_epochs: pick(hyper.max_epochs, &file, "max_epochs", t.max_epochs)?,
            patience: pick(hyper.patience, &file, "patience", t.patience)?,
            seed,
            contextual_enabled,
            clip_norm: (clip != 0.0).then_some(clip),
        };
        train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let dev_fraction = pick(hyper.dev_fraction, &file, "dev_fraction", 0.1)?;
        if !(0.0..1.0).contains(&dev_fraction) {
            return Err(CliError::Usage(format!("dev_fraction must be in [0, 1), got {dev_fraction}")));
        }

        Ok(Settings {
            task,
            seed,
            jobs,
            embeddings: display(&embeddings),
            contextual: display(&contextual),
            contextual_enabled,
            permissive_vectors,
            dev_fraction,
            model,
            train,
        })
    }
}
