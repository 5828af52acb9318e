use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::mean_nll_loss;
use super::metrics::{evaluate, EvalTask};
use crate::autodiff::{clip_grad_norm, zero_grads, Optimizer, OptimizerKind};
use crate::data::{EmbeddingStore, Example};
use crate::error::{Error, Result};
use crate::layers::{Mode, Parameterized};
use crate::models::{Model, Task};
use crate::{derive_seed, Scalar};

const ORDER_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Optimisation settings. Architecture and dropout rates live in
/// [`crate::models::ModelConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a dev-F1 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub contextual_enabled: bool,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl TrainConfig {
    /// Adam at 1e-3 for the labeler, SGD at 0.1 for the classifier.
    pub fn for_task(task: Task) -> Self {
        let (optimizer, learning_rate) = match task {
            Task::Seq => (OptimizerKind::Adam, 1e-3),
            Task::Cls => (OptimizerKind::Sgd, 0.1),
        };
        TrainConfig {
            optimizer,
            learning_rate,
            max_epochs: 30,
            patience: 5,
            seed: 0,
            contextual_enabled: true,
            clip_norm: Some(5.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Flips the contextual-embedding switch. Applying it twice is a no-op.
pub fn ablate_contextual(config: &TrainConfig) -> TrainConfig {
    TrainConfig {
        contextual_enabled: !config.contextual_enabled,
        ..config.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-example loss over the epoch.
    pub train_loss: f64,
    pub dev_f1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters the model holds after training.
    pub best_epoch: usize,
    pub best_dev_f1: Option<f64>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,dev_f1\n");
        for e in &self.epochs {
            let dev = e.dev_f1.map(|f| f.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", e.epoch, e.train_loss, dev);
        }
        out
    }
}

/// Trains `model` in place on `train`, one example per update, and leaves
/// it holding the parameters of the best dev-F1 epoch. With an empty dev
/// set there is no early stopping and the last epoch is kept.
pub fn train<T: Scalar>(
    model: &Model<T>,
    train: &[Example],
    dev: &[Example],
    store: &EmbeddingStore<T>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    train_until(model, train, dev, store, config, |_| Ok(false))
}

/// [`train`] with an extra stopping rule checked after every epoch.
pub fn train_until<T: Scalar>(
    model: &Model<T>,
    train: &[Example],
    dev: &[Example],
    store: &EmbeddingStore<T>,
    config: &TrainConfig,
    mut stop: impl FnMut(&EpochRecord) -> Result<bool>,
) -> Result<TrainHistory> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Domain("training set is empty".into()));
    }
    if config.contextual_enabled != store.contextual_enabled() {
        return Err(Error::Config(format!(
            "training config has contextual_enabled={} but the embedding store has it {}",
            config.contextual_enabled,
            if store.contextual_enabled() { "enabled" } else { "disabled" }
        )));
    }
    let params = model.params();
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &params)?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, ORDER_STREAM));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, DROPOUT_STREAM));
    let dev_task = EvalTask::infer(model.config().task, dev);
    let clip = config.clip_norm.map(T::from_f64_lossy);

    let mut history = TrainHistory::default();
    let mut best: Option<(f64, crate::models::ParamSnapshot<T>)> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &train[i];
            zero_grads(&params);
            let logits = model.forward(store, ex, Mode::Train, &mut dropout_rng)?;
            let loss = mean_nll_loss(&logits, model.gold(ex)?)?;
            let value = loss.item()?.to_f64_lossy();
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: format!("loss is {value} on example '{}'", ex.id),
                });
            }
            loss.backward()?;
            if let Some(max) = clip {
                clip_grad_norm(&params, max);
            }
            optimizer.step(&params)?;
            total += value;
        }
        let train_loss = total / train.len() as f64;
        let dev_f1 = if dev.is_empty() {
            None
        } else {
            Some(evaluate(model, dev, store, dev_task)?.overall.f1)
        };
        log::info!(
            "epoch {epoch}: train_loss {train_loss:.6}{}",
            dev_f1.map(|f| format!(" dev_f1 {f:.4}")).unwrap_or_default()
        );
        let record = EpochRecord { epoch, train_loss, dev_f1 };
        let stop_now = stop(&record)?;
        history.epochs.push(record);

        match dev_f1 {
            None => history.best_epoch = epoch,
            Some(f1) => {
                if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
                    best = Some((f1, model.snapshot()));
                    history.best_epoch = epoch;
                    history.best_dev_f1 = Some(f1);
                }
                if epoch - history.best_epoch >= config.patience {
                    break;
                }
            }
        }
        if stop_now {
            break;
        }
    }
    if let Some((_, snapshot)) = best {
        model.restore(&snapshot)?;
    }
    Ok(history)
}
