use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, EvalReport, EvalTask};
use super::train::{train, TrainConfig, TrainHistory};
use crate::data::{dev_split_indices, make_folds, EmbeddingStore, Example};
use crate::error::{Error, Result};
use crate::layers::Init;
use crate::models::{Model, ModelConfig};
use crate::{derive_seed, Scalar};

/// Share of each fold's training portion held out for early stopping.
pub const CV_DEV_FRACTION: f64 = 0.1;

const FOLD_STREAM: u64 = 0x1000;
const INIT_STREAM: u64 = 0;
const DEV_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub train_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    pub history: TrainHistory,
    pub report: EvalReport,
}

/// Mean and sample standard deviation of a per-fold metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Spread::default();
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Spread { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    /// Counts summed over folds, metrics recomputed from them.
    pub pooled: EvalReport,
    pub folds: Vec<FoldResult>,
    pub precision: Spread,
    pub recall: Spread,
    pub f1: Spread,
    pub accuracy: Spread,
}

/// Stratified k-fold cross-validation. Each fold trains a fresh model on
/// the other folds (minus a stratified dev share for early stopping) and is
/// evaluated on its held-out part. Up to `jobs` folds run concurrently;
/// results do not depend on `jobs`.
pub fn run_cv<T: Scalar>(
    examples: &[Example],
    store: &EmbeddingStore<T>,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    k: usize,
    jobs: usize,
) -> Result<CvReport> {
    if k < 2 {
        return Err(Error::Config(format!("cross-validation needs k >= 2, got {k}")));
    }
    model_config.validate()?;
    train_config.validate()?;
    let plan = make_folds(examples, k, train_config.seed)?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<FoldResult>>>> = Mutex::new((0..k).map(|_| None).collect());

    let worker = || loop {
        let fold = next.fetch_add(1, Ordering::SeqCst);
        if fold >= k {
            break;
        }
        let outcome = run_fold(examples, store, model_config, train_config, &plan, fold).map_err(|e| Error::Fold {
            fold,
            source: Box::new(e),
        });
        results.lock().expect("fold results lock")[fold] = Some(outcome);
    };
    std::thread::scope(|scope| {
        for _ in 1..jobs.clamp(1, k) {
            scope.spawn(worker);
        }
        worker();
    });

    let folds = results
        .into_inner()
        .expect("fold results lock")
        .into_iter()
        .map(|r| r.expect("every fold ran"))
        .collect::<Result<Vec<_>>>()?;
    let pooled = folds
        .iter()
        .fold(EvalReport::default(), |acc, f| acc.merge(&f.report));
    let spread = |get: fn(&EvalReport) -> f64| Spread::of(&folds.iter().map(|f| get(&f.report)).collect::<Vec<_>>());
    Ok(CvReport {
        k,
        seed: train_config.seed,
        pooled,
        precision: spread(|r| r.overall.precision),
        recall: spread(|r| r.overall.recall),
        f1: spread(|r| r.overall.f1),
        accuracy: spread(|r| r.overall.accuracy),
        folds,
    })
}

fn run_fold<T: Scalar>(
    examples: &[Example],
    store: &EmbeddingStore<T>,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    plan: &crate::data::FoldPlan,
    fold: usize,
) -> Result<FoldResult> {
    let seed = derive_seed(train_config.seed, FOLD_STREAM + fold as u64);
    let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect::<Vec<_>>();
    let portion = pick(&plan.train_indices(fold));
    let test = pick(&plan.test_indices(fold));
    let (train_set, dev_set) = match dev_split_indices(&portion, CV_DEV_FRACTION, derive_seed(seed, DEV_STREAM)) {
        Ok((t, d)) => (
            t.iter().map(|&i| portion[i].clone()).collect(),
            d.iter().map(|&i| portion[i].clone()).collect(),
        ),
        Err(_) => (portion, Vec::new()),
    };
    let model = Model::new(model_config.clone(), Init::Xavier, derive_seed(seed, INIT_STREAM))?;
    let config = TrainConfig {
        seed,
        ..train_config.clone()
    };
    let history = train(&model, &train_set, &dev_set, store, &config)?;
    let report = evaluate(&model, &test, store, EvalTask::infer(model_config.task, &test))?;
    log::info!("fold {fold}: test F1 {:.4}", report.overall.f1);
    Ok(FoldResult {
        fold,
        seed,
        train_size: train_set.len(),
        dev_size: dev_set.len(),
        test_size: test.len(),
        history,
        report,
    })
}
