//! Loss, training with dev-F1 early stopping, metrics with POS and genre
//! slices, and k-fold cross-validation.

mod cv;
mod loss;
mod metrics;
mod train;

pub use cv::{run_cv, CvReport, FoldResult, Spread, CV_DEV_FRACTION};
pub use loss::{mean_nll_loss, nll_loss};
pub use metrics::{
    evaluate, evaluate_baseline, evaluate_with, macro_f1_by_genre, pos_breakdown, EvalReport, EvalTask, Metrics,
    PosRow, Scored,
};
pub use train::{ablate_contextual, train, train_until, EpochRecord, TrainConfig, TrainHistory};
