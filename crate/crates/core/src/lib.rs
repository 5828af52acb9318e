//! Contextual metaphor detection with BiLSTM encoders.
//!
//! The crate is organised bottom-up:
//!
//! * [`autodiff`]: a small define-by-run reverse-mode differentiation engine
//!   with SGD/Adam and a finite-difference gradient checker.
//! * [`layers`]: embeddings, dropout, LSTM/BiLSTM, attention pooling and the
//!   feedforward classifier head.
//! * [`data`]: corpus loaders (classification CSV, sequence JSONL), static
//!   and contextual embedding stores, stratified folds and dev splits.
//! * [`models`]: the per-token sequence labeler, the attention-pooled target
//!   classifier, the lexical baseline and checkpoint I/O.
//! * [`harness`]: loss, training with early stopping, metrics, report slicing
//!   and k-fold cross-validation.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The
//! `*64` aliases below fix the scalar to `f64`, which is what training and
//! gradient checking use in practice.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod harness;
pub mod layers;
pub mod models;
mod scalar;

pub use error::{Error, Result};
pub use scalar::{derive_seed, Scalar};

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tensor32 = autodiff::Tensor<f32>;
pub type EmbeddingStore64 = data::EmbeddingStore<f64>;
pub type SeqModel64 = models::SeqModel<f64>;
pub type ClsModel64 = models::ClsModel<f64>;
pub type Model64 = models::Model<f64>;
