//! Building blocks for the two detectors: embeddings, dropout, (Bi)LSTM,
//! attention pooling and the feedforward head.

mod attention;
mod dropout;
mod embedding;
mod init;
mod linear;
mod lstm;

pub use attention::{AttentionLayer, Pooled};
pub use dropout::{dropout, Mode};
pub use embedding::EmbeddingLayer;
pub use init::Init;
pub use linear::{FeedForward, Linear};
pub use lstm::{BiLstmLayer, LstmCell};

use crate::autodiff::Tensor;
use crate::Scalar;

/// Anything holding trainable (or frozen) parameter tensors.
pub trait Parameterized<T: Scalar> {
    /// Parameters with stable dotted names, in a fixed order.
    fn named_params(&self) -> Vec<(String, Tensor<T>)>;

    fn params(&self) -> Vec<Tensor<T>> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }
}

pub(crate) fn prefixed<T: Scalar>(prefix: &str, inner: Vec<(String, Tensor<T>)>) -> Vec<(String, Tensor<T>)> {
    inner
        .into_iter()
        .map(|(name, t)| (format!("{prefix}.{name}"), t))
        .collect()
}
