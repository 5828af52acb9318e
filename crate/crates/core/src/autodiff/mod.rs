//! Define-by-run reverse-mode differentiation.
//!
//! A graph is rebuilt for every sentence. Parameters are long-lived leaf
//! tensors; intermediate nodes are dropped with the loss they feed.

mod gradcheck;
mod optim;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, GradMismatch, FD_STEP};
pub use optim::{clip_grad_norm, zero_grads, Optimizer, OptimizerKind};
pub use tensor::Tensor;

