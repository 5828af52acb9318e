use rand::Rng;

use super::{Init, Parameterized};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

/// Scalar-score attention: `a = softmax_i(W_a h_i + b_a)`, `c = Σ a_i h_i`.
#[derive(Debug, Clone)]
pub struct AttentionLayer<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Output of [`AttentionLayer::pool`].
#[derive(Debug, Clone)]
pub struct Pooled<T: Scalar> {
    pub context: Tensor<T>,
    pub weights: Tensor<T>,
}

impl<T: Scalar> AttentionLayer<T> {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, init: Init, rng: &mut R) -> Result<Self> {
        Ok(AttentionLayer {
            weight: Tensor::param(&[1, state_dim], init.weights(state_dim, 1, state_dim, rng))?,
            bias: Tensor::param(&[1], vec![T::zero()])?,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn pool(&self, states: &[Tensor<T>]) -> Result<Pooled<T>> {
        if states.is_empty() {
            return Err(Error::Domain("attention over an empty sequence".into()));
        }
        let d = self.state_dim();
        let stacked = Tensor::stack(states)?;
        if stacked.shape()[1] != d {
            return Err(Error::Dimension {
                op: "attention",
                left: self.weight.shape().to_vec(),
                right: states[0].shape().to_vec(),
            });
        }
        let n = states.len();
        let scores = stacked
            .matmul(&self.weight.reshape(&[d])?)?
            .reshape(&[n, 1])?
            .add_row_bias(&self.bias)?
            .reshape(&[n])?;
        let weights = scores.softmax()?;
        let context = weights.reshape(&[1, n])?.matmul(&stacked)?.reshape(&[d])?;
        Ok(Pooled { context, weights })
    }
}

impl<T: Scalar> Parameterized<T> for AttentionLayer<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        vec![
            ("weight".to_string(), self.weight.clone()),
            ("bias".to_string(), self.bias.clone()),
        ]
    }
}
