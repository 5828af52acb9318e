use rand::Rng;

use super::{prefixed, Init, Parameterized};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

/// Affine map `W x + b` on vectors.
#[derive(Debug, Clone)]
pub struct Linear<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, init: Init, rng: &mut R) -> Result<Self> {
        let w = init.weights(input, output, input * output, rng);
        Ok(Linear {
            weight: Tensor::param(&[output, input], w)?,
            bias: Tensor::param(&[output], vec![T::zero(); output])?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn output_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.weight.matmul(x)?.add(&self.bias)
    }
}

impl<T: Scalar> Parameterized<T> for Linear<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        vec![
            ("weight".to_string(), self.weight.clone()),
            ("bias".to_string(), self.bias.clone()),
        ]
    }
}

/// One ReLU hidden layer followed by a projection to the two class logits
/// (index 0 = literal, 1 = metaphor).
#[derive(Debug, Clone)]
pub struct FeedForward<T: Scalar> {
    pub hidden: Linear<T>,
    pub output: Linear<T>,
}

impl<T: Scalar> FeedForward<T> {
    pub const CLASSES: usize = 2;

    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, init: Init, rng: &mut R) -> Result<Self> {
        Ok(FeedForward {
            hidden: Linear::new(input, hidden, init, rng)?,
            output: Linear::new(hidden, Self::CLASSES, init, rng)?,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.shape() != [self.hidden.input_dim()] {
            return Err(Error::Dimension {
                op: "feedforward",
                left: vec![self.hidden.input_dim()],
                right: x.shape().to_vec(),
            });
        }
        self.output.forward(&self.hidden.forward(x)?.relu())
    }
}

impl<T: Scalar> Parameterized<T> for FeedForward<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = prefixed("hidden", self.hidden.named_params());
        out.extend(prefixed("output", self.output.named_params()));
        out
    }
}
