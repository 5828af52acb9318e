use rand::Rng;

use super::{prefixed, Init, Parameterized};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

/// A single LSTM cell.
///
/// The four gates share one weight matrix of shape `[4h, din + h]` whose
/// row blocks are, in order, input, forget, output and candidate:
///
/// ```text
/// i  = σ(W_i [x; h] + b_i)      f = σ(W_f [x; h] + b_f)
/// o  = σ(W_o [x; h] + b_o)      g = tanh(W_g [x; h] + b_g)
/// c' = f ⊙ c + i ⊙ g            h' = o ⊙ tanh(c')
/// ```
#[derive(Debug, Clone)]
pub struct LstmCell<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    input_dim: usize,
    hidden_dim: usize,
}

impl<T: Scalar> LstmCell<T> {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, init: Init, rng: &mut R) -> Result<Self> {
        let cols = input_dim + hidden_dim;
        let mut weight = Vec::with_capacity(4 * hidden_dim * cols);
        for _ in 0..4 {
            weight.extend(init.weights::<T, R>(cols, hidden_dim, hidden_dim * cols, rng));
        }
        let mut bias = vec![T::zero(); 4 * hidden_dim];
        if init == Init::Xavier {
            bias[hidden_dim..2 * hidden_dim].fill(T::one());
        }
        Ok(LstmCell {
            weight: Tensor::param(&[4 * hidden_dim, cols], weight)?,
            bias: Tensor::param(&[4 * hidden_dim], bias)?,
            input_dim,
            hidden_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn zero_state(&self) -> Result<(Tensor<T>, Tensor<T>)> {
        Ok((Tensor::zeros(&[self.hidden_dim])?, Tensor::zeros(&[self.hidden_dim])?))
    }

    /// One recurrence step; returns `(h', c')`.
    pub fn step(&self, x: &Tensor<T>, h: &Tensor<T>, c: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let hd = self.hidden_dim;
        if x.shape() != [self.input_dim] {
            return Err(Error::Dimension {
                op: "lstm_step input",
                left: vec![self.input_dim],
                right: x.shape().to_vec(),
            });
        }
        for state in [h, c] {
            if state.shape() != [hd] {
                return Err(Error::Dimension {
                    op: "lstm_step state",
                    left: vec![hd],
                    right: state.shape().to_vec(),
                });
            }
        }
        let z = self
            .weight
            .matmul(&Tensor::concat(&[x.clone(), h.clone()])?)?
            .add(&self.bias)?;
        let input_gate = z.slice(0, hd)?.sigmoid();
        let forget_gate = z.slice(hd, hd)?.sigmoid();
        let output_gate = z.slice(2 * hd, hd)?.sigmoid();
        let candidate = z.slice(3 * hd, hd)?.tanh();
        let c_next = forget_gate.mul(c)?.add(&input_gate.mul(&candidate)?)?;
        let h_next = output_gate.mul(&c_next.tanh())?;
        Ok((h_next, c_next))
    }

    /// Runs the cell over `xs` from a zero state and returns every hidden state.
    pub fn run(&self, xs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let (mut h, mut c) = self.zero_state()?;
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            (h, c) = self.step(x, &h, &c)?;
            out.push(h.clone());
        }
        Ok(out)
    }
}

impl<T: Scalar> Parameterized<T> for LstmCell<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        vec![
            ("weight".to_string(), self.weight.clone()),
            ("bias".to_string(), self.bias.clone()),
        ]
    }
}

/// Forward and backward LSTMs whose states are concatenated per token.
#[derive(Debug, Clone)]
pub struct BiLstmLayer<T: Scalar> {
    pub forward_cell: LstmCell<T>,
    pub backward_cell: LstmCell<T>,
}

impl<T: Scalar> BiLstmLayer<T> {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, init: Init, rng: &mut R) -> Result<Self> {
        Ok(BiLstmLayer {
            forward_cell: LstmCell::new(input_dim, hidden_dim, init, rng)?,
            backward_cell: LstmCell::new(input_dim, hidden_dim, init, rng)?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.forward_cell.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward_cell.hidden_dim()
    }

    /// Position `i` of the result is `[fwd(x_1..x_i) ; bwd(x_n..x_i)]`.
    pub fn run(&self, xs: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        if xs.is_empty() {
            return Err(Error::Domain("bilstm over an empty sequence".into()));
        }
        let forward = self.forward_cell.run(xs)?;
        let reversed: Vec<Tensor<T>> = xs.iter().rev().cloned().collect();
        let mut backward = self.backward_cell.run(&reversed)?;
        backward.reverse();
        forward
            .into_iter()
            .zip(backward)
            .map(|(f, b)| Tensor::concat(&[f, b]))
            .collect()
    }
}

impl<T: Scalar> Parameterized<T> for BiLstmLayer<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = prefixed("forward", self.forward_cell.named_params());
        out.extend(prefixed("backward", self.backward_cell.named_params()));
        out
    }
}
