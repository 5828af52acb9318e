use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer '{other}'"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Debug)]
struct AdamState<T> {
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

/// SGD or Adam over a fixed, ordered parameter list.
///
/// `step` does not clear gradients; call [`zero_grads`] separately.
#[derive(Debug)]
pub struct Optimizer<T: Scalar> {
    kind: OptimizerKind,
    learning_rate: T,
    beta1: T,
    beta2: T,
    epsilon: T,
    timestep: u64,
    shapes: Vec<Vec<usize>>,
    adam: Option<AdamState<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &[Tensor<T>]) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let adam = (kind == OptimizerKind::Adam).then(|| AdamState {
            first: params.iter().map(|p| vec![T::zero(); p.numel()]).collect(),
            second: params.iter().map(|p| vec![T::zero(); p.numel()]).collect(),
        });
        Ok(Optimizer {
            kind,
            learning_rate: T::from_f64_lossy(learning_rate),
            beta1: T::from_f64_lossy(0.9),
            beta2: T::from_f64_lossy(0.999),
            epsilon: T::from_f64_lossy(1e-8),
            timestep: 0,
            shapes: params.iter().map(|p| p.shape().to_vec()).collect(),
            adam,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    /// Applies one update using each parameter's accumulated gradient
    /// (a missing gradient counts as zero).
    pub fn step(&mut self, params: &[Tensor<T>]) -> Result<()> {
        if params.len() != self.shapes.len()
            || params.iter().zip(&self.shapes).any(|(p, s)| p.shape() != s.as_slice())
        {
            return Err(Error::Config(
                "optimizer called with a different parameter list".into(),
            ));
        }
        self.timestep += 1;
        let lr = self.learning_rate;
        match &mut self.adam {
            None => {
                for p in params {
                    if let Some(g) = p.grad() {
                        let mut data = p.data_mut();
                        data.iter_mut().zip(&g).for_each(|(w, &gv)| *w -= lr * gv);
                    }
                }
            }
            Some(state) => {
                let t = i32::try_from(self.timestep).unwrap_or(i32::MAX);
                let (b1, b2) = (self.beta1, self.beta2);
                let correction1 = T::one() - b1.powi(t);
                let correction2 = T::one() - b2.powi(t);
                for ((p, m), v) in params.iter().zip(&mut state.first).zip(&mut state.second) {
                    let g = p.grad().unwrap_or_else(|| vec![T::zero(); p.numel()]);
                    let mut data = p.data_mut();
                    for i in 0..g.len() {
                        m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                        v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                        let m_hat = m[i] / correction1;
                        let v_hat = v[i] / correction2;
                        data[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn zero_grads<T: Scalar>(params: &[Tensor<T>]) {
    params.iter().for_each(Tensor::zero_grad);
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Scalar>(params: &[Tensor<T>], max_norm: T) -> T {
    let total: T = params
        .iter()
        .filter_map(|p| p.grad())
        .flat_map(|g| g.into_iter().map(|v| v * v))
        .sum();
    let norm = total.sqrt();
    if norm > max_norm && norm > T::zero() {
        let factor = max_norm / norm;
        for p in params {
            if let Some(g) = p.grad() {
                p.set_grad(g.into_iter().map(|v| v * factor).collect());
            }
        }
    }
    norm
}
