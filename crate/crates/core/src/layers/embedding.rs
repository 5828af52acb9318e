use rand::Rng;

use super::{Init, Parameterized};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

/// A lookup table of row vectors.
///
/// A frozen table is stored as a constant tensor, so no optimizer can
/// change it. The index embedding that marks the target verb is a
/// trainable two-row table (row 0: other token, row 1: target).
#[derive(Debug, Clone)]
pub struct EmbeddingLayer<T: Scalar> {
    table: Tensor<T>,
    trainable: bool,
    unk_index: usize,
}

impl<T: Scalar> EmbeddingLayer<T> {
    pub const NOT_TARGET: usize = 0;
    pub const TARGET: usize = 1;

    pub fn from_rows(rows: usize, dim: usize, data: Vec<T>, trainable: bool, unk_index: usize) -> Result<Self> {
        if unk_index >= rows {
            return Err(Error::Lookup {
                index: unk_index,
                size: rows,
            });
        }
        let shape = [rows, dim];
        let table = if trainable {
            Tensor::param(&shape, data)?
        } else {
            Tensor::new(&shape, data)?
        };
        Ok(EmbeddingLayer {
            table,
            trainable,
            unk_index,
        })
    }

    pub fn new<R: Rng + ?Sized>(rows: usize, dim: usize, init: Init, rng: &mut R) -> Result<Self> {
        let data = init.weights(dim, rows, rows * dim, rng);
        Self::from_rows(rows, dim, data, true, 0)
    }

    /// The target-marker table: two trainable rows of width `dim`.
    pub fn index_embedding<R: Rng + ?Sized>(dim: usize, init: Init, rng: &mut R) -> Result<Self> {
        Self::new(2, dim, init, rng)
    }

    pub fn rows(&self) -> usize {
        self.table.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn unk_index(&self) -> usize {
        self.unk_index
    }

    pub fn table(&self) -> &Tensor<T> {
        &self.table
    }

    pub fn lookup(&self, index: usize) -> Result<Tensor<T>> {
        self.table.row(index)
    }
}

impl<T: Scalar> Parameterized<T> for EmbeddingLayer<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        if self.trainable {
            vec![("table".to_string(), self.table.clone())]
        } else {
            Vec::new()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, Optimizer, OptimizerKind, FD_STEP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lookup_reads_rows_verbatim() {
        let layer = EmbeddingLayer::from_rows(3, 2, vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0], false, 0).unwrap();
        assert_eq!(layer.lookup(2).unwrap().to_vec(), vec![3.0, 4.0]);
        assert_eq!(layer.lookup(layer.unk_index()).unwrap().to_vec(), vec![0.0, 0.0]);
        assert!(matches!(layer.lookup(3), Err(Error::Lookup { index: 3, size: 3 })));
        assert!(EmbeddingLayer::<f64>::from_rows(1, 2, vec![0.0, 0.0], false, 1).is_err());
    }

    #[test]
    fn repeated_lookup_accumulates() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let layer = EmbeddingLayer::<f64>::new(3, 4, Init::Xavier, &mut rng).unwrap();
        let probe = Tensor::from_vec(vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let loss = || -> Result<Tensor<f64>> {
            let a = layer.lookup(1)?.mul(&probe)?.sum();
            let b = layer.lookup(1)?.mul(&probe)?.sum();
            a.add(&b)
        };
        let report = grad_check(&layer.params(), loss, FD_STEP, 1e-6).unwrap();
        assert!(report.passed());
        layer.table().zero_grad();
        loss().unwrap().backward().unwrap();
        let g = layer.table().grad().unwrap();
        assert_eq!(&g[4..8], &[2.0, -4.0, 1.0, 6.0]);
        assert!(g[0..4].iter().chain(&g[8..]).all(|&v| v == 0.0));
    }

    #[test]
    fn frozen_table_never_changes() {
        let data = vec![0.5, -0.25, 1.0, 2.0];
        let frozen = EmbeddingLayer::<f64>::from_rows(2, 2, data.clone(), false, 0).unwrap();
        let trainable = EmbeddingLayer::<f64>::index_embedding(2, Init::Xavier, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut params = frozen.params();
        params.extend(trainable.params());
        assert_eq!(params.len(), 1);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, &params).unwrap();
        for _ in 0..5 {
            let loss = frozen.lookup(1).unwrap().add(&trainable.lookup(1).unwrap()).unwrap().sum();
            loss.backward().unwrap();
            opt.step(&params).unwrap();
        }
        assert_eq!(frozen.table().to_vec(), data);
    }
}
