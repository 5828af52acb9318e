use super::example::Example;
use super::vectors::EmbeddingStore;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::layers::EmbeddingLayer;
use crate::Scalar;

/// Input vector for token `i`: `[word ; contextual]`, plus the index
/// embedding row when `index_embedding` is given.
///
/// OOV words and disabled contextual vectors contribute zeros.
pub fn build_input_vector<T: Scalar>(
    store: &EmbeddingStore<T>,
    example: &Example,
    i: usize,
    index_embedding: Option<&EmbeddingLayer<T>>,
) -> Result<Tensor<T>> {
    if i >= example.len() {
        return Err(Error::Lookup {
            index: i,
            size: example.len(),
        });
    }
    let mut values = Vec::with_capacity(store.input_dim());
    match store.word_vector(&example.tokens[i]) {
        Some(v) => values.extend_from_slice(v),
        None => values.resize(store.word_dim(), T::zero()),
    }
    let cd = store.contextual_dim();
    match store.contextual_rows(example)? {
        Some(m) => values.extend_from_slice(&m[i * cd..(i + 1) * cd]),
        None => values.resize(values.len() + cd, T::zero()),
    }
    let static_part = Tensor::from_vec(values)?;
    match index_embedding {
        None => Ok(static_part),
        Some(table) => {
            let target = example
                .target_index
                .ok_or_else(|| Error::Domain(format!("example '{}' has no target index", example.id)))?;
            let row = if i == target {
                EmbeddingLayer::<T>::TARGET
            } else {
                EmbeddingLayer::<T>::NOT_TARGET
            };
            Tensor::concat(&[static_part, table.lookup(row)?])
        }
    }
}
