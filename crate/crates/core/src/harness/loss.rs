use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::Scalar;

/// Negative log-likelihood of `gold` under softmax(`logits`), as a
/// one-element tensor.
pub fn nll_loss<T: Scalar>(logits: &Tensor<T>, gold: u8) -> Result<Tensor<T>> {
    Ok(logits.log_softmax()?.pick(usize::from(gold))?.scale(-T::one()))
}

/// Mean NLL over aligned predictions (one per token for a sentence).
pub fn mean_nll_loss<T: Scalar>(logits: &[Tensor<T>], gold: &[u8]) -> Result<Tensor<T>> {
    if logits.len() != gold.len() {
        return Err(Error::Dimension {
            op: "mean_nll_loss",
            left: vec![logits.len()],
            right: vec![gold.len()],
        });
    }
    if logits.is_empty() {
        return Err(Error::Domain("loss over zero predictions".into()));
    }
    let terms = logits
        .iter()
        .zip(gold)
        .map(|(l, &g)| nll_loss(l, g))
        .collect::<Result<Vec<_>>>()?;
    let n = T::from_usize(terms.len()).expect("count fits the scalar type");
    Ok(Tensor::concat(&terms)?.sum().scale(T::one() / n))
}
