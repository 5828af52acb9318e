use rand::rngs::mock::StepRng;
use rand::{Rng, RngCore};

use super::{check_store, predict_label, ModelConfig};
use crate::autodiff::Tensor;
use crate::data::{build_input_vector, EmbeddingStore, Example};
use crate::error::{Error, Result};
use crate::layers::{dropout, prefixed, BiLstmLayer, FeedForward, Init, Mode, Parameterized};
use crate::Scalar;

/// Per-token labeler: `[w_i; e_i]` → BiLSTM → feedforward → 2 logits.
#[derive(Debug, Clone)]
pub struct SeqModel<T: Scalar> {
    config: ModelConfig,
    pub encoder: BiLstmLayer<T>,
    pub head: FeedForward<T>,
}

impl<T: Scalar> SeqModel<T> {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, init: Init, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let encoder = BiLstmLayer::new(config.lstm_input_dim(), config.hidden_dim, init, rng)?;
        let head = FeedForward::new(encoder.output_dim(), config.ff_hidden_dim, init, rng)?;
        Ok(SeqModel { config, encoder, head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// One logit pair per token. Dropout is applied to the BiLSTM input and
    /// to each feedforward input in training mode only.
    pub fn forward(
        &self,
        store: &EmbeddingStore<T>,
        example: &Example,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Tensor<T>>> {
        check_store(&self.config, store)?;
        if example.is_empty() {
            return Err(Error::Domain(format!("sentence '{}' is empty", example.id)));
        }
        let inputs = (0..example.len())
            .map(|i| {
                let x = build_input_vector(store, example, i, None)?;
                dropout(&x, self.config.input_dropout, mode, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        self.encoder
            .run(&inputs)?
            .iter()
            .map(|h| self.head.forward(&dropout(h, self.config.ff_dropout, mode, rng)?))
            .collect()
    }

    pub fn predict(&self, store: &EmbeddingStore<T>, example: &Example) -> Result<Vec<u8>> {
        let logits = self.forward(store, example, Mode::Eval, &mut StepRng::new(0, 0))?;
        Ok(logits.iter().map(|l| predict_label(&l.data())).collect())
    }
}

impl<T: Scalar> Parameterized<T> for SeqModel<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = prefixed("encoder", self.encoder.named_params());
        out.extend(prefixed("head", self.head.named_params()));
        out
    }
}

/// Reads the target verb's label off full-sentence logits.
pub fn seq_extract_verb_label<T: Scalar>(logits: &[Tensor<T>], target_index: usize) -> Result<u8> {
    let at = logits.get(target_index).ok_or(Error::Lookup {
        index: target_index,
        size: logits.len(),
    })?;
    Ok(predict_label(&at.data()))
}
