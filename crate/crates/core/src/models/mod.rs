//! The sequence labeler, the target-verb classifier and the lexical baseline.

mod baseline;
mod checkpoint;
mod cls;
mod config;
mod seq;

pub use baseline::LexicalBaseline;
pub use checkpoint::{Checkpoint, NamedTensor, ParamSnapshot};
pub use cls::{ClsModel, ClsOutput};
pub use config::{ModelConfig, Task};
pub use seq::{seq_extract_verb_label, SeqModel};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::data::{EmbeddingStore, Example, LITERAL, METAPHOR};
use crate::error::{Error, Result};
use crate::layers::{Init, Mode, Parameterized};
use crate::Scalar;

/// Class decision from two logits: metaphor only if its logit is strictly
/// larger, so ties go to literal.
pub fn predict_label<T: Scalar>(logits: &[T]) -> u8 {
    if logits[METAPHOR as usize] > logits[LITERAL as usize] {
        METAPHOR
    } else {
        LITERAL
    }
}

/// Either neural detector behind one interface.
#[derive(Debug, Clone)]
pub enum Model<T: Scalar> {
    Seq(SeqModel<T>),
    Cls(ClsModel<T>),
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, init: Init, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match config.task {
            Task::Seq => Model::Seq(SeqModel::new(config, init, &mut rng)?),
            Task::Cls => Model::Cls(ClsModel::new(config, init, &mut rng)?),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Model::Seq(m) => m.config(),
            Model::Cls(m) => m.config(),
        }
    }

    /// Logits for every supervised position: one per token for the sequence
    /// labeler, a single one for the classifier.
    pub fn forward(
        &self,
        store: &EmbeddingStore<T>,
        example: &Example,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Tensor<T>>> {
        match self {
            Model::Seq(m) => m.forward(store, example, mode, rng),
            Model::Cls(m) => Ok(vec![m.forward(store, example, mode, rng)?.logits]),
        }
    }

    /// Gold labels aligned with [`Model::forward`]'s outputs.
    pub fn gold<'a>(&self, example: &'a Example) -> Result<&'a [u8]> {
        match self {
            Model::Seq(_) => Ok(&example.labels),
            Model::Cls(_) => {
                let t = example
                    .target_index
                    .ok_or_else(|| Error::Domain(format!("example '{}' has no target index", example.id)))?;
                Ok(&example.labels[t..=t])
            }
        }
    }

    /// Per-token predictions (sequence labeler only).
    pub fn predict_tokens(&self, store: &EmbeddingStore<T>, example: &Example) -> Result<Vec<u8>> {
        match self {
            Model::Seq(m) => m.predict(store, example),
            Model::Cls(_) => Err(Error::Domain(
                "the classification model does not label every token".into(),
            )),
        }
    }

    /// Prediction for the target verb. The sequence labeler's is read off
    /// its per-token output at the target position.
    pub fn predict_target(&self, store: &EmbeddingStore<T>, example: &Example) -> Result<u8> {
        let target = example
            .target_index
            .ok_or_else(|| Error::Domain(format!("example '{}' has no target index", example.id)))?;
        match self {
            Model::Seq(m) => {
                let logits = m.forward(store, example, Mode::Eval, &mut rand::rngs::mock::StepRng::new(0, 0))?;
                seq_extract_verb_label(&logits, target)
            }
            Model::Cls(m) => m.predict(store, example),
        }
    }

    pub fn snapshot(&self) -> ParamSnapshot<T> {
        ParamSnapshot::capture(&self.named_params())
    }

    pub fn restore(&self, snapshot: &ParamSnapshot<T>) -> Result<()> {
        snapshot.apply(&self.named_params())
    }

    /// Serialises parameters plus a JSON config echo. The model config is
    /// stored under `"model"`; `extra` entries are merged alongside it.
    pub fn to_checkpoint(&self, extra: serde_json::Map<String, serde_json::Value>) -> Result<Checkpoint> {
        let mut config = extra;
        config.insert(
            "model".into(),
            serde_json::to_value(self.config()).map_err(|e| Error::Checkpoint(e.to_string()))?,
        );
        let config_json = serde_json::to_string(&config).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Checkpoint {
            config_json,
            tensors: self.snapshot().to_named_tensors(),
        })
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint) -> Result<Self> {
        let config = checkpoint.model_config()?;
        let model = Model::new(config, Init::Zeros, 0)?;
        model.restore(&ParamSnapshot::from_named_tensors(&checkpoint.tensors))?;
        Ok(model)
    }
}

impl<T: Scalar> Parameterized<T> for Model<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        match self {
            Model::Seq(m) => m.named_params(),
            Model::Cls(m) => m.named_params(),
        }
    }
}

/// Checks that the store produces the input widths the model was built for.
pub(crate) fn check_store<T: Scalar>(config: &ModelConfig, store: &EmbeddingStore<T>) -> Result<()> {
    if store.word_dim() != config.word_dim || store.contextual_dim() != config.contextual_dim {
        return Err(Error::Dimension {
            op: "model input (word_dim, contextual_dim)",
            left: vec![config.word_dim, config.contextual_dim],
            right: vec![store.word_dim(), store.contextual_dim()],
        });
    }
    Ok(())
}
