use rand::rngs::mock::StepRng;
use rand::{Rng, RngCore};

use super::{check_store, predict_label, ModelConfig};
use crate::autodiff::Tensor;
use crate::data::{build_input_vector, EmbeddingStore, Example};
use crate::error::{Error, Result};
use crate::layers::{
    dropout, prefixed, AttentionLayer, BiLstmLayer, EmbeddingLayer, FeedForward, Init, Mode, Parameterized,
};
use crate::Scalar;

/// Target-verb classifier: `[w_i; e_i; n_i]` → BiLSTM → attention pooling →
/// feedforward → 2 logits.
#[derive(Debug, Clone)]
pub struct ClsModel<T: Scalar> {
    config: ModelConfig,
    pub index_embedding: EmbeddingLayer<T>,
    pub encoder: BiLstmLayer<T>,
    pub attention: AttentionLayer<T>,
    pub head: FeedForward<T>,
}

#[derive(Debug, Clone)]
pub struct ClsOutput<T: Scalar> {
    pub logits: Tensor<T>,
    /// Attention weight per token.
    pub attention: Vec<T>,
}

impl<T: Scalar> ClsModel<T> {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, init: Init, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let index_embedding = EmbeddingLayer::index_embedding(config.index_dim, init, rng)?;
        let encoder = BiLstmLayer::new(config.lstm_input_dim(), config.hidden_dim, init, rng)?;
        let attention = AttentionLayer::new(encoder.output_dim(), init, rng)?;
        let head = FeedForward::new(encoder.output_dim(), config.ff_hidden_dim, init, rng)?;
        Ok(ClsModel {
            config,
            index_embedding,
            encoder,
            attention,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn forward(
        &self,
        store: &EmbeddingStore<T>,
        example: &Example,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<ClsOutput<T>> {
        check_store(&self.config, store)?;
        if example.target_index.is_none() {
            return Err(Error::Domain(format!("example '{}' has no target index", example.id)));
        }
        let inputs = (0..example.len())
            .map(|i| {
                let x = build_input_vector(store, example, i, Some(&self.index_embedding))?;
                dropout(&x, self.config.input_dropout, mode, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let states = self.encoder.run(&inputs)?;
        let pooled = self.attention.pool(&states)?;
        let logits = self
            .head
            .forward(&dropout(&pooled.context, self.config.ff_dropout, mode, rng)?)?;
        Ok(ClsOutput {
            logits,
            attention: pooled.weights.to_vec(),
        })
    }

    pub fn predict(&self, store: &EmbeddingStore<T>, example: &Example) -> Result<u8> {
        let out = self.forward(store, example, Mode::Eval, &mut StepRng::new(0, 0))?;
        let label = predict_label(&out.logits.data());
        Ok(label)
    }
}

impl<T: Scalar> Parameterized<T> for ClsModel<T> {
    fn named_params(&self) -> Vec<(String, Tensor<T>)> {
        let mut out = prefixed("index_embedding", self.index_embedding.named_params());
        out.extend(prefixed("encoder", self.encoder.named_params()));
        out.extend(prefixed("attention", self.attention.named_params()));
        out.extend(prefixed("head", self.head.named_params()));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::WordVectors;
    use crate::models::Task;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config() -> ModelConfig {
        ModelConfig {
            word_dim: 3,
            contextual_dim: 2,
            index_dim: 2,
            hidden_dim: 4,
            ff_hidden_dim: 5,
            ..ModelConfig::new(Task::Cls)
        }
    }

    fn store() -> EmbeddingStore<f64> {
        let mut wv = WordVectors::new(3);
        for (i, w) in ["he", "drowned", "in", "debt", "sorrow"].iter().enumerate() {
            wv.insert(*w, vec![i as f64 * 0.3 - 0.5, 0.2, -(i as f64) * 0.1]).unwrap();
        }
        EmbeddingStore::new(wv, None, 2).unwrap()
    }

    fn example(tokens: &[&str]) -> Example {
        Example {
            id: "s".into(),
            genre: None,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            pos: None,
            labels: vec![0, 1, 0, 0][..tokens.len()].to_vec(),
            target_index: Some(1),
        }
    }

    #[test]
    fn zero_model_is_uniform() {
        let model = ClsModel::<f64>::new(config(), Init::Zeros, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let out = model
            .forward(&store(), &example(&["he", "drowned", "in", "debt"]), Mode::Eval, &mut StepRng::new(0, 0))
            .unwrap();
        assert_eq!(out.logits.softmax().unwrap().to_vec(), vec![0.5, 0.5]);
        assert!(out.attention.iter().all(|&a| (a - 0.25).abs() < 1e-15));
    }

    #[test]
    fn attention_stays_convex_under_permutation() {
        let model = ClsModel::<f64>::new(config(), Init::Xavier, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let a = model
            .forward(&store(), &example(&["he", "drowned", "in", "debt"]), Mode::Eval, &mut StepRng::new(0, 0))
            .unwrap();
        let b = model
            .forward(&store(), &example(&["debt", "drowned", "in", "he"]), Mode::Eval, &mut StepRng::new(0, 0))
            .unwrap();
        assert_ne!(a.attention, b.attention);
        for out in [a, b] {
            assert!(out.attention.iter().all(|&w| w > 0.0));
            assert!((out.attention.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn missing_target_is_domain_error() {
        let model = ClsModel::<f64>::new(config(), Init::Xavier, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut ex = example(&["he", "drowned"]);
        ex.target_index = None;
        assert!(matches!(
            model.forward(&store(), &ex, Mode::Eval, &mut StepRng::new(0, 0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn index_embedding_is_trainable() {
        let model = ClsModel::<f64>::new(config(), Init::Xavier, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "index_embedding.table");
        assert!(names.contains(&"attention.weight".to_string()));
    }
}
