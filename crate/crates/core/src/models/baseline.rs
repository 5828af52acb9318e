use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Example, LITERAL, METAPHOR};

/// Majority-label lookup keyed by lowercased token.
///
/// Training counts every token of sentences without a target verb and only
/// the target token of sentences with one. Unseen tokens and ties predict
/// literal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalBaseline {
    /// `(metaphor, literal)` counts.
    counts: BTreeMap<String, (u64, u64)>,
}

impl LexicalBaseline {
    pub fn fit(examples: &[Example]) -> Self {
        let mut baseline = LexicalBaseline::default();
        for ex in examples {
            match ex.target_index {
                Some(t) => baseline.observe(&ex.tokens[t], ex.labels[t]),
                None => ex
                    .tokens
                    .iter()
                    .zip(&ex.labels)
                    .for_each(|(tok, &label)| baseline.observe(tok, label)),
            }
        }
        baseline
    }

    fn observe(&mut self, token: &str, label: u8) {
        let entry = self.counts.entry(token.to_lowercase()).or_default();
        if label == METAPHOR {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }

    /// `(metaphor, literal)` counts for a token, zero if unseen.
    pub fn counts(&self, token: &str) -> (u64, u64) {
        self.counts.get(&token.to_lowercase()).copied().unwrap_or_default()
    }

    pub fn predict(&self, token: &str) -> u8 {
        let (m, l) = self.counts(token);
        if m > l {
            METAPHOR
        } else {
            LITERAL
        }
    }

    pub fn predict_tokens(&self, example: &Example) -> Vec<u8> {
        example.tokens.iter().map(|t| self.predict(t)).collect()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }
}
