use serde::{Deserialize, Serialize};

use crate::data::{CONTEXTUAL_DIM, WORD_DIM};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Label every token.
    Seq,
    /// Label one target verb per sentence.
    Cls,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq" => Ok(Task::Seq),
            "cls" => Ok(Task::Cls),
            other => Err(Error::Config(format!("unknown task '{other}' (expected seq or cls)"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Seq => "seq",
            Task::Cls => "cls",
        })
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: Task,
    pub word_dim: usize,
    pub contextual_dim: usize,
    /// Width of the target-marker embedding (classifier only).
    pub index_dim: usize,
    /// Hidden size of each LSTM direction.
    pub hidden_dim: usize,
    pub ff_hidden_dim: usize,
    /// Dropout on the BiLSTM input.
    pub input_dropout: f64,
    /// Dropout on the feedforward input.
    pub ff_dropout: f64,
}

impl ModelConfig {
    pub fn new(task: Task) -> Self {
        ModelConfig {
            task,
            word_dim: WORD_DIM,
            contextual_dim: CONTEXTUAL_DIM,
            index_dim: 50,
            hidden_dim: 300,
            ff_hidden_dim: 100,
            input_dropout: 0.3,
            ff_dropout: 0.3,
        }
    }

    /// Width of the per-token BiLSTM input.
    pub fn lstm_input_dim(&self) -> usize {
        let base = self.word_dim + self.contextual_dim;
        match self.task {
            Task::Seq => base,
            Task::Cls => base + self.index_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.word_dim + self.contextual_dim == 0 {
            return Err(Error::Config("word_dim + contextual_dim must be positive".into()));
        }
        for (name, v) in [
            ("hidden_dim", self.hidden_dim),
            ("ff_hidden_dim", self.ff_hidden_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.task == Task::Cls && self.index_dim == 0 {
            return Err(Error::Config("index_dim must be positive".into()));
        }
        for (name, rate) in [("input_dropout", self.input_dropout), ("ff_dropout", self.ff_dropout)] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {rate}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_widths() {
        assert_eq!(ModelConfig::new(Task::Seq).lstm_input_dim(), 1324);
        assert_eq!(ModelConfig::new(Task::Cls).lstm_input_dim(), 1374);
    }

    #[test]
    fn validation() {
        let mut c = ModelConfig::new(Task::Cls);
        assert!(c.validate().is_ok());
        c.ff_dropout = 1.0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::new(Task::Seq);
        c.hidden_dim = 0;
        assert!(c.validate().is_err());
        assert!("tagger".parse::<Task>().is_err());
    }
}
